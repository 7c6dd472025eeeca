use std::path::Path;

use iface_core::model::build_chain_example;
use iface_core::powergrid::{case118, configuration_with, AlternateParity, SwingParams};
use iface_core::{Error, InstanceFile, LtiSystem, Result, SensorPool, Task};

/// A problem resolved from `--instance`.
pub struct Loaded {
    pub label: String,
    pub system: LtiSystem,
    pub pool: SensorPool,
    pub task: Task,
    /// Trust level stored with the instance, if any.
    pub k_trust: Option<usize>,
}

pub fn grid_config_id(name: &str) -> Option<u8> {
    let id = name.strip_prefix("grid118:cfg")?.parse().ok()?;
    (1..=4).contains(&id).then_some(id)
}

pub fn load(name: &str, parity: AlternateParity) -> Result<Loaded> {
    if name == "chain" {
        let (system, pool, task) = build_chain_example();
        return Ok(Loaded {
            label: name.into(),
            system,
            pool,
            task,
            k_trust: None,
        });
    }
    if name.starts_with("grid118:") {
        let id = grid_config_id(name).ok_or_else(|| {
            Error::Input(format!(
                "unknown built-in instance {name:?}; use grid118:cfg1 .. grid118:cfg4"
            ))
        })?;
        let c = configuration_with(&case118()?, &SwingParams::default(), id, parity)?;
        return Ok(Loaded {
            label: name.into(),
            system: c.system,
            pool: c.pool,
            task: c.task,
            k_trust: None,
        });
    }
    let inst = InstanceFile::load(Path::new(name))?.into_instance()?;
    Ok(Loaded {
        label: name.into(),
        system: inst.system,
        pool: inst.pool,
        task: inst.task,
        k_trust: Some(inst.trust.0),
    })
}
