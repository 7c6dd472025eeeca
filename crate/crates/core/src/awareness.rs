//! Situation awareness: `S` is situation-aware for a task when
//! `Γ(S) = Γ(S ∪ S_task)`, i.e. the task rows are reconstructable from `S`.
//!
//! The family of all such sets is exponential, so it is kept implicitly. Only
//! sensors whose observable subspace meets the task subspace (`s_reduced`) can
//! contribute, and the family is represented by its members inside
//! `2^s_reduced` plus a membership test on `S ∩ s_reduced`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::enumgen::{partition_columns, GeneratorConfig, SubsetGenerator};
use crate::error::Result;
use crate::model::{SensorPool, SensorSet, Task};
use crate::uii::GammaOracle;

/// Sensors `s` with `Γ({s}) + Γ(S_task) > Γ({s} ∪ S_task)`.
pub fn compute_s_reduced(oracle: &GammaOracle, task: &Task) -> SensorSet {
    let gamma_task = oracle.gamma(task.sensors);
    (0..oracle.pool_size())
        .filter(|&id| {
            let s = SensorSet::singleton(id);
            oracle.gamma(s) + gamma_task > oracle.gamma(s.union(task.sensors))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerateOptions {
    /// Upper bound on member cardinality.
    pub cap: Option<usize>,
    /// Sweep the information level and prune supersets of sets whose union with
    /// the task already exceeds it.
    pub aggressive_prune: bool,
    /// Number of column partitions processed in parallel.
    pub partitions: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            cap: None,
            aggressive_prune: false,
            partitions: 1,
        }
    }
}

/// `S_reduced` and the awareness sets it contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AwarenessFamily {
    pub s_reduced: SensorSet,
    /// Sorted by (cardinality, mask).
    pub sitaware_reduced: Vec<SensorSet>,
    pub gamma_task: usize,
}

impl AwarenessFamily {
    pub fn compute(oracle: &GammaOracle, task: &Task, options: EnumerateOptions) -> Result<Self> {
        let s_reduced = compute_s_reduced(oracle, task);
        let sitaware_reduced = enumerate_in(oracle, task, s_reduced, options)?;
        Ok(AwarenessFamily {
            s_reduced,
            sitaware_reduced,
            gamma_task: oracle.gamma(task.sensors),
        })
    }

    pub fn len(&self) -> usize {
        self.sitaware_reduced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sitaware_reduced.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("family serialises")
    }
}

/// Every `P ⊆ S_reduced` with `Γ(P ∪ S_task) = Γ(P)`, sorted by (cardinality, mask).
pub fn enumerate_sitaware_reduced(
    oracle: &GammaOracle,
    task: &Task,
    options: EnumerateOptions,
) -> Result<Vec<SensorSet>> {
    let s_reduced = compute_s_reduced(oracle, task);
    enumerate_in(oracle, task, s_reduced, options)
}

fn enumerate_in(
    oracle: &GammaOracle,
    task: &Task,
    s_reduced: SensorSet,
    options: EnumerateOptions,
) -> Result<Vec<SensorSet>> {
    let ids: Vec<usize> = s_reduced.to_vec();
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let mut config = GeneratorConfig::new(ids.len())?;
    if let Some(cap) = options.cap {
        config = config.with_cap(cap.min(ids.len()))?;
    }
    let parts = partition_columns(ids.len(), options.partitions);
    let lift = |local: SensorSet| -> SensorSet { local.ids().map(|i| ids[i]).collect() };

    let run = |columns: u128| -> Vec<SensorSet> {
        let cfg = config.clone().with_columns(columns);
        if options.aggressive_prune {
            sweep_levels(oracle, task, s_reduced, cfg, &lift)
        } else {
            SubsetGenerator::new(cfg)
                .map(&lift)
                .filter(|&p| oracle.gamma(p.union(task.sensors)) == oracle.gamma(p))
                .collect()
        }
    };
    let mut family: Vec<SensorSet> = if parts.len() > 1 {
        parts.par_iter().flat_map_iter(|&c| run(c)).collect()
    } else {
        parts.iter().flat_map(|&c| run(c)).collect()
    };
    family.sort_by_key(|s| (s.len(), s.mask()));
    family.dedup();
    Ok(family)
}

// For each level t in [Γ(S_task), Γ(S_reduced)] collect the P with
// Γ(P) >= t and Γ(P ∪ S_task) <= t. A P with Γ(P ∪ S_task) > t violates the
// upper constraint for every superset as well, so it is registered.
fn sweep_levels(
    oracle: &GammaOracle,
    task: &Task,
    s_reduced: SensorSet,
    config: GeneratorConfig,
    lift: &dyn Fn(SensorSet) -> SensorSet,
) -> Vec<SensorSet> {
    let lo = oracle.gamma(task.sensors);
    let hi = oracle.gamma(s_reduced);
    let mut found = Vec::new();
    for t in lo..=hi {
        let mut g = SubsetGenerator::new(config.clone());
        while let Some(local) = g.next() {
            let p = lift(local);
            if oracle.gamma(p.union(task.sensors)) > t {
                g.prune(local.mask());
            } else if oracle.gamma(p) >= t {
                found.push(p);
            }
        }
    }
    found
}

/// Membership in the full awareness family through `P = S ∩ S_reduced`.
pub fn is_situation_aware(
    oracle: &GammaOracle,
    task: &Task,
    family: &AwarenessFamily,
    s: SensorSet,
) -> bool {
    let p = s.intersection(family.s_reduced);
    oracle.gamma(p.union(task.sensors)) == oracle.gamma(p)
}

/// The direct test `Γ(S) = Γ(S ∪ S_task)`.
pub fn is_situation_aware_direct(oracle: &GammaOracle, task: &Task, s: SensorSet) -> bool {
    oracle.gamma(s) == oracle.gamma(s.union(task.sensors))
}

/// Materialises up to `limit` members `P ∪ R`, `R ⊆ pool ∖ P`, deduplicated
/// and sorted by (cardinality, mask).
pub fn expand_sitaware(family: &AwarenessFamily, pool: &SensorPool, limit: usize) -> Vec<SensorSet> {
    let all = pool.all().mask();
    let mut seen: HashSet<u128> = HashSet::new();
    let mut out = Vec::new();
    'outer: for p in &family.sitaware_reduced {
        let rest = all & !p.mask();
        let mut sub: u128 = 0;
        loop {
            if out.len() >= limit {
                break 'outer;
            }
            let m = p.mask() | sub;
            if seen.insert(m) {
                out.push(SensorSet::from_mask(m));
            }
            if sub == rest {
                break;
            }
            sub = sub.wrapping_sub(rest) & rest;
        }
    }
    out.sort_by_key(|s| (s.len(), s.mask()));
    out
}
