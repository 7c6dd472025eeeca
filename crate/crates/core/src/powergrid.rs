//! Linearised swing dynamics of a Kron-reduced transmission network.
//!
//! Case files are plain text, one record per line, `#` starts a comment:
//!
//! ```text
//! bus    <id> <gen|load> <status>
//! branch <from> <to> <r> <x> <status>
//! gen    <bus> <status>
//! ```
//!
//! Status is `1` (in service) or `0`. Branch susceptance is `1/x`; resistance
//! is read but ignored. Parallel branches add.
//!
//! With `g` machines the state is `[θ_1..θ_g, ω_1..ω_g]` and
//!
//! ```text
//! A = [ 0       I        ]      B = [ 0     ]
//!     [ -L/M    -(D/M) I ]          [ E / M ]
//! ```
//!
//! where `L` is the reduced susceptance Laplacian, `M = 2H/ω_s`,
//! `ω_s = 2π f_nominal`, and the columns of `E` select the actuated machines.
//! Generators are indexed by their order in the generator table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LtiSystem, SensorPool, SensorSet, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    pub reactance: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

fn status(tok: Option<&str>, line: usize) -> Result<bool> {
    match field::<u8>(tok, line, "status")? {
        0 => Ok(false),
        1 => Ok(true),
        s => Err(parse_err(line, format!("status must be 0 or 1, got {s}"))),
    }
}

pub fn parse_case(text: &str) -> Result<PowerCase> {
    let mut case = PowerCase {
        buses: Vec::new(),
        branches: Vec::new(),
        generators: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let expected = match toks.next() {
            Some("bus") => {
                let id = field(toks.next(), line, "bus id")?;
                let kind = match toks.next() {
                    Some("gen") => BusKind::Generator,
                    Some("load") => BusKind::Load,
                    Some(other) => return Err(parse_err(line, format!("unknown bus kind `{other}`"))),
                    None => return Err(parse_err(line, "missing bus kind")),
                };
                let in_service = status(toks.next(), line)?;
                case.buses.push(Bus { id, kind, in_service });
                "bus"
            }
            Some("branch") => {
                let from = field(toks.next(), line, "from bus")?;
                let to = field(toks.next(), line, "to bus")?;
                let resistance: f64 = field(toks.next(), line, "resistance")?;
                let reactance: f64 = field(toks.next(), line, "reactance")?;
                if !resistance.is_finite() || !reactance.is_finite() {
                    return Err(parse_err(line, "impedance must be finite"));
                }
                let in_service = status(toks.next(), line)?;
                case.branches.push(Branch {
                    from,
                    to,
                    resistance,
                    reactance,
                    in_service,
                });
                "branch"
            }
            Some("gen") => {
                let bus = field(toks.next(), line, "generator bus")?;
                let in_service = status(toks.next(), line)?;
                case.generators.push(Generator { bus, in_service });
                "gen"
            }
            Some(other) => return Err(parse_err(line, format!("unknown record `{other}`"))),
            None => unreachable!("blank lines are skipped"),
        };
        if let Some(extra) = toks.next() {
            return Err(parse_err(line, format!("trailing field `{extra}` in {expected} record")));
        }
    }
    case.check()?;
    Ok(case)
}

pub fn load_case(path: impl AsRef<Path>) -> Result<PowerCase> {
    parse_case(&std::fs::read_to_string(path)?)
}

const BUNDLED_CASE118: &str = include_str!("../../../data/case118.txt");

/// The 118-bus case: `$IFACE_DATA_DIR/case118.txt` when the variable is set,
/// otherwise the copy compiled into the library.
pub fn case118() -> Result<PowerCase> {
    match std::env::var_os("IFACE_DATA_DIR") {
        Some(dir) => load_case(Path::new(&dir).join("case118.txt")),
        None => parse_case(BUNDLED_CASE118),
    }
}

impl PowerCase {
    fn check(&self) -> Result<()> {
        let mut kinds = BTreeMap::new();
        for b in &self.buses {
            if kinds.insert(b.id, b.kind).is_some() {
                return Err(Error::Case(format!("bus {} is defined twice", b.id)));
            }
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !kinds.contains_key(&end) {
                    return Err(Error::Case(format!(
                        "branch {}-{} references unknown bus {end}",
                        br.from, br.to
                    )));
                }
            }
            if br.from == br.to {
                return Err(Error::Case(format!("branch {0}-{0} is a self loop", br.from)));
            }
        }
        for g in &self.generators {
            match kinds.get(&g.bus) {
                None => return Err(Error::Case(format!("generator references unknown bus {}", g.bus))),
                Some(BusKind::Load) => {
                    return Err(Error::Case(format!("generator sits on load bus {}", g.bus)))
                }
                Some(BusKind::Generator) => {}
            }
        }
        if self.generators.is_empty() {
            return Err(Error::Case("the case has no generators".into()));
        }
        Ok(())
    }

    fn bus_active(&self, id: usize) -> bool {
        self.buses.iter().any(|b| b.id == id && b.in_service)
    }

    /// Bus ids of in-service machines, in generator-table order, without repeats.
    pub fn generator_buses(&self) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        self.generators
            .iter()
            .filter(|g| g.in_service && self.bus_active(g.bus))
            .map(|g| g.bus)
            .filter(|b| seen.insert(*b))
            .collect()
    }

    /// Takes a bus and every branch touching it out of service.
    pub fn remove_bus(&mut self, id: usize) -> Result<()> {
        let bus = self
            .buses
            .iter_mut()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::Input(format!("unknown bus {id}")))?;
        bus.in_service = false;
        for br in self.branches.iter_mut().filter(|br| br.from == id || br.to == id) {
            br.in_service = false;
        }
        Ok(())
    }

    /// Takes every branch between `a` and `b` out of service.
    pub fn remove_branch(&mut self, a: usize, b: usize) -> Result<()> {
        let mut hit = false;
        for br in &mut self.branches {
            if (br.from, br.to) == (a, b) || (br.from, br.to) == (b, a) {
                br.in_service = false;
                hit = true;
            }
        }
        if hit {
            Ok(())
        } else {
            Err(Error::Input(format!("no branch between buses {a} and {b}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingParams {
    pub inertia_h: f64,
    pub damping_d: f64,
    pub nominal_frequency: f64,
}

impl Default for SwingParams {
    fn default() -> Self {
        SwingParams {
            inertia_h: 2.656,
            damping_d: 2.0,
            nominal_frequency: 60.0,
        }
    }
}

impl SwingParams {
    pub fn new(inertia_h: f64, damping_d: f64, nominal_frequency: f64) -> Result<Self> {
        for (name, v) in [("H", inertia_h), ("D", damping_d), ("f", nominal_frequency)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(SwingParams {
            inertia_h,
            damping_d,
            nominal_frequency,
        })
    }

    /// `M = 2H / ω_s`.
    pub fn inertia_m(&self) -> f64 {
        2.0 * self.inertia_h / (2.0 * std::f64::consts::PI * self.nominal_frequency)
    }
}

/// Generator-only equivalent network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedNetwork {
    /// Bus ids of the machines; row `i` of `coupling` belongs to `generator_ids[i]`.
    pub generator_ids: Vec<usize>,
    /// Reduced susceptance Laplacian.
    pub coupling: DMatrix<f64>,
}

impl ReducedNetwork {
    pub fn len(&self) -> usize {
        self.generator_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generator_ids.is_empty()
    }

    /// Generators whose coupling to `gen` exceeds `1e-9` of the largest entry.
    pub fn neighbours(&self, gen: usize) -> Vec<usize> {
        let scale = self.coupling.amax();
        (0..self.len())
            .filter(|&j| j != gen && self.coupling[(gen, j)].abs() > 1e-9 * scale)
            .collect()
    }
}

/// Eliminates load buses from the susceptance Laplacian by Schur complement.
pub fn kron_reduce(case: &PowerCase) -> Result<ReducedNetwork> {
    let active: Vec<usize> = case
        .buses
        .iter()
        .filter(|b| b.in_service)
        .map(|b| b.id)
        .collect();
    let gens = case.generator_buses();
    if gens.is_empty() {
        return Err(Error::Case("no in-service generator".into()));
    }
    let gen_set: BTreeSet<usize> = gens.iter().copied().collect();
    let loads: Vec<usize> = active.iter().copied().filter(|b| !gen_set.contains(b)).collect();

    // generators first, then loads
    let order: Vec<usize> = gens.iter().chain(loads.iter()).copied().collect();
    let index: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let total = order.len();
    let mut lap = DMatrix::<f64>::zeros(total, total);
    let mut adjacency = vec![Vec::new(); total];
    for br in case.branches.iter().filter(|b| b.in_service) {
        let (Some(&i), Some(&j)) = (index.get(&br.from), index.get(&br.to)) else {
            continue;
        };
        if br.reactance == 0.0 {
            return Err(Error::Case(format!(
                "branch {}-{} has zero reactance",
                br.from, br.to
            )));
        }
        let b = 1.0 / br.reactance;
        lap[(i, i)] += b;
        lap[(j, j)] += b;
        lap[(i, j)] -= b;
        lap[(j, i)] -= b;
        adjacency[i].push(j);
        adjacency[j].push(i);
    }

    let g = gens.len();
    let l = loads.len();
    if l == 0 {
        return Ok(ReducedNetwork {
            generator_ids: gens,
            coupling: lap,
        });
    }
    if let Some(island) = load_island(&adjacency, g) {
        let ids: Vec<String> = island.iter().map(|&i| order[i].to_string()).collect();
        return Err(Error::Numerical(format!(
            "load block is singular: buses {{{}}} form an island without a generator",
            ids.join(", ")
        )));
    }
    let l_gg = lap.view((0, 0), (g, g));
    let l_gl = lap.view((0, g), (g, l));
    let l_ll = lap.view((g, g), (l, l)).into_owned();
    let chol = l_ll.cholesky().ok_or_else(|| {
        Error::Numerical("load block is not positive definite".into())
    })?;
    let x = chol.solve(&l_gl.transpose());
    let mut coupling = l_gg - l_gl * x;
    // symmetrise away round-off
    coupling = (&coupling + coupling.transpose()) * 0.5;
    Ok(ReducedNetwork {
        generator_ids: gens,
        coupling,
    })
}

// A connected component made only of load buses (indices >= g).
fn load_island(adjacency: &[Vec<usize>], g: usize) -> Option<Vec<usize>> {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..g).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    let start = (g..n).find(|&i| !seen[i])?;
    let mut island = vec![start];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                island.push(w);
                stack.push(w);
            }
        }
    }
    island.sort_unstable();
    Some(island)
}

/// Swing model with inputs on the generators flagged in `active_inputs`
/// (indexed by generator position).
pub fn build_swing_lti(
    net: &ReducedNetwork,
    params: &SwingParams,
    active_inputs: &[usize],
) -> Result<LtiSystem> {
    let g = net.len();
    if g == 0 {
        return Err(Error::Input("the network has no generators".into()));
    }
    if let Some(bad) = active_inputs.iter().find(|&&i| i >= g) {
        return Err(Error::Input(format!("input on generator {bad} but the network has {g}")));
    }
    let m = params.inertia_m();
    let mut a = DMatrix::zeros(2 * g, 2 * g);
    for i in 0..g {
        a[(i, g + i)] = 1.0;
        for j in 0..g {
            a[(g + i, j)] = -net.coupling[(i, j)] / m;
        }
        a[(g + i, g + i)] = -params.damping_d / m;
    }
    let mut b = DMatrix::zeros(2 * g, active_inputs.len());
    for (col, &i) in active_inputs.iter().enumerate() {
        b[(g + i, col)] = 1.0 / m;
    }
    LtiSystem::new(a, b)
}

/// One phase sensor per generator: unit rows on the first `g` states.
pub fn phase_sensor_pool(net: &ReducedNetwork) -> Result<SensorPool> {
    SensorPool::unit_rows(2 * net.len(), 0..net.len())
}

/// Task watching generator `gen` (by position): its own phase sensor and those
/// of every generator coupled to it.
pub fn build_task_for_bus(net: &ReducedNetwork, pool: &SensorPool, gen: usize) -> Result<Task> {
    if gen >= net.len() {
        return Err(Error::Input(format!(
            "generator {gen} is out of range for a network of {}",
            net.len()
        )));
    }
    let sensors = SensorSet::from_ids(net.neighbours(gen)).with(gen);
    let label = format!("power flows at generator {} stay within limits", gen + 1);
    Task::new(pool, sensors, label)
}

/// Generator position (0-based) of the monitored machine: the 28th generator.
pub const MONITORED_GENERATOR: usize = 27;

/// Which half of the machines keeps its input in configuration 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlternateParity {
    /// Generators 1, 3, 5, ... counted from one.
    #[default]
    Odd,
    /// Generators 2, 4, 6, ... counted from one.
    Even,
}

#[derive(Debug, Clone)]
pub struct GridConfiguration {
    pub id: u8,
    pub description: &'static str,
    pub network: ReducedNetwork,
    pub system: LtiSystem,
    pub pool: SensorPool,
    pub task: Task,
}

pub fn configuration(case: &PowerCase, params: &SwingParams, config_id: u8) -> Result<GridConfiguration> {
    configuration_with(case, params, config_id, AlternateParity::default())
}

pub fn configuration_with(
    case: &PowerCase,
    params: &SwingParams,
    config_id: u8,
    parity: AlternateParity,
) -> Result<GridConfiguration> {
    let mut edited = case.clone();
    let description = match config_id {
        1 => "normal operation",
        2 => {
            edited.remove_bus(38)?;
            "load bus 38 down"
        }
        3 => {
            edited.remove_branch(65, 66)?;
            "line 65-66 down"
        }
        4 => "alternate generators down",
        _ => {
            return Err(Error::Input(format!(
                "configuration must be 1, 2, 3 or 4, got {config_id}"
            )))
        }
    };
    let network = kron_reduce(&edited)?;
    let g = network.len();
    let inputs: Vec<usize> = match (config_id, parity) {
        (4, AlternateParity::Odd) => (0..g).step_by(2).collect(),
        (4, AlternateParity::Even) => (1..g).step_by(2).collect(),
        _ => (0..g).collect(),
    };
    let system = build_swing_lti(&network, params, &inputs)?;
    let pool = phase_sensor_pool(&network)?;
    if MONITORED_GENERATOR >= g {
        return Err(Error::Case(format!(
            "the case has {g} generators; the monitored machine is number {}",
            MONITORED_GENERATOR + 1
        )));
    }
    let task = build_task_for_bus(&network, &pool, MONITORED_GENERATOR)?;
    Ok(GridConfiguration {
        id: config_id,
        description,
        network,
        system,
        pool,
        task,
    })
}
