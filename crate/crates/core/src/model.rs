//! Problem data: the plant, the candidate sensor pool, the task and the trust level.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Diagnostic, Error, Result};
use crate::subspace::check_finite;
use crate::uii::GammaOracle;

/// Largest pool a [`SensorSet`] can index.
pub const MAX_POOL_SIZE: usize = 128;

/// A subset of the sensor pool, stored as a bitmask over sensor ids. The mask
/// doubles as the decimal code `N_S` used by the enumeration table.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SensorSet(u128);

impl SensorSet {
    pub const EMPTY: SensorSet = SensorSet(0);

    pub fn from_mask(mask: u128) -> Self {
        SensorSet(mask)
    }

    /// Set holding every id in `0..size`.
    pub fn full(size: usize) -> Self {
        assert!(size <= MAX_POOL_SIZE, "pool of {size} sensors exceeds the mask width");
        if size == MAX_POOL_SIZE {
            SensorSet(u128::MAX)
        } else {
            SensorSet((1u128 << size) - 1)
        }
    }

    pub fn singleton(id: usize) -> Self {
        assert!(id < MAX_POOL_SIZE, "sensor id {id} exceeds the mask width");
        SensorSet(1u128 << id)
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        ids.into_iter()
            .fold(SensorSet::EMPTY, |acc, id| acc.with(id))
    }

    pub fn mask(self) -> u128 {
        self.0
    }

    /// Decimal code of the set (identical to the mask).
    pub fn code(self) -> u128 {
        self.0
    }

    pub fn from_code(code: u128) -> Self {
        SensorSet(code)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, id: usize) -> bool {
        id < MAX_POOL_SIZE && self.0 & (1u128 << id) != 0
    }

    #[must_use]
    pub fn with(self, id: usize) -> Self {
        self.union(SensorSet::singleton(id))
    }

    #[must_use]
    pub fn union(self, other: SensorSet) -> Self {
        SensorSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: SensorSet) -> Self {
        SensorSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: SensorSet) -> Self {
        SensorSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: SensorSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Highest id in the set plus one, or 0 for the empty set.
    pub fn span(self) -> usize {
        (128 - self.0.leading_zeros()) as usize
    }

    pub fn ids(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let id = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(id)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.ids().collect()
    }
}

impl fmt::Debug for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ids()).finish()
    }
}

impl FromIterator<usize> for SensorSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SensorSet::from_ids(iter)
    }
}

impl Serialize for SensorSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.ids())
    }
}

impl<'de> Deserialize<'de> for SensorSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = ids.iter().find(|&&id| id >= MAX_POOL_SIZE) {
            return Err(serde::de::Error::custom(format!(
                "sensor id {bad} exceeds the mask width"
            )));
        }
        Ok(SensorSet::from_ids(ids))
    }
}

/// Plant dynamics `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let sys = LtiSystem { a, b };
        let diags = sys.diagnostics();
        if diags.is_empty() {
            Ok(sys)
        } else {
            Err(Error::InvalidInstance(diags))
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.a.nrows() != self.a.ncols() {
            out.push(Diagnostic::new(
                "A_NOT_SQUARE",
                format!("A is {}x{}", self.a.nrows(), self.a.ncols()),
            ));
        }
        if self.a.nrows() == 0 {
            out.push(Diagnostic::new("EMPTY_STATE", "state dimension must be at least 1"));
        }
        if self.b.nrows() != self.a.nrows() {
            out.push(Diagnostic::new(
                "B_ROWS",
                format!("B has {} rows but A has {}", self.b.nrows(), self.a.nrows()),
            ));
        }
        if self.b.ncols() == 0 {
            out.push(Diagnostic::new("EMPTY_INPUT", "input dimension must be at least 1"));
        }
        if check_finite(&self.a).is_err() {
            out.push(Diagnostic::new("A_NON_FINITE", "A has non-finite entries"));
        }
        if check_finite(&self.b).is_err() {
            out.push(Diagnostic::new("B_NON_FINITE", "B has non-finite entries"));
        }
        out
    }
}

/// A candidate row of the output matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: usize,
    pub row: RowDVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorPool {
    sensors: Vec<Sensor>,
}

impl SensorPool {
    /// Builds a pool from rows; ids are assigned in order.
    pub fn from_rows(rows: Vec<RowDVector<f64>>) -> Result<Self> {
        let pool = SensorPool {
            sensors: rows
                .into_iter()
                .enumerate()
                .map(|(id, row)| Sensor { id, row })
                .collect(),
        };
        let diags = pool.diagnostics(None);
        if diags.is_empty() {
            Ok(pool)
        } else {
            Err(Error::InvalidInstance(diags))
        }
    }

    /// Pool of unit rows `e_i` in dimension `n`, one per index in `states`.
    pub fn unit_rows(n: usize, states: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::from_rows(
            states
                .into_iter()
                .map(|i| RowDVector::from_fn(n, |_, j| if i == j { 1.0 } else { 0.0 }))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn get(&self, id: usize) -> Option<&Sensor> {
        self.sensors.get(id)
    }

    pub fn all(&self) -> SensorSet {
        SensorSet::full(self.len())
    }

    /// Whether every id of `set` names a sensor in this pool.
    pub fn covers(&self, set: SensorSet) -> bool {
        set.span() <= self.len()
    }

    /// Output matrix `C_S` whose rows are the selected sensors, in id order.
    pub fn output_matrix(&self, set: SensorSet) -> DMatrix<f64> {
        let n = self.sensors.first().map_or(0, |s| s.row.len());
        let ids: Vec<usize> = set.ids().filter(|&i| i < self.len()).collect();
        DMatrix::from_fn(ids.len(), n, |r, c| self.sensors[ids[r]].row[c])
    }

    fn diagnostics(&self, state_dim: Option<usize>) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.sensors.is_empty() {
            out.push(Diagnostic::new("EMPTY_POOL", "the sensor pool is empty"));
        }
        if self.sensors.len() > MAX_POOL_SIZE {
            out.push(Diagnostic::new(
                "POOL_TOO_LARGE",
                format!("{} sensors exceed the limit of {MAX_POOL_SIZE}", self.sensors.len()),
            ));
        }
        let width = state_dim.or_else(|| self.sensors.first().map(|s| s.row.len()));
        for s in &self.sensors {
            if Some(s.row.len()) != width {
                out.push(Diagnostic::new(
                    "SENSOR_WIDTH",
                    format!(
                        "sensor {} has {} entries, expected {}",
                        s.id,
                        s.row.len(),
                        width.unwrap_or(0)
                    ),
                ));
            }
            if s.row.iter().any(|v| !v.is_finite()) {
                out.push(Diagnostic::new(
                    "SENSOR_NON_FINITE",
                    format!("sensor {} has non-finite entries", s.id),
                ));
            } else if s.row.iter().all(|&v| v == 0.0) {
                out.push(Diagnostic::new(
                    "SENSOR_ZERO",
                    format!("sensor {} is the zero row", s.id),
                ));
            }
        }
        out
    }
}

/// The sensors that define the task. `c_task` holds their rows; the payoff
/// function is kept only as a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub sensors: SensorSet,
    pub c_task: DMatrix<f64>,
    pub label: String,
}

impl Task {
    pub fn new(pool: &SensorPool, sensors: SensorSet, label: impl Into<String>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::InvalidInstance(vec![Diagnostic::new(
                "TASK_EMPTY",
                "the task must reference at least one sensor",
            )]));
        }
        if !pool.covers(sensors) {
            return Err(Error::InvalidInstance(vec![Diagnostic::new(
                "TASK_OUTSIDE_POOL",
                format!(
                    "task references sensor {} but the pool has {} sensors",
                    sensors.span() - 1,
                    pool.len()
                ),
            )]));
        }
        Ok(Task {
            sensors,
            c_task: pool.output_matrix(sensors),
            label: label.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustLevel(pub usize);

/// A validated problem: every invariant of the parts and their agreement
/// has been checked, and `1 <= k_trust <= Γ(pool)`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub system: LtiSystem,
    pub pool: SensorPool,
    pub task: Task,
    pub trust: TrustLevel,
    pub gamma_pool: usize,
}

/// Checks every invariant of an instance and reports all violations at once.
pub fn validate_instance(
    system: LtiSystem,
    pool: SensorPool,
    task: Task,
    trust: TrustLevel,
) -> Result<Instance> {
    let mut diags = system.diagnostics();
    diags.extend(pool.diagnostics(Some(system.state_dim())));
    if task.sensors.is_empty() {
        diags.push(Diagnostic::new("TASK_EMPTY", "the task must reference at least one sensor"));
    }
    if !pool.covers(task.sensors) {
        diags.push(Diagnostic::new(
            "TASK_OUTSIDE_POOL",
            format!(
                "task references sensor {} but the pool has {} sensors",
                task.sensors.span() - 1,
                pool.len()
            ),
        ));
    } else if task.c_task != pool.output_matrix(task.sensors) {
        diags.push(Diagnostic::new(
            "TASK_ROWS",
            "task matrix rows differ from the rows of the task sensors",
        ));
    }
    if trust.0 == 0 {
        diags.push(Diagnostic::new("K_TRUST_RANGE", "k_trust must be at least 1"));
    }
    if !diags.is_empty() {
        return Err(Error::InvalidInstance(diags));
    }

    let oracle = GammaOracle::new(&system, &pool);
    let gamma_pool = oracle.gamma(pool.all());
    if trust.0 > gamma_pool {
        return Err(Error::InvalidInstance(vec![Diagnostic::new(
            "K_TRUST_RANGE",
            format!(
                "k_trust={} exceeds Γ(pool)={gamma_pool}; legal range is [1, {gamma_pool}]",
                trust.0
            ),
        )]));
    }
    Ok(Instance {
        system,
        pool,
        task,
        trust,
        gamma_pool,
    })
}

/// The jerk-controlled robot on a line with an independent camera heading:
/// states (position, velocity, acceleration, heading), one unit sensor per
/// state, and the task of watching velocity.
pub fn build_chain_example() -> (LtiSystem, SensorPool, Task) {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(1, 2)] = 1.0;
    let mut b = DMatrix::zeros(4, 2);
    b[(2, 0)] = 1.0;
    b[(3, 1)] = 1.0;
    let system = LtiSystem { a, b };
    let pool = SensorPool::unit_rows(4, 0..4).expect("unit rows are valid sensors");
    let task = Task::new(&pool, SensorSet::singleton(1), "velocity stays above v_min")
        .expect("velocity sensor is in the pool");
    (system, pool, task)
}

/// Names of the chain sensors, indexed by id.
pub const CHAIN_SENSOR_NAMES: [&str; 4] = ["s_p", "s_v", "s_a", "s_h"];

/// On-disk instance description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub sensors: Vec<Vec<f64>>,
    pub task_sensor_ids: Vec<usize>,
    pub k_trust: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_label: Option<String>,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], diags: &mut Vec<Diagnostic>) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        diags.push(Diagnostic::new("RAGGED", format!("{name} has rows of unequal length")));
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

impl InstanceFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().cloned().collect())
                .collect()
        };
        InstanceFile {
            a: to_rows(&inst.system.a),
            b: to_rows(&inst.system.b),
            sensors: inst
                .pool
                .sensors()
                .iter()
                .map(|s| s.row.iter().cloned().collect())
                .collect(),
            task_sensor_ids: inst.task.sensors.to_vec(),
            k_trust: inst.trust.0,
            task_label: Some(inst.task.label.clone()),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        let mut diags = Vec::new();
        let a = rows_to_matrix("A", &self.a, &mut diags);
        let b = rows_to_matrix("B", &self.b, &mut diags);
        if let Some(bad) = self.task_sensor_ids.iter().find(|&&i| i >= self.sensors.len()) {
            diags.push(Diagnostic::new(
                "TASK_OUTSIDE_POOL",
                format!(
                    "task references sensor {bad} but the pool has {} sensors",
                    self.sensors.len()
                ),
            ));
        }
        if self.sensors.len() > MAX_POOL_SIZE {
            diags.push(Diagnostic::new(
                "POOL_TOO_LARGE",
                format!("{} sensors exceed the limit of {MAX_POOL_SIZE}", self.sensors.len()),
            ));
        }
        if !diags.is_empty() {
            return Err(Error::InvalidInstance(diags));
        }
        let pool = SensorPool {
            sensors: self
                .sensors
                .iter()
                .enumerate()
                .map(|(id, r)| Sensor {
                    id,
                    row: RowDVector::from_row_slice(r),
                })
                .collect(),
        };
        let task_set = SensorSet::from_ids(self.task_sensor_ids.iter().copied());
        let task = Task {
            sensors: task_set,
            c_task: pool.output_matrix(task_set),
            label: self.task_label.unwrap_or_default(),
        };
        validate_instance(LtiSystem { a, b }, pool, task, TrustLevel(self.k_trust))
    }
}
