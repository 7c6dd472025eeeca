//! Python bindings: a `Problem` wraps a system, a sensor pool, a task and a
//! shared Γ cache. Sensor ids are zero-based everywhere.

use std::sync::OnceLock;

use iface_core::awareness::{
    compute_s_reduced, expand_sitaware, is_situation_aware, is_situation_aware_direct,
};
use iface_core::model::build_chain_example;
use iface_core::powergrid::{case118, configuration_with, AlternateParity, SwingParams};
use iface_core::solver::{regime_for, weak_bound};
use iface_core::{
    solve, AwarenessFamily, EnumerateOptions, Error, GammaOracle, InstanceFile, LtiSystem,
    OracleOptions, Regime, SensorPool, SensorSet, Solution, SolveOptions, Task, TrustLevel,
};
use nalgebra::{DMatrix, RowDVector};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!(
            "{name} has rows of unequal length"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[pyclass(frozen, module = "iface")]
pub struct SolutionView {
    #[pyo3(get)]
    selected: Vec<usize>,
    #[pyo3(get)]
    gamma_value: usize,
    #[pyo3(get)]
    regime: &'static str,
    #[pyo3(get)]
    is_optimal: bool,
    /// `None` for exact solutions and for the alternative heuristic.
    #[pyo3(get)]
    bound_delta: Option<f64>,
    #[pyo3(get)]
    weak_bound: f64,
    #[pyo3(get)]
    wall_time_ms: f64,
    #[pyo3(get)]
    evaluations: u64,
}

impl SolutionView {
    fn new(s: &Solution, gamma_pool: usize) -> Self {
        SolutionView {
            selected: s.selected.to_vec(),
            gamma_value: s.gamma_value,
            regime: s.regime.as_str(),
            is_optimal: s.is_optimal,
            bound_delta: s.bound_delta,
            weak_bound: weak_bound(gamma_pool),
            wall_time_ms: s.wall_time.as_secs_f64() * 1e3,
            evaluations: s.evaluations,
        }
    }
}

#[pymethods]
impl SolutionView {
    fn __len__(&self) -> usize {
        self.selected.len()
    }

    fn __repr__(&self) -> String {
        let bound = self.bound_delta.map_or("None".to_string(), |d| d.to_string());
        format!(
            "Solution(selected={:?}, gamma={}, regime='{}', bound_delta={bound})",
            self.selected, self.gamma_value, self.regime
        )
    }
}

#[pyclass(frozen, module = "iface")]
pub struct Problem {
    pool: SensorPool,
    task: Task,
    oracle: GammaOracle,
    family: OnceLock<AwarenessFamily>,
}

impl Problem {
    fn build(system: LtiSystem, pool: SensorPool, task: Task, cache_cap: Option<usize>) -> Self {
        let options = OracleOptions {
            cache_cap,
            ..Default::default()
        };
        let oracle = GammaOracle::with_options(&system, &pool, options);
        Problem {
            pool,
            task,
            oracle,
            family: OnceLock::new(),
        }
    }

    fn set(&self, ids: Vec<usize>) -> PyResult<SensorSet> {
        match ids.iter().find(|&&i| i >= self.pool.len()) {
            Some(bad) => Err(PyValueError::new_err(format!(
                "sensor id {bad} is outside the pool of {} sensors",
                self.pool.len()
            ))),
            None => Ok(SensorSet::from_ids(ids)),
        }
    }

    fn default_family(&self) -> PyResult<&AwarenessFamily> {
        if let Some(f) = self.family.get() {
            return Ok(f);
        }
        let f = AwarenessFamily::compute(&self.oracle, &self.task, EnumerateOptions::default())
            .map_err(to_py)?;
        Ok(self.family.get_or_init(|| f))
    }
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (a, b, sensors, task_ids, cache_cap=None))]
    fn py_new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        sensors: Vec<Vec<f64>>,
        task_ids: Vec<usize>,
        cache_cap: Option<usize>,
    ) -> PyResult<Self> {
        let system = LtiSystem::new(matrix("A", &a)?, matrix("B", &b)?).map_err(to_py)?;
        let rows = sensors
            .iter()
            .map(|r| RowDVector::from_row_slice(r))
            .collect();
        let pool = SensorPool::from_rows(rows).map_err(to_py)?;
        let task = Task::new(&pool, SensorSet::from_ids(task_ids), "task").map_err(to_py)?;
        let inst = iface_core::model::validate_instance(system, pool, task, TrustLevel(1))
            .map_err(to_py)?;
        Ok(Problem::build(inst.system, inst.pool, inst.task, cache_cap))
    }

    /// The four-state robot example with the velocity task.
    #[staticmethod]
    fn chain() -> Self {
        let (system, pool, task) = build_chain_example();
        Problem::build(system, pool, task, None)
    }

    /// An instance file; its `k_trust` is ignored.
    #[staticmethod]
    fn from_json(path: &str) -> PyResult<Self> {
        let inst = InstanceFile::load(path)
            .and_then(InstanceFile::into_instance)
            .map_err(to_py)?;
        Ok(Problem::build(inst.system, inst.pool, inst.task, None))
    }

    /// Configuration 1-4 of the 118-bus swing model.
    #[staticmethod]
    #[pyo3(signature = (config, parity="odd"))]
    fn grid118(py: Python<'_>, config: u8, parity: &str) -> PyResult<Self> {
        let parity = match parity {
            "odd" => AlternateParity::Odd,
            "even" => AlternateParity::Even,
            other => {
                return Err(PyValueError::new_err(format!(
                    "parity must be 'odd' or 'even', got {other:?}"
                )))
            }
        };
        let c = py
            .detach(|| {
                case118().and_then(|case| {
                    configuration_with(&case, &SwingParams::default(), config, parity)
                })
            })
            .map_err(to_py)?;
        Ok(Problem::build(c.system, c.pool, c.task, None))
    }

    #[getter]
    fn pool_size(&self) -> usize {
        self.pool.len()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.oracle.state_dim()
    }

    #[getter]
    fn task(&self) -> Vec<usize> {
        self.task.sensors.to_vec()
    }

    fn relative_degrees(&self) -> Vec<usize> {
        self.oracle
            .blocks()
            .iter()
            .map(|b| b.gamma_degree)
            .collect()
    }

    fn gamma(&self, ids: Vec<usize>) -> PyResult<usize> {
        Ok(self.oracle.gamma(self.set(ids)?))
    }

    fn gamma_union_task(&self, ids: Vec<usize>) -> PyResult<usize> {
        Ok(self.oracle.gamma_union_task(self.set(ids)?, &self.task))
    }

    fn gamma_pool(&self) -> usize {
        self.oracle.gamma(self.oracle.pool())
    }

    fn s_reduced(&self) -> Vec<usize> {
        compute_s_reduced(&self.oracle, &self.task).to_vec()
    }

    /// Members of the reduced awareness family, sorted by (size, ids).
    #[pyo3(signature = (aggressive_prune=false, cap=None))]
    fn family(
        &self,
        py: Python<'_>,
        aggressive_prune: bool,
        cap: Option<usize>,
    ) -> PyResult<Vec<Vec<usize>>> {
        let fam = if !aggressive_prune && cap.is_none() {
            py.detach(|| self.default_family().map(|f| f.sitaware_reduced.clone()))?
        } else {
            let options = EnumerateOptions {
                aggressive_prune,
                cap,
                ..Default::default()
            };
            py.detach(|| AwarenessFamily::compute(&self.oracle, &self.task, options))
                .map_err(to_py)?
                .sitaware_reduced
        };
        Ok(fam.into_iter().map(SensorSet::to_vec).collect())
    }

    /// Up to `limit` members of the full awareness family.
    fn expand(&self, py: Python<'_>, limit: usize) -> PyResult<Vec<Vec<usize>>> {
        let fam = py.detach(|| self.default_family())?;
        Ok(expand_sitaware(fam, &self.pool, limit)
            .into_iter()
            .map(SensorSet::to_vec)
            .collect())
    }

    /// `direct=True` compares Γ(S) and Γ(S ∪ S_task); otherwise the test goes
    /// through S ∩ S_reduced, which never accepts an unaware set but can
    /// reject an aware one.
    #[pyo3(signature = (ids, direct=true))]
    fn is_aware(&self, ids: Vec<usize>, direct: bool) -> PyResult<bool> {
        let s = self.set(ids)?;
        if direct {
            Ok(is_situation_aware_direct(&self.oracle, &self.task, s))
        } else {
            Ok(is_situation_aware(
                &self.oracle,
                &self.task,
                self.default_family()?,
                s,
            ))
        }
    }

    #[pyo3(signature = (k_trust, alt_heuristic=false))]
    fn solve(&self, py: Python<'_>, k_trust: usize, alt_heuristic: bool) -> PyResult<SolutionView> {
        let options = SolveOptions { alt_heuristic };
        let gamma_pool = self.gamma_pool();
        let gamma_task = self.oracle.gamma(self.task.sensors);
        let sol = py.detach(|| {
            let run = |fam: &AwarenessFamily| {
                solve(&self.oracle, &self.task, fam, TrustLevel(k_trust), options).map_err(to_py)
            };
            if !(1..=gamma_pool).contains(&k_trust)
                || regime_for(k_trust, gamma_task, gamma_pool) == Regime::NoTrustGreedy
            {
                // the no-trust greedy and the range check never read the family
                run(&AwarenessFamily {
                    s_reduced: SensorSet::EMPTY,
                    sitaware_reduced: Vec::new(),
                    gamma_task,
                })
            } else {
                run(self.default_family()?)
            }
        })?;
        Ok(SolutionView::new(&sol, gamma_pool))
    }

    /// `(queries, evaluations, cached_entries)` of the Γ cache.
    fn cache_stats(&self) -> (u64, u64, usize) {
        let s = self.oracle.stats();
        (s.queries, s.evaluations, s.cached_entries)
    }
}

#[pymodule]
fn iface(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<SolutionView>()?;
    Ok(())
}
