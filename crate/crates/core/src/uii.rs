//! The user information index `Γ(S)`: the dimension of the state subspace a
//! user can reconstruct from the selected sensors and their unforced
//! derivatives.
//!
//! Each sensor `s` contributes the Krylov block `[s; sA; ...; sA^(γ-1)]`, where
//! `γ` is the relative degree of the single-output system `y = s x`. `Γ(S)` is
//! the rank of the vertical stack of the blocks of the sensors in `S`.
//!
//! [`GammaOracle`] memoises `Γ` by bitmask. It is `Sync`; concurrent callers may
//! race to fill the same entry, which only costs a duplicate evaluation.

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;
use nalgebra::{DMatrix, RowDVector};

use crate::model::{LtiSystem, Sensor, SensorPool, SensorSet, Task};
use crate::subspace::{rank_unchecked, RankTolerance};

/// `T_s` for a single sensor together with its relative degree.
///
/// `rows` holds the Krylov rows themselves; `basis` is an orthonormal basis of
/// their span built by an Arnoldi recurrence, which stays well conditioned when
/// the powers of `A` are dominated by a single fast mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityBlock {
    pub sensor_id: usize,
    pub gamma_degree: usize,
    pub rows: DMatrix<f64>,
    pub basis: DMatrix<f64>,
}

// Orthonormal Krylov vectors q_0, q_1, ... of (s, A) up to the relative degree.
// span{q_0..q_k} = span{s, sA, .., sA^k}, so s A^j B = 0 for all j < k exactly
// when q_j B = 0 for all j < k. Stops early once the Krylov space is invariant,
// in which case no later power reaches the input and the degree is n.
fn arnoldi(sys: &LtiSystem, s: &Sensor, tol: RankTolerance) -> (usize, Vec<RowDVector<f64>>) {
    let n = sys.state_dim();
    let b_scale = sys.b.norm();
    let a_scale = sys.a.norm();
    let mut basis: Vec<RowDVector<f64>> = Vec::new();
    let mut q = &s.row / s.row.norm();
    for k in 1..=n {
        let qb = &q * &sys.b;
        basis.push(q.clone());
        if qb.norm() > tol.value() * b_scale {
            return (k, basis);
        }
        let mut next = &q * &sys.a;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for v in &basis {
                let c = next.dot(v);
                next -= v * c;
            }
        }
        let norm = next.norm();
        if norm <= tol.value() * a_scale.max(f64::MIN_POSITIVE) {
            return (n, basis);
        }
        q = next / norm;
    }
    (n, basis)
}

/// Smallest `k >= 1` with `s A^(k-1) B != 0`, or `n` when no such `k <= n` exists.
pub fn relative_degree(sys: &LtiSystem, s: &Sensor, tol: RankTolerance) -> usize {
    arnoldi(sys, s, tol).0
}

pub fn sensor_block(sys: &LtiSystem, s: &Sensor, tol: RankTolerance) -> ObservabilityBlock {
    let (gamma_degree, q) = arnoldi(sys, s, tol);
    let n = sys.state_dim();
    let mut rows = DMatrix::zeros(gamma_degree, n);
    let mut row = s.row.clone();
    for k in 0..gamma_degree {
        rows.set_row(k, &row);
        row = &row * &sys.a;
    }
    ObservabilityBlock {
        sensor_id: s.id,
        gamma_degree,
        rows,
        basis: DMatrix::from_rows(&q),
    }
}

/// Oracle construction knobs.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub tolerance: RankTolerance,
    /// Maximum number of cached entries; `None` means unbounded.
    pub cache_cap: Option<usize>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tolerance: RankTolerance::DEFAULT,
            cache_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleStats {
    /// Calls to [`GammaOracle::gamma`].
    pub queries: u64,
    /// Fresh rank computations (cache misses).
    pub evaluations: u64,
    pub cached_entries: usize,
}

pub struct GammaOracle {
    n: usize,
    pool_size: usize,
    blocks: Vec<ObservabilityBlock>,
    options: OracleOptions,
    cache: DashMap<u128, usize>,
    queries: AtomicU64,
    evaluations: AtomicU64,
}

impl GammaOracle {
    pub fn new(sys: &LtiSystem, pool: &SensorPool) -> Self {
        Self::with_options(sys, pool, OracleOptions::default())
    }

    pub fn with_options(sys: &LtiSystem, pool: &SensorPool, options: OracleOptions) -> Self {
        let blocks: Vec<_> = pool
            .sensors()
            .iter()
            .map(|s| sensor_block(sys, s, options.tolerance))
            .collect();
        GammaOracle {
            n: sys.state_dim(),
            pool_size: pool.len(),
            blocks,
            options,
            cache: DashMap::new(),
            queries: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn pool(&self) -> SensorSet {
        SensorSet::full(self.pool_size)
    }

    pub fn blocks(&self) -> &[ObservabilityBlock] {
        &self.blocks
    }

    pub fn tolerance(&self) -> RankTolerance {
        self.options.tolerance
    }

    /// `Γ(set)`, memoised.
    pub fn gamma(&self, set: SensorSet) -> usize {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if set.is_empty() {
            return 0;
        }
        if let Some(v) = self.cache.get(&set.mask()) {
            return *v;
        }
        let value = self.gamma_uncached(set);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let room = self
            .options
            .cache_cap
            .is_none_or(|cap| self.cache.len() < cap);
        if room {
            self.cache.insert(set.mask(), value);
        }
        value
    }

    /// `Γ(set)` computed from scratch, bypassing and not touching the cache.
    pub fn gamma_uncached(&self, set: SensorSet) -> usize {
        let stacked = self.stack(set);
        rank_unchecked(&stacked, self.options.tolerance)
    }

    pub fn gamma_union_task(&self, set: SensorSet, task: &Task) -> usize {
        self.gamma(set.union(task.sensors))
    }

    /// Stack of the orthonormal block bases of `set`, in id order.
    pub fn stack(&self, set: SensorSet) -> DMatrix<f64> {
        let ids: Vec<usize> = set.ids().filter(|&i| i < self.pool_size).collect();
        let rows: usize = ids.iter().map(|&i| self.blocks[i].basis.nrows()).sum();
        let mut out = DMatrix::zeros(rows, self.n);
        let mut at = 0;
        for i in ids {
            let b = &self.blocks[i].basis;
            out.rows_mut(at, b.nrows()).copy_from(b);
            at += b.nrows();
        }
        out
    }

    /// Raw `T_s` blocks of `set` stacked in id order.
    pub fn raw_stack(&self, set: SensorSet) -> DMatrix<f64> {
        let blocks: Vec<&DMatrix<f64>> = set
            .ids()
            .filter(|&i| i < self.pool_size)
            .map(|i| &self.blocks[i].rows)
            .collect();
        if blocks.is_empty() {
            return DMatrix::zeros(0, self.n);
        }
        crate::subspace::vstack(&blocks).expect("blocks share the state dimension")
    }

    pub fn stats(&self) -> OracleStats {
        OracleStats {
            queries: self.queries.load(Ordering::Relaxed),
            evaluations: self.evaluations.load(Ordering::Relaxed),
            cached_entries: self.cache.len(),
        }
    }

    pub fn clear_cache(&self) {
        self.cache.clear();
    }

    /// Orthonormal split of the state space into the part reconstructable from
    /// `set` and its orthogonal complement.
    pub fn observable_decomposition(&self, set: SensorSet) -> ObservableDecomposition {
        let n = self.n;
        let rank = self.gamma(set);
        let stacked = self.stack(set);
        // pad to at least n rows so the SVD returns a complete right basis
        let padded = if stacked.nrows() < n {
            let mut p = DMatrix::zeros(n, n);
            p.rows_mut(0, stacked.nrows()).copy_from(&stacked);
            p
        } else {
            stacked
        };
        let svd = padded.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors were requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let basis = DMatrix::from_fn(n, n, |i, j| v_t[(order[i], j)]);
        ObservableDecomposition {
            t_s: basis.rows(0, rank).into_owned(),
            t_s_complement: basis.rows(rank, n - rank).into_owned(),
            p_s: basis,
        }
    }
}

/// `P_S = [T_S; T_S^⊥]`, with orthonormal rows.
#[derive(Debug, Clone)]
pub struct ObservableDecomposition {
    pub t_s: DMatrix<f64>,
    pub t_s_complement: DMatrix<f64>,
    pub p_s: DMatrix<f64>,
}

impl ObservableDecomposition {
    pub fn observable_dim(&self) -> usize {
        self.t_s.nrows()
    }

    /// `(ξ, η) = P_S x`.
    pub fn split(&self, x: &nalgebra::DVector<f64>) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
        (&self.t_s * x, &self.t_s_complement * x)
    }

    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        self.p_s.clone().try_inverse()
    }
}
