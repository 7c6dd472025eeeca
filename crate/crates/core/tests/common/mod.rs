//! Independent reference implementations for the integration suites.
//!
//! Everything here works in exact rational arithmetic on integer instances
//! and shares no code with the library beyond the data types.

#![allow(dead_code)]

use iface_core::{LtiSystem, SensorPool, SensorSet, Task};
use nalgebra::{DMatrix, RowDVector};
use num_rational::Ratio;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i128>;

#[derive(Debug, Clone)]
pub struct IntInstance {
    pub a: Vec<Vec<i64>>,
    pub b: Vec<Vec<i64>>,
    pub sensors: Vec<Vec<i64>>,
    pub task: Vec<usize>,
}

impl IntInstance {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn pool_size(&self) -> usize {
        self.sensors.len()
    }

    pub fn system(&self) -> LtiSystem {
        let n = self.n();
        let m = self.b[0].len();
        LtiSystem::new(
            DMatrix::from_fn(n, n, |i, j| self.a[i][j] as f64),
            DMatrix::from_fn(n, m, |i, j| self.b[i][j] as f64),
        )
        .expect("generated systems are well formed")
    }

    pub fn pool(&self) -> SensorPool {
        SensorPool::from_rows(
            self.sensors
                .iter()
                .map(|r| RowDVector::from_iterator(r.len(), r.iter().map(|&v| v as f64)))
                .collect(),
        )
        .expect("generated sensors are non-zero")
    }

    pub fn task(&self, pool: &SensorPool) -> Task {
        Task::new(pool, SensorSet::from_ids(self.task.iter().copied()), "random").unwrap()
    }
}

fn sparse_row(rng: &mut ChaCha8Rng, len: usize, density: f64) -> Vec<i64> {
    (0..len)
        .map(|_| {
            if rng.gen_bool(density) {
                let v = rng.gen_range(1..=2);
                if rng.gen_bool(0.5) { v } else { -v }
            } else {
                0
            }
        })
        .collect()
}

fn nonzero_row(rng: &mut ChaCha8Rng, len: usize, density: f64) -> Vec<i64> {
    loop {
        let r = sparse_row(rng, len, density);
        if r.iter().any(|&v| v != 0) {
            return r;
        }
    }
}

/// Random integer instance with `n <= max_n` states and `|pool| <= max_pool`
/// sensors. Half of the pools are unit rows, half sparse integer rows.
pub fn random_instance(seed: u64, max_n: usize, max_pool: usize) -> IntInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_n);
    let m = rng.gen_range(1..=2);
    let a: Vec<Vec<i64>> = (0..n).map(|_| sparse_row(&mut rng, n, 0.35)).collect();
    let mut b: Vec<Vec<i64>> = (0..n).map(|_| sparse_row(&mut rng, m, 0.3)).collect();
    if b.iter().all(|r| r.iter().all(|&v| v == 0)) {
        let i = rng.gen_range(0..n);
        b[i][0] = 1;
    }
    let p = rng.gen_range(2..=max_pool);
    let sensors: Vec<Vec<i64>> = if rng.gen_bool(0.5) {
        (0..p)
            .map(|_| {
                let i = rng.gen_range(0..n);
                (0..n).map(|j| i64::from(i == j)).collect()
            })
            .collect()
    } else {
        (0..p).map(|_| nonzero_row(&mut rng, n, 0.4)).collect()
    };
    let t = rng.gen_range(1..=2usize.min(p));
    let mut task = Vec::new();
    while task.len() < t {
        let id = rng.gen_range(0..p);
        if !task.contains(&id) {
            task.push(id);
        }
    }
    task.sort_unstable();
    IntInstance { a, b, sensors, task }
}

fn mat_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).fold(Q::zero(), |acc, (x, brow)| acc + *x * brow[j]))
                .collect()
        })
        .collect()
}

fn to_q(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    m.iter()
        .map(|r| r.iter().map(|&v| Q::from_integer(v as i128)).collect())
        .collect()
}

pub fn exact_rank(rows: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col];
        for c in col..ncols {
            m[rank][c] /= pivot;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col];
                for c in col..ncols {
                    let sub = f * m[rank][c];
                    m[r][c] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Exact Krylov blocks and set ranks for one instance.
pub struct ExactOracle {
    blocks: Vec<Vec<Vec<Q>>>,
    pub degrees: Vec<usize>,
}

impl ExactOracle {
    pub fn new(inst: &IntInstance) -> Self {
        let a = to_q(&inst.a);
        let b = to_q(&inst.b);
        let n = inst.n();
        let mut blocks = Vec::new();
        let mut degrees = Vec::new();
        for s in &inst.sensors {
            let mut row = to_q(std::slice::from_ref(s));
            let mut rows = Vec::new();
            let mut degree = n;
            for k in 1..=n {
                rows.push(row[0].clone());
                let rb = mat_mul(&row, &b);
                if rb[0].iter().any(|v| !v.is_zero()) {
                    degree = k;
                    break;
                }
                row = mat_mul(&row, &a);
            }
            rows.truncate(degree);
            blocks.push(rows);
            degrees.push(degree);
        }
        ExactOracle { blocks, degrees }
    }

    pub fn gamma(&self, set: SensorSet) -> usize {
        let rows: Vec<Vec<Q>> = set
            .ids()
            .flat_map(|i| self.blocks[i].iter().cloned())
            .collect();
        if rows.is_empty() {
            0
        } else {
            exact_rank(&rows)
        }
    }

    pub fn pool_size(&self) -> usize {
        self.blocks.len()
    }
}

pub fn aware(o: &ExactOracle, task: SensorSet, s: SensorSet) -> bool {
    o.gamma(s) == o.gamma(s.union(task))
}

/// Smallest cardinality over all aware `S` with `Γ(S) >= k`.
pub fn brute_force_optimum(o: &ExactOracle, task: SensorSet, k: usize) -> Option<usize> {
    let p = o.pool_size();
    (1u128..(1u128 << p))
        .map(SensorSet::from_mask)
        .filter(|&s| aware(o, task, s) && o.gamma(s) >= k)
        .map(SensorSet::len)
        .min()
}

/// Reduced row echelon form with zero rows dropped.
pub fn rref(rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col];
        for c in 0..ncols {
            m[rank][c] /= pivot;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col];
                for c in 0..ncols {
                    let sub = f * m[rank][c];
                    m[r][c] -= sub;
                }
            }
        }
        rank += 1;
    }
    m.truncate(rank);
    m
}

/// Basis of `{x : M x = 0}` for the row space given in RREF.
pub fn null_space(rref_rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let pivots: Vec<usize> = rref_rows
        .iter()
        .map(|r| r.iter().position(|v| !v.is_zero()).expect("rref rows are non-zero"))
        .collect();
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut x = vec![Q::zero(); ncols];
            x[free] = Q::from_integer(1);
            for (row, &p) in rref_rows.iter().zip(&pivots) {
                x[p] = -row[free];
            }
            x
        })
        .collect()
}

/// `dim(U ∩ V) = dim U - rank(U N_V)` with `N_V` spanning the null space of `V`.
pub fn intersection_dim_exact(u: &[Vec<Q>], v: &[Vec<Q>], ncols: usize) -> usize {
    let ru = rref(u, ncols);
    let rv = rref(v, ncols);
    let nv = null_space(&rv, ncols);
    if nv.is_empty() {
        return ru.len();
    }
    let proj: Vec<Vec<Q>> = ru
        .iter()
        .map(|row| {
            nv.iter()
                .map(|x| row.iter().zip(x).fold(Q::zero(), |acc, (a, b)| acc + *a * *b))
                .collect()
        })
        .collect();
    ru.len() - rref(&proj, nv.len()).len()
}

impl ExactOracle {
    /// The stacked Krylov rows of `set`.
    pub fn rows(&self, set: SensorSet) -> Vec<Vec<Q>> {
        set.ids().flat_map(|i| self.blocks[i].iter().cloned()).collect()
    }
}
