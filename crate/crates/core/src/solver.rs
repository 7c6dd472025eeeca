//! Minimum-cardinality sensor selection subject to situation awareness and
//! `Γ(S) >= k_trust`.
//!
//! The trust level picks the method:
//!
//! | `k_trust`                     | method                                   | result            |
//! |-------------------------------|------------------------------------------|-------------------|
//! | `k <= Γ(S_task)`              | smallest awareness set, `|P| <= |S_task|` | optimal           |
//! | `Γ(S_task) < k < Γ(pool)`     | greedy completion of every awareness set | bounded           |
//! | `k = Γ(pool)`                 | greedy from the empty set                | bounded           |
//!
//! All logarithms are natural.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::awareness::AwarenessFamily;
use crate::error::{Error, Result};
use crate::model::{SensorSet, Task, TrustLevel};
use crate::uii::GammaOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighTrustExact,
    MidTrustHybrid,
    NoTrustGreedy,
    /// Greedy completion of a single minimum awareness set; carries no bound.
    MidTrustAlternative,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::HighTrustExact => "high_trust_exact",
            Regime::MidTrustHybrid => "mid_trust_hybrid",
            Regime::NoTrustGreedy => "no_trust_greedy",
            Regime::MidTrustAlternative => "mid_trust_alternative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `(P, Δ_Γ(k, P ∪ Q_P⁻))` for every awareness set whose completion added sensors.
    pub per_p_bounds: Vec<(SensorSet, f64)>,
    pub max_bound: f64,
    pub weak_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub selected: SensorSet,
    pub gamma_value: usize,
    pub regime: Regime,
    pub is_optimal: bool,
    pub bound_delta: Option<f64>,
    pub bound: Option<BoundReport>,
    pub pre_termination: Option<SensorSet>,
    pub wall_time: Duration,
    /// Γ queries issued while solving.
    pub evaluations: u64,
}

/// Flat export form of a [`Solution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub selected: Vec<usize>,
    pub gamma_value: usize,
    pub regime: Regime,
    pub is_optimal: bool,
    pub bound_delta: Option<f64>,
    pub weak_bound: f64,
    pub wall_time_ms: f64,
    pub evaluations: u64,
}

impl Solution {
    pub fn record(&self, gamma_pool: usize) -> SolutionRecord {
        SolutionRecord {
            selected: self.selected.to_vec(),
            gamma_value: self.gamma_value,
            regime: self.regime,
            is_optimal: self.is_optimal,
            bound_delta: self.bound_delta,
            weak_bound: weak_bound(gamma_pool),
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
            evaluations: self.evaluations,
        }
    }
}

pub fn weak_bound(gamma_pool: usize) -> f64 {
    1.0 + (gamma_pool as f64).ln()
}

/// `ln(Γ(pool) / (k - Γ(S)))` when `Γ(S) < k`, `+∞` otherwise.
pub fn delta_gamma(oracle: &GammaOracle, k: usize, s: SensorSet) -> f64 {
    let g = oracle.gamma(s);
    if g < k {
        (oracle.gamma(oracle.pool()) as f64 / (k - g) as f64).ln()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub selected: SensorSet,
    /// The set one step before termination; `None` when nothing was added.
    pub pre_termination: Option<SensorSet>,
    pub additions: usize,
    /// `1 + ln((Γ(pool) - Γ(base)) / (min(Γ(final), k) - Γ(pre)))`, or 1 with no additions.
    pub bound: f64,
    pub queries: u64,
}

/// Adds the candidate of largest marginal gain (smallest id on ties) to `base`
/// until `Γ >= k`.
pub fn greedy_max(
    oracle: &GammaOracle,
    base: SensorSet,
    candidates: SensorSet,
    k: usize,
) -> Result<GreedyOutcome> {
    let reach = oracle.gamma(base.union(candidates));
    let mut queries = 1;
    if reach < k {
        return Err(Error::Infeasible {
            required: k,
            achievable: reach,
        });
    }
    let mut set = base;
    let mut current = oracle.gamma(set);
    queries += 1;
    let base_gamma = current;
    let mut pre = None;
    let mut pre_gamma = current;
    let mut additions = 0;
    while current < k {
        let mut best: Option<(usize, usize)> = None;
        for id in candidates.difference(set).ids() {
            let g = oracle.gamma(set.with(id));
            queries += 1;
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((id, g));
            }
        }
        let (id, g) = best.expect("a feasible run always has a candidate left");
        debug_assert!(g > current, "submodularity guarantees a positive gain");
        pre = Some(set);
        pre_gamma = current;
        set = set.with(id);
        current = g;
        additions += 1;
    }
    let bound = if additions == 0 {
        1.0
    } else {
        let gamma_pool = oracle.gamma(oracle.pool());
        queries += 1;
        let last_gain = (current.min(k) - pre_gamma) as f64;
        1.0 + ((gamma_pool - base_gamma) as f64 / last_gain).ln()
    };
    Ok(GreedyOutcome {
        selected: set,
        pre_termination: pre,
        additions,
        bound,
        queries,
    })
}

fn min_member(family: &AwarenessFamily, cap: usize) -> Option<SensorSet> {
    family
        .sitaware_reduced
        .iter()
        .filter(|p| p.len() <= cap)
        .min_by_key(|p| (p.len(), p.mask()))
        .copied()
}

/// Smallest member of the family with `|P| <= |S_task|`, ties to the smaller mask.
pub fn solve_high_trust(
    oracle: &GammaOracle,
    task: &Task,
    family: &AwarenessFamily,
) -> Result<Solution> {
    let start = Instant::now();
    let q0 = oracle.stats().queries;
    let selected = min_member(family, task.sensors.len()).unwrap_or(task.sensors);
    Ok(Solution {
        selected,
        gamma_value: oracle.gamma(selected),
        regime: Regime::HighTrustExact,
        is_optimal: true,
        bound_delta: None,
        bound: None,
        pre_termination: None,
        wall_time: start.elapsed(),
        evaluations: oracle.stats().queries - q0,
    })
}

/// Greedy completion of every family member; the smallest completion wins.
pub fn solve_mid_trust(
    oracle: &GammaOracle,
    task: &Task,
    family: &AwarenessFamily,
    k: usize,
) -> Result<Solution> {
    let start = Instant::now();
    let q0 = oracle.stats().queries;
    let pool = oracle.pool();
    let members: Vec<SensorSet> = if family.sitaware_reduced.is_empty() {
        vec![task.sensors]
    } else {
        family.sitaware_reduced.clone()
    };
    let runs: Vec<(SensorSet, GreedyOutcome)> = members
        .par_iter()
        .map(|&p| greedy_max(oracle, p, pool.difference(p), k).map(|g| (p, g)))
        .collect::<Result<_>>()?;

    let (_, best) = runs
        .iter()
        .min_by_key(|(_, g)| (g.selected.len(), g.selected.mask()))
        .expect("at least one awareness set");
    let per_p_bounds: Vec<(SensorSet, f64)> = runs
        .iter()
        .filter_map(|(p, g)| g.pre_termination.map(|pre| (*p, delta_gamma(oracle, k, pre))))
        .collect();
    let worst = per_p_bounds.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let max_bound = 1.0 + worst;
    let gamma_pool = oracle.gamma(pool);
    Ok(Solution {
        selected: best.selected,
        gamma_value: oracle.gamma(best.selected),
        regime: Regime::MidTrustHybrid,
        is_optimal: false,
        bound_delta: Some(max_bound),
        bound: Some(BoundReport {
            per_p_bounds,
            max_bound,
            weak_bound: weak_bound(gamma_pool),
        }),
        pre_termination: best.pre_termination,
        wall_time: start.elapsed(),
        evaluations: oracle.stats().queries - q0,
    })
}

fn solve_no_trust(oracle: &GammaOracle, k: usize) -> Result<Solution> {
    let start = Instant::now();
    let g = greedy_max(oracle, SensorSet::EMPTY, oracle.pool(), k)?;
    Ok(Solution {
        selected: g.selected,
        gamma_value: oracle.gamma(g.selected),
        regime: Regime::NoTrustGreedy,
        is_optimal: false,
        bound_delta: Some(g.bound),
        bound: Some(BoundReport {
            per_p_bounds: Vec::new(),
            max_bound: g.bound,
            weak_bound: weak_bound(oracle.gamma(oracle.pool())),
        }),
        pre_termination: g.pre_termination,
        wall_time: start.elapsed(),
        evaluations: g.queries + 1,
    })
}

/// One minimum awareness set, then a single greedy completion. No bound.
pub fn alt_heuristic(
    oracle: &GammaOracle,
    task: &Task,
    family: &AwarenessFamily,
    k: usize,
) -> Result<Solution> {
    let start = Instant::now();
    let core = min_member(family, task.sensors.len()).unwrap_or(task.sensors);
    let g = greedy_max(oracle, core, oracle.pool().difference(core), k)?;
    Ok(Solution {
        selected: g.selected,
        gamma_value: oracle.gamma(g.selected),
        regime: Regime::MidTrustAlternative,
        is_optimal: false,
        bound_delta: None,
        bound: None,
        pre_termination: g.pre_termination,
        wall_time: start.elapsed(),
        evaluations: g.queries + 1,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub alt_heuristic: bool,
}

pub fn regime_for(k: usize, gamma_task: usize, gamma_pool: usize) -> Regime {
    if k <= gamma_task {
        Regime::HighTrustExact
    } else if k == gamma_pool {
        Regime::NoTrustGreedy
    } else {
        Regime::MidTrustHybrid
    }
}

/// Dispatches on the trust level.
pub fn solve(
    oracle: &GammaOracle,
    task: &Task,
    family: &AwarenessFamily,
    trust: TrustLevel,
    options: SolveOptions,
) -> Result<Solution> {
    let start = Instant::now();
    let k = trust.0;
    let gamma_pool = oracle.gamma(oracle.pool());
    if k == 0 || k > gamma_pool {
        return Err(Error::Domain(format!(
            "k_trust={k} exceeds Γ(pool)={gamma_pool}; legal range is [1, {gamma_pool}]"
        )));
    }
    let gamma_task = oracle.gamma(task.sensors);
    let mut sol = match regime_for(k, gamma_task, gamma_pool) {
        Regime::HighTrustExact => solve_high_trust(oracle, task, family)?,
        Regime::NoTrustGreedy => solve_no_trust(oracle, k)?,
        _ if options.alt_heuristic => alt_heuristic(oracle, task, family, k)?,
        _ => solve_mid_trust(oracle, task, family, k)?,
    };
    sol.wall_time = start.elapsed();
    Ok(sol)
}
