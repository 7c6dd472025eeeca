//! Situation-aware sensor selection for linear time-invariant plants.
//!
//! A user watching a subset of sensors can reconstruct a subspace of the
//! state; its dimension is the user information index `Γ`. The crate finds
//! the fewest sensors that keep a task's outputs reconstructable while
//! guaranteeing `Γ >= k_trust`.

pub mod awareness;
pub mod enumgen;
pub mod error;
pub mod model;
pub mod powergrid;
pub mod solver;
pub mod subspace;
pub mod uii;

pub use awareness::{AwarenessFamily, EnumerateOptions};
pub use error::{Diagnostic, Error, Result};
pub use model::{
    build_chain_example, validate_instance, Instance, InstanceFile, LtiSystem, Sensor, SensorPool,
    SensorSet, Task, TrustLevel,
};
pub use solver::{solve, Regime, Solution, SolutionRecord, SolveOptions};
pub use subspace::RankTolerance;
pub use uii::{GammaOracle, OracleOptions};
