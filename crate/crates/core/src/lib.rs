//! Semi-implicit finite-difference solver for the periodic 1-D Allen-Cahn
//! equation `phi_t = eps^2 phi_xx - f(phi)` with polynomial potentials.
//!
//! Each step treats the diffusion term implicitly and the reaction term
//! explicitly, so it costs one cyclic tridiagonal solve. Runs carry monitors
//! for the three guarantees the scheme gives when `dt * max f' <= 1` on the
//! invariant interval: values stay in the interval, the L1 norm grows at most
//! by `exp(L dt)` per step, and the discrete energy never increases.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod output;
pub mod potential;
pub mod scheme;

pub use config::Config;
pub use diagnostics::{
    discrete_energy, evaluate_monitors, l1_norm, MonitorKind, MonitorVerdict, Monitors, StepRecord,
};
pub use error::{Error, Result};
pub use experiment::{
    convergence_study, run, sweep, ConvergenceConfig, ConvergenceRow, ConvergenceTable, DtChoice,
    RunConfig, RunResult, RunSummary, Rung, SweepConfig, SweepResult, SweepRow,
};
pub use linalg::{solve_cyclic, solve_dense_oracle, CyclicSolver, CyclicTridiagonalSystem};
pub use potential::{PotentialKind, PotentialSpec, StabilityBounds, ValidationReport};
pub use scheme::{
    make_initial, step_convex_splitting, step_explicit, step_semi_implicit, FieldState, GridSpec,
    InitialCondition, NewtonParams, SchemeKind, SchemeParams, Stepper,
};
