//! Refresh scheduling for a decaying knowledge asset over a piecewise
//! stationary horizon.
//!
//! The long-term problem picks completion times `S` maximizing
//! `J(S) = F/G - C/H`, where `F` is the efficacy integral over working time,
//! `G` the working time, `C` the total update cost and `H` the horizon. Feasible
//! schedules on a candidate grid are the source-to-sink paths of a DAG with
//! additive `(F, G, C)` edge increments; two Dinkelbach-style solvers search
//! them: [`solvers::delta_p`] (exact, Pareto frontier) and
//! [`solvers::delta_l`] (linearized, longest path).

pub mod baselines;
pub mod dag;
pub mod efficacy;
pub mod environment;
pub mod experiments;
pub mod oracle;
pub mod output;
pub mod pareto;
pub mod shortterm;
pub mod solvers;

/// Tolerance for comparing times (minutes).
pub const TIME_EPS: f64 = 1e-9;

pub use dag::{build_dag, grid_from_config, CandidateGrid, Dag, GridConfig, RefineConfig};
pub use efficacy::{objective_j, schedule_stats, validate_schedule, PathStats, Schedule};
pub use environment::{
    build_environment, sample_environment, DecayParams, EnvType, Environment, ScenarioSpec,
    Segment,
};
pub use solvers::{delta_l, delta_p, DinkelbachConfig, SolveResult, SolverKind};
