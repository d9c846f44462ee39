//! Policy comparison on one environment and seeded Monte-Carlo studies.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    classify_actions, fixed_interval_schedule, zero_wait_schedule, ActionClass, BaselineError,
};
use crate::dag::{build_dag, grid_from_config, CandidateGrid, GridConfig};
use crate::efficacy::{objective_j, schedule_stats, EfficacyError, PathStats, Schedule};
use crate::environment::{sample_environment, EnvError, EnvType, Environment, ScenarioSpec};
use crate::pareto::{pareto_frontier_dp, ParetoConfig};
use crate::solvers::{solve, DinkelbachConfig, SolveError, SolveResult, SolverKind};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Efficacy(#[from] EfficacyError),
    #[error("bad experiment spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Solver(SolverKind),
    ZeroWait,
    /// Period in minutes.
    Fixed(f64),
}

impl Policy {
    pub fn defaults() -> Vec<Policy> {
        vec![
            Policy::Solver(SolverKind::DeltaP),
            Policy::Solver(SolverKind::DeltaL),
            Policy::Fixed(10.0),
            Policy::Fixed(25.0),
            Policy::ZeroWait,
        ]
    }

    /// Baseline schedule, or `None` for solver policies.
    pub fn baseline_schedule(&self, env: &Environment) -> Result<Option<Schedule>, BaselineError> {
        match *self {
            Policy::Solver(_) => Ok(None),
            Policy::ZeroWait => Ok(Some(zero_wait_schedule(env))),
            Policy::Fixed(p) => fixed_interval_schedule(env, p).map(Some),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Solver(k) => write!(f, "{k}"),
            Policy::ZeroWait => f.write_str("Zero-wait"),
            Policy::Fixed(p) => write!(f, "Fixed-{p}m"),
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    /// `delta-p`, `delta-l`, `zero-wait`, `fixed-<minutes>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let l = s.trim().to_ascii_lowercase();
        match l.as_str() {
            "delta-p" => return Ok(Policy::Solver(SolverKind::DeltaP)),
            "delta-l" => return Ok(Policy::Solver(SolverKind::DeltaL)),
            "zero-wait" => return Ok(Policy::ZeroWait),
            _ => {}
        }
        if let Some(rest) = l.strip_prefix("fixed-") {
            let rest = rest.trim_end_matches('m');
            if let Ok(p) = rest.parse::<f64>() {
                if p > 0.0 && p.is_finite() {
                    return Ok(Policy::Fixed(p));
                }
            }
        }
        Err(format!("unknown policy '{s}' (expected delta-p, delta-l, zero-wait or fixed-<minutes>)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub efficacy: f64,
    pub work_time: f64,
    pub update_cost: f64,
    pub objective: f64,
    pub compute_seconds: f64,
    pub schedule: Schedule,
    pub actions: Vec<ActionClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stalled: Option<bool>,
}

impl ComparisonRow {
    fn new(
        env: &Environment,
        strategy: String,
        schedule: Schedule,
        stats: PathStats,
        seconds: f64,
        tol: f64,
    ) -> Result<Self, EfficacyError> {
        Ok(ComparisonRow {
            strategy,
            efficacy: stats.f,
            work_time: stats.g,
            update_cost: stats.c,
            objective: objective_j(&stats, env.t_end())?,
            compute_seconds: (seconds * 1e3).round() / 1e3,
            actions: classify_actions(env, &schedule, tol),
            schedule,
            stalled: None,
        })
    }
}

/// Grid config with every baseline completion added as a candidate and the
/// span limit widened to admit each baseline gap.
pub fn with_baselines_injected(grid_cfg: &GridConfig, baselines: &[Schedule]) -> GridConfig {
    let mut cfg = grid_cfg.clone();
    for s in baselines {
        let mut prev = 0.0;
        for &c in s.completions() {
            cfg.extra_times.push(c);
            cfg.max_span = cfg.max_span.max(c - prev);
            prev = c;
        }
    }
    cfg
}

/// Runs every policy on `env`. Solver policies see a grid containing all
/// baseline completions, so they search a superset of the baselines.
pub fn compare(
    env: &Environment,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
    policies: &[Policy],
    classify_tol: f64,
) -> Result<Vec<ComparisonRow>, ExperimentError> {
    let mut baseline_scheds = Vec::new();
    let mut baseline_secs = Vec::new();
    for p in policies {
        let t0 = Instant::now();
        let s = p.baseline_schedule(env)?;
        baseline_secs.push(t0.elapsed().as_secs_f64());
        baseline_scheds.push(s);
    }
    let injected: Vec<Schedule> = baseline_scheds.iter().flatten().cloned().collect();
    let solver_grid = with_baselines_injected(grid_cfg, &injected);

    let mut rows = Vec::with_capacity(policies.len());
    for (i, p) in policies.iter().enumerate() {
        let row = match (p, &baseline_scheds[i]) {
            (Policy::Solver(kind), _) => {
                let res = solve(env, &solver_grid, cfg, *kind)?;
                solver_row(env, &res, classify_tol)?
            }
            (_, Some(s)) => {
                let t0 = Instant::now();
                let stats = schedule_stats(env, s)?;
                let secs = baseline_secs[i] + t0.elapsed().as_secs_f64();
                ComparisonRow::new(env, p.to_string(), s.clone(), stats, secs, classify_tol)?
            }
            (_, None) => unreachable!("baseline policies always yield a schedule"),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn solver_row(env: &Environment, res: &SolveResult, tol: f64) -> Result<ComparisonRow, EfficacyError> {
    let mut row = ComparisonRow::new(
        env,
        res.solver.to_string(),
        res.schedule.clone(),
        res.stats,
        res.wall_time,
        tol,
    )?;
    row.stalled = Some(res.stalled);
    Ok(row)
}

/// One point of the sink Pareto frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub stats: PathStats,
    #[serde(rename = "J")]
    pub objective: f64,
    pub schedule: Schedule,
}

/// Exact sink frontier on the unrefined grid of `grid_cfg`.
pub fn frontier_export(
    env: &Environment,
    grid_cfg: &GridConfig,
    pareto: &ParetoConfig,
) -> Result<Vec<FrontierPoint>, ExperimentError> {
    let grid = grid_from_config(env, grid_cfg).map_err(SolveError::from)?;
    frontier_on_grid(env, &grid, grid_cfg.max_span, pareto)
}

/// Exact sink frontier on an explicit candidate grid.
pub fn frontier_on_grid(
    env: &Environment,
    grid: &CandidateGrid,
    max_span: f64,
    pareto: &ParetoConfig,
) -> Result<Vec<FrontierPoint>, ExperimentError> {
    let dag = build_dag(env, grid, max_span);
    let table = pareto_frontier_dp(&dag, pareto);
    let h = env.t_end();
    let mut out = Vec::with_capacity(table.sink_ids().len());
    for &id in table.sink_ids() {
        let stats = table.stats(id as usize);
        let schedule = table
            .recover_schedule(id as usize, &dag)
            .map_err(|e| ExperimentError::BadSpec(e.to_string()))?;
        let objective = objective_j(&stats, h).unwrap_or(f64::NEG_INFINITY);
        out.push(FrontierPoint { stats, objective, schedule });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    #[serde(rename = "type")]
    pub env_type: EnvType,
    pub num_segments: usize,
    pub t_end: f64,
    pub n_cases: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub strategy: String,
    pub mean_j: f64,
    /// Population standard deviation.
    pub std_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassFrequency {
    pub class: ActionClass,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub index: usize,
    pub seed: u64,
    /// `J` per policy, in policy order.
    pub objectives: Vec<f64>,
    pub actions: Vec<ActionClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub spec: MonteCarloSpec,
    pub policies: Vec<PolicySummary>,
    /// Policy whose schedules are classified.
    pub classified_policy: String,
    pub classes: Vec<ClassFrequency>,
    pub cases: Vec<CaseRecord>,
}

/// Per-case seeds, drawn from a stream seeded by `seed`.
pub fn case_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

fn run_case(
    spec: &MonteCarloSpec,
    index: usize,
    seed: u64,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
    policies: &[Policy],
    classify: usize,
    tol: f64,
) -> Result<CaseRecord, ExperimentError> {
    let env = sample_environment(&ScenarioSpec {
        env_type: spec.env_type,
        num_segments: spec.num_segments,
        t_end: spec.t_end,
        seed,
    })?;
    let rows = compare(&env, grid_cfg, cfg, policies, tol)?;
    Ok(CaseRecord {
        index,
        seed,
        objectives: rows.iter().map(|r| r.objective).collect(),
        actions: rows[classify].actions.clone(),
    })
}

/// Samples `n_cases` environments and runs every policy on each, on a pool
/// of `jobs` threads (0 = rayon default). Output is independent of `jobs`.
/// Actions are classified on the first solver policy (else the first policy).
pub fn monte_carlo(
    spec: &MonteCarloSpec,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
    policies: &[Policy],
    jobs: usize,
    classify_tol: f64,
) -> Result<MonteCarloSummary, ExperimentError> {
    if spec.n_cases == 0 {
        return Err(ExperimentError::BadSpec("n_cases must be >= 1".into()));
    }
    if policies.is_empty() {
        return Err(ExperimentError::BadSpec("at least one policy is required".into()));
    }
    let classify = policies.iter().position(|p| matches!(p, Policy::Solver(_))).unwrap_or(0);
    let seeds = case_seeds(spec.seed, spec.n_cases);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::BadSpec(e.to_string()))?;
    let cases: Vec<CaseRecord> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &s)| run_case(spec, i, s, grid_cfg, cfg, policies, classify, classify_tol))
            .collect::<Result<_, _>>()
    })?;

    let n = cases.len() as f64;
    let summaries = policies
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mean = cases.iter().map(|c| c.objectives[k]).sum::<f64>() / n;
            let var = cases.iter().map(|c| (c.objectives[k] - mean).powi(2)).sum::<f64>() / n;
            PolicySummary { strategy: p.to_string(), mean_j: mean, std_j: var.sqrt() }
        })
        .collect();
    let total: usize = cases.iter().map(|c| c.actions.len()).sum();
    let classes = ActionClass::ALL
        .iter()
        .map(|&class| {
            let count = cases.iter().flat_map(|c| &c.actions).filter(|&&a| a == class).count();
            ClassFrequency { class, count, frequency: count as f64 / total.max(1) as f64 }
        })
        .collect();
    Ok(MonteCarloSummary {
        spec: spec.clone(),
        policies: summaries,
        classified_policy: policies[classify].to_string(),
        classes,
        cases,
    })
}
