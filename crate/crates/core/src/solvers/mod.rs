//! Two-parameter Dinkelbach outer loop with two inner engines.
//!
//! Each outer step maximizes `Phi = H (F - lambda G) - G (C - mu H)` over the
//! feasible paths of a DAG, then sets `lambda <- F/G`, `mu <- C/H`. Delta-P
//! answers the inner problem exactly by scanning a precomputed Pareto frontier;
//! Delta-L linearizes the `G C` product and solves a longest-path problem.

mod bound;
mod linear;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{fixed_interval_schedule, zero_wait_schedule};
use crate::dag::{
    build_dag, grid_from_config, refine_grid, CandidateGrid, Dag, DagError, GridConfig, RefineConfig,
};
use crate::efficacy::{
    objective_j, schedule_stats, EfficacyError, PathStats, Schedule, G_FLOOR_FRACTION,
};
use crate::environment::Environment;
use crate::pareto::{pareto_frontier_dp, pareto_frontier_dp_filtered, select_best, ParetoConfig};

pub use bound::SuffixBounds;
pub use linear::{longest_path, tl_edge_weight, LongestPath};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Grid(#[from] DagError),
    #[error(transparent)]
    Efficacy(#[from] EfficacyError),
    #[error("bad solver config: {0}")]
    BadConfig(String),
    #[error("no feasible path reaches the sink")]
    NoFeasiblePath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "delta-p")]
    DeltaP,
    #[serde(rename = "delta-l")]
    DeltaL,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::DeltaP => "Delta-P",
            SolverKind::DeltaL => "Delta-L",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DinkelbachConfig {
    /// Stop when `|Phi| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Inner (linearized) stop when `|Phi_{k+1} - Phi_k| < inner_tol`.
    pub inner_tol: f64,
    pub inner_max: usize,
    pub eps_dominance: f64,
    /// Per-vertex label cap for the frontier DP; `None` keeps it exact.
    pub max_labels: Option<usize>,
    /// Stop when `|J_k - J_{k-1}| < objective_tol`.
    pub objective_tol: f64,
    /// Drop frontier labels that provably cannot beat the linearized
    /// solution. Keeps the optimum; the exported frontier becomes partial.
    pub bound_pruning: bool,
    /// Start from the best static baseline instead of `(0, 0)`.
    pub warm_start: bool,
}

impl Default for DinkelbachConfig {
    fn default() -> Self {
        DinkelbachConfig {
            tol: 1e-6,
            max_iter: 60,
            inner_tol: 1e-6,
            inner_max: 25,
            eps_dominance: 0.0,
            max_labels: None,
            objective_tol: 1e-12,
            bound_pruning: true,
            warm_start: false,
        }
    }
}

impl DinkelbachConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::BadConfig(m.to_string()));
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.max_iter < 1 || self.inner_max < 1 {
            return bad("iteration caps must be >= 1");
        }
        if !(self.eps_dominance >= 0.0 && self.eps_dominance < 1.0) {
            return bad("eps_dominance must be in [0, 1)");
        }
        if self.max_labels == Some(0) {
            return bad("max_labels must be >= 1");
        }
        if !(self.objective_tol >= 0.0) {
            return bad("objective_tol must be >= 0");
        }
        Ok(())
    }
}

/// One outer iteration: the parameters used, the residual of the selected
/// schedule under them, and that schedule's objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub lambda: f64,
    pub mu: f64,
    pub residual: f64,
    #[serde(rename = "J")]
    pub objective: f64,
}

/// Bookkeeping for one grid pass (initial and refined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassInfo {
    pub grid_points: usize,
    pub update_edges: usize,
    #[serde(rename = "J")]
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontier_labels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub schedule: Schedule,
    pub stats: PathStats,
    #[serde(rename = "J")]
    pub objective: f64,
    /// Outer trace of the pass that produced `schedule`.
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    /// Set when the outer loop repeated a selection with a nonzero residual
    /// or ran out of iterations.
    pub stalled: bool,
    pub passes: Vec<PassInfo>,
    /// Seconds, millisecond resolution.
    pub wall_time: f64,
}

/// `H (F - lambda G) - G (C - mu H)`.
#[inline]
pub fn phi(stats: &PathStats, h: f64, lambda: f64, mu: f64) -> f64 {
    h * (stats.f - lambda * stats.g) - stats.g * (stats.c - mu * h)
}

/// Solution of one pass on a fixed DAG.
#[derive(Debug, Clone)]
pub struct DagSolve {
    pub edges: Vec<usize>,
    /// Sum of edge increments along the path.
    pub stats: PathStats,
    pub objective: f64,
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    pub stalled: bool,
    pub frontier_labels: Option<usize>,
}

impl DagSolve {
    pub fn schedule(&self, dag: &Dag) -> Schedule {
        Schedule::new(dag.schedule_of(&self.edges))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub edges: Vec<usize>,
    pub stats: PathStats,
}

fn horizon(dag: &Dag) -> f64 {
    dag.time(dag.sink() - 1)
}

fn j_of(stats: &PathStats, h: f64) -> f64 {
    objective_j(stats, h).unwrap_or(f64::NEG_INFINITY)
}

pub(crate) fn path_stats(dag: &Dag, edges: &[usize]) -> PathStats {
    edges.iter().map(|&e| dag.edges()[e].increments()).sum()
}

/// The no-update path: the terminal edge out of the source.
pub(crate) fn empty_candidate(dag: &Dag) -> Candidate {
    let e = dag.out_edge_ids(dag.source()).end - 1;
    Candidate { edges: vec![e], stats: dag.edges()[e].increments() }
}

struct Outer {
    best: Candidate,
    trace: Vec<TraceStep>,
    converged: bool,
    stalled: bool,
}

fn dinkelbach<I>(h: f64, cfg: &DinkelbachConfig, init: (f64, f64), mut inner: I) -> Outer
where
    I: FnMut(f64, f64, Option<&Candidate>) -> Candidate,
{
    let (mut lambda, mut mu) = init;
    let mut trace = Vec::new();
    let mut prev: Option<Candidate> = None;
    let mut best: Option<(f64, Candidate)> = None;
    let mut converged = false;
    let mut stalled = false;
    for _ in 0..cfg.max_iter {
        let cand = inner(lambda, mu, prev.as_ref());
        let residual = phi(&cand.stats, h, lambda, mu);
        let j = j_of(&cand.stats, h);
        trace.push(TraceStep { lambda, mu, residual, objective: j });
        if best.as_ref().is_none_or(|(bj, _)| j > *bj) {
            best = Some((j, cand.clone()));
        }
        if residual.abs() < cfg.tol {
            converged = true;
            break;
        }
        if let Some(p) = &prev {
            if p.edges == cand.edges {
                stalled = true;
                break;
            }
            if (j - j_of(&p.stats, h)).abs() < cfg.objective_tol {
                converged = true;
                break;
            }
        }
        lambda = cand.stats.f / cand.stats.g;
        mu = cand.stats.c / h;
        prev = Some(cand);
    }
    if !converged {
        stalled = true;
    }
    let (_, best) = best.expect("max_iter >= 1");
    Outer { best, trace, converged, stalled }
}

fn initial_params(env: &Environment, cfg: &DinkelbachConfig) -> (f64, f64) {
    if !cfg.warm_start {
        return (0.0, 0.0);
    }
    let h = env.t_end();
    let mut cands = vec![Schedule::empty(), zero_wait_schedule(env)];
    for period in [10.0, 25.0] {
        if let Ok(s) = fixed_interval_schedule(env, period) {
            cands.push(s);
        }
    }
    cands
        .iter()
        .filter_map(|s| schedule_stats(env, s).ok())
        .filter(|s| s.g >= G_FLOOR_FRACTION * h)
        .max_by(|a, b| j_of(a, h).total_cmp(&j_of(b, h)))
        .map_or((0.0, 0.0), |s| (s.f / s.g, s.c / h))
}

fn finish(outer: Outer, h: f64, frontier_labels: Option<usize>) -> DagSolve {
    DagSolve {
        objective: j_of(&outer.best.stats, h),
        edges: outer.best.edges,
        stats: outer.best.stats,
        trace: outer.trace,
        converged: outer.converged,
        stalled: outer.stalled,
        frontier_labels,
    }
}

/// Delta-L on a fixed DAG.
pub fn delta_l_on_dag(
    env: &Environment,
    dag: &Dag,
    cfg: &DinkelbachConfig,
) -> Result<DagSolve, SolveError> {
    cfg.validate()?;
    let h = horizon(dag);
    let mut ws = linear::Workspace::new(dag);
    let outer = dinkelbach(h, cfg, initial_params(env, cfg), |lambda, mu, inc| {
        linear::tl_inner(dag, h, lambda, mu, cfg, inc, &mut ws)
    });
    Ok(finish(outer, h, None))
}

/// Delta-P on a fixed DAG. `lower_bound` is a known achievable objective on
/// this DAG (used only for bound pruning).
pub fn delta_p_on_dag(
    env: &Environment,
    dag: &Dag,
    cfg: &DinkelbachConfig,
    lower_bound: Option<f64>,
) -> Result<DagSolve, SolveError> {
    cfg.validate()?;
    let h = horizon(dag);
    let pcfg = ParetoConfig { eps: cfg.eps_dominance, max_labels: cfg.max_labels };
    let floor = G_FLOOR_FRACTION * h;
    let table = if cfg.bound_pruning {
        let lin = delta_l_on_dag(env, dag, cfg)?;
        let empty = j_of(&empty_candidate(dag).stats, h);
        let j_lb = [lin.objective, empty, lower_bound.unwrap_or(f64::NEG_INFINITY)]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let rho = env
            .segments()
            .iter()
            .map(|seg| seg.cost / seg.downtime)
            .fold(f64::INFINITY, f64::min);
        let bounds = SuffixBounds::build(dag, h, j_lb, rho);
        pareto_frontier_dp_filtered(dag, &pcfg, |v, s| bounds.admits(v, s))
    } else {
        pareto_frontier_dp(dag, &pcfg)
    };
    let sink: Vec<u32> = table
        .sink_ids()
        .iter()
        .copied()
        .filter(|&id| table.stats(id as usize).g >= floor)
        .collect();
    if sink.is_empty() {
        return Err(SolveError::NoFeasiblePath);
    }
    let outer = dinkelbach(h, cfg, initial_params(env, cfg), |lambda, mu, _| {
        let k = select_best(sink.iter().map(|&id| table.stats(id as usize)), lambda, mu, h)
            .expect("sink frontier is nonempty");
        let id = sink[k] as usize;
        let edges = table.edge_path(id, dag).expect("backpointers come from the DP");
        Candidate { edges, stats: table.stats(id) }
    });
    Ok(finish(outer, h, Some(table.total_labels())))
}

pub fn solve_on_dag(
    env: &Environment,
    dag: &Dag,
    kind: SolverKind,
    cfg: &DinkelbachConfig,
    lower_bound: Option<f64>,
) -> Result<DagSolve, SolveError> {
    match kind {
        SolverKind::DeltaP => delta_p_on_dag(env, dag, cfg, lower_bound),
        SolverKind::DeltaL => delta_l_on_dag(env, dag, cfg),
    }
}

fn pass_info(dag: &Dag, s: &DagSolve) -> PassInfo {
    PassInfo {
        grid_points: dag.grid().len(),
        update_edges: dag.num_update_edges(),
        objective: s.objective,
        iterations: s.trace.len(),
        converged: s.converged,
        stalled: s.stalled,
        frontier_labels: s.frontier_labels,
    }
}

/// Builds the grid and DAG, solves, then re-solves once on a grid refined
/// around the first solution's completions and keeps the better result.
pub fn solve(
    env: &Environment,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
    kind: SolverKind,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    cfg.validate()?;
    let grid = grid_from_config(env, grid_cfg)?;
    solve_timed(env, grid, grid_cfg.max_span, grid_cfg.refine, cfg, kind, start)
}

/// As [`solve`], on an explicit candidate grid.
pub fn solve_on_grid(
    env: &Environment,
    grid: CandidateGrid,
    max_span: f64,
    refine: Option<RefineConfig>,
    cfg: &DinkelbachConfig,
    kind: SolverKind,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    cfg.validate()?;
    solve_timed(env, grid, max_span, refine, cfg, kind, start)
}

fn solve_timed(
    env: &Environment,
    grid: CandidateGrid,
    max_span: f64,
    refine: Option<RefineConfig>,
    cfg: &DinkelbachConfig,
    kind: SolverKind,
    start: Instant,
) -> Result<SolveResult, SolveError> {
    let dag = build_dag(env, &grid, max_span);
    let first = solve_on_dag(env, &dag, kind, cfg, None)?;
    let mut passes = vec![pass_info(&dag, &first)];
    let mut chosen = first.schedule(&dag);
    let mut chosen_solve = first;

    if let Some(r) = refine {
        if !chosen.is_empty() {
            let fine = refine_grid(&grid, chosen.completions(), r.window, r.step)?;
            if fine.len() > grid.len() {
                let dag2 = build_dag(env, &fine, max_span);
                let second =
                    solve_on_dag(env, &dag2, kind, cfg, Some(chosen_solve.objective))?;
                passes.push(pass_info(&dag2, &second));
                if second.objective > chosen_solve.objective {
                    chosen = second.schedule(&dag2);
                    chosen_solve = second;
                }
            }
        }
    }

    let stats = schedule_stats(env, &chosen)?;
    let objective = objective_j(&stats, env.t_end())?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(SolveResult {
        solver: kind,
        schedule: chosen,
        stats,
        objective,
        trace: chosen_solve.trace,
        converged: chosen_solve.converged,
        stalled: chosen_solve.stalled,
        passes,
        wall_time: (elapsed * 1e3).round() / 1e3,
    })
}

pub fn delta_p(
    env: &Environment,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
) -> Result<SolveResult, SolveError> {
    solve(env, grid_cfg, cfg, SolverKind::DeltaP)
}

pub fn delta_l(
    env: &Environment,
    grid_cfg: &GridConfig,
    cfg: &DinkelbachConfig,
) -> Result<SolveResult, SolveError> {
    solve(env, grid_cfg, cfg, SolverKind::DeltaL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::CandidateGrid;
    use crate::environment::{build_environment, DecayParams, Segment};

    fn seg(start: f64, end: f64, t_half: f64, shock: f64, d: f64, c: f64) -> Segment {
        Segment {
            start,
            end,
            decay: DecayParams::new(0.05, t_half).unwrap(),
            entry_shock: shock,
            downtime: d,
            cost: c,
        }
    }

    fn two_segment() -> Environment {
        build_environment(
            vec![seg(0.0, 30.0, 6.0, 1.0, 1.0, 0.1), seg(30.0, 60.0, 4.0, 0.4, 1.5, 0.2)],
            60.0,
        )
        .unwrap()
    }

    #[test]
    fn phi_identities() {
        let s = PathStats::new(40.0, 80.0, 3.0);
        let h = 100.0;
        let j = s.f / s.g - s.c / h;
        assert!(phi(&s, h, j + 0.25, 0.25).abs() < 1e-9);
        assert_eq!(phi(&s, h, 0.0, 0.0), h * s.f - s.g * s.c);
        let (l, m) = (0.3, 0.1);
        let lhs = phi(&s, h, l, m);
        let rhs = s.g * h * (j - (l - m));
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(DinkelbachConfig::default().validate().is_ok());
        let bad = DinkelbachConfig { tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = DinkelbachConfig { inner_max: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = DinkelbachConfig { max_labels: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn delta_p_trace_ascends_and_converges() {
        let env = two_segment();
        let res = delta_p(&env, &GridConfig::default(), &DinkelbachConfig::default()).unwrap();
        assert!(res.converged && !res.stalled);
        assert!(res.trace.last().unwrap().residual.abs() < 1e-6);
        for w in res.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-12);
        }
        for step in &res.trace[1..] {
            assert!(step.residual >= -1e-9);
        }
        let expect = res.stats.f / res.stats.g - res.stats.c / env.t_end();
        assert!((res.objective - expect).abs() < 1e-12);
    }

    #[test]
    fn pruning_keeps_the_optimum() {
        let env = two_segment();
        let grid = crate::dag::build_candidate_times(&env, 2.0, 0.5, 4.0).unwrap();
        let dag = build_dag(&env, &grid, 90.0);
        let on = DinkelbachConfig::default();
        let off = DinkelbachConfig { bound_pruning: false, ..Default::default() };
        let a = delta_p_on_dag(&env, &dag, &on, None).unwrap();
        let b = delta_p_on_dag(&env, &dag, &off, None).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-12);
        assert!(a.frontier_labels.unwrap() <= b.frontier_labels.unwrap());
    }

    #[test]
    fn delta_l_never_beats_delta_p_on_shared_dag() {
        let env = two_segment();
        let grid = CandidateGrid::from_times(&env, &[0.0, 3.0, 8.0, 14.0, 31.5, 36.0, 45.0, 60.0]).unwrap();
        let dag = build_dag(&env, &grid, f64::INFINITY);
        let cfg = DinkelbachConfig::default();
        let p = delta_p_on_dag(&env, &dag, &cfg, None).unwrap();
        let l = delta_l_on_dag(&env, &dag, &cfg).unwrap();
        assert!(l.objective <= p.objective + 1e-9);
        for w in l.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-12);
        }
    }

    #[test]
    fn constant_efficacy_means_no_updates() {
        let flat = Segment {
            start: 0.0,
            end: 100.0,
            decay: DecayParams::new(0.5, 1e9).unwrap(),
            entry_shock: 1.0,
            downtime: 1.0,
            cost: 0.01,
        };
        let env = build_environment(vec![flat], 100.0).unwrap();
        for kind in [SolverKind::DeltaP, SolverKind::DeltaL] {
            let res = solve(&env, &GridConfig::default(), &DinkelbachConfig::default(), kind).unwrap();
            assert!(res.schedule.is_empty(), "{kind}: {:?}", res.schedule);
        }
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let env = two_segment();
        let grid = crate::dag::build_candidate_times(&env, 3.0, 1.0, 3.0).unwrap();
        let dag = build_dag(&env, &grid, 90.0);
        let cold = delta_p_on_dag(&env, &dag, &DinkelbachConfig::default(), None).unwrap();
        let warm_cfg = DinkelbachConfig { warm_start: true, ..Default::default() };
        let warm = delta_p_on_dag(&env, &dag, &warm_cfg, None).unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-12);
    }
}
