//! Candidate-time grid and the feasibility DAG whose source-to-sink paths are
//! exactly the feasible schedules on that grid.
//!
//! Vertices `0..n` are grid times (vertex 0 is `t = 0`); vertex `n` is a
//! virtual sink reached only by terminal edges. An update edge `u -> v` means
//! "the next refresh completes at `v`"; a terminal edge `u -> sink` means "no
//! further refresh after `u`".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficacy::{integrate_unchecked, PathStats};
use crate::environment::Environment;
use crate::TIME_EPS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DagError {
    #[error("bad grid spec: {0}")]
    BadGridSpec(String),
    #[error("infeasible edge {u} -> {v}: {why}")]
    InfeasibleEdge { u: f64, v: f64, why: String },
}

/// Local refinement applied once around a first-pass solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub window: f64,
    pub step: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { window: 6.0, step: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub coarse_step: f64,
    pub fine_step: f64,
    pub fine_window: f64,
    /// Longest allowed gap between consecutive completions.
    pub max_span: f64,
    pub refine: Option<RefineConfig>,
    /// Extra candidate times merged into the grid.
    pub extra_times: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            coarse_step: 5.0,
            fine_step: 0.25,
            fine_window: 12.0,
            max_span: 90.0,
            refine: Some(RefineConfig::default()),
            extra_times: Vec::new(),
        }
    }
}

/// Sorted, deduplicated candidate times containing 0, every boundary and
/// `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateGrid {
    times: Vec<f64>,
}

impl CandidateGrid {
    /// Builds a grid from explicit times; 0, boundaries and `t_end` are added.
    pub fn from_times(env: &Environment, times: &[f64]) -> Result<Self, DagError> {
        let t_end = env.t_end();
        if let Some(bad) = times.iter().find(|t| !(**t >= -TIME_EPS && **t <= t_end + TIME_EPS)) {
            return Err(DagError::BadGridSpec(format!("time {bad} outside [0, {t_end}]")));
        }
        let anchors = anchors(env);
        let mut pts: Vec<f64> = times.iter().map(|t| t.clamp(0.0, t_end)).collect();
        pts.extend_from_slice(&anchors);
        Ok(CandidateGrid { times: normalize(pts, &anchors) })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

fn anchors(env: &Environment) -> Vec<f64> {
    let mut a = vec![0.0];
    a.extend(env.boundaries());
    a.push(env.t_end());
    a
}

/// Snaps points within `TIME_EPS` of an anchor onto it, sorts, and merges
/// near-duplicates. `anchors` must be sorted.
fn normalize(mut pts: Vec<f64>, anchors: &[f64]) -> Vec<f64> {
    for p in pts.iter_mut() {
        let i = anchors.partition_point(|a| *a < *p);
        for k in [i.wrapping_sub(1), i] {
            if let Some(&a) = anchors.get(k) {
                if (a - *p).abs() <= TIME_EPS {
                    *p = a;
                }
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|next, kept| *next - *kept <= TIME_EPS);
    pts
}

fn lattice(center: f64, window: f64, step: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let m = (window / step + 1e-9).floor() as i64;
    for k in -m..=m {
        let p = center + k as f64 * step;
        if p >= lo - TIME_EPS && p <= hi + TIME_EPS {
            out.push(p.clamp(lo, hi));
        }
    }
}

fn check_step(name: &str, v: f64) -> Result<(), DagError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(DagError::BadGridSpec(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Hierarchical grid: a uniform coarse mesh plus a fine mesh within
/// `fine_window` of 0, every boundary and `t_end`.
pub fn build_candidate_times(
    env: &Environment,
    coarse_step: f64,
    fine_step: f64,
    fine_window: f64,
) -> Result<CandidateGrid, DagError> {
    check_step("coarse_step", coarse_step)?;
    check_step("fine_step", fine_step)?;
    if !(fine_window >= 0.0 && fine_window.is_finite()) {
        return Err(DagError::BadGridSpec(format!("fine_window {fine_window} must be >= 0")));
    }
    let t_end = env.t_end();
    let anchors = anchors(env);
    let n = (t_end / coarse_step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|k| (k as f64 * coarse_step).min(t_end)).collect();
    for &a in &anchors {
        lattice(a, fine_window, fine_step, 0.0, t_end, &mut pts);
    }
    pts.extend_from_slice(&anchors);
    Ok(CandidateGrid { times: normalize(pts, &anchors) })
}

/// Grid per `cfg`, with `cfg.extra_times` merged in.
pub fn grid_from_config(env: &Environment, cfg: &GridConfig) -> Result<CandidateGrid, DagError> {
    let grid = build_candidate_times(env, cfg.coarse_step, cfg.fine_step, cfg.fine_window)?;
    if cfg.extra_times.is_empty() {
        return Ok(grid);
    }
    let mut pts = grid.times.clone();
    pts.extend(cfg.extra_times.iter().copied());
    CandidateGrid::from_times(env, &pts)
}

/// Adds a `step` lattice within `window` of each anchor, clipped to the
/// horizon. Existing grid times are preserved exactly.
pub fn refine_grid(
    grid: &CandidateGrid,
    around: &[f64],
    window: f64,
    step: f64,
) -> Result<CandidateGrid, DagError> {
    check_step("refine step", step)?;
    if !(window >= 0.0 && window.is_finite()) {
        return Err(DagError::BadGridSpec(format!("refine window {window} must be >= 0")));
    }
    if around.is_empty() {
        return Ok(grid.clone());
    }
    let t_end = grid.t_end();
    let mut pts = grid.times.clone();
    for &a in around {
        lattice(a, window, step, 0.0, t_end, &mut pts);
    }
    Ok(CandidateGrid { times: normalize(pts, &grid.times) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Update,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    #[serde(rename = "dF")]
    pub df: f64,
    #[serde(rename = "dG")]
    pub dg: f64,
    #[serde(rename = "dC")]
    pub dc: f64,
}

impl Edge {
    pub fn increments(&self) -> PathStats {
        PathStats { f: self.df, g: self.dg, c: self.dc }
    }
}

/// Rounds to a 1e-12 lattice so equal closed forms compare equal.
#[inline]
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `(dF, dG, dC)` of an update edge `u -> v` or a terminal edge `u -> t_end`.
pub fn edge_increments(
    env: &Environment,
    u: f64,
    v: f64,
    kind: EdgeKind,
) -> Result<PathStats, DagError> {
    let t_end = env.t_end();
    if !(u >= -TIME_EPS && u <= t_end + TIME_EPS) {
        return Err(DagError::InfeasibleEdge { u, v, why: "source outside horizon".into() });
    }
    match kind {
        EdgeKind::Update => {
            if !(v > u && v <= t_end + TIME_EPS) {
                return Err(DagError::InfeasibleEdge { u, v, why: "target not after source".into() });
            }
            let d = env.downtime_unchecked(v);
            if v - u < d - TIME_EPS {
                return Err(DagError::InfeasibleEdge {
                    u,
                    v,
                    why: format!("gap {} shorter than downtime {d}", v - u),
                });
            }
            Ok(update_increments(env, u, v))
        }
        EdgeKind::Terminal => {
            if (v - t_end).abs() > TIME_EPS {
                return Err(DagError::InfeasibleEdge { u, v, why: "terminal edge must end at t_end".into() });
            }
            Ok(terminal_increments(env, u))
        }
    }
}

fn update_increments(env: &Environment, u: f64, v: f64) -> PathStats {
    let start = (v - env.downtime_unchecked(v)).max(u);
    PathStats {
        f: integrate_unchecked(env, u, u, start),
        g: start - u,
        c: env.cost_unchecked(v),
    }
}

fn terminal_increments(env: &Environment, u: f64) -> PathStats {
    PathStats {
        f: integrate_unchecked(env, u, u, env.t_end()),
        g: env.t_end() - u,
        c: 0.0,
    }
}

/// Efficacy integrals from a refresh completing at `u` to many later points.
/// Whole segments are summed once, in the same order as
/// `integrate_unchecked`, so both give identical values.
struct RefreshIntegrals {
    u: f64,
    first: usize,
    pieces: Vec<Piece>,
}

/// One segment's share of the integral after `u`.
struct Piece {
    /// Integral over whole segments before this one.
    before: f64,
    loss: f64,
    start: f64,
    eta: f64,
    lambda: f64,
    /// `(1 - eta) / lambda * exp(-lambda (start - u))`.
    coef: f64,
}

impl RefreshIntegrals {
    fn new(env: &Environment, u: f64) -> Self {
        let segs = env.segments();
        let first = env.index_of(u);
        let mut pieces = Vec::with_capacity(segs.len() - first);
        let (mut total, mut loss, mut lo) = (0.0, 1.0, u);
        for j in first..segs.len() {
            let decay = segs[j].decay;
            let lambda = decay.lambda();
            pieces.push(Piece {
                before: total,
                loss,
                start: lo,
                eta: decay.eta,
                lambda,
                coef: (1.0 - decay.eta) / lambda * (-lambda * (lo - u)).exp(),
            });
            if j + 1 < segs.len() {
                let hi = segs[j].end;
                if hi > lo {
                    total += loss * decay.integral(lo - u, hi - u);
                }
                loss *= segs[j + 1].entry_shock;
                lo = hi;
            }
        }
        RefreshIntegrals { u, first, pieces }
    }

    /// Integral over `[u, b]`; `j` is the segment index of `b`. Same
    /// arithmetic as `DecayParams::integral`.
    fn to(&self, b: f64, j: usize) -> f64 {
        if b <= self.u {
            return 0.0;
        }
        let p = &self.pieces[j - self.first];
        if b <= p.start {
            return p.before;
        }
        let width = (b - self.u) - (p.start - self.u);
        p.before + p.loss * (p.eta * width + p.coef * -(-p.lambda * width).exp_m1())
    }
}

/// Immutable DAG with edges grouped by source vertex (CSR layout).
#[derive(Debug, Clone, Serialize)]
pub struct Dag {
    grid: CandidateGrid,
    edges: Vec<Edge>,
    #[serde(skip)]
    offsets: Vec<usize>,
    sink: usize,
}

impl Dag {
    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.sink + 1
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Time of a vertex; the sink reports `t_end`.
    pub fn time(&self, v: usize) -> f64 {
        self.grid.times[v.min(self.sink - 1)]
    }

    /// Edge ids leaving `u`, update edges by ascending target, terminal last.
    pub fn out_edge_ids(&self, u: usize) -> std::ops::Range<usize> {
        if u >= self.sink {
            return 0..0;
        }
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn out_edges(&self, u: usize) -> &[Edge] {
        &self.edges[self.out_edge_ids(u)]
    }

    pub fn num_update_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Update).count()
    }

    /// Edge ids entering each vertex, ordered by source.
    pub fn in_edge_ids(&self) -> Vec<Vec<u32>> {
        let mut incoming = vec![Vec::new(); self.num_vertices()];
        for (id, e) in self.edges.iter().enumerate() {
            incoming[e.to].push(id as u32);
        }
        incoming
    }

    /// Completion times along an edge path.
    pub fn schedule_of(&self, edge_ids: &[usize]) -> Vec<f64> {
        edge_ids
            .iter()
            .map(|&id| self.edges[id])
            .filter(|e| e.kind == EdgeKind::Update)
            .map(|e| self.grid.times[e.to])
            .collect()
    }
}

pub fn build_dag(env: &Environment, grid: &CandidateGrid, max_span: f64) -> Dag {
    build_dag_with(env, grid, max_span, |_, _| true)
}

/// Like [`build_dag`], with an extra predicate on update edges `(u, v)`
/// (e.g. to forbid completions in given windows).
pub fn build_dag_with<F>(env: &Environment, grid: &CandidateGrid, max_span: f64, admit: F) -> Dag
where
    F: Fn(f64, f64) -> bool + Sync,
{
    let times = grid.times();
    let n = times.len();
    let downtime: Vec<f64> = times.iter().map(|&v| env.downtime_unchecked(v)).collect();
    let cost: Vec<f64> = times.iter().map(|&v| env.cost_unchecked(v)).collect();
    let starts: Vec<(f64, usize)> = times
        .iter()
        .zip(&downtime)
        .map(|(&v, &d)| (v - d, env.index_of(v - d)))
        .collect();
    let last = env.num_segments() - 1;
    let per_source: Vec<Vec<Edge>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = times[i];
            let from_u = RefreshIntegrals::new(env, u);
            let reach = times.partition_point(|&t| t - u <= max_span + TIME_EPS);
            let mut out = Vec::with_capacity(reach.saturating_sub(i) + 1);
            for (k, &v) in times.iter().enumerate().skip(i + 1) {
                if v - u > max_span + TIME_EPS {
                    break;
                }
                if v - u < downtime[k] - TIME_EPS || !admit(u, v) {
                    continue;
                }
                let (s, js) = starts[k];
                let (f, g) = if s > u { (from_u.to(s, js), s - u) } else { (0.0, 0.0) };
                out.push(Edge {
                    from: i,
                    to: k,
                    kind: EdgeKind::Update,
                    df: round12(f),
                    dg: round12(g),
                    dc: round12(cost[k]),
                });
            }
            out.push(Edge {
                from: i,
                to: n,
                kind: EdgeKind::Terminal,
                df: round12(from_u.to(env.t_end(), last)),
                dg: round12(env.t_end() - u),
                dc: 0.0,
            });
            out
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut edges = Vec::with_capacity(per_source.iter().map(Vec::len).sum());
    offsets.push(0);
    for list in per_source {
        edges.extend(list);
        offsets.push(edges.len());
    }
    Dag { grid: grid.clone(), edges, offsets, sink: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, DecayParams, Segment};
    use std::f64::consts::LN_2;

    fn single(t_end: f64, d: f64) -> Environment {
        build_environment(
            vec![Segment {
                start: 0.0,
                end: t_end,
                decay: DecayParams { eta: 0.0, t_half: LN_2 },
                entry_shock: 1.0,
                downtime: d,
                cost: 0.1,
            }],
            t_end,
        )
        .unwrap()
    }

    fn six_segments() -> Environment {
        let b = [0.0, 37.3, 88.1, 140.0, 201.7, 255.55, 300.0];
        let segs = b
            .windows(2)
            .map(|w| Segment {
                start: w[0],
                end: w[1],
                decay: DecayParams { eta: 0.1, t_half: 4.0 },
                entry_shock: 0.4,
                downtime: 1.0,
                cost: 0.1,
            })
            .collect();
        build_environment(segs, 300.0).unwrap()
    }

    fn update_pairs(dag: &Dag) -> Vec<(f64, f64)> {
        dag.edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Update)
            .map(|e| (dag.time(e.from), dag.time(e.to)))
            .collect()
    }

    #[test]
    fn coarse_only_grid() {
        let env = single(12.0, 2.0);
        let g = build_candidate_times(&env, 3.0, 0.25, 0.0).unwrap();
        assert_eq!(g.times(), &[0.0, 3.0, 6.0, 9.0, 12.0]);
    }

    #[test]
    fn default_grid_contains_boundaries_exactly() {
        let env = six_segments();
        let g = build_candidate_times(&env, 5.0, 0.25, 12.0).unwrap();
        for b in env.boundaries() {
            assert!(g.times().contains(&b), "{b}");
        }
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.t_end(), 300.0);
        assert!(g.times().windows(2).all(|w| w[1] - w[0] > TIME_EPS));
    }

    #[test]
    fn bad_grid_specs() {
        let env = single(12.0, 2.0);
        assert!(build_candidate_times(&env, 0.0, 0.25, 1.0).is_err());
        assert!(build_candidate_times(&env, 1.0, -0.25, 1.0).is_err());
        assert!(build_candidate_times(&env, 1.0, 0.25, -1.0).is_err());
        let g = build_candidate_times(&env, 3.0, 0.25, 0.0).unwrap();
        assert!(refine_grid(&g, &[5.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn refinement() {
        let env = single(12.0, 2.0);
        let g = build_candidate_times(&env, 3.0, 0.25, 0.0).unwrap();
        assert_eq!(refine_grid(&g, &[], 6.0, 0.2).unwrap(), g);
        let r = refine_grid(&g, &[0.3, 6.0], 1.0, 0.2).unwrap();
        assert!(g.times().iter().all(|t| r.times().contains(t)));
        assert!(r.times().iter().all(|t| *t >= 0.0 && *t <= 12.0));
        assert!(r.len() > g.len());
        assert!(r.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn worked_example_edges() {
        let env = single(12.0, 2.0);
        let grid = CandidateGrid::from_times(&env, &[0.0, 2.0, 5.0, 9.0, 12.0]).unwrap();
        let dag = build_dag(&env, &grid, f64::INFINITY);
        let expect = vec![
            (0.0, 2.0),
            (0.0, 5.0),
            (0.0, 9.0),
            (0.0, 12.0),
            (2.0, 5.0),
            (2.0, 9.0),
            (2.0, 12.0),
            (5.0, 9.0),
            (5.0, 12.0),
            (9.0, 12.0),
        ];
        assert_eq!(update_pairs(&dag), expect);
        for u in 0..grid.len() {
            let last = dag.out_edges(u).last().unwrap();
            assert_eq!(last.kind, EdgeKind::Terminal);
            assert_eq!(last.to, dag.sink());
        }
        let spanned = build_dag(&env, &grid, 3.0);
        assert_eq!(update_pairs(&spanned), vec![(0.0, 2.0), (2.0, 5.0), (9.0, 12.0)]);
    }

    #[test]
    fn downtime_longer_than_horizon() {
        let env = single(1.0, 5.0);
        let grid = CandidateGrid::from_times(&env, &[]).unwrap();
        assert_eq!(grid.times(), &[0.0, 1.0]);
        let dag = build_dag(&env, &grid, f64::INFINITY);
        assert_eq!(dag.num_update_edges(), 0);
        assert_eq!(dag.out_edges(0).len(), 1);
    }

    #[test]
    fn increments() {
        let env = single(12.0, 2.0);
        let inc = edge_increments(&env, 0.0, 5.0, EdgeKind::Update).unwrap();
        assert!((inc.f - (1.0 - (-3.0f64).exp())).abs() < 1e-14);
        assert!((inc.f - 0.95021).abs() < 1e-5);
        assert_eq!(inc.g, 3.0);
        assert_eq!(inc.c, 0.1);
        let back = edge_increments(&env, 3.0, 5.0, EdgeKind::Update).unwrap();
        assert_eq!((back.f, back.g, back.c), (0.0, 0.0, 0.1));
        let term = edge_increments(&env, 12.0, 12.0, EdgeKind::Terminal).unwrap();
        assert_eq!(term, PathStats::ZERO);
        assert!(edge_increments(&env, 4.0, 5.0, EdgeKind::Update).is_err());
        assert!(edge_increments(&env, 4.0, 11.0, EdgeKind::Terminal).is_err());
    }

    #[test]
    fn span_filter_never_adds_edges() {
        let env = six_segments();
        let grid = build_candidate_times(&env, 5.0, 0.25, 12.0).unwrap();
        let mut prev = usize::MAX;
        for span in [300.0, 90.0, 30.0, 5.0] {
            let n = build_dag(&env, &grid, span).num_update_edges();
            assert!(n <= prev);
            prev = n;
        }
    }
}
