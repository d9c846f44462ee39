//! Linearized inner solve: replace `G C` by its first-order expansion around
//! `(G_k, C_k)`, which makes the score additive over edges.

use serde::Serialize;

use super::{empty_candidate, phi, Candidate, DinkelbachConfig};
use crate::dag::{Dag, Edge};
use crate::efficacy::{PathStats, G_FLOOR_FRACTION};

/// `H dF - (C_k + (lambda - mu) H) dG - G_k dC`.
#[inline]
pub fn tl_edge_weight(edge: &Edge, h: f64, lambda: f64, mu: f64, g_k: f64, c_k: f64) -> f64 {
    h * edge.df - (c_k + (lambda - mu) * h) * edge.dg - g_k * edge.dc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongestPath {
    /// Edge ids from source to sink.
    pub edges: Vec<usize>,
    pub value: f64,
}

/// Scratch buffers plus a compact copy of the edge data for the inner loop.
pub(crate) struct Workspace {
    heads: Vec<u32>,
    incs: Vec<[f64; 3]>,
    best: Vec<f64>,
    back: Vec<usize>,
}

impl Workspace {
    pub(crate) fn new(dag: &Dag) -> Self {
        Workspace {
            heads: dag.edges().iter().map(|e| e.to as u32).collect(),
            incs: dag.edges().iter().map(|e| [e.df, e.dg, e.dc]).collect(),
            best: vec![f64::NEG_INFINITY; dag.num_vertices()],
            back: vec![usize::MAX; dag.num_vertices()],
        }
    }

    /// Longest path under the `tl_edge_weight` weights, computed on the fly.
    fn relax_linear(&mut self, dag: &Dag, h: f64, lambda: f64, mu: f64, g_k: f64, c_k: f64) -> LongestPath {
        let a = c_k + (lambda - mu) * h;
        let (heads, incs) = (&self.heads, &self.incs);
        relax_with(dag, &mut self.best, &mut self.back, |eid| {
            let [df, dg, dc] = incs[eid];
            (heads[eid] as usize, h * df - a * dg - g_k * dc)
        })
    }
}

/// Maximum-weight source-to-sink path. Among equal values the earlier
/// predecessor vertex wins (then the earlier edge).
pub fn longest_path(dag: &Dag, weights: &[f64]) -> LongestPath {
    let mut best = vec![f64::NEG_INFINITY; dag.num_vertices()];
    let mut back = vec![usize::MAX; dag.num_vertices()];
    relax(dag, weights, &mut best, &mut back)
}

fn relax(dag: &Dag, weights: &[f64], best: &mut [f64], back: &mut [usize]) -> LongestPath {
    assert_eq!(weights.len(), dag.edges().len(), "one weight per edge");
    let edges = dag.edges();
    relax_with(dag, best, back, |eid| (edges[eid].to, weights[eid]))
}

/// `edge(eid)` returns the edge's head and weight.
fn relax_with<W>(dag: &Dag, best: &mut [f64], back: &mut [usize], edge: W) -> LongestPath
where
    W: Fn(usize) -> (usize, f64),
{
    best.fill(f64::NEG_INFINITY);
    back.fill(usize::MAX);
    best[dag.source()] = 0.0;
    for u in 0..dag.sink() {
        let bu = best[u];
        if bu == f64::NEG_INFINITY {
            continue;
        }
        for eid in dag.out_edge_ids(u) {
            let (to, w) = edge(eid);
            let cand = bu + w;
            if cand > best[to] {
                best[to] = cand;
                back[to] = eid;
            }
        }
    }
    let edges = dag.edges();
    let mut path = Vec::new();
    let mut v = dag.sink();
    while v != dag.source() {
        let eid = back[v];
        path.push(eid);
        v = edges[eid].from;
    }
    path.reverse();
    LongestPath { edges: path, value: best[dag.sink()] }
}

fn sum_stats(dag: &Dag, edges: &[usize]) -> PathStats {
    super::path_stats(dag, edges)
}

/// Inner loop for one outer step: cold start at `(G, C) = (0, 0)`, reweight,
/// solve, re-expand around the new path until the residual settles, the path
/// repeats, or `inner_max` is hit. The incumbent is kept unless beaten.
pub(crate) fn tl_inner(
    dag: &Dag,
    h: f64,
    lambda: f64,
    mu: f64,
    cfg: &DinkelbachConfig,
    incumbent: Option<&Candidate>,
    ws: &mut Workspace,
) -> Candidate {
    let floor = G_FLOOR_FRACTION * h;
    let (mut g_k, mut c_k) = (0.0, 0.0);
    let mut prev: Option<(Vec<usize>, f64)> = None;
    let mut best: Option<(f64, Candidate)> = None;
    for _ in 0..cfg.inner_max {
        let lp = ws.relax_linear(dag, h, lambda, mu, g_k, c_k);
        let stats = sum_stats(dag, &lp.edges);
        let value = phi(&stats, h, lambda, mu);
        if stats.g >= floor && best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, Candidate { edges: lp.edges.clone(), stats }));
        }
        if let Some((p_edges, p_val)) = &prev {
            if *p_edges == lp.edges || (value - p_val).abs() < cfg.inner_tol {
                break;
            }
        }
        g_k = stats.g;
        c_k = stats.c;
        prev = Some((lp.edges, value));
    }
    let found = best.map(|(_, c)| c);
    match (found, incumbent) {
        (Some(c), Some(inc)) => {
            if phi(&c.stats, h, lambda, mu) > phi(&inc.stats, h, lambda, mu) {
                c
            } else {
                inc.clone()
            }
        }
        (Some(c), None) => c,
        (None, Some(inc)) => inc.clone(),
        (None, None) => empty_candidate(dag),
    }
}
