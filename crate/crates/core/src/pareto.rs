//! Label-correcting multi-criteria DP over the schedule DAG.
//!
//! Labels carry `(F, G, C)`; `a` dominates `b` when `a.G <= b.G`,
//! `a.C <= b.C` and `a.F >= b.F` with at least one strict inequality. The DP
//! visits vertices in time order and keeps a mutually non-dominated set per
//! vertex, with backpointers for schedule recovery.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Dag, EdgeKind};
use crate::efficacy::{PathStats, Schedule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParetoError {
    #[error("frontier is empty")]
    EmptyFrontier,
    #[error("corrupt backpointer at label {0}")]
    CorruptBackpointer(usize),
}

pub fn dominates(a: &PathStats, b: &PathStats) -> bool {
    let weak = a.g <= b.g && a.c <= b.c && a.f >= b.f;
    weak && (a.g < b.g || a.c < b.c || a.f > b.f)
}

/// Dominance or equality.
#[inline]
fn covers(a: &PathStats, b: &PathStats) -> bool {
    a.g <= b.g && a.c <= b.c && a.f >= b.f
}

/// `a` epsilon-dominates `b`.
pub fn eps_dominates(a: &PathStats, b: &PathStats, eps: f64) -> bool {
    a.f >= (1.0 - eps) * b.f && a.g <= (1.0 + eps) * b.g && a.c <= (1.0 + eps) * b.c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BackPointer {
    Source,
    /// Predecessor label id (in the owning [`ParetoTable`]) and edge id.
    Edge { pred: usize, edge: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Label {
    pub stats: PathStats,
    pub back: BackPointer,
}

/// Mutually non-dominated labels, ordered by `G` ascending (then `C`
/// ascending, `F` descending).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frontier {
    labels: Vec<Label>,
}

fn layout_order(a: &PathStats, b: &PathStats) -> std::cmp::Ordering {
    a.g.total_cmp(&b.g)
        .then(a.c.total_cmp(&b.c))
        .then(b.f.total_cmp(&a.f))
}

impl Frontier {
    pub fn new() -> Self {
        Frontier::default()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Inserts `label` unless an existing label dominates or equals it;
    /// evicts the labels it dominates. Returns whether it was inserted.
    pub fn insert_nondominated(&mut self, label: Label) -> bool {
        if self.labels.iter().any(|l| covers(&l.stats, &label.stats)) {
            return false;
        }
        self.labels.retain(|l| !dominates(&label.stats, &l.stats));
        let pos = self
            .labels
            .partition_point(|l| layout_order(&l.stats, &label.stats).is_le());
        self.labels.insert(pos, label);
        true
    }

    /// Greedy sweep in layout order: a label is dropped when an already
    /// retained label epsilon-dominates it.
    pub fn epsilon_prune(&self, eps: f64) -> Frontier {
        Frontier { labels: eps_sweep(&self.labels, eps, |l| l.stats) }
    }
}

fn eps_sweep<T: Clone>(items: &[T], eps: f64, stats: impl Fn(&T) -> PathStats) -> Vec<T> {
    let mut kept: Vec<T> = Vec::with_capacity(items.len());
    for it in items {
        let s = stats(it);
        if !kept.iter().any(|k| eps_dominates(&stats(k), &s, eps)) {
            kept.push(it.clone());
        }
    }
    kept
}

/// Score `H F - G (C + (lambda - mu) H)`.
#[inline]
pub fn score(stats: &PathStats, lambda: f64, mu: f64, h: f64) -> f64 {
    h * stats.f - stats.g * (stats.c + (lambda - mu) * h)
}

/// Index of the label maximizing the score; ties prefer smaller `C`, then
/// larger `G`, then the earlier label.
pub fn select_best(
    stats: impl IntoIterator<Item = PathStats>,
    lambda: f64,
    mu: f64,
    h: f64,
) -> Result<usize, ParetoError> {
    let mut best: Option<(usize, f64, PathStats)> = None;
    for (i, s) in stats.into_iter().enumerate() {
        let sc = score(&s, lambda, mu, h);
        let better = match &best {
            None => true,
            Some((_, bs, b)) => {
                sc > *bs || (sc == *bs && (s.c < b.c || (s.c == b.c && s.g > b.g)))
            }
        };
        if better {
            best = Some((i, sc, s));
        }
    }
    best.map(|b| b.0).ok_or(ParetoError::EmptyFrontier)
}

#[derive(Debug, Clone, Default)]
pub struct ParetoConfig {
    /// Epsilon-dominance applied once per vertex; 0 keeps the exact frontier.
    pub eps: f64,
    /// Optional per-vertex cap. Breaks exactness when it binds.
    pub max_labels: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    stats: PathStats,
    pred: u32,
    edge: u32,
}

const NO_PRED: u32 = u32::MAX;

/// Frontiers of every vertex plus the label arena behind their backpointers.
#[derive(Debug, Clone)]
pub struct ParetoTable {
    nodes: Vec<Node>,
    per_vertex: Vec<Vec<u32>>,
    sink: usize,
}

impl ParetoTable {
    pub fn label(&self, id: usize) -> Label {
        let n = self.nodes[id];
        let back = if n.pred == NO_PRED {
            BackPointer::Source
        } else {
            BackPointer::Edge { pred: n.pred as usize, edge: n.edge as usize }
        };
        Label { stats: n.stats, back }
    }

    pub fn stats(&self, id: usize) -> PathStats {
        self.nodes[id].stats
    }

    /// Label ids retained at `v`, in layout order.
    pub fn frontier_ids(&self, v: usize) -> &[u32] {
        &self.per_vertex[v]
    }

    pub fn sink_ids(&self) -> &[u32] {
        &self.per_vertex[self.sink]
    }

    pub fn frontier(&self, v: usize) -> Frontier {
        Frontier { labels: self.per_vertex[v].iter().map(|&i| self.label(i as usize)).collect() }
    }

    pub fn sink_frontier(&self) -> Frontier {
        self.frontier(self.sink)
    }

    pub fn total_labels(&self) -> usize {
        self.per_vertex.iter().map(Vec::len).sum()
    }

    pub fn max_frontier(&self) -> usize {
        self.per_vertex.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge ids from the source to label `id`.
    pub fn edge_path(&self, id: usize, dag: &Dag) -> Result<Vec<usize>, ParetoError> {
        let mut path = Vec::new();
        let mut cur = id;
        loop {
            let node = self.nodes.get(cur).ok_or(ParetoError::CorruptBackpointer(cur))?;
            if node.pred == NO_PRED {
                break;
            }
            let pred = node.pred as usize;
            if node.edge as usize >= dag.edges().len() || pred >= cur {
                return Err(ParetoError::CorruptBackpointer(cur));
            }
            path.push(node.edge as usize);
            cur = pred;
        }
        path.reverse();
        Ok(path)
    }

    /// Completion times along the backpointer chain of label `id`.
    pub fn recover_schedule(&self, id: usize, dag: &Dag) -> Result<Schedule, ParetoError> {
        let path = self.edge_path(id, dag)?;
        let times = path
            .iter()
            .map(|&e| dag.edges()[e])
            .filter(|e| e.kind == EdgeKind::Update)
            .map(|e| dag.time(e.to))
            .collect();
        Ok(Schedule::new(times))
    }
}

/// Maximal `(C, F)` staircase of accepted labels: F strictly increases with C.
struct Staircase {
    steps: BTreeMap<u64, f64>,
}

impl Staircase {
    fn new() -> Self {
        Staircase { steps: BTreeMap::new() }
    }

    // Non-negative floats order like their bit patterns.
    #[inline]
    fn key(c: f64) -> u64 {
        (c + 0.0).to_bits()
    }

    /// True when an accepted label has `C' <= c` and `F' >= f`.
    fn covered(&self, c: f64, f: f64) -> bool {
        self.steps
            .range(..=Self::key(c))
            .next_back()
            .is_some_and(|(_, &best)| best >= f)
    }

    fn insert(&mut self, c: f64, f: f64) {
        let k = Self::key(c);
        let doomed: Vec<u64> = self
            .steps
            .range(k..)
            .take_while(|(_, &v)| v <= f)
            .map(|(&kk, _)| kk)
            .collect();
        for kk in doomed {
            self.steps.remove(&kk);
        }
        self.steps.insert(k, f);
    }
}

/// Keeps the candidates not covered by an earlier (in layout order, then
/// arrival order) candidate. Returns indices into `cands`.
fn pareto_filter(cands: &[PathStats]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| layout_order(&cands[a], &cands[b]).then(a.cmp(&b)));
    let mut stairs = Staircase::new();
    let mut kept = Vec::new();
    for i in order {
        let s = &cands[i];
        if stairs.covered(s.c, s.f) {
            continue;
        }
        stairs.insert(s.c, s.f);
        kept.push(i);
    }
    kept
}

/// Multi-criteria DP. With `eps = 0` and no cap, the sink frontier is the
/// exact Pareto frontier over all source-to-sink paths.
pub fn pareto_frontier_dp(dag: &Dag, cfg: &ParetoConfig) -> ParetoTable {
    pareto_frontier_dp_filtered(dag, cfg, |_, _| true)
}

/// As [`pareto_frontier_dp`], additionally discarding labels for which
/// `keep(vertex, stats)` is false.
pub fn pareto_frontier_dp_filtered<K>(dag: &Dag, cfg: &ParetoConfig, keep: K) -> ParetoTable
where
    K: Fn(usize, &PathStats) -> bool,
{
    let nv = dag.num_vertices();
    let incoming = dag.in_edge_ids();
    let edges = dag.edges();
    let mut nodes = vec![Node { stats: PathStats::ZERO, pred: NO_PRED, edge: 0 }];
    let mut per_vertex: Vec<Vec<u32>> = vec![Vec::new(); nv];
    per_vertex[0].push(0);

    let mut cand_stats: Vec<PathStats> = Vec::new();
    let mut cand_origin: Vec<(u32, u32)> = Vec::new();
    for v in 1..nv {
        cand_stats.clear();
        cand_origin.clear();
        for &eid in &incoming[v] {
            let e = &edges[eid as usize];
            let inc = e.increments();
            for &lid in &per_vertex[e.from] {
                let s = nodes[lid as usize].stats + inc;
                if keep(v, &s) {
                    cand_stats.push(s);
                    cand_origin.push((lid, eid));
                }
            }
        }
        if cand_stats.is_empty() {
            continue;
        }
        let mut kept = pareto_filter(&cand_stats);
        if cfg.eps > 0.0 {
            kept = eps_sweep(&kept, cfg.eps, |&i| cand_stats[i]);
        }
        if let Some(cap) = cfg.max_labels {
            if kept.len() > cap {
                let h = dag.time(dag.sink()).max(1.0);
                let value = |i: usize| {
                    let s = &cand_stats[i];
                    if s.g > 0.0 { s.f / s.g - s.c / h } else { f64::NEG_INFINITY }
                };
                let mut ranked = kept.clone();
                ranked.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));
                ranked.truncate(cap);
                ranked.sort_by(|&a, &b| layout_order(&cand_stats[a], &cand_stats[b]).then(a.cmp(&b)));
                kept = ranked;
            }
        }
        let slot = &mut per_vertex[v];
        for i in kept {
            let (pred, edge) = cand_origin[i];
            slot.push(nodes.len() as u32);
            nodes.push(Node { stats: cand_stats[i], pred, edge });
        }
    }
    ParetoTable { nodes, per_vertex, sink: dag.sink() }
}
