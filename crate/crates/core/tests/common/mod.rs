#![allow(dead_code)]

use refresh_sched::dag::Dag;
use refresh_sched::{sample_environment, EnvType, Environment, PathStats, ScenarioSpec};

pub const TYPES: [EnvType; 3] = [EnvType::A, EnvType::B, EnvType::C];

pub fn env(env_type: EnvType, num_segments: usize, t_end: f64, seed: u64) -> Environment {
    sample_environment(&ScenarioSpec { env_type, num_segments, t_end, seed }).unwrap()
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature, split at `breaks` so each piece is smooth.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 1e-12 {
            continue;
        }
        // Stay strictly inside the piece so the integrand's branch does not flip.
        let (lo_i, hi_i) = (lo + 1e-12, hi - 1e-12);
        let fa = f(lo_i);
        let fb = f(hi_i);
        let fm = f(0.5 * (lo_i + hi_i));
        let whole = simpson(fa, fm, fb, lo_i, hi_i);
        total += adapt(&f, lo_i, hi_i, fa, fm, fb, whole, tol, 50);
        // Endpoint slivers of width 1e-12 each.
        total += 1e-12 * (fa + fb);
    }
    total
}

/// Every source-to-sink path as (edge ids, summed stats).
pub fn all_paths(dag: &Dag) -> Vec<(Vec<usize>, PathStats)> {
    fn walk(dag: &Dag, v: usize, ids: &mut Vec<usize>, s: PathStats, out: &mut Vec<(Vec<usize>, PathStats)>) {
        if v == dag.sink() {
            out.push((ids.clone(), s));
            return;
        }
        for eid in dag.out_edge_ids(v) {
            let e = &dag.edges()[eid];
            ids.push(eid);
            walk(dag, e.to, ids, s + e.increments(), out);
            ids.pop();
        }
    }
    let mut out = Vec::new();
    walk(dag, dag.source(), &mut Vec::new(), PathStats::ZERO, &mut out);
    out
}

/// `a` is at least as good as `b` in every criterion, up to `tol`.
pub fn covers_within(a: &PathStats, b: &PathStats, tol: f64) -> bool {
    a.f >= b.f - tol && a.g <= b.g + tol && a.c <= b.c + tol
}
