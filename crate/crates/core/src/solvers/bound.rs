//! Upper bounds on the best completion of a partial path, used to discard
//! frontier labels that cannot reach a known objective `J_lb`.
//!
//! A completed path has `J >= J_lb` iff `H F - G C - J_lb H G >= 0`. For a
//! prefix `(F, G, C)` ending at `v` and a suffix `(dF, dG, dC)`, with
//! `dG >= m_g` and `dC >= m_c`,
//!
//! ```text
//! (G+dG)(C+dC) >= G C + (G + m_g) dC + (C + m_c) dG - m_g m_c
//! ```
//!
//! so the objective is at most
//! `H F - G C - J_lb H G + m_g m_c + max_suffix [H dF - (c + J_lb H) dG - b dC]`
//! with `b = G + m_g`, `c = C + m_c`. The suffix maximum is tabulated by a
//! backward longest-path pass for a grid of `(b, c)` levels.
//!
//! Suffixes are grouped by their downtime `Y` into classes `[lo, hi]` of the
//! time `R_v` left after `v`. Within a class `dG = R_v - Y >= R_v - hi` and
//! `dC >= rho lo`, `rho` being the smallest cost per minute of downtime.

use crate::dag::Dag;
use crate::efficacy::PathStats;

const G_LEVELS: usize = 24;
const C_LEVELS: [f64; 16] = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 16.0, 22.0, 32.0, 64.0];
const DOWNTIME_CLASSES: usize = 10;

#[derive(Debug, Clone)]
pub struct SuffixBounds {
    h: f64,
    j_lb: f64,
    slack: f64,
    rho: f64,
    remaining: Vec<f64>,
    g_step: f64,
    /// `suffix[(v * (G_LEVELS + 1) + gi) * C_LEVELS.len() + ci]`
    suffix: Vec<f64>,
}

const NC: usize = C_LEVELS.len();
const NG: usize = G_LEVELS + 1;

impl SuffixBounds {
    /// `rho` must not exceed any update's cost divided by its downtime.
    pub fn build(dag: &Dag, h: f64, j_lb: f64, rho: f64) -> Self {
        let g_step = h / G_LEVELS as f64;
        let nv = dag.num_vertices();
        let stride = NG * NC;
        let mut suffix = vec![0.0; nv * stride];
        let mut best = [0.0f64; NG * NC];
        for v in (0..dag.sink()).rev() {
            best.fill(f64::NEG_INFINITY);
            for e in dag.out_edges(v) {
                let next = &suffix[e.to * stride..(e.to + 1) * stride];
                for gi in 0..NG {
                    let b = g_step * gi as f64;
                    let base = h * e.df - j_lb * h * e.dg - b * e.dc;
                    for (ci, &c) in C_LEVELS.iter().enumerate() {
                        let k = gi * NC + ci;
                        let x = base - c * e.dg + next[k];
                        if x > best[k] {
                            best[k] = x;
                        }
                    }
                }
            }
            suffix[v * stride..(v + 1) * stride].copy_from_slice(&best);
        }
        let remaining = (0..nv).map(|v| if v == dag.sink() { 0.0 } else { h - dag.time(v) }).collect();
        SuffixBounds { h, j_lb, slack: 1e-9 * h * h, rho: rho.max(0.0), remaining, g_step, suffix }
    }

    // The suffix maximum is convex in (b, c), so interpolating between
    // neighbouring levels stays above it.
    fn table(&self, v: usize, b: f64, c: f64) -> f64 {
        let t = &self.suffix[v * NG * NC..(v + 1) * NG * NC];
        let gx = (b / self.g_step).max(0.0);
        let (g0, g1, tg) = if gx >= G_LEVELS as f64 {
            (G_LEVELS, G_LEVELS, 0.0)
        } else {
            let g0 = gx as usize;
            (g0, g0 + 1, gx - g0 as f64)
        };
        let i = C_LEVELS.partition_point(|&l| l <= c).saturating_sub(1);
        let (c0, c1, tc) = if i + 1 >= NC || c <= C_LEVELS[i] {
            (i, i, 0.0)
        } else {
            (i, i + 1, (c - C_LEVELS[i]) / (C_LEVELS[i + 1] - C_LEVELS[i]))
        };
        let lo = (1.0 - tc) * t[g0 * NC + c0] + tc * t[g0 * NC + c1];
        let hi = (1.0 - tc) * t[g1 * NC + c0] + tc * t[g1 * NC + c1];
        (1.0 - tg) * lo + tg * hi
    }

    /// Table value at `b` and the exact level `C_LEVELS[ci]`.
    fn at_level(&self, v: usize, b: f64, ci: usize) -> f64 {
        let t = &self.suffix[v * NG * NC..(v + 1) * NG * NC];
        let gx = (b / self.g_step).max(0.0);
        if gx >= G_LEVELS as f64 {
            return t[G_LEVELS * NC + ci];
        }
        let g0 = gx as usize;
        let tg = gx - g0 as f64;
        (1.0 - tg) * t[g0 * NC + ci] + tg * t[(g0 + 1) * NC + ci]
    }

    /// Bound for suffixes in downtime class `k`. With `tighten`, the suffix
    /// maximum is also taken at every other cost level `c'`, paying
    /// `(c' - c) dG` with `dG` at the matching end of the class range.
    fn class_bound(&self, v: usize, s: &PathStats, k: usize, tighten: bool) -> f64 {
        let r = self.remaining[v];
        let lo = r * k as f64 / DOWNTIME_CLASSES as f64;
        let hi = r * (k + 1) as f64 / DOWNTIME_CLASSES as f64;
        let m_g = r - hi;
        let m_c = self.rho * lo;
        let (b, c) = (s.g + m_g, s.c + m_c);
        let mut best = self.table(v, b, c);
        if tighten {
            for (ci, &level) in C_LEVELS.iter().enumerate() {
                let dg = if level >= c { r - lo } else { m_g };
                best = best.min(self.at_level(v, b, ci) + (level - c) * dg);
            }
        }
        self.h * s.f - s.g * s.c - self.j_lb * self.h * s.g + m_g * m_c + best
    }

    /// Upper bound on `H F - G C - J_lb H G` over all completions through `v`.
    pub fn upper(&self, v: usize, s: &PathStats) -> f64 {
        (0..DOWNTIME_CLASSES).map(|k| self.class_bound(v, s, k, true)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn admits(&self, v: usize, s: &PathStats) -> bool {
        (0..DOWNTIME_CLASSES)
            .any(|k| self.class_bound(v, s, k, false) >= -self.slack && self.class_bound(v, s, k, true) >= -self.slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_candidate_times, build_dag};
    use crate::environment::{build_environment, DecayParams, Segment};

    #[test]
    fn bound_dominates_every_completion() {
        let seg = |start, end, shock| Segment {
            start,
            end,
            decay: DecayParams::new(0.1, 5.0).unwrap(),
            entry_shock: shock,
            downtime: 1.0,
            cost: 0.3,
        };
        let env = build_environment(vec![seg(0.0, 20.0, 1.0), seg(20.0, 40.0, 0.5)], 40.0).unwrap();
        let grid = build_candidate_times(&env, 4.0, 2.0, 2.0).unwrap();
        let dag = build_dag(&env, &grid, 90.0);
        let h = 40.0;
        let j_lb = 0.3;
        let b = SuffixBounds::build(&dag, h, j_lb, 0.3);
        // Every prefix bound must cover the exact value of every completion.
        fn walk(dag: &Dag, v: usize, s: PathStats, stack: &mut Vec<(usize, PathStats)>, b: &SuffixBounds, h: f64, j_lb: f64) {
            stack.push((v, s));
            if v == dag.sink() {
                let exact = h * s.f - s.g * s.c - j_lb * h * s.g;
                for (u, p) in stack.iter() {
                    assert!(b.upper(*u, p) >= exact - 1e-9, "bound below a completion at {u}");
                }
                assert!((b.upper(v, &s) - exact).abs() < 1e-9);
            } else {
                for e in dag.out_edges(v) {
                    walk(dag, e.to, s + e.increments(), stack, b, h, j_lb);
                }
            }
            stack.pop();
        }
        walk(&dag, 0, PathStats::ZERO, &mut Vec::new(), &b, h, j_lb);
    }
}
