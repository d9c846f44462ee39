//! Operational map efficacy `f(t)`, its closed-form integral, and the
//! schedule statistics `(F, G, C)` that feed the objective
//! `J = F / G - C / H`.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvError, Environment};
use crate::TIME_EPS;

/// Working time below `G_FLOOR_FRACTION * H` is treated as zero.
pub const G_FLOOR_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficacyError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("infeasible schedule: {}", describe(.0))]
    InfeasibleSchedule(Vec<Violation>),
    #[error("bad interval: need t_last <= a <= b <= t_end, got t_last={t_last}, a={a}, b={b}")]
    BadInterval { t_last: f64, a: f64, b: f64 },
    #[error("working time {g} is below the floor {floor}")]
    ZeroWorkingTime { g: f64, floor: f64 },
    #[error("trajectory step must be positive, got {0}")]
    BadStep(f64),
}

fn describe(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Strictly increasing refresh completion times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(Vec<f64>);

impl Schedule {
    pub fn new(completions: Vec<f64>) -> Self {
        Schedule(completions)
    }

    pub fn empty() -> Self {
        Schedule(Vec::new())
    }

    pub fn completions(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Schedule {
    fn from(v: Vec<f64>) -> Self {
        Schedule(v)
    }
}

/// Additive path statistics: efficacy integral, working time, total cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl PathStats {
    pub const ZERO: PathStats = PathStats { f: 0.0, g: 0.0, c: 0.0 };

    pub fn new(f: f64, g: f64, c: f64) -> Self {
        PathStats { f, g, c }
    }

    /// `F / G - C / H`.
    pub fn objective(&self, h: f64) -> Result<f64, EfficacyError> {
        objective_j(self, h)
    }
}

impl Add for PathStats {
    type Output = PathStats;

    fn add(self, o: PathStats) -> PathStats {
        PathStats { f: self.f + o.f, g: self.g + o.g, c: self.c + o.c }
    }
}

impl AddAssign for PathStats {
    fn add_assign(&mut self, o: PathStats) {
        self.f += o.f;
        self.g += o.g;
        self.c += o.c;
    }
}

impl Sum for PathStats {
    fn sum<I: Iterator<Item = PathStats>>(iter: I) -> Self {
        iter.fold(PathStats::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// `c[index] <= c[index - 1]`.
    NotIncreasing { index: usize },
    /// First completion earlier than its own downtime.
    FirstDowntime { index: usize, completion: f64, downtime: f64 },
    /// `c[index] - c[index - 1] < D(c[index])`.
    Spacing { index: usize, gap: f64, downtime: f64 },
    OutOfHorizon { index: usize, completion: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotIncreasing { index } => {
                write!(f, "completion {index} does not increase")
            }
            Violation::FirstDowntime { index, completion, downtime } => write!(
                f,
                "completion {index} at {completion} precedes its downtime {downtime}"
            ),
            Violation::Spacing { index, gap, downtime } => write!(
                f,
                "completion {index} is {gap} after its predecessor, needs {downtime}"
            ),
            Violation::OutOfHorizon { index, completion } => {
                write!(f, "completion {index} at {completion} is outside the horizon")
            }
        }
    }
}

/// Checks the non-overlap constraints; indices are 0-based.
pub fn validate_schedule(env: &Environment, schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let c = schedule.completions();
    for (i, &ci) in c.iter().enumerate() {
        if ci.is_nan() || ci < -TIME_EPS || ci > env.t_end() + TIME_EPS {
            out.push(Violation::OutOfHorizon { index: i, completion: ci });
            continue;
        }
        let d = env.downtime_unchecked(ci);
        if i == 0 {
            if ci < d - TIME_EPS {
                out.push(Violation::FirstDowntime { index: i, completion: ci, downtime: d });
            }
            continue;
        }
        let prev = c[i - 1];
        if ci <= prev {
            out.push(Violation::NotIncreasing { index: i });
        } else if ci - prev < d - TIME_EPS {
            out.push(Violation::Spacing { index: i, gap: ci - prev, downtime: d });
        }
    }
    out
}

pub fn check_feasible(env: &Environment, schedule: &Schedule) -> Result<(), EfficacyError> {
    let v = validate_schedule(env, schedule);
    if v.is_empty() {
        Ok(())
    } else {
        Err(EfficacyError::InfeasibleSchedule(v))
    }
}

pub(crate) fn entry_loss_unchecked(env: &Environment, t_last: f64, t: f64) -> f64 {
    env.segments()
        .iter()
        .skip(1)
        .filter(|s| s.start > t_last && s.start <= t)
        .map(|s| s.entry_shock)
        .product()
}

/// Product of entry shocks over boundaries in `(t_last, t]`.
pub fn entry_loss(env: &Environment, t_last: f64, t: f64) -> Result<f64, EfficacyError> {
    env.segment_index_at(t_last)?;
    env.segment_index_at(t)?;
    if t_last > t {
        return Err(EfficacyError::BadInterval { t_last, a: t, b: t });
    }
    Ok(entry_loss_unchecked(env, t_last, t))
}

/// `f(t)` under a feasible schedule; the map is fresh at `t = 0`.
pub fn efficacy_at(env: &Environment, schedule: &Schedule, t: f64) -> Result<f64, EfficacyError> {
    check_feasible(env, schedule)?;
    env.segment_index_at(t)?;
    let mut t_last = 0.0;
    for &c in schedule.completions() {
        if c > t {
            if t >= c - env.downtime_unchecked(c) {
                return Ok(0.0);
            }
            break;
        }
        t_last = c;
    }
    let seg = &env.segments()[env.index_of(t)];
    Ok(entry_loss_unchecked(env, t_last, t) * seg.decay.value(t - t_last))
}

/// `\int_a^b L(t; t_last) E_{j(t)}(t - t_last) dt` without argument checks.
pub(crate) fn integrate_unchecked(env: &Environment, t_last: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let segs = env.segments();
    let mut j = env.index_of(a);
    let mut loss = entry_loss_unchecked(env, t_last, a);
    let mut lo = a;
    let mut total = 0.0;
    loop {
        let seg = &segs[j];
        let hi = if j + 1 < segs.len() { seg.end.min(b) } else { b };
        if hi > lo {
            total += loss * seg.decay.integral(lo - t_last, hi - t_last);
        }
        if hi >= b {
            break;
        }
        j += 1;
        loss *= segs[j].entry_shock;
        lo = hi;
    }
    total
}

/// Exact efficacy integral over a downtime-free interval `[a, b]` whose
/// last refresh completed at `t_last`.
pub fn integrate_efficacy(
    env: &Environment,
    t_last: f64,
    a: f64,
    b: f64,
) -> Result<f64, EfficacyError> {
    let ok = t_last >= -TIME_EPS && t_last <= a && a <= b && b <= env.t_end() + TIME_EPS;
    if !ok || [t_last, a, b].iter().any(|x| x.is_nan()) {
        return Err(EfficacyError::BadInterval { t_last, a, b });
    }
    Ok(integrate_unchecked(env, t_last, a, b))
}

/// Working intervals `(t_last, a, b)` of a feasible schedule, in order.
pub(crate) fn working_intervals(env: &Environment, schedule: &Schedule) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(schedule.len() + 1);
    let mut t_last = 0.0;
    for &c in schedule.completions() {
        let start = c - env.downtime_unchecked(c);
        out.push((t_last, t_last, start.max(t_last)));
        t_last = c;
    }
    out.push((t_last, t_last, env.t_end()));
    out
}

pub fn schedule_stats(env: &Environment, schedule: &Schedule) -> Result<PathStats, EfficacyError> {
    check_feasible(env, schedule)?;
    let f = working_intervals(env, schedule)
        .into_iter()
        .map(|(t_last, a, b)| integrate_unchecked(env, t_last, a, b))
        .sum();
    let downtime: f64 = schedule.completions().iter().map(|&c| env.downtime_unchecked(c)).sum();
    let c = schedule.completions().iter().map(|&c| env.cost_unchecked(c)).sum();
    Ok(PathStats { f, g: env.t_end() - downtime, c })
}

pub fn objective_j(stats: &PathStats, h: f64) -> Result<f64, EfficacyError> {
    let floor = G_FLOOR_FRACTION * h;
    if !(h > 0.0) || !(stats.g >= floor) || stats.g <= 0.0 {
        return Err(EfficacyError::ZeroWorkingTime { g: stats.g, floor });
    }
    Ok(stats.f / stats.g - stats.c / h)
}

/// One sample of `f(t)` for trajectory export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub f: f64,
    pub in_downtime: bool,
    pub segment_index: usize,
}

/// Samples `f` on `0, step, 2 step, ..` plus `t_end`.
pub fn trajectory(
    env: &Environment,
    schedule: &Schedule,
    step: f64,
) -> Result<Vec<TrajectoryPoint>, EfficacyError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(EfficacyError::BadStep(step));
    }
    check_feasible(env, schedule)?;
    let n = (env.t_end() / step + TIME_EPS).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if env.t_end() - times[times.len() - 1] > TIME_EPS {
        times.push(env.t_end());
    }
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        let in_downtime = schedule
            .completions()
            .iter()
            .any(|&c| t >= c - env.downtime_unchecked(c) && t < c);
        out.push(TrajectoryPoint {
            t,
            f: efficacy_at(env, schedule, t)?,
            in_downtime,
            segment_index: env.index_of(t),
        });
    }
    Ok(out)
}
