//! Static reference policies and per-segment action labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficacy::Schedule;
use crate::environment::Environment;
use crate::TIME_EPS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("period {0} must be positive and finite")]
    BadPeriod(f64),
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionClass {
    ZeroWait,
    Delayed,
    NoUpdate,
}

impl ActionClass {
    pub const ALL: [ActionClass; 3] = [ActionClass::ZeroWait, ActionClass::Delayed, ActionClass::NoUpdate];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionClass::ZeroWait => "ZERO_WAIT",
            ActionClass::Delayed => "DELAYED",
            ActionClass::NoUpdate => "NO_UPDATE",
        }
    }
}

impl std::fmt::Display for ActionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Keeps `c` when it can follow `prev` (or the start) under the spacing
/// rule and lies in the horizon.
fn admissible(env: &Environment, prev: Option<f64>, c: f64) -> bool {
    if c > env.t_end() + TIME_EPS {
        return false;
    }
    let d = env.downtime_unchecked(c);
    let gap = c - prev.unwrap_or(0.0);
    gap >= d - TIME_EPS && prev.is_none_or(|p| c > p)
}

/// Starts an update at every interior boundary; completion `c = tau + D(c)`.
/// Conflicting completions are skipped, not shifted.
pub fn zero_wait_schedule(env: &Environment) -> Schedule {
    let mut out: Vec<f64> = Vec::new();
    for tau in env.boundaries() {
        let Some(c) = zero_wait_completion(env, tau) else { continue };
        if admissible(env, out.last().copied(), c) {
            out.push(c);
        }
    }
    Schedule::new(out)
}

/// Solves `c = tau + D(c)` by iterating from the boundary's own segment.
/// Returns `None` if no completion inside the horizon is consistent.
fn zero_wait_completion(env: &Environment, tau: f64) -> Option<f64> {
    let t_end = env.t_end();
    let mut c = tau + env.downtime_unchecked(tau);
    for _ in 0..env.num_segments() + 1 {
        if c > t_end + TIME_EPS {
            return None;
        }
        let next = tau + env.downtime_unchecked(c);
        if (next - c).abs() <= TIME_EPS {
            return Some(c);
        }
        c = next;
    }
    None
}

/// Completions at `k * period` for `k >= 1` within the horizon; infeasible
/// ones are skipped.
pub fn fixed_interval_schedule(env: &Environment, period: f64) -> Result<Schedule, BaselineError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(BaselineError::BadPeriod(period));
    }
    let mut out: Vec<f64> = Vec::new();
    let mut k = 1u64;
    loop {
        let c = k as f64 * period;
        if c > env.t_end() + TIME_EPS {
            break;
        }
        if admissible(env, out.last().copied(), c) {
            out.push(c);
        }
        k += 1;
    }
    Ok(Schedule::new(out))
}

/// Labels each segment by where update downtimes begin: at entry (within
/// `tol`) is zero-wait, later is delayed, none is no-update. Zero-wait takes
/// precedence when both occur.
pub fn classify_actions(env: &Environment, schedule: &Schedule, tol: f64) -> Vec<ActionClass> {
    let mut labels = vec![ActionClass::NoUpdate; env.num_segments()];
    for &c in schedule.completions() {
        let start = c - env.downtime_unchecked(c);
        let j = env.index_of(start.max(0.0));
        let tau = env.segments()[j].start;
        let class = if start >= tau - TIME_EPS && start <= tau + tol + TIME_EPS {
            ActionClass::ZeroWait
        } else {
            ActionClass::Delayed
        };
        if labels[j] != ActionClass::ZeroWait {
            labels[j] = class;
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efficacy::validate_schedule;
    use crate::environment::{build_environment, DecayParams, Segment};

    fn env(bounds: &[f64], d: f64) -> Environment {
        let segs = bounds
            .windows(2)
            .map(|w| Segment {
                start: w[0],
                end: w[1],
                decay: DecayParams::new(0.1, 10.0).unwrap(),
                entry_shock: 0.5,
                downtime: d,
                cost: 1.0,
            })
            .collect();
        build_environment(segs, *bounds.last().unwrap()).unwrap()
    }

    #[test]
    fn zero_wait_examples() {
        assert!(zero_wait_schedule(&env(&[0.0, 300.0], 2.0)).is_empty());
        let e = env(&[0.0, 50.0, 100.0, 150.0], 2.0);
        assert_eq!(zero_wait_schedule(&e).completions(), &[52.0, 102.0]);
        let e = env(&[0.0, 50.0, 51.0, 150.0], 2.0);
        let s = zero_wait_schedule(&e);
        assert_eq!(s.completions(), &[52.0]);
        assert!(validate_schedule(&e, &s).is_empty());
    }

    #[test]
    fn zero_wait_uses_downtime_at_completion() {
        // Boundary at 10 with D=3 there, but the completion lands in a
        // segment starting at 11 whose D is 1: c = 10 + 1 = 11 is consistent.
        let mk = |start, end, d| Segment {
            start,
            end,
            decay: DecayParams::new(0.1, 10.0).unwrap(),
            entry_shock: 0.5,
            downtime: d,
            cost: 1.0,
        };
        let e = build_environment(vec![mk(0.0, 10.0, 1.0), mk(10.0, 11.0, 3.0), mk(11.0, 40.0, 1.0)], 40.0)
            .unwrap();
        let s = zero_wait_schedule(&e);
        assert!(validate_schedule(&e, &s).is_empty());
        assert_eq!(s.completions()[0], 11.0);
    }

    #[test]
    fn fixed_interval_examples() {
        let e = env(&[0.0, 300.0], 2.0);
        let s = fixed_interval_schedule(&e, 25.0).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s.completions()[11], 300.0);
        assert!(fixed_interval_schedule(&e, 400.0).unwrap().is_empty());
        let e1 = env(&[0.0, 300.0], 1.0);
        assert_eq!(fixed_interval_schedule(&e1, 10.0).unwrap().len(), 30);
        assert!(fixed_interval_schedule(&e, 0.0).is_err());
        let tight = env(&[0.0, 30.0], 12.0);
        assert_eq!(fixed_interval_schedule(&tight, 10.0).unwrap().completions(), &[20.0]);
    }

    #[test]
    fn classification() {
        let e = env(&[0.0, 50.0, 100.0, 150.0], 2.0);
        let zw = zero_wait_schedule(&e);
        assert_eq!(
            classify_actions(&e, &zw, DEFAULT_CLASSIFY_TOL),
            vec![ActionClass::NoUpdate, ActionClass::ZeroWait, ActionClass::ZeroWait]
        );
        assert_eq!(
            classify_actions(&e, &Schedule::empty(), DEFAULT_CLASSIFY_TOL),
            vec![ActionClass::NoUpdate; 3]
        );
        let mid = Schedule::new(vec![80.0]);
        assert_eq!(classify_actions(&e, &mid, DEFAULT_CLASSIFY_TOL)[1], ActionClass::Delayed);
    }
}
