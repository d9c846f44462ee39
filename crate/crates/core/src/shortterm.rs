//! Myopic single-update rule for a fresh map decaying as
//! `f(x) = eta + (1 - eta) e^{-lambda x}`.
//!
//! Waiting `t` then paying downtime `D` and cost `C` scores
//! `g(t) = (\int_0^t f) / t - C / (t + D)`. Updating at once is optimal iff
//! `C / D^2 <= -f'(0) / 2`; otherwise the first stationary point of `g`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::DecayParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShortTermError {
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("bad parameter: {0}")]
    BadParam(String),
}

/// Horizon multiplier used when none is given.
pub const DEFAULT_HORIZON_HALF_LIVES: f64 = 20.0;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MyopicProblem {
    /// `eta = 1` is allowed here and gives a constant efficacy.
    pub decay: DecayParams,
    pub downtime: f64,
    pub cost: f64,
    pub horizon: f64,
}

impl MyopicProblem {
    pub fn new(
        eta: f64,
        t_half: f64,
        downtime: f64,
        cost: f64,
        horizon: Option<f64>,
    ) -> Result<Self, ShortTermError> {
        let bad = |m: String| Err(ShortTermError::BadParam(m));
        if !(0.0..=1.0).contains(&eta) {
            return bad(format!("eta {eta} not in [0, 1]"));
        }
        if !(t_half > 0.0 && t_half.is_finite()) {
            return bad(format!("t_half {t_half} must be positive"));
        }
        if !(downtime > 0.0 && downtime.is_finite()) {
            return bad(format!("downtime {downtime} must be positive"));
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return bad(format!("cost {cost} must be non-negative"));
        }
        let horizon = horizon.unwrap_or(DEFAULT_HORIZON_HALF_LIVES * t_half);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return bad(format!("horizon {horizon} must be positive"));
        }
        Ok(MyopicProblem { decay: DecayParams { eta, t_half }, downtime, cost, horizon })
    }

    fn lambda(&self) -> f64 {
        self.decay.lambda()
    }

    /// `-f'(0) / 2`.
    pub fn threshold(&self) -> f64 {
        (1.0 - self.decay.eta) * self.lambda() / 2.0
    }
}

fn check_time(t: f64) -> Result<(), ShortTermError> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(ShortTermError::NegativeTime(t))
    }
}

/// `g(t)`; at `t = 0` the right limit `1 - C/D`.
pub fn g_value(p: &MyopicProblem, t: f64) -> Result<f64, ShortTermError> {
    check_time(t)?;
    let penalty = p.cost / (t + p.downtime);
    if t == 0.0 {
        return Ok(1.0 - penalty);
    }
    Ok(p.decay.integral(0.0, t) / t - penalty)
}

/// `((1+x) e^{-x} - 1) / x^2`, series near zero.
fn h_ratio(x: f64) -> f64 {
    if x < 0.1 {
        // sum_{n>=2} (-1)^{n-1} (n-1)/n! x^{n-2}
        let mut term_fact = 2.0;
        let mut pow = 1.0;
        let mut sum = 0.0;
        for n in 2..20u32 {
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            sum += sign * (n - 1) as f64 / term_fact * pow;
            pow *= x;
            term_fact *= (n + 1) as f64;
        }
        sum
    } else {
        ((1.0 + x) * (-x).exp() - 1.0) / (x * x)
    }
}

/// `(t f(t) - \int_0^t f) / t^2`; tends to `f'(0)/2` at zero.
fn h_over_t2(p: &MyopicProblem, t: f64) -> f64 {
    let lambda = p.lambda();
    (1.0 - p.decay.eta) * lambda * h_ratio(lambda * t)
}

/// `g'(t)`; at `t = 0` the limit `f'(0)/2 + C/D^2`.
pub fn g_derivative(p: &MyopicProblem, t: f64) -> Result<f64, ShortTermError> {
    check_time(t)?;
    let d = t + p.downtime;
    Ok(h_over_t2(p, t) + p.cost / (d * d))
}

pub fn should_update_now(p: &MyopicProblem) -> bool {
    p.cost / (p.downtime * p.downtime) <= p.threshold()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MyopicKind {
    UpdateNow,
    UpdateAt { t: f64 },
    NoUpdateWithinHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MyopicDecision {
    pub decision: MyopicKind,
    pub g_at_decision: f64,
    /// `C / D^2` and `-f'(0)/2`.
    pub cost_ratio: f64,
    pub threshold: f64,
    /// A scan past the returned root found a larger `g`.
    pub later_maximum: bool,
}

impl MyopicDecision {
    pub fn update_time(&self) -> Option<f64> {
        match self.decision {
            MyopicKind::UpdateNow => Some(0.0),
            MyopicKind::UpdateAt { t } => Some(t),
            MyopicKind::NoUpdateWithinHorizon => None,
        }
    }
}

/// Scan step for bracketing roots of `g'`.
pub fn scan_step(p: &MyopicProblem) -> f64 {
    p.downtime.min(p.decay.t_half) / 10.0
}

fn gd(p: &MyopicProblem, t: f64) -> f64 {
    let d = t + p.downtime;
    h_over_t2(p, t) + p.cost / (d * d)
}

fn gv(p: &MyopicProblem, t: f64) -> f64 {
    g_value(p, t).expect("t >= 0")
}

/// Threshold rule, else the first sign change of `g'` on `(0, horizon]`
/// bisected to `root_tol`.
pub fn optimal_wait(p: &MyopicProblem, root_tol: f64) -> Result<MyopicDecision, ShortTermError> {
    if !(root_tol > 0.0) {
        return Err(ShortTermError::BadParam(format!("root_tol {root_tol} must be positive")));
    }
    let mut out = MyopicDecision {
        decision: MyopicKind::UpdateNow,
        g_at_decision: gv(p, 0.0),
        cost_ratio: p.cost / (p.downtime * p.downtime),
        threshold: p.threshold(),
        later_maximum: false,
    };
    if should_update_now(p) {
        return Ok(out);
    }
    let step = scan_step(p);
    let n = (p.horizon / step).ceil() as usize;
    let mut lo = 0.0;
    let mut bracket = None;
    for i in 1..=n {
        let t = (i as f64 * step).min(p.horizon);
        if gd(p, t) <= 0.0 {
            bracket = Some((lo, t));
            break;
        }
        lo = t;
    }
    let Some((mut a, mut b)) = bracket else {
        out.decision = MyopicKind::NoUpdateWithinHorizon;
        out.g_at_decision = gv(p, p.horizon);
        return Ok(out);
    };
    // g'(a) > 0 >= g'(b)
    while b - a > root_tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if gd(p, m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let t = if gd(p, a).abs() <= gd(p, b).abs() { a } else { b };
    let g_star = gv(p, t);
    out.decision = MyopicKind::UpdateAt { t };
    out.g_at_decision = g_star;
    let mut s = t + step;
    while s <= p.horizon {
        if gv(p, s) > g_star + 1e-12 {
            out.later_maximum = true;
            break;
        }
        s += step;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub g: f64,
    pub dg: f64,
}

/// `n + 1` evenly spaced samples of `(t, g, g')` on `[0, horizon]`.
pub fn g_curve(p: &MyopicProblem, n: usize) -> Vec<CurvePoint> {
    let n = n.max(1);
    (0..=n)
        .map(|i| {
            let t = p.horizon * i as f64 / n as f64;
            CurvePoint { t, g: gv(p, t), dg: gd(p, t) }
        })
        .collect()
}
