//! Piecewise environment model.
//!
//! The horizon `[0, t_end]` is split into contiguous half-open segments
//! `[start, end)`. Inside a segment the map ages with an exponential-to-floor
//! law `E(s) = eta + (1 - eta) * exp(-lambda * s)`, `lambda = ln 2 / t_half`.
//! Crossing into a segment without a refresh multiplies efficacy by that
//! segment's `entry_shock`. Each segment also carries the downtime and cost of
//! an update that completes inside it.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TIME_EPS;

/// Minimum sampled segment length as a fraction of the horizon.
pub const MIN_SEGMENT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("environment has no segments")]
    Empty,
    #[error("segments {prev} and {next} are not contiguous (end {end} vs start {start})")]
    GapOrOverlap {
        prev: usize,
        next: usize,
        end: f64,
        start: f64,
    },
    #[error("bad bounds: {0}")]
    BadBounds(String),
    #[error("segment {index}: {what}")]
    BadParam { index: usize, what: String },
    #[error("time {t} is outside the horizon [0, {t_end}]")]
    OutOfHorizon { t: f64, t_end: f64 },
    #[error("bad scenario spec: {0}")]
    BadSpec(String),
}

/// Exponential-to-floor aging law of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub eta: f64,
    pub t_half: f64,
}

impl DecayParams {
    pub fn new(eta: f64, t_half: f64) -> Result<Self, EnvError> {
        let d = DecayParams { eta, t_half };
        d.check(0)?;
        Ok(d)
    }

    fn check(&self, index: usize) -> Result<(), EnvError> {
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return Err(EnvError::BadParam {
                index,
                what: format!("eta {} not in [0, 1)", self.eta),
            });
        }
        if !(self.t_half > 0.0 && self.t_half.is_finite()) {
            return Err(EnvError::BadParam {
                index,
                what: format!("t_half {} must be positive and finite", self.t_half),
            });
        }
        Ok(())
    }

    /// Decay rate `ln 2 / t_half`, per minute.
    #[inline]
    pub fn lambda(&self) -> f64 {
        LN_2 / self.t_half
    }

    /// Efficacy after `age` minutes without shocks.
    #[inline]
    pub fn value(&self, age: f64) -> f64 {
        self.eta + (1.0 - self.eta) * (-self.lambda() * age).exp()
    }

    /// `E'(0) = -(1 - eta) * lambda`.
    #[inline]
    pub fn initial_slope(&self) -> f64 {
        -(1.0 - self.eta) * self.lambda()
    }

    /// `\int_{s0}^{s1} E(s) ds` for `0 <= s0 <= s1`.
    #[inline]
    pub fn integral(&self, s0: f64, s1: f64) -> f64 {
        let width = s1 - s0;
        if width <= 0.0 {
            return 0.0;
        }
        let lambda = self.lambda();
        self.eta * width
            + (1.0 - self.eta) / lambda * (-lambda * s0).exp() * -(-lambda * width).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub decay: DecayParams,
    /// Multiplicative shock applied when `start` is crossed stale.
    pub entry_shock: f64,
    /// Downtime of an update completing in this segment, minutes.
    pub downtime: f64,
    /// Cost of an update completing in this segment.
    pub cost: f64,
}

impl Segment {
    fn check(&self, index: usize) -> Result<(), EnvError> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start >= self.end {
            return Err(EnvError::BadBounds(format!(
                "segment {index} has start {} >= end {}",
                self.start, self.end
            )));
        }
        self.decay.check(index)?;
        if !(self.entry_shock > 0.0 && self.entry_shock <= 1.0) {
            return Err(EnvError::BadParam {
                index,
                what: format!("entry_shock {} not in (0, 1]", self.entry_shock),
            });
        }
        if !(self.downtime > 0.0 && self.downtime.is_finite()) {
            return Err(EnvError::BadParam {
                index,
                what: format!("downtime {} must be positive", self.downtime),
            });
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(EnvError::BadParam {
                index,
                what: format!("cost {} must be non-negative", self.cost),
            });
        }
        Ok(())
    }

    /// Short-term refresh threshold `(1 - eta) * lambda / 2`.
    pub fn short_term_threshold(&self) -> f64 {
        short_term_threshold(self)
    }
}

/// `-f'(0) / 2` for the segment's decay law.
pub fn short_term_threshold(seg: &Segment) -> f64 {
    (1.0 - seg.decay.eta) * seg.decay.lambda() / 2.0
}

#[derive(Debug, Deserialize)]
struct EnvironmentDoc {
    t_end: f64,
    segments: Vec<Segment>,
}

/// Validated, immutable planning environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentDoc")]
pub struct Environment {
    t_end: f64,
    segments: Vec<Segment>,
}

impl TryFrom<EnvironmentDoc> for Environment {
    type Error = EnvError;

    fn try_from(doc: EnvironmentDoc) -> Result<Self, Self::Error> {
        build_environment(doc.segments, doc.t_end)
    }
}

/// Validates contiguity and parameter ranges.
pub fn build_environment(segments: Vec<Segment>, t_end: f64) -> Result<Environment, EnvError> {
    if segments.is_empty() {
        return Err(EnvError::Empty);
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(EnvError::BadBounds(format!("t_end {t_end} must be positive")));
    }
    for (i, seg) in segments.iter().enumerate() {
        seg.check(i)?;
    }
    if segments[0].start != 0.0 {
        return Err(EnvError::BadBounds(format!(
            "first segment starts at {} instead of 0",
            segments[0].start
        )));
    }
    for (i, pair) in segments.windows(2).enumerate() {
        if pair[0].end != pair[1].start {
            return Err(EnvError::GapOrOverlap {
                prev: i,
                next: i + 1,
                end: pair[0].end,
                start: pair[1].start,
            });
        }
    }
    let last = segments[segments.len() - 1].end;
    if last != t_end {
        return Err(EnvError::BadBounds(format!(
            "last segment ends at {last} but t_end is {t_end}"
        )));
    }
    Ok(Environment { t_end, segments })
}

impl Environment {
    pub fn new(segments: Vec<Segment>, t_end: f64) -> Result<Self, EnvError> {
        build_environment(segments, t_end)
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    #[inline]
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    #[inline]
    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Interior boundaries `tau_2 .. tau_M` (segment starts after the first).
    pub fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    fn check_time(&self, t: f64) -> Result<(), EnvError> {
        if t.is_nan() || t < -TIME_EPS || t > self.t_end + TIME_EPS {
            return Err(EnvError::OutOfHorizon { t, t_end: self.t_end });
        }
        Ok(())
    }

    /// Segment index without range checks; times outside the horizon clamp
    /// to the first or last segment.
    #[inline]
    pub(crate) fn index_of(&self, t: f64) -> usize {
        self.segments
            .partition_point(|s| s.start <= t)
            .saturating_sub(1)
            .min(self.segments.len() - 1)
    }

    /// Index `j` with `start_j <= t < end_j`; `t == t_end` maps to the last.
    pub fn segment_index_at(&self, t: f64) -> Result<usize, EnvError> {
        self.check_time(t)?;
        Ok(self.index_of(t))
    }

    pub fn segment_at(&self, t: f64) -> Result<&Segment, EnvError> {
        Ok(&self.segments[self.segment_index_at(t)?])
    }

    pub fn downtime_at(&self, c: f64) -> Result<f64, EnvError> {
        Ok(self.segment_at(c)?.downtime)
    }

    pub fn cost_at(&self, c: f64) -> Result<f64, EnvError> {
        Ok(self.segment_at(c)?.cost)
    }

    #[inline]
    pub(crate) fn downtime_unchecked(&self, c: f64) -> f64 {
        self.segments[self.index_of(c)].downtime
    }

    #[inline]
    pub(crate) fn cost_unchecked(&self, c: f64) -> f64 {
        self.segments[self.index_of(c)].cost
    }

    /// Copy of this environment with every entry shock set to 1.
    pub fn without_shocks(&self) -> Environment {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { entry_shock: 1.0, ..*s })
            .collect();
        Environment { t_end: self.t_end, segments }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvType {
    A,
    B,
    C,
}

impl fmt::Display for EnvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnvType::A => "A",
            EnvType::B => "B",
            EnvType::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for EnvType {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(EnvType::A),
            "B" | "b" => Ok(EnvType::B),
            "C" | "c" => Ok(EnvType::C),
            other => Err(EnvError::BadSpec(format!("unknown environment type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(rename = "type")]
    pub env_type: EnvType,
    pub num_segments: usize,
    pub t_end: f64,
    pub seed: u64,
}

/// Sampling bands of one environment type.
mod bands {
    pub const A_SHOCK: (f64, f64) = (0.2, 0.5);
    pub const A_T_HALF: (f64, f64) = (2.5, 5.0);
    pub const A_ETA: (f64, f64) = (0.0, 0.08);
    pub const A_DOWNTIME: [f64; 4] = [0.8, 1.0, 1.2, 1.5];
    pub const A_COST: (f64, f64) = (0.05, 0.2);

    pub const B_SHOCK: (f64, f64) = (0.9, 1.0);
    pub const B_T_HALF: (f64, f64) = (50.0, 80.0);
    pub const B_ETA: (f64, f64) = (0.2, 0.35);

    /// (shock band, half-life band) pairs, picked with equal probability.
    pub const C_PAIRS: [((f64, f64), (f64, f64)); 2] =
        [((0.6, 0.8), (50.0, 80.0)), ((0.9, 1.0), (8.0, 18.0))];
    pub const C_ETA: (f64, f64) = (0.05, 0.30);

    pub const BC_DOWNTIME: (f64, f64) = (2.0, 3.5);
    pub const BC_COST: (f64, f64) = (0.8, 1.8);
}

fn uniform(rng: &mut ChaCha8Rng, band: (f64, f64)) -> f64 {
    rng.gen_range(band.0..=band.1)
}

/// Draws a random environment. Deterministic in `spec.seed`.
pub fn sample_environment(spec: &ScenarioSpec) -> Result<Environment, EnvError> {
    let m = spec.num_segments;
    if m == 0 {
        return Err(EnvError::BadSpec("num_segments must be at least 1".into()));
    }
    if !(spec.t_end > 0.0 && spec.t_end.is_finite()) {
        return Err(EnvError::BadSpec(format!("t_end {} must be positive", spec.t_end)));
    }
    if m as f64 * MIN_SEGMENT_FRACTION > 1.0 {
        return Err(EnvError::BadSpec(format!(
            "{m} segments cannot each span {}% of the horizon",
            MIN_SEGMENT_FRACTION * 100.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Uniform spacings of sorted uniforms, shifted by the minimum length.
    let min_len = MIN_SEGMENT_FRACTION * spec.t_end;
    let free = spec.t_end - m as f64 * min_len;
    let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(m + 1);
    edges.push(0.0);
    for (k, u) in cuts.iter().enumerate() {
        edges.push((k + 1) as f64 * min_len + free * u);
    }
    edges.push(spec.t_end);

    let mut segments = Vec::with_capacity(m);
    for j in 0..m {
        let (entry_shock, t_half, eta, downtime, cost) = match spec.env_type {
            EnvType::A => (
                uniform(&mut rng, bands::A_SHOCK),
                uniform(&mut rng, bands::A_T_HALF),
                uniform(&mut rng, bands::A_ETA),
                *bands::A_DOWNTIME.choose(&mut rng).expect("non-empty"),
                uniform(&mut rng, bands::A_COST),
            ),
            EnvType::B => (
                uniform(&mut rng, bands::B_SHOCK),
                uniform(&mut rng, bands::B_T_HALF),
                uniform(&mut rng, bands::B_ETA),
                uniform(&mut rng, bands::BC_DOWNTIME),
                uniform(&mut rng, bands::BC_COST),
            ),
            EnvType::C => {
                let (shock_band, half_band) = bands::C_PAIRS[rng.gen_range(0..2)];
                (
                    uniform(&mut rng, shock_band),
                    uniform(&mut rng, half_band),
                    uniform(&mut rng, bands::C_ETA),
                    uniform(&mut rng, bands::BC_DOWNTIME),
                    uniform(&mut rng, bands::BC_COST),
                )
            }
        };
        segments.push(Segment {
            start: edges[j],
            end: edges[j + 1],
            decay: DecayParams { eta, t_half },
            entry_shock,
            downtime,
            cost,
        });
    }
    build_environment(segments, spec.t_end)
}
