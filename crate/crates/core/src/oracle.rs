//! Exhaustive search over subsets of a small candidate set. Deliberately
//! naive: it is the reference the optimizers are tested against.

use serde::Serialize;
use thiserror::Error;

use crate::efficacy::{objective_j, schedule_stats, validate_schedule, PathStats, Schedule};
use crate::environment::Environment;

pub const MAX_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{0} candidates exceeds the limit of {MAX_CANDIDATES}")]
    TooManyCandidates(usize),
    #[error("no feasible schedule with positive working time")]
    NoFeasibleSchedule,
}

/// Lazily yields every feasible subset (in increasing mask order), the empty
/// schedule first.
pub struct FeasibleSubsets<'a> {
    env: &'a Environment,
    candidates: Vec<f64>,
    mask: u64,
    end: u64,
}

impl Iterator for FeasibleSubsets<'_> {
    type Item = Schedule;

    fn next(&mut self) -> Option<Schedule> {
        while self.mask < self.end {
            let m = self.mask;
            self.mask += 1;
            let times: Vec<f64> = self
                .candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, &t)| t)
                .collect();
            let s = Schedule::new(times);
            if validate_schedule(self.env, &s).is_empty() {
                return Some(s);
            }
        }
        None
    }
}

/// Candidates are sorted and deduplicated; `t = 0` is dropped since a
/// completion there can never be feasible.
pub fn enumerate_feasible<'a>(
    env: &'a Environment,
    candidates: &[f64],
) -> Result<FeasibleSubsets<'a>, OracleError> {
    let mut c: Vec<f64> = candidates.iter().copied().filter(|&t| t > 0.0).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    if c.len() > MAX_CANDIDATES {
        return Err(OracleError::TooManyCandidates(c.len()));
    }
    let end = 1u64 << c.len();
    Ok(FeasibleSubsets { env, candidates: c, mask: 0, end })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleBest {
    pub schedule: Schedule,
    pub stats: PathStats,
    #[serde(rename = "J")]
    pub objective: f64,
    pub feasible_count: usize,
}

/// Best feasible subset by `J`; ties prefer smaller `C`, then larger `G`.
pub fn brute_force_best(env: &Environment, candidates: &[f64]) -> Result<OracleBest, OracleError> {
    let h = env.t_end();
    let mut best: Option<OracleBest> = None;
    let mut count = 0;
    for s in enumerate_feasible(env, candidates)? {
        count += 1;
        let stats = schedule_stats(env, &s).expect("enumerated schedules are feasible");
        let Ok(j) = objective_j(&stats, h) else { continue };
        let better = match &best {
            None => true,
            Some(b) => {
                j > b.objective
                    || (j == b.objective
                        && (stats.c < b.stats.c || (stats.c == b.stats.c && stats.g > b.stats.g)))
            }
        };
        if better {
            best = Some(OracleBest { schedule: s, stats, objective: j, feasible_count: 0 });
        }
    }
    let mut best = best.ok_or(OracleError::NoFeasibleSchedule)?;
    best.feasible_count = count;
    Ok(best)
}
