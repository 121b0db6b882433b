use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    Stalled,
}

/// One row of an iteration trace: the monitored residual or merit value and,
/// for line-search methods, the accepted step length (1 otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub value: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub iterations: Vec<IterationRecord>,
    pub terminated: Termination,
    /// Seconds.
    pub wall_time: f64,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.terminated == Termination::Converged
    }

    pub fn final_value(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.value)
    }
}

pub(crate) struct Trace {
    start: Instant,
    records: Vec<IterationRecord>,
}

impl Trace {
    pub(crate) fn start() -> Self {
        Self {
            start: Instant::now(),
            records: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, k: usize, value: f64, step: f64) {
        self.records.push(IterationRecord { k, value, step });
    }

    pub(crate) fn finish(self, terminated: Termination) -> ConvergenceReport {
        ConvergenceReport {
            iterations: self.records,
            terminated,
            wall_time: self.start.elapsed().as_secs_f64(),
        }
    }
}
