//! Accepted-best bookkeeping shared by every solver.

use crate::error::{Error, Result};
use crate::mdo::{DesignPoint, PointMetrics};

/// Strict-improvement quantum used by the solvers' acceptance rule.
pub const ACCEPT_TOL: f64 = 1e-12;

/// One accepted-best update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Ledger count at acceptance.
    pub eval: usize,
    pub f: f64,
    pub htot: f64,
    pub jtot: f64,
}

impl TraceRecord {
    pub fn metrics(&self) -> PointMetrics {
        PointMetrics {
            f: self.f,
            htot: self.htot,
            jtot: self.jtot,
        }
    }
}

/// Accepted-best history, strictly increasing in `eval`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a trace from records, checking the ordering invariant.
    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        let mut t = Self::new();
        for r in records {
            if t.records.last().is_some_and(|l| r.eval <= l.eval) {
                return Err(Error::InvalidConfig(format!(
                    "trace eval counts must increase strictly (got {} after {})",
                    r.eval,
                    t.records.last().map_or(0, |l| l.eval)
                )));
            }
            t.records.push(r);
        }
        Ok(t)
    }

    /// Appends a record; a record at the same count as the last one replaces it.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        match self.records.last_mut() {
            Some(last) if record.eval < last.eval => Err(Error::InvalidConfig(format!(
                "trace record at eval {} precedes {}",
                record.eval, last.eval
            ))),
            Some(last) if record.eval == last.eval => {
                *last = record;
                Ok(())
            }
            _ => {
                self.records.push(record);
                Ok(())
            }
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Indices `k` where record `k` is not an acceptable successor of `k - 1`.
    pub fn hierarchy_violations(&self, tol: f64) -> Vec<usize> {
        (1..self.records.len())
            .filter(|&k| {
                !accepts(
                    Some(&self.records[k - 1].metrics()),
                    &self.records[k].metrics(),
                    tol,
                )
            })
            .collect()
    }
}

/// The incumbent returned by a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BestSolution {
    pub point: DesignPoint,
    pub f: f64,
    pub htot: f64,
    pub jtot: f64,
    /// Ledger count when this point was accepted.
    pub eval_index: usize,
}

impl BestSolution {
    pub fn new(point: DesignPoint, metrics: PointMetrics, eval_index: usize) -> Self {
        BestSolution {
            point,
            f: metrics.f,
            htot: metrics.htot,
            jtot: metrics.jtot,
            eval_index,
        }
    }

    pub fn metrics(&self) -> PointMetrics {
        PointMetrics {
            f: self.f,
            htot: self.htot,
            jtot: self.jtot,
        }
    }

    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            eval: self.eval_index,
            f: self.f,
            htot: self.htot,
            jtot: self.jtot,
        }
    }
}

/// Hierarchical acceptance: `htot` first, then `Jtot`, then `f`, each needing
/// a decrease larger than `tol`; ties within `tol` fall through. NaN metrics
/// are never accepted over an existing incumbent.
pub fn accepts(current: Option<&PointMetrics>, candidate: &PointMetrics, tol: f64) -> bool {
    let Some(c) = current else { return true };
    let levels = [
        (c.htot, candidate.htot),
        (c.jtot, candidate.jtot),
        (c.f, candidate.f),
    ];
    for (old, new) in levels {
        if new < old - tol {
            return true;
        }
        if !((new - old).abs() <= tol) {
            return false;
        }
    }
    false
}

/// Returns the candidate if [`accepts`] says so, the current incumbent otherwise.
pub fn update_best(
    current: Option<BestSolution>,
    candidate: BestSolution,
    tol: f64,
) -> BestSolution {
    match current {
        Some(cur) if !accepts(Some(&cur.metrics()), &candidate.metrics(), tol) => cur,
        _ => candidate,
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub best: BestSolution,
    pub trace: ConvergenceTrace,
    pub evals_used: usize,
    /// Completed major iterations.
    pub iterations: usize,
    /// Evaluations spent before the first major iteration (DoE for BACO).
    pub setup_evals: usize,
}

impl SolverRun {
    pub fn f_best(&self) -> f64 {
        self.best.f
    }

    pub fn htot_best(&self) -> f64 {
        self.best.htot
    }

    pub fn jtot_best(&self) -> f64 {
        self.best.jtot
    }
}

/// Tracks the incumbent and its trace together.
#[derive(Debug, Clone, Default)]
pub(crate) struct Incumbent {
    pub best: Option<BestSolution>,
    pub trace: ConvergenceTrace,
}

impl Incumbent {
    /// Offers a candidate; returns true when it was accepted.
    pub fn offer(&mut self, point: &DesignPoint, metrics: PointMetrics, eval: usize) -> bool {
        if !accepts(
            self.best.as_ref().map(|b| b.metrics()).as_ref(),
            &metrics,
            ACCEPT_TOL,
        ) {
            return false;
        }
        let b = BestSolution::new(point.clone(), metrics, eval);
        self.trace
            .push(b.record())
            .expect("ledger count never decreases");
        self.best = Some(b);
        true
    }

    pub fn converged(&self, eps_j: f64, eps_h: f64) -> bool {
        self.best
            .as_ref()
            .is_some_and(|b| b.jtot <= eps_j && b.htot <= eps_h)
    }
}
