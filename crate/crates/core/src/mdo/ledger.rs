use std::sync::Mutex;

use super::problem::MdoProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct LedgerState {
    count: usize,
    per_discipline: Vec<usize>,
}

/// Counts true discipline evaluations against a hard limit.
///
/// Check-and-increment happens under one lock, so concurrent subsystem
/// evaluations can never overshoot the limit.
#[derive(Debug)]
pub struct BudgetLedger {
    limit: usize,
    state: Mutex<LedgerState>,
}

impl BudgetLedger {
    pub fn new(limit: usize, n_disciplines: usize) -> Self {
        BudgetLedger {
            limit,
            state: Mutex::new(LedgerState {
                count: 0,
                per_discipline: vec![0; n_disciplines],
            }),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn count(&self) -> usize {
        self.lock().count
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.count()
    }

    pub fn per_discipline(&self) -> Vec<usize> {
        self.lock().per_discipline.clone()
    }

    /// Charges one evaluation of discipline `i`; returns the new total.
    pub fn charge(&self, i: usize) -> Result<usize> {
        let mut s = self.lock();
        if i >= s.per_discipline.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: s.per_discipline.len(),
            });
        }
        if s.count >= self.limit {
            return Err(Error::BudgetExhausted { limit: self.limit });
        }
        s.count += 1;
        s.per_discipline[i] += 1;
        Ok(s.count)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LedgerState> {
        // A panic while holding the lock leaves the counters consistent.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// One counted call of the disciplinary black box `y_i`.
pub fn eval_discipline<P: MdoProblem + ?Sized>(
    problem: &P,
    ledger: &BudgetLedger,
    i: usize,
    y_others: &[f64],
    z_i: &[f64],
    x_i: &[f64],
) -> Result<Vec<f64>> {
    let dims = problem.dims();
    if i >= dims.n_disciplines() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: dims.n_disciplines(),
        });
    }
    check_len(
        "eval_discipline y_others",
        dims.y_others_len(i),
        y_others.len(),
    )?;
    check_len("eval_discipline z_i", dims.z, z_i.len())?;
    check_len("eval_discipline x_i", dims.x[i], x_i.len())?;
    ledger.charge(i)?;
    let y = problem.analysis(i, y_others, z_i, x_i);
    check_len("eval_discipline output", dims.y[i], y.len())?;
    Ok(y)
}

/// Discipline output plus the local constraints derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisciplineOutput {
    pub y: Vec<f64>,
    pub g: Vec<f64>,
}

/// [`eval_discipline`] followed by the (free) local constraint evaluation.
pub fn eval_subsystem<P: MdoProblem + ?Sized>(
    problem: &P,
    ledger: &BudgetLedger,
    i: usize,
    y_others: &[f64],
    z_i: &[f64],
    x_i: &[f64],
) -> Result<DisciplineOutput> {
    let y = eval_discipline(problem, ledger, i, y_others, z_i, x_i)?;
    let g = problem.local_constraints(i, y_others, z_i, x_i, &y);
    Ok(DisciplineOutput { y, g })
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn charge_until_exhausted() {
        let ledger = BudgetLedger::new(3, 2);
        assert_eq!(ledger.charge(0).unwrap(), 1);
        assert_eq!(ledger.charge(1).unwrap(), 2);
        assert_eq!(ledger.charge(1).unwrap(), 3);
        assert_eq!(ledger.charge(0), Err(Error::BudgetExhausted { limit: 3 }));
        assert_eq!(ledger.count(), 3);
        assert_eq!(ledger.per_discipline(), vec![1, 2]);
        assert_eq!(ledger.remaining(), 0);
    }

    #[test]
    fn concurrent_charges_never_overshoot() {
        let ledger = Arc::new(BudgetLedger::new(1000, 4));
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let l = Arc::clone(&ledger);
                std::thread::spawn(move || (0..400).filter(|_| l.charge(i).is_ok()).count())
            })
            .collect();
        let ok: usize = handles.into_iter().map(|h| h.join().unwrap()).sum();
        assert_eq!(ok, 1000);
        assert_eq!(ledger.count(), 1000);
        assert_eq!(ledger.per_discipline().iter().sum::<usize>(), 1000);
    }
}
