//! Problem abstraction, vector-of-vectors, budget-tracked evaluation and the
//! discrepancy/violation metrics shared by every solver.

mod ledger;
mod metrics;
mod problem;
mod vov;

pub use ledger::{eval_discipline, eval_subsystem, BudgetLedger, DisciplineOutput};
pub use metrics::{
    assess, assessment_from_outputs, discrepancy, squared_violation, total_discrepancy,
    total_violation, Assessment, PointMetrics,
};
pub use problem::{DesignPoint, Dims, FnProblem, MdoProblem, ProblemBounds};
pub use vov::{vov_exclude, Vov};

#[allow(unused_imports)]
pub(crate) use ledger::check_len;
