use super::ledger::{check_len, eval_subsystem, BudgetLedger, DisciplineOutput};
use super::problem::{DesignPoint, MdoProblem};
use crate::error::Result;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Discrepancy `J_i` between system targets and subsystem `i`'s copies.
///
/// `y_value` must be the discipline output already evaluated at
/// `(y_target_{j != i}, z_i, x_i)`; this function never calls the black box.
pub fn discrepancy(
    z_sys: &[f64],
    x_sys_i: &[f64],
    y_target_i: &[f64],
    z_i: &[f64],
    x_i: &[f64],
    y_value: &[f64],
) -> Result<f64> {
    check_len("discrepancy z", z_sys.len(), z_i.len())?;
    check_len("discrepancy x", x_sys_i.len(), x_i.len())?;
    check_len("discrepancy y", y_target_i.len(), y_value.len())?;
    Ok(sq_dist(z_sys, z_i) + sq_dist(x_sys_i, x_i) + sq_dist(y_target_i, y_value))
}

/// `Jtot`: sum of per-discipline discrepancies at `point`.
pub fn total_discrepancy(point: &DesignPoint, y_values: &[Vec<f64>]) -> Result<f64> {
    check_len("total_discrepancy", point.n_disciplines(), y_values.len())?;
    y_values.iter().enumerate().try_fold(0.0, |acc, (i, y)| {
        Ok(acc
            + discrepancy(
                &point.z_sys,
                point.x_sys.block(i),
                point.y_sys.block(i),
                &point.z_sub[i],
                &point.x_sub[i],
                y,
            )?)
    })
}

/// Sum of squared violations of `>= 0` constraints.
pub fn squared_violation(values: &[f64]) -> f64 {
    values.iter().map(|v| (-v).max(0.0).powi(2)).sum()
}

/// `htot`: squared violation of every local and system constraint.
pub fn total_violation(g_values: &[Vec<f64>], c_value: &[f64]) -> f64 {
    g_values.iter().map(|g| squared_violation(g)).sum::<f64>() + squared_violation(c_value)
}

/// The three solution-quality metrics of an iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    pub f: f64,
    pub htot: f64,
    pub jtot: f64,
}

/// A fully evaluated iterate.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub metrics: PointMetrics,
    /// Per-discipline `J_i`.
    pub discrepancies: Vec<f64>,
    pub outputs: Vec<DisciplineOutput>,
}

/// Evaluates every discipline once at the subsystem copies against the
/// system coupling targets, then computes `f`, `htot` and `Jtot`.
///
/// Costs exactly `N` counted evaluations.
pub fn assess<P: MdoProblem + ?Sized>(
    problem: &P,
    ledger: &BudgetLedger,
    point: &DesignPoint,
) -> Result<Assessment> {
    let n = point.n_disciplines();
    let outputs = (0..n)
        .map(|i| {
            let y_others = point.y_sys.exclude(i)?;
            eval_subsystem(
                problem,
                ledger,
                i,
                y_others.as_slice(),
                &point.z_sub[i],
                &point.x_sub[i],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assessment_from_outputs(problem, point, outputs))
}

/// Metrics of `point` given discipline outputs already evaluated at its copies.
pub fn assessment_from_outputs<P: MdoProblem + ?Sized>(
    problem: &P,
    point: &DesignPoint,
    outputs: Vec<DisciplineOutput>,
) -> Assessment {
    let discrepancies: Vec<f64> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            discrepancy(
                &point.z_sys,
                point.x_sys.block(i),
                point.y_sys.block(i),
                &point.z_sub[i],
                &point.x_sub[i],
                &o.y,
            )
            .expect("outputs follow problem dims")
        })
        .collect();
    let c = problem.system_constraints(&point.z_sys, &point.x_sys, &point.y_sys);
    let g: Vec<Vec<f64>> = outputs.iter().map(|o| o.g.clone()).collect();
    let metrics = PointMetrics {
        f: problem.objective(&point.z_sys, &point.x_sys, &point.y_sys),
        htot: total_violation(&g, &c),
        jtot: discrepancies.iter().sum(),
    };
    Assessment {
        metrics,
        discrepancies,
        outputs,
    }
}
