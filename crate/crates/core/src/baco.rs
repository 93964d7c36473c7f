//! Bayesian Collaborative Optimization.
//!
//! Every discrepancy `J_i` is modeled by one GP fitted on two pooled datasets
//! sharing the schema `(z_sys, x_sys_i, y_sys, z_i, x_i) -> J_i`: the upper
//! set, filled by system-level evaluations, and the lower set, filled by
//! subsystem-level evaluations. A major iteration runs one acquisition solve
//! per subsystem (concurrently), each followed by a single true discipline
//! evaluation, then one system acquisition solve followed by one true
//! evaluation of every discipline: `2N` counted evaluations per iteration.
//!
//! Subsystem `i` maximizes LogEI of its `J_i` surrogate over `(z_i, x_i)` with
//! the system targets frozen as context columns, subject to the predicted
//! local constraints `mu_g_i >= 0`. The system maximizes LogEI of the `f`
//! surrogate over the targets, subject to `mu_c >= 0` and `mu_J_i <= eps`
//! with the copies frozen at the fresh subsystem results.

use rand::Rng;

use crate::acquisition::{log_expected_improvement, AcquisitionInput};
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel};
use crate::local_opt::{multistart_maximize, MultistartConfig};
use crate::mdo::{
    assess, assessment_from_outputs, discrepancy, eval_subsystem, BudgetLedger, DesignPoint,
    DisciplineOutput, MdoProblem, PointMetrics,
};
use crate::rng::{derive_seed, stream};
use crate::sampling::lhs_sample_with;
use crate::trace::{accepts, Incumbent, SolverRun, ACCEPT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct BacoConfig {
    pub total_budget: usize,
    /// DoE size is `doe_multiplier * n + 1` for an `n`-dimensional DoE.
    pub doe_multiplier: usize,
    /// Termination tolerance on `Jtot` and `htot`, and the system-level
    /// surrogate bound on each `mu_J_i`.
    pub eps: f64,
    pub n_starts: usize,
    /// Cap on surrogate evaluations per acquisition start.
    pub acquisition_evals_cap: usize,
    /// Likelihood evaluations per GP restart.
    pub gp_evals_per_restart: usize,
    pub gp_restarts: usize,
    pub seed: u64,
}

impl Default for BacoConfig {
    fn default() -> Self {
        BacoConfig {
            total_budget: 300,
            doe_multiplier: 1,
            eps: 1e-3,
            n_starts: 25,
            acquisition_evals_cap: 1000,
            gp_evals_per_restart: 60,
            gp_restarts: 10,
            seed: 0,
        }
    }
}

impl BacoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.doe_multiplier) {
            return Err(Error::InvalidConfig(
                "doe_multiplier must be in 1..=5".into(),
            ));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig("eps must be non-negative".into()));
        }
        if self.n_starts == 0 || self.acquisition_evals_cap == 0 {
            return Err(Error::InvalidConfig(
                "acquisition settings must be positive".into(),
            ));
        }
        if self.gp_restarts == 0 || self.gp_evals_per_restart == 0 {
            return Err(Error::InvalidConfig("GP settings must be positive".into()));
        }
        Ok(())
    }

    fn gp_config(&self, seed: u64, warm_start: Option<Vec<f64>>) -> GpConfig {
        GpConfig {
            n_restarts: self.gp_restarts,
            evals_per_restart: self.gp_evals_per_restart,
            warm_start,
            seed,
            ..GpConfig::default()
        }
    }
}

/// Rows of `inputs -> outputs`, one output vector per row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn push(&mut self, input: Vec<f64>, output: Vec<f64>) {
        self.inputs.push(input);
        self.outputs.push(output);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.outputs.iter().map(|o| o[k]).collect()
    }
}

/// Upper (system-level) and lower (subsystem-level) samples of one `J_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscrepancyDatasets {
    pub upper: Dataset,
    pub lower: Dataset,
}

impl DiscrepancyDatasets {
    /// Both sets stacked: `(inputs, J values)`.
    pub fn pooled(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x = self
            .upper
            .inputs
            .iter()
            .chain(&self.lower.inputs)
            .cloned()
            .collect();
        let y = self
            .upper
            .outputs
            .iter()
            .chain(&self.lower.outputs)
            .map(|o| o[0])
            .collect();
        (x, y)
    }

    pub fn pooled_len(&self) -> usize {
        self.upper.len() + self.lower.len()
    }
}

/// Everything BACO learns about discipline `i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisciplineData {
    /// `(y_{j != i}, z_i, x_i) -> g_i`.
    pub local: Dataset,
    pub discrepancy: DiscrepancyDatasets,
    warm_j_sub: Option<Vec<f64>>,
    warm_j_sys: Option<Vec<f64>>,
    warm_g: Vec<Option<Vec<f64>>>,
}

/// Datasets and current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct BacoState {
    pub point: DesignPoint,
    /// System vector `-> (f, c...)`.
    pub system: Dataset,
    /// `htot` of each system row, used to pick the EI incumbent.
    pub system_htot: Vec<f64>,
    pub disciplines: Vec<DisciplineData>,
    /// Metrics of the initial iterate.
    pub initial_metrics: PointMetrics,
    pub doe_evals: usize,
    warm_f: Option<Vec<f64>>,
    warm_c: Vec<Option<Vec<f64>>>,
}

/// Discrepancy-schema row `(z_sys, x_sys_i, y_sys, z_i, x_i)`.
pub fn discrepancy_row(point: &DesignPoint, i: usize) -> Vec<f64> {
    let mut r = point.z_sys.clone();
    r.extend_from_slice(point.x_sys.block(i));
    r.extend_from_slice(point.y_sys.as_slice());
    r.extend_from_slice(&point.z_sub[i]);
    r.extend_from_slice(&point.x_sub[i]);
    r
}

fn local_row(y_others: &[f64], z_i: &[f64], x_i: &[f64]) -> Vec<f64> {
    let mut r = y_others.to_vec();
    r.extend_from_slice(z_i);
    r.extend_from_slice(x_i);
    r
}

const DOE_SYSTEM: u64 = 1;
const DOE_SUBSYSTEM: u64 = 2;
const SUB_STEP: u64 = 3;
const SYS_STEP: u64 = 4;

fn doe_budget_error(e: Error) -> Error {
    match e {
        Error::BudgetExhausted { limit } => {
            Error::InvalidConfig(format!("budget {limit} too small for the initial DoE"))
        }
        other => other,
    }
}

/// Draws the system DoE, then one subsystem DoE per discipline at the best
/// system DoE row's targets, and builds every dataset from them.
pub fn init_datasets<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BacoConfig,
    ledger: &BudgetLedger,
) -> Result<BacoState> {
    config.validate()?;
    let dims = problem.dims().clone();
    let bounds = problem.bounds().clone();
    bounds.check()?;
    let n = dims.n_disciplines();
    let start_count = ledger.count();

    let sys_bounds = bounds.system();
    let sys_rows = config.doe_multiplier * sys_bounds.len() + 1;
    let mut rng = stream(config.seed, &[DOE_SYSTEM]);
    let rows = lhs_sample_with(sys_rows, &sys_bounds, &mut rng)?;

    let mut system = Dataset::default();
    let mut system_htot = Vec::new();
    let mut disciplines: Vec<DisciplineData> = (0..n)
        .map(|i| DisciplineData {
            warm_g: vec![None; problem.n_local_constraints(i)],
            ..Default::default()
        })
        .collect();
    let mut best: Option<(DesignPoint, PointMetrics)> = None;
    for v in rows {
        let p = DesignPoint::from_system_vector(&dims, &v)?;
        let a = assess(problem, ledger, &p).map_err(doe_budget_error)?;
        record_system_row(&mut system, &mut system_htot, problem, &p, &a.metrics);
        for (i, d) in disciplines.iter_mut().enumerate() {
            d.discrepancy
                .upper
                .push(discrepancy_row(&p, i), vec![a.discrepancies[i]]);
            let y_others = p.y_sys.exclude(i)?;
            d.local.push(
                local_row(y_others.as_slice(), &p.z_sub[i], &p.x_sub[i]),
                a.outputs[i].g.clone(),
            );
        }
        if accepts(best.as_ref().map(|b| &b.1), &a.metrics, ACCEPT_TOL) {
            best = Some((p, a.metrics));
        }
    }
    let (point, initial_metrics) = best.expect("system DoE has at least one row");

    for (i, d) in disciplines.iter_mut().enumerate() {
        let sub_bounds = bounds.subsystem(i);
        let rows_i = config.doe_multiplier * sub_bounds.len() + 1;
        let mut rng = stream(config.seed, &[DOE_SUBSYSTEM, i as u64]);
        let y_others = point.y_sys.exclude(i)?;
        for v in lhs_sample_with(rows_i, &sub_bounds, &mut rng)? {
            let mut cand = point.clone();
            cand.set_subsystem_vector(i, &v)?;
            let out = eval_subsystem(
                problem,
                ledger,
                i,
                y_others.as_slice(),
                &cand.z_sub[i],
                &cand.x_sub[i],
            )
            .map_err(doe_budget_error)?;
            let j = j_of(&cand, i, &out)?;
            d.discrepancy.lower.push(discrepancy_row(&cand, i), vec![j]);
            d.local.push(
                local_row(y_others.as_slice(), &cand.z_sub[i], &cand.x_sub[i]),
                out.g,
            );
        }
    }

    Ok(BacoState {
        point,
        system,
        system_htot,
        disciplines,
        initial_metrics,
        doe_evals: ledger.count() - start_count,
        warm_f: None,
        warm_c: vec![None; problem.n_system_constraints()],
    })
}

fn j_of(point: &DesignPoint, i: usize, out: &DisciplineOutput) -> Result<f64> {
    discrepancy(
        &point.z_sys,
        point.x_sys.block(i),
        point.y_sys.block(i),
        &point.z_sub[i],
        &point.x_sub[i],
        &out.y,
    )
}

fn record_system_row<P: MdoProblem + ?Sized>(
    system: &mut Dataset,
    htot: &mut Vec<f64>,
    problem: &P,
    p: &DesignPoint,
    m: &PointMetrics,
) {
    let mut out = vec![m.f];
    out.extend(problem.system_constraints(&p.z_sys, &p.x_sys, &p.y_sys));
    system.push(p.system_vector(), out);
    htot.push(m.htot);
}

/// Fits a GP, keeping the fitted log-lengthscales as the next warm start.
fn fit_gp(
    x: &[Vec<f64>],
    y: &[f64],
    config: &BacoConfig,
    seed: u64,
    warm: &mut Option<Vec<f64>>,
) -> Result<GpModel> {
    let m = GpModel::fit(x, y, &config.gp_config(seed, warm.clone()))?;
    *warm = Some(m.log_lengthscales());
    Ok(m)
}

/// Result of one subsystem step.
#[derive(Debug, Clone)]
pub struct SubsystemStep {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub output: DisciplineOutput,
    pub j: f64,
    /// Rows the `J_i` GP was fitted on.
    pub pooled_rows: usize,
    /// True when a GP failed and the proposal came from LHS instead.
    pub fallback: bool,
}

/// One acquisition solve for discipline `i` and one true evaluation.
pub fn subsystem_step<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BacoConfig,
    ledger: &BudgetLedger,
    point: &DesignPoint,
    i: usize,
    data: &mut DisciplineData,
    iteration: usize,
) -> Result<SubsystemStep> {
    let seed = derive_seed(config.seed, &[SUB_STEP, iteration as u64, i as u64]);
    let bounds = problem.bounds().subsystem(i);
    let y_others = point.y_sys.exclude(i)?;
    let (px, py) = data.discrepancy.pooled();
    let pooled_rows = px.len();
    let context: Vec<f64> = {
        let r = discrepancy_row(point, i);
        r[..r.len() - bounds.len()].to_vec()
    };

    let proposal = (|| -> Result<Vec<f64>> {
        let gp_j = fit_gp(
            &px,
            &py,
            config,
            derive_seed(seed, &[0]),
            &mut data.warm_j_sub,
        )?;
        let n_g = data.warm_g.len();
        let mut gp_g = Vec::with_capacity(n_g);
        for k in 0..n_g {
            let y = data.local.column(k);
            gp_g.push(fit_gp(
                &data.local.inputs,
                &y,
                config,
                derive_seed(seed, &[1, k as u64]),
                &mut data.warm_g[k],
            )?);
        }
        let best = py.iter().copied().fold(f64::INFINITY, f64::min);
        let with_context = |v: &[f64]| {
            let mut r = context.clone();
            r.extend_from_slice(v);
            r
        };
        let acq = |v: &[f64]| {
            let (mu, var) = gp_j.predict(&with_context(v)).unwrap_or((f64::NAN, 0.0));
            log_expected_improvement(AcquisitionInput {
                mu,
                sigma: var.sqrt(),
                best,
            })
        };
        let cons = |v: &[f64]| {
            let r = local_row(
                y_others.as_slice(),
                &v[..point.z_sys.len()],
                &v[point.z_sys.len()..],
            );
            gp_g.iter()
                .map(|g| g.predict_mean(&r).unwrap_or(f64::NEG_INFINITY))
                .collect()
        };
        let ms = MultistartConfig {
            n_starts: config.n_starts,
            ..MultistartConfig::for_dim(
                bounds.len(),
                config.acquisition_evals_cap,
                derive_seed(seed, &[2]),
            )
        };
        Ok(multistart_maximize(acq, cons, &bounds, &point.subsystem_vector(i), &ms)?.x)
    })();
    let (v, fallback) = match proposal {
        Ok(v) => (v, false),
        Err(e) => {
            log::warn!("subsystem {i} iteration {iteration}: surrogate step failed ({e}); using an LHS proposal");
            let mut rng = stream(seed, &[3]);
            (lhs_sample_with(1, &bounds, &mut rng)?.remove(0), true)
        }
    };

    let mut cand = point.clone();
    cand.set_subsystem_vector(i, &v)?;
    let output = eval_subsystem(
        problem,
        ledger,
        i,
        y_others.as_slice(),
        &cand.z_sub[i],
        &cand.x_sub[i],
    )?;
    let j = j_of(&cand, i, &output)?;
    data.discrepancy
        .lower
        .push(discrepancy_row(&cand, i), vec![j]);
    data.local.push(
        local_row(y_others.as_slice(), &cand.z_sub[i], &cand.x_sub[i]),
        output.g.clone(),
    );
    Ok(SubsystemStep {
        z: cand.z_sub[i].clone(),
        x: cand.x_sub[i].clone(),
        output,
        j,
        pooled_rows,
        fallback,
    })
}

/// Result of one system step.
#[derive(Debug, Clone)]
pub struct SystemStep {
    pub point: DesignPoint,
    pub metrics: PointMetrics,
    /// Rows each `J_i` GP was fitted on.
    pub pooled_rows: Vec<usize>,
    pub fallback: bool,
}

/// EI incumbent for `f`: best `f` among rows with `htot <= eps`, else the
/// `f` of the least-violating row.
pub fn system_incumbent(f: &[f64], htot: &[f64], eps: f64) -> f64 {
    let feasible = f
        .iter()
        .zip(htot)
        .filter(|(_, h)| **h <= eps)
        .map(|(f, _)| *f)
        .fold(f64::INFINITY, f64::min);
    if feasible.is_finite() {
        return feasible;
    }
    f.iter()
        .zip(htot)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(f64::INFINITY, |(f, _)| *f)
}

/// One system acquisition solve and one true evaluation of every discipline.
/// `state.point` must already hold the fresh subsystem copies.
pub fn system_step<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BacoConfig,
    ledger: &BudgetLedger,
    state: &mut BacoState,
    iteration: usize,
) -> Result<SystemStep> {
    let seed = derive_seed(config.seed, &[SYS_STEP, iteration as u64]);
    let dims = problem.dims().clone();
    let bounds = problem.bounds().system();
    let n = dims.n_disciplines();
    let pooled_rows: Vec<usize> = state
        .disciplines
        .iter()
        .map(|d| d.discrepancy.pooled_len())
        .collect();

    let proposal = (|| -> Result<Vec<f64>> {
        let f_col = state.system.column(0);
        let gp_f = fit_gp(
            &state.system.inputs,
            &f_col,
            config,
            derive_seed(seed, &[0]),
            &mut state.warm_f,
        )?;
        let mut gp_c = Vec::new();
        for k in 0..state.warm_c.len() {
            let y = state.system.column(k + 1);
            gp_c.push(fit_gp(
                &state.system.inputs,
                &y,
                config,
                derive_seed(seed, &[1, k as u64]),
                &mut state.warm_c[k],
            )?);
        }
        let mut gp_j = Vec::with_capacity(n);
        for (i, d) in state.disciplines.iter_mut().enumerate() {
            let (x, y) = d.discrepancy.pooled();
            gp_j.push(fit_gp(
                &x,
                &y,
                config,
                derive_seed(seed, &[2, i as u64]),
                &mut d.warm_j_sys,
            )?);
        }
        let best = system_incumbent(&f_col, &state.system_htot, config.eps);
        let acq = |v: &[f64]| {
            let (mu, var) = gp_f.predict(v).unwrap_or((f64::NAN, 0.0));
            log_expected_improvement(AcquisitionInput {
                mu,
                sigma: var.sqrt(),
                best,
            })
        };
        let base = state.point.clone();
        let cons = |v: &[f64]| {
            let mut out: Vec<f64> = gp_c
                .iter()
                .map(|g| g.predict_mean(v).unwrap_or(f64::NEG_INFINITY))
                .collect();
            let mut cand = base.clone();
            if cand.set_system_vector(&dims, v).is_err() {
                return vec![f64::NEG_INFINITY];
            }
            for (i, g) in gp_j.iter().enumerate() {
                let mu = g
                    .predict_mean(&discrepancy_row(&cand, i))
                    .unwrap_or(f64::INFINITY);
                out.push(config.eps - mu);
            }
            out
        };
        let ms = MultistartConfig {
            n_starts: config.n_starts,
            ..MultistartConfig::for_dim(
                bounds.len(),
                config.acquisition_evals_cap,
                derive_seed(seed, &[3]),
            )
        };
        Ok(multistart_maximize(acq, cons, &bounds, &state.point.system_vector(), &ms)?.x)
    })();
    let (v, fallback) = match proposal {
        Ok(v) => (v, false),
        Err(e) => {
            log::warn!(
                "system iteration {iteration}: surrogate step failed ({e}); using an LHS proposal"
            );
            let mut rng = stream(seed, &[4]);
            (lhs_sample_with(1, &bounds, &mut rng)?.remove(0), true)
        }
    };

    let mut cand = state.point.clone();
    cand.set_system_vector(&dims, &v)?;
    let a = assess(problem, ledger, &cand)?;
    for (i, d) in state.disciplines.iter_mut().enumerate() {
        d.discrepancy
            .upper
            .push(discrepancy_row(&cand, i), vec![a.discrepancies[i]]);
    }
    record_system_row(
        &mut state.system,
        &mut state.system_htot,
        problem,
        &cand,
        &a.metrics,
    );
    state.point = cand.clone();
    Ok(SystemStep {
        point: cand,
        metrics: a.metrics,
        pooled_rows,
        fallback,
    })
}

/// Per-iteration instrumentation.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo {
    /// Rows of each subsystem-level `J_i` GP.
    pub subsystem_pooled: Vec<usize>,
    /// Rows of each system-level `J_i` GP.
    pub system_pooled: Vec<usize>,
    pub fallbacks: usize,
    /// Ledger count at the end of the iteration.
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct BacoReport {
    pub run: SolverRun,
    pub state: BacoState,
    pub iterations: Vec<IterationInfo>,
    /// `(lower, upper)` sizes per discipline right after the DoE.
    pub doe_sizes: Vec<(usize, usize)>,
}

pub fn solve_baco<P: MdoProblem + ?Sized>(problem: &P, config: &BacoConfig) -> Result<SolverRun> {
    Ok(solve_baco_detailed(problem, config)?.run)
}

/// Runs BACO on a fresh ledger of `config.total_budget` evaluations.
pub fn solve_baco_detailed<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BacoConfig,
) -> Result<BacoReport> {
    let n = problem.dims().n_disciplines();
    let ledger = BudgetLedger::new(config.total_budget, n);
    let mut state = init_datasets(problem, config, &ledger)?;
    let doe_sizes = state
        .disciplines
        .iter()
        .map(|d| (d.discrepancy.lower.len(), d.discrepancy.upper.len()))
        .collect();
    let mut inc = Incumbent::default();
    inc.offer(&state.point, state.initial_metrics, ledger.count());
    let mut infos = Vec::new();

    while ledger.remaining() >= 2 * n && !inc.converged(config.eps, config.eps) {
        let k = infos.len();
        let point = state.point.clone();
        let steps: Vec<Result<SubsystemStep>> = std::thread::scope(|s| {
            let handles: Vec<_> = state
                .disciplines
                .iter_mut()
                .enumerate()
                .map(|(i, d)| {
                    let (ledger, point) = (&ledger, &point);
                    s.spawn(move || subsystem_step(problem, config, ledger, point, i, d, k))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("subsystem step panicked"))
                .collect()
        });
        let mut outputs = Vec::with_capacity(n);
        let mut info = IterationInfo {
            subsystem_pooled: Vec::with_capacity(n),
            system_pooled: Vec::new(),
            fallbacks: 0,
            evals: 0,
        };
        for (i, s) in steps.into_iter().enumerate() {
            let s = s?;
            state.point.z_sub[i] = s.z;
            state.point.x_sub[i] = s.x;
            info.subsystem_pooled.push(s.pooled_rows);
            info.fallbacks += usize::from(s.fallback);
            outputs.push(s.output);
        }
        // the subsystem evaluations already assess (targets, fresh copies)
        let a = assessment_from_outputs(problem, &state.point, outputs);
        inc.offer(&state.point, a.metrics, ledger.count());

        let sys = system_step(problem, config, &ledger, &mut state, k)?;
        info.system_pooled = sys.pooled_rows;
        info.fallbacks += usize::from(sys.fallback);
        info.evals = ledger.count();
        inc.offer(&sys.point, sys.metrics, ledger.count());
        infos.push(info);
    }

    let iterations = infos.len();
    let best = inc.best.expect("DoE point always offered");
    Ok(BacoReport {
        run: SolverRun {
            best,
            trace: inc.trace,
            evals_used: ledger.count(),
            iterations,
            setup_evals: state.doe_evals,
        },
        state,
        iterations: infos,
        doe_sizes,
    })
}

/// Uniform random draw inside `bounds`; used by tests and tools.
pub fn uniform_point<R: Rng + ?Sized>(bounds: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect()
}
