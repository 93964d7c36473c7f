//! Collaborative Optimization and its MCO and ICO variants on true black boxes.
//!
//! Each major iteration runs every subsystem solve (concurrently), then one
//! system solve. Subsystem `i` minimizes its discrepancy `J_i` over its copies
//! `(z_i, x_i)` subject to `g_i >= 0`; every probe is one counted discipline
//! evaluation. The system solve probes targets; every probe re-evaluates all
//! `N` disciplines at the subsystem copies. The variants differ only in the
//! system problem:
//!
//! * CO: minimize `f` subject to `J_i <= eps_J`.
//! * MCO: `z_sys` is the mean of the copies; minimize `f` over `(x, y)` subject
//!   to `J_i <= eps_J`.
//! * ICO: minimize `f + gamma * sum |J_i - r^2|` with `r = 0`, `gamma` grown
//!   by `delta` after each major iteration.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::local_opt::{minimize, Evaluation, LocalProblem};
use crate::mdo::{
    assessment_from_outputs, discrepancy, eval_subsystem, BudgetLedger, DesignPoint,
    DisciplineOutput, MdoProblem,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::trace::{Incumbent, SolverRun};

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelConfig {
    pub total_budget: usize,
    pub system_fraction: f64,
    pub iteration_ratio: f64,
    pub eps_j: f64,
    pub eps_h: f64,
    pub seed: u64,
}

impl Default for BilevelConfig {
    fn default() -> Self {
        BilevelConfig {
            total_budget: 300,
            system_fraction: 0.5,
            iteration_ratio: 0.05,
            eps_j: 1e-3,
            eps_h: 1e-3,
            seed: 0,
        }
    }
}

impl BilevelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.system_fraction > 0.0 && self.system_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "system_fraction must lie in (0, 1)".into(),
            ));
        }
        if !(self.iteration_ratio > 0.0 && self.iteration_ratio <= 1.0) {
            return Err(Error::InvalidConfig(
                "iteration_ratio must lie in (0, 1]".into(),
            ));
        }
        if !(self.eps_j >= 0.0 && self.eps_h >= 0.0) {
            return Err(Error::InvalidConfig(
                "tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `(system_budget, per_subsystem_budget, per_iteration_cap)`.
pub fn budget_split(
    total: usize,
    n: usize,
    system_fraction: f64,
    iteration_ratio: f64,
) -> Result<(usize, usize, usize)> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "at least one discipline is required".into(),
        ));
    }
    if total < n + 1 {
        return Err(Error::InvalidConfig(format!(
            "budget {total} too small for {n} disciplines"
        )));
    }
    let system = (system_fraction * total as f64).floor() as usize;
    let per_sub = (total - system) / n;
    let cap = (iteration_ratio * total as f64).ceil() as usize;
    Ok((system, per_sub, cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoVariant {
    Co,
    Mco,
    Ico,
}

/// ICO penalty-growth factor.
pub const ICO_DELTA: f64 = 1.1;
/// ICO initial penalty weight.
pub const ICO_GAMMA0: f64 = 1.0;
/// ICO hypersphere radius.
pub const ICO_RADIUS: f64 = 0.0;

/// `gamma * sum_i |J_i - r^2|`.
pub fn ico_penalty(discrepancies: &[f64], gamma: f64, radius: f64) -> f64 {
    gamma
        * discrepancies
            .iter()
            .map(|j| (j - radius * radius).abs())
            .sum::<f64>()
}

/// Element-wise arithmetic mean of the subsystem copies of `z`.
pub fn mean_copies(z_sub: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = z_sub
        .first()
        .ok_or(Error::InvalidConfig("no copies to average".into()))?;
    let n = z_sub.len() as f64;
    Ok((0..first.len())
        .map(|k| z_sub.iter().map(|c| c[k]).sum::<f64>() / n)
        .collect())
}

/// Uniform random system targets within bounds; copies equal the targets.
pub fn random_start<P: MdoProblem + ?Sized>(problem: &P, seed: u64) -> Result<DesignPoint> {
    let mut rng = rng_from_seed(derive_seed(seed, &[0x57a7]));
    let v: Vec<f64> = problem
        .bounds()
        .system()
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect();
    DesignPoint::from_system_vector(problem.dims(), &v)
}

/// Evaluations spent by each level in one major iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationUsage {
    pub subsystems: Vec<usize>,
    pub system: usize,
}

impl IterationUsage {
    pub fn subsystem_level(&self) -> usize {
        self.subsystems.iter().sum()
    }
}

/// A bi-level run together with its per-iteration instrumentation.
#[derive(Debug, Clone)]
pub struct BilevelReport {
    pub run: SolverRun,
    pub usage: Vec<IterationUsage>,
    /// ICO penalty weight used in each system solve (empty for CO and MCO).
    pub gammas: Vec<f64>,
    pub per_iteration_cap: usize,
}

pub fn solve_co<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BilevelConfig,
    x_init: &DesignPoint,
) -> Result<SolverRun> {
    Ok(solve_bilevel(problem, config, x_init, CoVariant::Co)?.run)
}

pub fn solve_mco<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BilevelConfig,
    x_init: &DesignPoint,
) -> Result<SolverRun> {
    Ok(solve_bilevel(problem, config, x_init, CoVariant::Mco)?.run)
}

pub fn solve_ico<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BilevelConfig,
    x_init: &DesignPoint,
) -> Result<SolverRun> {
    Ok(solve_bilevel(problem, config, x_init, CoVariant::Ico)?.run)
}

struct SubsystemOutcome {
    z: Vec<f64>,
    x: Vec<f64>,
    output: DisciplineOutput,
    used: usize,
}

fn subsystem_solve<P: MdoProblem + ?Sized>(
    problem: &P,
    ledger: &BudgetLedger,
    point: &DesignPoint,
    i: usize,
    quota: usize,
    seed: u64,
) -> Result<SubsystemOutcome> {
    let nz = point.z_sys.len();
    let y_others = point.y_sys.exclude(i)?;
    let mut outputs: HashMap<Vec<u64>, DisciplineOutput> = HashMap::new();
    let mut used = 0;
    let evaluate = |v: &[f64]| -> Result<Evaluation> {
        if used >= quota {
            return Err(Error::BudgetExhausted { limit: quota });
        }
        let (z_i, x_i) = v.split_at(nz);
        let out = eval_subsystem(problem, ledger, i, y_others.as_slice(), z_i, x_i)?;
        used += 1;
        let j = discrepancy(
            &point.z_sys,
            point.x_sys.block(i),
            point.y_sys.block(i),
            z_i,
            x_i,
            &out.y,
        )?;
        let g = out.g.clone();
        outputs.insert(v.iter().map(|t| t.to_bits()).collect(), out);
        Ok(Evaluation {
            objective: j,
            inequalities: g,
            equalities: Vec::new(),
        })
    };
    let mut lp = LocalProblem::new(
        evaluate,
        problem.bounds().subsystem(i),
        point.subsystem_vector(i),
        quota,
    );
    lp.seed = seed;
    let r = minimize(lp)?;
    if let Some(e) = &r.interrupted {
        if !matches!(e, Error::BudgetExhausted { .. }) {
            return Err(e.clone());
        }
    }
    let key: Vec<u64> = r.x_star.iter().map(|t| t.to_bits()).collect();
    let output = outputs
        .remove(&key)
        .expect("every evaluated point has a cached output");
    Ok(SubsystemOutcome {
        z: r.x_star[..nz].to_vec(),
        x: r.x_star[nz..].to_vec(),
        output,
        used,
    })
}

/// Shared engine behind [`solve_co`], [`solve_mco`] and [`solve_ico`].
pub fn solve_bilevel<P: MdoProblem + ?Sized>(
    problem: &P,
    config: &BilevelConfig,
    x_init: &DesignPoint,
    variant: CoVariant,
) -> Result<BilevelReport> {
    config.validate()?;
    let dims = problem.dims().clone();
    let bounds = problem.bounds().clone();
    bounds.check()?;
    x_init.validate(&dims, &bounds)?;
    let n = dims.n_disciplines();
    let (sys_budget, sub_budget, cap) = budget_split(
        config.total_budget,
        n,
        config.system_fraction,
        config.iteration_ratio,
    )?;
    let sub_cap = (cap / n).max(1);
    let ledger = BudgetLedger::new(config.total_budget, n);

    let mut point = x_init.clone();
    if variant == CoVariant::Mco {
        point.z_sys = mean_copies(&point.z_sub)?;
    }
    let mut inc = Incumbent::default();
    let mut sys_used = 0;
    let mut sub_used = vec![0usize; n];
    let mut gamma = ICO_GAMMA0;
    let mut usage = Vec::new();
    let mut gammas = Vec::new();
    let mut iterations = 0;

    loop {
        let quotas: Vec<usize> = (0..n)
            .map(|i| sub_cap.min(sub_budget - sub_used[i]))
            .collect();
        if quotas.contains(&0) {
            break;
        }
        let mut it_usage = IterationUsage {
            subsystems: vec![0; n],
            system: 0,
        };

        // subsystem level
        let outcomes: Vec<Result<SubsystemOutcome>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|i| {
                    let (ledger, point, q) = (&ledger, &point, quotas[i]);
                    let seed = derive_seed(config.seed, &[iterations as u64, i as u64]);
                    s.spawn(move || subsystem_solve(problem, ledger, point, i, q, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("subsystem solve panicked"))
                .collect()
        });
        let mut outputs = Vec::with_capacity(n);
        for (i, o) in outcomes.into_iter().enumerate() {
            let o = o?;
            point.z_sub[i] = o.z;
            point.x_sub[i] = o.x;
            sub_used[i] += o.used;
            it_usage.subsystems[i] = o.used;
            outputs.push(o.output);
        }
        if variant == CoVariant::Mco {
            point.z_sys = mean_copies(&point.z_sub)?;
        }
        let a = assessment_from_outputs(problem, &point, outputs);
        inc.offer(&point, a.metrics, ledger.count());
        if inc.converged(config.eps_j, config.eps_h) {
            usage.push(it_usage);
            iterations += 1;
            break;
        }

        // system level
        let probes = cap.min(sys_budget - sys_used) / n;
        if probes == 0 {
            usage.push(it_usage);
            iterations += 1;
            break;
        }
        let nz = dims.z;
        let free_start = if variant == CoVariant::Mco { nz } else { 0 };
        let full = point.system_vector();
        let sys_bounds = bounds.system()[free_start..].to_vec();
        let mut cache: HashMap<Vec<u64>, Vec<DisciplineOutput>> = HashMap::new();
        let mut probes_used = 0;
        let g_now = gamma;
        let evaluate = |v: &[f64]| -> Result<Evaluation> {
            if probes_used >= probes {
                return Err(Error::BudgetExhausted { limit: probes * n });
            }
            let mut cand = point.clone();
            let mut sv = full.clone();
            sv[free_start..].copy_from_slice(v);
            cand.set_system_vector(&dims, &sv)?;
            let outs = (0..n)
                .map(|i| {
                    let y_others = cand.y_sys.exclude(i)?;
                    eval_subsystem(
                        problem,
                        &ledger,
                        i,
                        y_others.as_slice(),
                        &cand.z_sub[i],
                        &cand.x_sub[i],
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            probes_used += 1;
            let a = assessment_from_outputs(problem, &cand, outs.clone());
            cache.insert(v.iter().map(|t| t.to_bits()).collect(), outs);
            let c = problem.system_constraints(&cand.z_sys, &cand.x_sys, &cand.y_sys);
            Ok(match variant {
                CoVariant::Co | CoVariant::Mco => {
                    let mut ineq: Vec<f64> =
                        a.discrepancies.iter().map(|j| config.eps_j - j).collect();
                    ineq.extend(c);
                    Evaluation {
                        objective: a.metrics.f,
                        inequalities: ineq,
                        equalities: Vec::new(),
                    }
                }
                CoVariant::Ico => Evaluation {
                    objective: a.metrics.f + ico_penalty(&a.discrepancies, g_now, ICO_RADIUS),
                    inequalities: c,
                    equalities: Vec::new(),
                },
            })
        };
        let mut lp = LocalProblem::new(evaluate, sys_bounds, full[free_start..].to_vec(), probes);
        lp.seed = derive_seed(config.seed, &[iterations as u64, u64::MAX]);
        let r = minimize(lp)?;
        if let Some(e) = &r.interrupted {
            if !matches!(e, Error::BudgetExhausted { .. }) {
                return Err(e.clone());
            }
        }
        let mut sv = full.clone();
        sv[free_start..].copy_from_slice(&r.x_star);
        point.set_system_vector(&dims, &sv)?;
        let outs = cache
            .remove(&r.x_star.iter().map(|t| t.to_bits()).collect::<Vec<_>>())
            .expect("every probed point has cached outputs");
        sys_used += probes_used * n;
        it_usage.system = probes_used * n;
        if variant == CoVariant::Ico {
            gammas.push(gamma);
            gamma *= ICO_DELTA;
        }
        let a = assessment_from_outputs(problem, &point, outs);
        inc.offer(&point, a.metrics, ledger.count());
        usage.push(it_usage);
        iterations += 1;
        if inc.converged(config.eps_j, config.eps_h) {
            break;
        }
    }

    let best = inc.best.ok_or(Error::InvalidConfig(
        "budget too small for one subsystem cycle".into(),
    ))?;
    Ok(BilevelReport {
        run: SolverRun {
            best,
            trace: inc.trace,
            evals_used: ledger.count(),
            iterations,
            setup_evals: 0,
        },
        usage,
        gammas,
        per_iteration_cap: cap,
    })
}
