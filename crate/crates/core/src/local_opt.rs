//! Bound- and inequality-constrained derivative-free local minimization.
//!
//! [`minimize`] runs a bounded Nelder–Mead simplex on the penalty merit
//! `f + w * (v + v^2)` where `v` sums the inequality shortfalls `max(0, -g)`
//! and the equality excesses `max(0, |h| - tol)`. The linear part makes the
//! penalty exact once `w` exceeds the multipliers. Bounds are honored by
//! projection, so the evaluator is never called outside them. The weight
//! starts at 10 and is multiplied by 10 for up to three passes while the
//! incumbent is infeasible. A collapsed simplex is rebuilt around the
//! incumbent a few times before the run is declared converged. The result is
//! the lowest-objective feasible point seen, or the lowest-merit point when
//! none was feasible.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdo::squared_violation;
use crate::rng::rng_from_seed;
use crate::sampling::lhs_sample_with;

/// Objective and constraint values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// Feasible when `>= 0`.
    pub inequalities: Vec<f64>,
    /// Feasible when `|h| <= equality_tol`.
    pub equalities: Vec<f64>,
}

impl Evaluation {
    pub fn unconstrained(objective: f64) -> Self {
        Evaluation {
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    fn shortfall(&self, equality_tol: f64) -> f64 {
        self.inequalities.iter().map(|g| (-g).max(0.0)).sum::<f64>()
            + self
                .equalities
                .iter()
                .map(|h| (h.abs() - equality_tol).max(0.0))
                .sum::<f64>()
    }

    fn violation(&self, equality_tol: f64) -> f64 {
        squared_violation(&self.inequalities)
            + self
                .equalities
                .iter()
                .map(|h| (h.abs() - equality_tol).max(0.0).powi(2))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptions {
    /// Initial simplex edge as a fraction of each bound range.
    pub initial_step: f64,
    /// Simplex size (relative to bound ranges) at which a pass has collapsed.
    pub xtol: f64,
    pub penalty_initial: f64,
    pub penalty_factor: f64,
    pub penalty_passes: usize,
    pub equality_tol: f64,
    /// Violation below which the incumbent counts as feasible.
    pub feasibility_tol: f64,
    /// Simplex rebuilds allowed after a collapse.
    pub max_restarts: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            initial_step: 0.1,
            xtol: 1e-10,
            penalty_initial: 10.0,
            penalty_factor: 10.0,
            penalty_passes: 3,
            equality_tol: 1e-6,
            feasibility_tol: 1e-12,
            max_restarts: 3,
        }
    }
}

/// A local minimization problem. `evaluate` may fail (for instance when the
/// evaluation budget is spent); the search then stops with the incumbent.
pub struct LocalProblem<F> {
    pub evaluate: F,
    pub bounds: Vec<(f64, f64)>,
    pub x0: Vec<f64>,
    pub max_evals: usize,
    pub seed: u64,
    pub options: LocalOptions,
}

impl<F> LocalProblem<F>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    pub fn new(evaluate: F, bounds: Vec<(f64, f64)>, x0: Vec<f64>, max_evals: usize) -> Self {
        LocalProblem {
            evaluate,
            bounds,
            x0,
            max_evals,
            seed: 0,
            options: LocalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Constraint violation at `x_star` in the merit's squared form.
    pub violation: f64,
    pub evaluation: Evaluation,
    pub n_evals: usize,
    pub converged: bool,
    /// Set when an evaluation failed and cut the search short.
    pub interrupted: Option<Error>,
}

struct Search<'a, F> {
    evaluate: &'a mut F,
    bounds: &'a [(f64, f64)],
    max_evals: usize,
    opts: &'a LocalOptions,
    history: Vec<(Vec<f64>, Evaluation)>,
    cache: HashMap<Vec<u64>, usize>,
    interrupted: Option<Error>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl<F> Search<'_, F>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    fn merit(&self, idx: usize, weight: f64) -> f64 {
        let e = &self.history[idx].1;
        if !e.objective.is_finite() {
            return f64::INFINITY;
        }
        let v = e.shortfall(self.opts.equality_tol);
        e.objective + weight * (v + v * v)
    }

    fn exhausted(&self) -> bool {
        self.interrupted.is_some() || self.history.len() >= self.max_evals
    }

    fn project(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Evaluates (with caching) and returns the history index.
    fn eval(&mut self, x: Vec<f64>) -> Option<usize> {
        let k = key(&x);
        if let Some(&idx) = self.cache.get(&k) {
            return Some(idx);
        }
        if self.exhausted() {
            return None;
        }
        match (self.evaluate)(&x) {
            Ok(e) => {
                self.history.push((x, e));
                let idx = self.history.len() - 1;
                self.cache.insert(k, idx);
                Some(idx)
            }
            Err(err) => {
                self.interrupted = Some(err);
                None
            }
        }
    }

    fn best(&self, weight: f64) -> usize {
        (0..self.history.len())
            .min_by(|&a, &b| self.merit(a, weight).total_cmp(&self.merit(b, weight)))
            .expect("history holds x0")
    }

    fn size(&self, simplex: &[usize]) -> f64 {
        let x0 = &self.history[simplex[0]].0;
        simplex[1..]
            .iter()
            .flat_map(|&j| {
                self.history[j]
                    .0
                    .iter()
                    .zip(x0)
                    .zip(self.bounds)
                    .map(|((a, b), (lo, hi))| (a - b).abs() / (hi - lo))
            })
            .fold(0.0, f64::max)
    }

    /// One Nelder–Mead descent from `start`; returns true when it collapsed
    /// (as opposed to running out of evaluations).
    fn descend(&mut self, start: usize, step: f64, weight: f64, rng: &mut impl Rng) -> bool {
        let n = self.bounds.len();
        let nf = n as f64;
        // Gao–Han adaptive coefficients
        let (alpha, beta, gamma, delta) = if n >= 2 {
            (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
        } else {
            (1.0, 2.0, 0.5, 0.5)
        };

        let x0 = self.history[start].0.clone();
        let mut simplex = vec![start];
        for i in 0..n {
            let (lo, hi) = self.bounds[i];
            let h = step * (hi - lo);
            let mut x = x0.clone();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x[i] += sign * h;
            if x[i] > hi || x[i] < lo {
                x[i] = x0[i] - sign * h;
            }
            self.project(&mut x);
            match self.eval(x) {
                Some(idx) => simplex.push(idx),
                None => return false,
            }
        }

        loop {
            simplex.sort_by(|&a, &b| self.merit(a, weight).total_cmp(&self.merit(b, weight)));
            if self.size(&simplex) <= self.opts.xtol {
                return true;
            }
            let fl = self.merit(simplex[0], weight);
            let fh = self.merit(simplex[n], weight);
            if fl.is_finite() && (fh - fl).abs() <= 1e-15 * fl.abs().max(1e-300) && fh.is_finite() {
                return true;
            }
            if self.exhausted() {
                return false;
            }

            let worst = self.history[simplex[n]].0.clone();
            let centroid: Vec<f64> = (0..n)
                .map(|d| {
                    simplex[..n]
                        .iter()
                        .map(|&j| self.history[j].0[d])
                        .sum::<f64>()
                        / nf
                })
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let mut xr = along(alpha);
            self.project(&mut xr);
            let Some(r) = self.eval(xr) else { return false };
            let fr = self.merit(r, weight);
            let fs = self.merit(simplex[n - 1], weight);

            if fr < fl {
                let mut xe = along(alpha * beta);
                self.project(&mut xe);
                let Some(e) = self.eval(xe) else {
                    simplex[n] = r;
                    return false;
                };
                simplex[n] = if self.merit(e, weight) < fr { e } else { r };
                continue;
            }
            if fr < fs {
                simplex[n] = r;
                continue;
            }
            let outside = fr < fh;
            let mut xc = if outside {
                along(alpha * gamma)
            } else {
                along(-gamma)
            };
            self.project(&mut xc);
            let Some(c) = self.eval(xc) else { return false };
            let fc = self.merit(c, weight);
            if (outside && fc <= fr) || (!outside && fc < fh) {
                simplex[n] = c;
                continue;
            }
            // shrink toward the best vertex
            let best = self.history[simplex[0]].0.clone();
            for slot in simplex.iter_mut().skip(1) {
                let xs: Vec<f64> = self.history[*slot]
                    .0
                    .iter()
                    .zip(&best)
                    .map(|(v, b)| b + delta * (v - b))
                    .collect();
                match self.eval(xs) {
                    Some(idx) => *slot = idx,
                    None => return false,
                }
            }
        }
    }
}

/// Minimizes the merit of `problem` from `x0`. See the module docs.
pub fn minimize<F>(mut problem: LocalProblem<F>) -> Result<LocalResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    if problem.max_evals == 0 {
        return Err(Error::InvalidConfig("max_evals must be positive".into()));
    }
    if problem.x0.len() != problem.bounds.len() {
        return Err(Error::DimensionMismatch {
            context: "minimize x0",
            expected: problem.bounds.len(),
            got: problem.x0.len(),
        });
    }
    for (dim, (&v, &(lower, upper))) in problem.x0.iter().zip(&problem.bounds).enumerate() {
        if !(lower < upper) {
            return Err(Error::InvalidBounds { dim, lower, upper });
        }
        if !(v >= lower && v <= upper) {
            return Err(Error::InvalidConfig(format!(
                "x0[{dim}] = {v} outside [{lower}, {upper}]"
            )));
        }
    }

    let opts = problem.options.clone();
    let mut rng = rng_from_seed(problem.seed);
    let mut search = Search {
        evaluate: &mut problem.evaluate,
        bounds: &problem.bounds,
        max_evals: problem.max_evals,
        opts: &opts,
        history: Vec::new(),
        cache: HashMap::new(),
        interrupted: None,
    };

    let x0 = problem.x0.clone();
    match search.eval(x0) {
        Some(_) => {}
        None => return Err(search.interrupted.take().expect("first evaluation failed")),
    }
    if !search.history[0].1.objective.is_finite() {
        return Err(Error::NonFinite("objective at x0"));
    }

    let mut weight = opts.penalty_initial;
    let mut converged = false;
    let n_passes = opts.penalty_passes.max(1);
    for pass in 0..n_passes {
        let mut step = opts.initial_step;
        let mut restarts = 0;
        converged = false;
        loop {
            let start = search.best(weight);
            let before = search.merit(start, weight);
            let collapsed = search.descend(start, step, weight, &mut rng);
            if !collapsed {
                break;
            }
            let after = search.merit(search.best(weight), weight);
            let gained = before - after > 1e-12 * before.abs().max(1.0);
            if restarts >= opts.max_restarts || (!gained && restarts > 0) {
                converged = true;
                break;
            }
            restarts += 1;
            step = (step * 0.1).max(1e-6);
        }
        let b = search.best(weight);
        let feasible = search.history[b].1.violation(opts.equality_tol) <= opts.feasibility_tol;
        if search.exhausted() || feasible || pass + 1 == n_passes {
            break;
        }
        weight *= opts.penalty_factor;
    }

    let tol = opts.feasibility_tol;
    let b = (0..search.history.len())
        .filter(|&i| {
            let e = &search.history[i].1;
            e.objective.is_finite() && e.violation(opts.equality_tol) <= tol
        })
        .min_by(|&a, &b| {
            search.history[a]
                .1
                .objective
                .total_cmp(&search.history[b].1.objective)
        })
        .unwrap_or_else(|| search.best(weight));
    let (x_star, evaluation) = search.history[b].clone();
    Ok(LocalResult {
        f_star: evaluation.objective,
        violation: evaluation.violation(opts.equality_tol),
        x_star,
        evaluation,
        n_evals: search.history.len(),
        converged,
        interrupted: search.interrupted.take(),
    })
}

/// Settings for [`multistart_maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultistartConfig {
    /// Total starts: `n_starts - 1` LHS points plus the previous best.
    pub n_starts: usize,
    pub per_start_evals: usize,
    pub seed: u64,
    /// A result counts as feasible when every constraint is `>= -tol`.
    pub feasibility_tol: f64,
}

impl MultistartConfig {
    /// 25 starts and `200 * dim` evaluations per start, capped at `cap`.
    pub fn for_dim(dim: usize, cap: usize, seed: u64) -> Self {
        MultistartConfig {
            n_starts: 25,
            per_start_evals: (200 * dim).min(cap).max(1),
            seed,
            feasibility_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub feasible: bool,
    /// Squared constraint violation at `x`.
    pub violation: f64,
    /// Starting points used, the previous best last.
    pub starts: Vec<Vec<f64>>,
}

/// Maximizes `acquisition` subject to `constraints(x) >= 0` from several starts.
///
/// Returns the feasible result with the largest acquisition; when no start
/// ends feasible, the result with the smallest squared violation.
/// Non-finite acquisition values are treated as the worst possible.
pub fn multistart_maximize<A, C>(
    acquisition: A,
    constraints: C,
    bounds: &[(f64, f64)],
    prev_best: &[f64],
    config: &MultistartConfig,
) -> Result<MultistartResult>
where
    A: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    if config.n_starts == 0 {
        return Err(Error::InvalidConfig("n_starts must be positive".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut starts = if config.n_starts > 1 {
        lhs_sample_with(config.n_starts - 1, bounds, &mut rng)?
    } else {
        Vec::new()
    };
    let prev: Vec<f64> = prev_best
        .iter()
        .zip(bounds)
        .map(|(v, &(lo, hi))| v.clamp(lo, hi))
        .collect();
    starts.push(prev);

    let worst = -1e300;
    let score = |x: &[f64]| {
        let a = acquisition(x);
        if a.is_finite() {
            a
        } else {
            worst
        }
    };

    let mut best: Option<(Vec<f64>, f64, f64, bool)> = None;
    for (s, x0) in starts.iter().enumerate() {
        let problem = LocalProblem {
            evaluate: |x: &[f64]| {
                Ok(Evaluation {
                    objective: -score(x),
                    inequalities: constraints(x),
                    equalities: Vec::new(),
                })
            },
            bounds: bounds.to_vec(),
            x0: x0.clone(),
            max_evals: config.per_start_evals,
            seed: crate::rng::derive_seed(config.seed, &[s as u64]),
            options: LocalOptions::default(),
        };
        let r = minimize(problem)?;
        let value = -r.f_star;
        let cons = &r.evaluation.inequalities;
        let feasible = cons.iter().all(|c| *c >= -config.feasibility_tol);
        let violation = squared_violation(cons);
        let better = match &best {
            None => true,
            Some((_, bv, bviol, bfeas)) => match (feasible, *bfeas) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => value > *bv,
                (false, false) => violation < *bviol,
            },
        };
        if better {
            best = Some((r.x_star, value, violation, feasible));
        }
    }
    let (x, value, violation, feasible) = best.expect("at least one start");
    Ok(MultistartResult {
        x,
        value,
        feasible,
        violation,
        starts,
    })
}
