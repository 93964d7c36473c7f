//! Gaussian-process regression with an anisotropic squared-exponential kernel.
//!
//! Inputs are standardized per column and outputs to zero mean / unit
//! variance; the GP itself is zero-mean on the standardized outputs.
//! Lengthscales maximize the concentrated log-likelihood (process variance
//! profiled out in closed form) over several bounded Nelder–Mead restarts in
//! log-lengthscale space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::local_opt::{minimize, Evaluation, LocalOptions, LocalProblem};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    /// Initial nugget, relative to the (standardized) process variance.
    pub nugget: f64,
    /// Largest nugget tried before giving up; escalation is by decades.
    pub max_nugget: f64,
    pub n_restarts: usize,
    /// Log-lengthscale search box, relative to each input column's range.
    pub log_lengthscale_bounds: (f64, f64),
    /// Likelihood evaluations per restart.
    pub evals_per_restart: usize,
    /// Optional first restart point (log-lengthscales, standardized units).
    pub warm_start: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            nugget: 2.2e-14,
            max_nugget: 1e-6,
            n_restarts: 10,
            log_lengthscale_bounds: (1e-2f64.ln(), 1e2f64.ln()),
            evals_per_restart: 120,
            warm_start: None,
            seed: 0,
        }
    }
}

impl GpConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.log_lengthscale_bounds;
        if !(self.nugget > 0.0) || !(self.max_nugget >= self.nugget) {
            return Err(Error::InvalidConfig("nugget must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(
                "lengthscale bounds must satisfy lo < hi".into(),
            ));
        }
        if self.n_restarts == 0 || self.evals_per_restart == 0 {
            return Err(Error::InvalidConfig(
                "restarts and evaluations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `variance * exp(-1/2 sum_d ((x_d - x2_d) / l_d)^2)`.
pub fn kernel(x: &[f64], x2: &[f64], lengthscales: &[f64], variance: f64) -> Result<f64> {
    if x.len() != x2.len() || x.len() != lengthscales.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel",
            expected: lengthscales.len(),
            got: x.len().max(x2.len()),
        });
    }
    if !(variance > 0.0) || lengthscales.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Domain(
            "kernel needs positive lengthscales and variance",
        ));
    }
    let s: f64 = x
        .iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    Ok(variance * (-0.5 * s).exp())
}

/// Training data prepared for repeated likelihood evaluation.
struct Prepared {
    n: usize,
    d: usize,
    /// Per unordered pair `(i < j)`, the `d` squared coordinate differences.
    pair_sq: Vec<f64>,
    y: DVector<f64>,
}

impl Prepared {
    fn new(x: &[Vec<f64>], y: &[f64]) -> Self {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let mut pair_sq = Vec::with_capacity(n * (n - 1) / 2 * d);
        for i in 0..n {
            for j in (i + 1)..n {
                pair_sq.extend(x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)));
            }
        }
        Prepared {
            n,
            d,
            pair_sq,
            y: DVector::from_column_slice(y),
        }
    }

    /// Correlation matrix (unit variance) plus nugget on the diagonal, as a
    /// dense row-major buffer.
    fn correlation_into(&self, inv_sq_len: &[f64], nugget: f64, r: &mut Vec<f64>) {
        let n = self.n;
        r.clear();
        r.resize(n * n, 0.0);
        let mut p = 0;
        for i in 0..n {
            r[i * n + i] = 1.0 + nugget;
            for j in (i + 1)..n {
                let s: f64 = self.pair_sq[p..p + self.d]
                    .iter()
                    .zip(inv_sq_len)
                    .map(|(a, b)| a * b)
                    .sum();
                let v = (-0.5 * s).exp();
                r[i * n + j] = v;
                r[j * n + i] = v;
                p += self.d;
            }
        }
    }

    #[cfg(test)]
    fn correlation(&self, inv_sq_len: &[f64], nugget: f64) -> DMatrix<f64> {
        let mut r = Vec::new();
        self.correlation_into(inv_sq_len, nugget, &mut r);
        DMatrix::from_row_slice(self.n, self.n, &r)
    }

    /// Negative concentrated log-likelihood; `work` is scratch space that
    /// holds the lower Cholesky factor (row-major) on success.
    fn nll_with(
        &self,
        log_len: &[f64],
        nugget: f64,
        work: &mut Vec<f64>,
    ) -> Option<(f64, Vec<f64>, f64)> {
        let n = self.n;
        let inv_sq: Vec<f64> = log_len.iter().map(|l| (-2.0 * l).exp()).collect();
        self.correlation_into(&inv_sq, nugget, work);
        cholesky_in_place(work, n)?;
        let mut alpha = self.y.as_slice().to_vec();
        forward_sub(work, n, &mut alpha);
        let quad: f64 = alpha.iter().map(|v| v * v).sum();
        back_sub_transpose(work, n, &mut alpha);
        // constant outputs give a zero quadratic form
        let sigma2 = (quad / n as f64).max(f64::MIN_POSITIVE);
        if !sigma2.is_finite() {
            return None;
        }
        let log_det: f64 = 2.0 * (0..n).map(|i| work[i * n + i].ln()).sum::<f64>();
        let nf = n as f64;
        let value =
            0.5 * nf * (2.0 * std::f64::consts::PI * sigma2).ln() + 0.5 * log_det + 0.5 * nf;
        Some((value, alpha, sigma2))
    }

    fn nll(&self, log_len: &[f64], nugget: f64) -> Option<(f64, Factor)> {
        let mut work = Vec::new();
        let (value, alpha, sigma2) = self.nll_with(log_len, nugget, &mut work)?;
        let n = self.n;
        let l = DMatrix::from_fn(n, n, |i, j| if j <= i { work[i * n + j] } else { 0.0 });
        Some((
            value,
            Factor {
                l,
                alpha: DVector::from_vec(alpha),
                sigma2,
            },
        ))
    }
}

/// Lower Cholesky factor of a row-major SPD matrix, in place (the strict
/// upper triangle is left untouched). `None` if a pivot is not positive.
/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (p, q) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += p[k] * q[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(p, q)| p * q).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let row = &a[j * n..j * n + j];
        let d = a[j * n + j] - dot(row, row);
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let (top, bottom) = a.split_at_mut(i * n);
            let row_j = &top[j * n..j * n + j];
            let row_i = &mut bottom[..j + 1];
            let s = dot(&row_i[..j], row_j);
            row_i[j] = (row_i[j] - s) / d;
        }
    }
    Some(())
}

fn forward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s = dot(&l[i * n..i * n + i], &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

fn back_sub_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        b[i] /= l[i * n + i];
        let bi = b[i];
        for k in 0..i {
            b[k] -= l[i * n + k] * bi;
        }
    }
}

struct Factor {
    l: DMatrix<f64>,
    alpha: DVector<f64>,
    sigma2: f64,
}

/// Negative concentrated log-likelihood of `(x, y)` as given (no
/// standardization), with the process variance at its closed-form maximizer.
pub fn concentrated_nll(
    log_lengthscales: &[f64],
    x: &[Vec<f64>],
    y: &[f64],
    nugget: f64,
) -> Result<f64> {
    check_data(x, y)?;
    if x[0].len() != log_lengthscales.len() {
        return Err(Error::DimensionMismatch {
            context: "concentrated_nll",
            expected: x[0].len(),
            got: log_lengthscales.len(),
        });
    }
    Prepared::new(x, y)
        .nll(log_lengthscales, nugget)
        .map(|(v, _)| v)
        .ok_or(Error::NotPositiveDefinite { nugget })
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "GP data rows",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig("GP needs at least two points".into()));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            context: "GP input columns",
            expected: d,
            got: x.iter().map(Vec::len).find(|l| *l != d).unwrap_or(0),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GP training data"));
    }
    Ok(())
}

/// A fitted GP surrogate. Immutable; prediction is `&self`.
#[derive(Debug, Clone)]
pub struct GpModel {
    x_train: Vec<Vec<f64>>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Lengthscales in standardized input units.
    lengthscales: Vec<f64>,
    inv_sq_len: Vec<f64>,
    /// Process variance in standardized output units.
    process_variance: f64,
    nugget: f64,
    l: DMatrix<f64>,
    /// `(R + nugget I)^-1 y` on standardized outputs.
    alpha: DVector<f64>,
    nll: f64,
}

impl GpModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel> {
        fit(x, y, config)
    }

    pub fn n_train(&self) -> usize {
        self.x_train.len()
    }

    pub fn dim(&self) -> usize {
        self.x_mean.len()
    }

    /// Lengthscales converted back to original input units.
    pub fn lengthscales(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .zip(&self.x_scale)
            .map(|(l, s)| l * s)
            .collect()
    }

    /// Log-lengthscales in the standardized space, usable as a warm start.
    pub fn log_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| l.ln()).collect()
    }

    /// Prior variance in original output units.
    pub fn process_variance(&self) -> f64 {
        self.process_variance * self.y_scale * self.y_scale
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Negative concentrated log-likelihood at the fitted lengthscales
    /// (standardized data).
    pub fn nll(&self) -> f64 {
        self.nll
    }

    /// `L L^T` should reproduce the regularized correlation matrix.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn cross_correlation(&self, xs: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x_train.len(),
            self.x_train.iter().map(|row| {
                let s: f64 = row
                    .iter()
                    .zip(xs)
                    .zip(&self.inv_sq_len)
                    .map(|((a, b), w)| (a - b) * (a - b) * w)
                    .sum();
                (-0.5 * s).exp()
            }),
        )
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "GP predict",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean and variance in original output units.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let r = self.cross_correlation(&self.standardize(x));
        let mu = r.dot(&self.alpha);
        let v = self
            .l
            .solve_lower_triangular(&r)
            .expect("Cholesky factor has a positive diagonal");
        let var = (self.process_variance * (1.0 - v.norm_squared())).max(0.0);
        Ok((
            self.y_mean + self.y_scale * mu,
            var * self.y_scale * self.y_scale,
        ))
    }

    /// Posterior mean only; cheaper than [`GpModel::predict`].
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let r = self.cross_correlation(&self.standardize(x));
        Ok(self.y_mean + self.y_scale * r.dot(&self.alpha))
    }
}

fn column_stats(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut mean = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for c in 0..d {
        let m = x.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
        mean[c] = m;
        scale[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

/// Fits a GP to `(x, y)`. See the module docs for the procedure.
pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel> {
    config.validate()?;
    check_data(x, y)?;
    let distinct = x.iter().skip(1).any(|r| r != &x[0]);
    if !distinct {
        return Err(Error::InvalidConfig(
            "GP needs at least two distinct inputs".into(),
        ));
    }

    let (x_mean, x_scale) = column_stats(x);
    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            r.iter()
                .zip(&x_mean)
                .zip(&x_scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
    let y_scale = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

    let d = xs[0].len();
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|c| {
            let (lo, hi) = xs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[c]), hi.max(r[c]))
                });
            let range = if hi > lo { hi - lo } else { 1.0 };
            (
                config.log_lengthscale_bounds.0 + range.ln(),
                config.log_lengthscale_bounds.1 + range.ln(),
            )
        })
        .collect();

    let prepared = Prepared::new(&xs, &ys);
    let mut rng = rng_from_seed(config.seed);
    let starts: Vec<Vec<f64>> = (0..config.n_restarts)
        .map(|r| match (&config.warm_start, r) {
            (Some(w), 0) if w.len() == d => w
                .iter()
                .zip(&bounds)
                .map(|(v, &(lo, hi))| v.clamp(lo, hi))
                .collect(),
            _ => bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect(),
        })
        .collect();

    let mut nugget = config.nugget;
    loop {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for s in &starts {
            let mut work = Vec::new();
            let problem = LocalProblem {
                evaluate: |p: &[f64]| {
                    let v = prepared
                        .nll_with(p, nugget, &mut work)
                        .map_or(f64::INFINITY, |(v, _, _)| v);
                    Ok(Evaluation::unconstrained(v))
                },
                bounds: bounds.clone(),
                x0: s.clone(),
                max_evals: config.evals_per_restart,
                seed: 0,
                options: LocalOptions {
                    initial_step: 0.15,
                    xtol: 1e-6,
                    max_restarts: 1,
                    ..LocalOptions::default()
                },
            };
            // a start where the kernel is singular is skipped
            let Ok(res) = minimize(problem) else { continue };
            if best.as_ref().is_none_or(|(v, _)| res.f_star < *v) {
                best = Some((res.f_star, res.x_star));
            }
        }
        if let Some((_, log_len)) = best {
            if let Some((value, factor)) = prepared.nll(&log_len, nugget) {
                let lengthscales: Vec<f64> = log_len.iter().map(|v| v.exp()).collect();
                return Ok(GpModel {
                    x_train: xs,
                    x_mean,
                    x_scale,
                    y_mean,
                    y_scale,
                    inv_sq_len: lengthscales.iter().map(|l| 1.0 / (l * l)).collect(),
                    lengthscales,
                    process_variance: factor.sigma2,
                    nugget,
                    l: factor.l,
                    alpha: factor.alpha,
                    nll: value,
                });
            }
        }
        if nugget * 10.0 > config.max_nugget * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { nugget });
        }
        nugget *= 10.0;
        log::debug!("GP fit: escalating nugget to {nugget:e}");
    }
}

/// Free-function form of [`GpModel::predict`].
pub fn predict(model: &GpModel, x: &[f64]) -> Result<(f64, f64)> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn sin_data(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64])
            .collect();
        let y = x.iter().map(|r| r[0].sin()).collect();
        (x, y)
    }

    /// -log N(y; 0, sigma2 (R + g I)) through an LU-based dense evaluation.
    fn dense_neg_log_density(log_len: &[f64], x: &[Vec<f64>], y: &[f64], nugget: f64) -> f64 {
        let n = x.len();
        let ls: Vec<f64> = log_len.iter().map(|v| v.exp()).collect();
        let r = DMatrix::from_fn(n, n, |i, j| {
            kernel(&x[i], &x[j], &ls, 1.0).unwrap() + if i == j { nugget } else { 0.0 }
        });
        let yv = DVector::from_column_slice(y);
        let lu = r.clone().lu();
        let rinv_y = lu.solve(&yv).unwrap();
        let sigma2 = yv.dot(&rinv_y) / n as f64;
        let k = r * sigma2;
        let klu = k.clone().lu();
        let quad = yv.dot(&klu.solve(&yv).unwrap());
        let log_det = klu.determinant().ln();
        0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(
            kernel(&[0.3, 1.0], &[0.3, 1.0], &[1.0, 2.0], 2.0).unwrap(),
            2.0
        );
        assert!(kernel(&[0.0], &[1e3], &[1.0], 1.0).unwrap() < 1e-300);
        assert!(
            (kernel(&[0.0], &[1.0], &[1.0], 1.0).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-12
        );
        assert!(kernel(&[0.0], &[1.0], &[0.0], 1.0).is_err());
        assert!(kernel(&[0.0], &[1.0], &[1.0], -1.0).is_err());
        assert!(kernel(&[0.0], &[1.0, 2.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn nll_matches_dense_log_density() {
        let x = vec![
            vec![0.0, 1.0],
            vec![0.5, -1.0],
            vec![1.0, 0.2],
            vec![-0.7, 0.4],
            vec![0.1, 0.9],
        ];
        let y = vec![0.3, -1.2, 0.8, 0.1, -0.4];
        let ll = [0.2f64.ln(), 0.8f64.ln()];
        let a = concentrated_nll(&ll, &x, &y, 1e-6).unwrap();
        let b = dense_neg_log_density(&ll, &x, &y, 1e-6);
        assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn nll_finite_with_near_duplicates_and_permutation_invariant() {
        let x = vec![vec![0.0], vec![1e-12], vec![1.0], vec![2.0]];
        let y = vec![1.0, 1.0, 0.0, 0.5];
        let a = concentrated_nll(&[0.0], &x, &y, 1e-6).unwrap();
        assert!(a.is_finite());
        let xp = vec![x[2].clone(), x[0].clone(), x[3].clone(), x[1].clone()];
        let yp = vec![y[2], y[0], y[3], y[1]];
        let b = concentrated_nll(&[0.0], &xp, &yp, 1e-6).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn constant_outputs_recovered() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = fit(&x, &[2.5, 2.5], &GpConfig::default()).unwrap();
        for t in [0.0, 0.5, 3.0] {
            let (mu, _) = m.predict(&[t]).unwrap();
            assert!((mu - 2.5).abs() < 1e-9);
        }
        assert!(m.predict(&[0.0]).unwrap().1 < 1e-6);
    }

    #[test]
    fn sin_interpolation_beats_constant() {
        let (x, y) = sin_data(8);
        let m = fit(&x, &y, &GpConfig::default().with_seed(4)).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let (mut e_gp, mut e_const) = (0.0, 0.0);
        for k in 0..20 {
            let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / 20.0;
            e_gp += (m.predict_mean(&[t]).unwrap() - t.sin()).abs();
            e_const += (mean - t.sin()).abs();
        }
        assert!(e_gp < e_const * 0.5, "gp {e_gp} const {e_const}");
    }

    #[test]
    fn fitted_likelihood_beats_every_start() {
        let (x, y) = sin_data(8);
        let cfg = GpConfig::default().with_seed(11);
        let m = fit(&x, &y, &cfg).unwrap();
        // reconstruct the restart points the fit drew
        let mut rng = rng_from_seed(cfg.seed);
        let std = {
            let (_, s) = column_stats(&x);
            s[0]
        };
        let xs: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![(r[0] - x.iter().map(|r| r[0]).sum::<f64>() / 8.0) / std])
            .collect();
        let ym = y.iter().sum::<f64>() / 8.0;
        let ysd = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / 8.0).sqrt();
        let ys: Vec<f64> = y.iter().map(|v| (v - ym) / ysd).collect();
        let range = xs[7][0] - xs[0][0];
        let (lo, hi) = (
            cfg.log_lengthscale_bounds.0 + range.ln(),
            cfg.log_lengthscale_bounds.1 + range.ln(),
        );
        for _ in 0..cfg.n_restarts {
            let s: f64 = rng.random_range(lo..hi);
            let start = concentrated_nll(&[s], &xs, &ys, cfg.nugget).unwrap_or(f64::INFINITY);
            assert!(m.nll() <= start + 1e-12);
        }
    }

    #[test]
    fn two_point_midpoint_between_outputs() {
        let m = fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], &GpConfig::default()).unwrap();
        let (mu, var) = m.predict(&[0.5]).unwrap();
        assert!(mu > 0.0 && mu < 1.0);
        assert!((mu - 0.5).abs() < 1e-9);
        assert!(var > 0.0);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let (x, y) = sin_data(8);
        let m = fit(&x, &y, &GpConfig::default()).unwrap();
        let (mu, var) = m.predict(&[1e4]).unwrap();
        let mean = y.iter().sum::<f64>() / 8.0;
        assert!((mu - mean).abs() < 1e-9);
        assert!((var - m.process_variance()).abs() < 1e-9 * m.process_variance());
    }

    #[test]
    fn interpolates_training_points() {
        let (x, y) = sin_data(10);
        let m = fit(&x, &y, &GpConfig::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.predict_mean(xi).unwrap() - yi).abs() <= 1e-4 * 2.0);
        }
    }

    #[test]
    fn variance_ordering_1d() {
        let x = vec![vec![0.0], vec![0.4], vec![3.0], vec![3.5]];
        let y = vec![0.0, 0.3, -0.2, 0.1];
        let m = fit(&x, &y, &GpConfig::default()).unwrap();
        let mid = m.predict(&[1.75]).unwrap().1;
        for xi in &x {
            assert!(m.predict(xi).unwrap().1 <= mid);
        }
    }

    #[test]
    fn cholesky_reconstructs_kernel() {
        let (x, y) = sin_data(6);
        let m = fit(&x, &y, &GpConfig::default()).unwrap();
        let l = m.cholesky_factor();
        let rebuilt = l * l.transpose();
        let ls = &m.lengthscales;
        for i in 0..6 {
            for j in 0..6 {
                let k = kernel(&m.x_train[i], &m.x_train[j], ls, 1.0).unwrap()
                    + if i == j { m.nugget() } else { 0.0 };
                assert!((rebuilt[(i, j)] - k).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duplicate_rows_survive_via_nugget() {
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![1.0, 1.0, 0.0, 0.5];
        assert!(fit(&x, &y, &GpConfig::default()).is_ok());
    }

    #[test]
    fn rejects_bad_data() {
        let cfg = GpConfig::default();
        assert!(fit(&[vec![0.0]], &[1.0], &cfg).is_err());
        assert!(fit(&[vec![0.0], vec![0.0]], &[1.0, 2.0], &cfg).is_err());
        assert!(fit(&[vec![0.0], vec![f64::NAN]], &[1.0, 2.0], &cfg).is_err());
        let m = fit(&[vec![0.0], vec![1.0]], &[1.0, 2.0], &cfg).unwrap();
        assert!(m.predict(&[0.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn affine_output_transform_commutes(a in 0.1..20.0f64, b in -50.0..50.0f64, seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let x: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
            let y: Vec<f64> = x.iter().map(|r| (r[0] * 1.3).sin() + r[1] * r[1]).collect();
            let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let cfg = GpConfig::default().with_seed(seed);
            let m1 = fit(&x, &y, &cfg).unwrap();
            let m2 = fit(&x, &y2, &cfg).unwrap();
            for q in [[0.1, 0.2], [1.5, -1.0], [-3.0, 3.0]] {
                let (mu1, v1) = m1.predict(&q).unwrap();
                let (mu2, v2) = m2.predict(&q).unwrap();
                prop_assert!((mu2 - (a * mu1 + b)).abs() < 1e-6 * (1.0 + mu2.abs()));
                prop_assert!((v2 - a * a * v1).abs() < 1e-6 * (1.0 + v2.abs()));
                prop_assert!(v1 >= 0.0);
            }
        }

        #[test]
        fn kernel_matrix_is_positive_definite(seed in any::<u64>(), n in 2usize..15) {
            let mut rng = rng_from_seed(seed);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y = vec![0.0; n];
            let p = Prepared::new(&x, &y);
            let r = p.correlation(&[1.0, 4.0, 0.25], 1e-8);
            prop_assert!((r.clone() - r.transpose()).abs().max() == 0.0);
            prop_assert!(r.cholesky().is_some());
        }
    }
}
