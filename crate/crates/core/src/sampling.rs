//! Latin hypercube sampling.

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LhsConfig {
    pub n_points: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Draws an `n_points x dim` Latin hypercube design.
///
/// Each dimension is cut into `n_points` equal strata; every stratum holds
/// exactly one row, placed uniformly inside it. Rows are returned in draw
/// order.
pub fn lhs_sample(config: &LhsConfig) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_from_seed(config.seed);
    lhs_sample_with(config.n_points, &config.bounds, &mut rng)
}

/// [`lhs_sample`] drawing from a caller-supplied generator.
pub fn lhs_sample_with<R: Rng + ?Sized>(
    n_points: usize,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("LHS needs at least one point".into()));
    }
    if bounds.is_empty() {
        return Err(Error::InvalidConfig(
            "LHS needs at least one dimension".into(),
        ));
    }
    for (dim, &(lower, upper)) in bounds.iter().enumerate() {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidBounds { dim, lower, upper });
        }
    }
    let n = n_points as f64;
    let mut rows = vec![vec![0.0; bounds.len()]; n_points];
    let mut strata: Vec<usize> = (0..n_points).collect();
    for (d, &(lower, upper)) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        for (row, &s) in rows.iter_mut().zip(&strata) {
            let u: f64 = rng.sample(Open01);
            // Clamp guards the last ulp: lower + width * 1.0 may round onto `upper`.
            let v = lower + (upper - lower) * (s as f64 + u) / n;
            row[d] = v.clamp(lower.next_up(), upper.next_down());
        }
    }
    Ok(rows)
}

/// Stratum index of `v` among `n` equal strata of `[lower, upper]`.
pub fn stratum_of(v: f64, lower: f64, upper: f64, n: usize) -> usize {
    let s = ((v - lower) / (upper - lower) * n as f64).floor() as usize;
    s.min(n - 1)
}
