//! Expected improvement and its numerically stable logarithm.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// `log(2 pi) / 2`.
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;
/// `log(pi / 2) / 2`.
const HALF_LOG_PI_OVER_2: f64 = 0.225_791_352_644_727_43;

/// Posterior summary at one candidate, plus the incumbent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionInput {
    pub mu: f64,
    /// Posterior standard deviation, `>= 0`.
    pub sigma: f64,
    /// Best observed objective value (minimization).
    pub best: f64,
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(z^2) erfc(z)`.
///
/// Uses the Laplace continued fraction for `z >= 5`, where the direct product
/// would eventually overflow/underflow; below that the direct product is
/// accurate to a few ulps.
pub fn erfcx(z: f64) -> f64 {
    if z < 5.0 {
        return (z * z).exp() * libm::erfc(z);
    }
    // erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + (2/2)/(z + (3/2)/(z + ...))))
    let mut t = z;
    for k in (1..=60).rev() {
        t = z + 0.5 * k as f64 / t;
    }
    1.0 / (PI.sqrt() * t)
}

/// `log(1 - exp(z))` for `z < 0`.
pub fn log1mexp(z: f64) -> Result<f64> {
    if !(z < 0.0) {
        return Err(Error::Domain("log1mexp requires z < 0"));
    }
    Ok(log1mexp_unchecked(z))
}

fn log1mexp_unchecked(z: f64) -> f64 {
    if z > -std::f64::consts::LN_2 {
        (-z.exp_m1()).ln()
    } else {
        (-z.exp()).ln_1p()
    }
}

/// Expected improvement below `best` (always `>= 0`).
pub fn expected_improvement(input: AcquisitionInput) -> f64 {
    let AcquisitionInput { mu, sigma, best } = input;
    if sigma <= 0.0 {
        return (best - mu).max(0.0);
    }
    let z = (best - mu) / sigma;
    ((best - mu) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// `log(phi(z) + z Phi(z))`, evaluated stably in three regimes.
///
/// For `z > -1` the closed form is well conditioned. Below that the density
/// factor is pulled out analytically and the remaining `1 - (...)` is
/// computed through [`log1mexp`] on a scaled `erfcx` term. Past
/// `-1/sqrt(eps)` the asymptotic `phi(z)/z^2` is exact to working precision.
pub fn log_h(z: f64) -> f64 {
    let tail = -1.0 / f64::EPSILON.sqrt();
    if z > -1.0 {
        (normal_pdf(z) + z * normal_cdf(z)).ln()
    } else if z > tail {
        let inner = (erfcx(-z * FRAC_1_SQRT_2) * z.abs()).ln() + HALF_LOG_PI_OVER_2;
        // inner < 0 mathematically; keep it there under rounding
        let inner = inner.min((0.0f64).next_down());
        -0.5 * z * z - HALF_LOG_2PI + log1mexp_unchecked(inner)
    } else {
        -0.5 * z * z - HALF_LOG_2PI - 2.0 * z.abs().ln()
    }
}

/// Log expected improvement.
///
/// Returns `f64::NEG_INFINITY` when `sigma == 0`: the candidate is fully
/// determined and must never win an acquisition search.
pub fn log_expected_improvement(input: AcquisitionInput) -> f64 {
    let AcquisitionInput { mu, sigma, best } = input;
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    log_h((best - mu) / sigma) + sigma.ln()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::erf;

    fn naive_h(z: f64) -> f64 {
        statrs::distribution::Continuous::pdf(&std_normal(), z)
            + z * statrs::distribution::ContinuousCDF::cdf(&std_normal(), z)
    }

    fn std_normal() -> statrs::distribution::Normal {
        statrs::distribution::Normal::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn constants() {
        assert!((HALF_LOG_2PI - 0.5 * (2.0 * PI).ln()).abs() < 1e-16);
        assert!((HALF_LOG_PI_OVER_2 - 0.5 * (PI / 2.0).ln()).abs() < 1e-16);
    }

    #[test]
    fn erfcx_values() {
        assert_eq!(erfcx(0.0), 1.0);
        let z = 30.0;
        let asym = 1.0 / (z * PI.sqrt());
        assert!(((erfcx(z) - asym) / asym).abs() < 1e-3);
        // 40-digit reference values (mpmath)
        assert!((erfcx(-1.0) - 5.008_980_080_762_283_5).abs() < 1e-12);
        assert!((erfcx(-1.0) - 5.00898).abs() < 1e-5);
        assert!(erfcx(1e6).is_finite() && erfcx(1e6) > 0.0);
    }

    #[test]
    fn erfcx_branches_agree_at_switch() {
        // 40-digit reference values (mpmath)
        let reference = [
            (5.0, 0.110_704_637_733_068_626_37),
            (6.0, 0.092_776_567_800_538_354_389),
            (8.0, 0.069_985_166_200_880_927_723),
            (12.0, 0.046_854_221_014_893_762_62),
            (20.0, 0.028_174_348_741_051_319_319),
        ];
        for (z, r) in reference {
            assert!(((erfcx(z) - r) / r).abs() < 1e-13, "z={z}");
        }
        let direct = 25f64.exp() * erf::erfc(5.0);
        assert!(((erfcx(5.0) - direct) / direct).abs() < 1e-9);
    }

    #[test]
    fn log1mexp_values() {
        assert!((log1mexp(-(2f64.ln())).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((log1mexp(-1e-12).unwrap() - (1e-12f64).ln()).abs() < 1e-9);
        let v = log1mexp(-50.0).unwrap();
        assert!(((v + (-50f64).exp()) / (-50f64).exp()).abs() < 1e-12);
        assert!(log1mexp(0.0).is_err());
        assert!(log1mexp(1.0).is_err());
    }

    #[test]
    fn ei_examples() {
        let ei = |mu, sigma, best| expected_improvement(AcquisitionInput { mu, sigma, best });
        assert_eq!(ei(1.0, 0.0, 3.0), 2.0);
        assert!((ei(2.0, 1.0, 2.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!(ei(12.0, 1.0, 2.0) < 1e-20);
    }

    #[test]
    fn log_h_examples() {
        assert!((log_h(0.0) - (-0.918_938_533_204_672_7)).abs() < 1e-12);
        // 40-digit reference values of phi(z) + z Phi(z) (mpmath)
        let reference = [
            (-0.5, 0.197_796_557_401_306_029_59),
            (0.0, 0.398_942_280_401_432_677_94),
            (1.0, 1.083_315_470_587_686_298_4),
            (3.0, 3.000_382_154_317_047_723_6),
        ];
        for (z, r) in reference {
            assert!((log_h(z).exp() - r).abs() <= 1e-12, "z={z}");
            assert!((log_h(z).exp() - naive_h(z)).abs() <= 1e-10, "z={z}");
        }
        assert!((log_h(-1.0 - 1e-9) - log_h(-1.0 + 1e-9)).abs() <= 1e-6);
    }

    #[test]
    fn middle_regime_matches_naive_where_naive_is_accurate() {
        for &z in &[-1.0, -1.5, -2.0, -3.0, -5.0] {
            let rel = (log_h(z).exp() - naive_h(z)) / naive_h(z);
            assert!(rel.abs() < 1e-9, "z={z} rel={rel}");
        }
    }

    #[test]
    fn tail_regime_continuous() {
        let t = -1.0 / f64::EPSILON.sqrt();
        let (a, b) = (log_h(t * (1.0 + 1e-12)), log_h(t * (1.0 - 1e-12)));
        assert!(((a - b) / b).abs() < 1e-9);
    }

    #[test]
    fn log_ei_examples() {
        let inp = AcquisitionInput {
            mu: 2.0,
            sigma: 1.0,
            best: 2.0,
        };
        assert!((log_expected_improvement(inp).exp() - expected_improvement(inp)).abs() < 1e-12);

        let far = AcquisitionInput {
            mu: 42.0,
            sigma: 1.0,
            best: 2.0,
        };
        let v = log_expected_improvement(far);
        assert!(v.is_finite());
        assert_eq!(expected_improvement(far), 0.0);
        // -40 is above -1/sqrt(eps), so the middle regime applies; it must
        // sit close to the asymptotic form there
        let asym = -800.0 - HALF_LOG_2PI - 2.0 * 40f64.ln();
        assert!((v - asym).abs() < 1e-2);

        let a = AcquisitionInput {
            mu: 1.0,
            sigma: 0.5,
            best: 2.0,
        };
        let b = AcquisitionInput {
            mu: -8.0,
            sigma: 5.0,
            best: 2.0,
        };
        let shift = log_expected_improvement(b) - log_expected_improvement(a);
        assert!((shift - 10f64.ln()).abs() < 1e-12);

        assert_eq!(
            log_expected_improvement(AcquisitionInput {
                mu: 0.0,
                sigma: 0.0,
                best: 1.0
            }),
            f64::NEG_INFINITY
        );
    }

    proptest! {
        #[test]
        fn ei_nonnegative_and_monotone_in_sigma(
            gap in 0.0..5.0f64, s1 in 0.01..5.0f64, ds in 0.0..5.0f64,
        ) {
            let lo = expected_improvement(AcquisitionInput { mu: -gap, sigma: s1, best: 0.0 });
            let hi = expected_improvement(AcquisitionInput { mu: -gap, sigma: s1 + ds, best: 0.0 });
            prop_assert!(lo >= 0.0);
            prop_assert!(hi >= lo - 1e-15);
        }

        #[test]
        fn log_h_strictly_increasing(z in -1e4..10.0f64, dz in 1e-3..1.0f64) {
            prop_assert!(log_h(z + dz) > log_h(z));
        }
    }
}
