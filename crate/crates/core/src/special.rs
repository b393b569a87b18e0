//! Special functions. Gamma-family functions and the normal quantile come from
//! `statrs`; the small-count shortcuts below are exact finite sums.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma;

/// Counts up to this bound use explicit finite sums for the gamma ratios.
const SUM_CUTOFF: f64 = 64.0;

pub(crate) fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub(crate) fn ln_factorial(k: f64) -> f64 {
    gamma::ln_gamma(k + 1.0)
}

/// ln Γ(y + θ) − ln Γ(θ) for integer-valued y ≥ 0.
pub(crate) fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y <= SUM_CUTOFF {
        let mut acc = 0.0;
        let mut k = 0.0;
        while k < y {
            acc += (theta + k).ln();
            k += 1.0;
        }
        acc
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// ψ(y + θ) − ψ(θ) for integer-valued y ≥ 0.
pub(crate) fn digamma_ratio(y: f64, theta: f64) -> f64 {
    if y <= SUM_CUTOFF {
        let mut acc = 0.0;
        let mut k = 0.0;
        while k < y {
            acc += 1.0 / (theta + k);
            k += 1.0;
        }
        acc
    } else {
        gamma::digamma(y + theta) - gamma::digamma(theta)
    }
}

/// ln(1 − e^x) for x < 0.
pub(crate) fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_ratio_sum_matches_lgamma() {
        for &theta in &[0.3, 1.0, 4.5, 100.0] {
            for y in 0..=64 {
                let y = y as f64;
                let direct = ln_gamma(y + theta) - ln_gamma(theta);
                assert_relative_eq!(ln_gamma_ratio(y, theta), direct, epsilon = 1e-9, max_relative = 1e-11);
                let dig = gamma::digamma(y + theta) - gamma::digamma(theta);
                assert_relative_eq!(digamma_ratio(y, theta), dig, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn log1mexp_branches_agree() {
        for &x in &[-1e-12, -1e-3, -0.5, -0.7, -1.0, -30.0] {
            assert_relative_eq!(ln_one_minus_exp(x), (1.0 - x.exp()).ln(), max_relative = 1e-6);
        }
    }

    #[test]
    fn normal_quantile_roundtrip() {
        for &p in &[1e-10, 0.025, 0.5, 0.9, 1.0 - 1e-9] {
            assert_relative_eq!(normal_cdf(normal_quantile(p)), p, max_relative = 1e-7);
        }
    }
}
