use serde::{Deserialize, Serialize};

use super::{FittedModel, HurdleFit, Link};
use crate::dist::FamilySpec;
use crate::special::logistic;
use crate::{Error, Result, Rng};

/// Predictive distribution for a single observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predictive {
    Count(FamilySpec),
    /// f(0) = p_zero; f(j) = (1 − p_zero)·f_zt(j) for j ≥ 1.
    Hurdle { p_zero: f64, count: FamilySpec },
    /// Σ_k π_k f_k(j).
    Mixture { weights: Vec<f64>, components: Vec<FamilySpec> },
}

impl Predictive {
    pub fn pmf(&self, j: u64) -> f64 {
        match self {
            Predictive::Count(f) => f.pmf(j),
            Predictive::Hurdle { p_zero, count } => {
                if j == 0 {
                    *p_zero
                } else {
                    (1.0 - p_zero) * count.pmf(j)
                }
            }
            Predictive::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.pmf(j)).sum()
            }
        }
    }

    pub fn cdf(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        match self {
            Predictive::Count(f) => f.cdf(j),
            Predictive::Hurdle { p_zero, count } => (p_zero + (1.0 - p_zero) * count.cdf(j)).min(1.0),
            Predictive::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.cdf(j))
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// P(Y > j), summed from the pmf when the cdf is close to 1 so the far
    /// upper tail keeps full relative precision.
    pub fn sf(&self, j: i64) -> f64 {
        if j < 0 {
            return 1.0;
        }
        let c = self.cdf(j);
        if c < 0.5 {
            return 1.0 - c;
        }
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        for k in (j as u64 + 1).. {
            let p = self.pmf(k);
            total += p;
            if p <= prev && p <= total * 1e-17 {
                break;
            }
            prev = p;
        }
        total
    }

    /// F(0), …, F(max) in one pass.
    pub fn cdf_table(&self, max: u64) -> Vec<f64> {
        match self {
            Predictive::Count(f) => f.cdf_table(max),
            _ => {
                let mut acc = 0.0;
                (0..=max)
                    .map(|k| {
                        acc += self.pmf(k);
                        acc.min(1.0)
                    })
                    .collect()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Predictive::Count(f) => f.mean(),
            Predictive::Hurdle { p_zero, count } => (1.0 - p_zero) * count.mean(),
            Predictive::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.mean()).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Predictive::Count(f) => f.variance(),
            Predictive::Hurdle { p_zero, count } => {
                let m = count.mean();
                let second = (1.0 - p_zero) * (count.variance() + m * m);
                let mean = (1.0 - p_zero) * m;
                second - mean * mean
            }
            Predictive::Mixture { weights, components } => {
                let mean = self.mean();
                let second: f64 = weights
                    .iter()
                    .zip(components)
                    .map(|(w, c)| w * (c.variance() + c.mean() * c.mean()))
                    .sum();
                second - mean * mean
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> u64 {
        use rand::Rng as _;
        match self {
            Predictive::Count(f) => f.sample(rng),
            Predictive::Hurdle { p_zero, count } => {
                if rng.random::<f64>() < *p_zero {
                    0
                } else {
                    count.sample(rng)
                }
            }
            Predictive::Mixture { weights, components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    acc += w;
                    if u < acc {
                        return c.sample(rng);
                    }
                }
                components.last().expect("non-empty mixture").sample(rng)
            }
        }
    }
}

/// Predictive family of a GLM at covariate row `row`.
pub fn predict_distribution(model: &FittedModel, row: &[f64]) -> Result<Predictive> {
    let eta = model.linear_predictor(row)?;
    let mean = match model.link {
        Link::Log => eta.exp(),
        Link::Logit => logistic(eta),
    };
    Ok(Predictive::Count(FamilySpec::new(model.family, mean, model.theta())?))
}

/// Composite hurdle distribution given count-part and zero-part covariate rows.
pub fn predict_hurdle(fit: &HurdleFit, count_row: &[f64], zero_row: &[f64]) -> Result<Predictive> {
    let mu = fit.count_part.linear_predictor(count_row)?.exp();
    let p_zero = logistic(-fit.zero_part.linear_predictor(zero_row)?);
    if !mu.is_finite() {
        return Err(Error::domain("count mean overflow"));
    }
    Ok(Predictive::Hurdle {
        p_zero,
        count: FamilySpec::new(fit.count_part.family, mu.max(f64::MIN_POSITIVE), fit.count_part.theta())?,
    })
}

pub fn predict_mean(model: &FittedModel, row: &[f64]) -> Result<f64> {
    Ok(predict_distribution(model, row)?.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FamilyKind;
    use approx::assert_abs_diff_eq;

    fn brute_moments(p: &Predictive) -> (f64, f64, f64) {
        let (mut total, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j in 0..3000u64 {
            let f = p.pmf(j);
            total += f;
            m1 += j as f64 * f;
            m2 += (j * j) as f64 * f;
        }
        (total, m1, m2 - m1 * m1)
    }

    #[test]
    fn hurdle_moments_match_summation() {
        for &(p0, mu, theta) in &[(0.36, 2.8, Some(4.6)), (0.9, 0.4, Some(0.7)), (0.1, 6.0, None)] {
            let kind = if theta.is_some() { FamilyKind::ZtNegbin } else { FamilyKind::ZtPoisson };
            let p = Predictive::Hurdle {
                p_zero: p0,
                count: FamilySpec::new(kind, mu, theta).unwrap(),
            };
            let (total, mean, var) = brute_moments(&p);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(p.mean(), mean, epsilon = 1e-8);
            assert_abs_diff_eq!(p.variance(), var, epsilon = 1e-8);
            assert_abs_diff_eq!(p.cdf(4), (0..=4).map(|j| p.pmf(j)).sum::<f64>(), epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_moments_match_summation() {
        let p = Predictive::Mixture {
            weights: vec![0.4, 0.6],
            components: vec![FamilySpec::negbin(1.0, 2.0).unwrap(), FamilySpec::negbin(8.0, 5.0).unwrap()],
        };
        let (total, mean, var) = brute_moments(&p);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.mean(), mean, epsilon = 1e-8);
        assert_abs_diff_eq!(p.variance(), var, epsilon = 1e-8);
    }

    #[test]
    fn hurdle_without_zeros_is_truncated_mean() {
        let count = FamilySpec::zt_poisson(1.5).unwrap();
        let p = Predictive::Hurdle { p_zero: 0.0, count };
        assert_abs_diff_eq!(p.mean(), count.mean(), epsilon = 1e-15);
    }
}
