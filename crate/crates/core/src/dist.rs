//! Probability kernels for the count families.
//!
//! The negative binomial is the NB2 (gamma–Poisson) parameterization with
//! mean μ and shape θ, so Var = μ + μ²/θ and θ → ∞ recovers the Poisson.
//! All mass functions are evaluated on the log scale and exponentiated last.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::special::{ln_factorial, ln_gamma_ratio, ln_one_minus_exp};
use crate::{Error, Result, Rng};

/// Largest shape treated as a genuine negative binomial; fitters clamp θ here
/// and anything at the bound behaves as a Poisson for practical purposes.
pub const THETA_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Poisson,
    Negbin,
    BinomialLogit,
    ZtPoisson,
    ZtNegbin,
}

impl FamilyKind {
    pub fn has_theta(self) -> bool {
        matches!(self, FamilyKind::Negbin | FamilyKind::ZtNegbin)
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, FamilyKind::ZtPoisson | FamilyKind::ZtNegbin)
    }

    /// The untruncated family underlying a zero-truncated one.
    pub fn untruncated(self) -> FamilyKind {
        match self {
            FamilyKind::ZtPoisson => FamilyKind::Poisson,
            FamilyKind::ZtNegbin => FamilyKind::Negbin,
            k => k,
        }
    }

    pub fn truncated(self) -> Result<FamilyKind> {
        match self {
            FamilyKind::Poisson | FamilyKind::ZtPoisson => Ok(FamilyKind::ZtPoisson),
            FamilyKind::Negbin | FamilyKind::ZtNegbin => Ok(FamilyKind::ZtNegbin),
            FamilyKind::BinomialLogit => Err(Error::domain("binomial family has no zero-truncated form")),
        }
    }
}

/// A fully parameterized count distribution. `mean` is the expected count of
/// the untruncated family (or the success probability for `BinomialLogit`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    kind: FamilyKind,
    mean: f64,
    theta: Option<f64>,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, mean: f64, theta: Option<f64>) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::domain(format!("mean must be positive and finite, got {mean}")));
        }
        if kind == FamilyKind::BinomialLogit && mean >= 1.0 {
            return Err(Error::domain(format!("success probability must lie in (0, 1), got {mean}")));
        }
        match (kind.has_theta(), theta) {
            (true, Some(t)) if t > 0.0 && !t.is_nan() => {}
            (true, Some(t)) => return Err(Error::domain(format!("theta must be positive, got {t}"))),
            (true, None) => return Err(Error::domain("negative binomial requires theta")),
            (false, Some(_)) => return Err(Error::domain(format!("{kind:?} takes no theta"))),
            (false, None) => {}
        }
        Ok(FamilySpec { kind, mean, theta })
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        Self::new(FamilyKind::Poisson, mean, None)
    }

    pub fn negbin(mean: f64, theta: f64) -> Result<Self> {
        Self::new(FamilyKind::Negbin, mean, Some(theta))
    }

    pub fn binomial_logit(prob: f64) -> Result<Self> {
        Self::new(FamilyKind::BinomialLogit, prob, None)
    }

    pub fn zt_poisson(mean: f64) -> Result<Self> {
        Self::new(FamilyKind::ZtPoisson, mean, None)
    }

    pub fn zt_negbin(mean: f64, theta: f64) -> Result<Self> {
        Self::new(FamilyKind::ZtNegbin, mean, Some(theta))
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn mean_param(&self) -> f64 {
        self.mean
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// The same parameters under the untruncated family.
    pub fn untruncated(&self) -> FamilySpec {
        FamilySpec {
            kind: self.kind.untruncated(),
            ..*self
        }
    }

    /// ln f(0) of the untruncated family.
    fn ln_untruncated_zero(&self) -> f64 {
        match self.kind.untruncated() {
            FamilyKind::Poisson => -self.mean,
            FamilyKind::Negbin => {
                let theta = self.theta.unwrap();
                -theta * (self.mean / theta).ln_1p()
            }
            FamilyKind::BinomialLogit => (-self.mean).ln_1p(),
            _ => unreachable!(),
        }
    }

    fn ln_pmf_untruncated(&self, j: u64) -> f64 {
        let y = j as f64;
        let mu = self.mean;
        match self.kind.untruncated() {
            FamilyKind::Poisson => {
                if j == 0 {
                    -mu
                } else {
                    y * mu.ln() - mu - ln_factorial(y)
                }
            }
            FamilyKind::Negbin => {
                let theta = self.theta.unwrap();
                let ln_p0 = -theta * (mu / theta).ln_1p();
                if j == 0 {
                    ln_p0
                } else {
                    ln_gamma_ratio(y, theta) - ln_factorial(y) + ln_p0 + y * (mu.ln() - (theta + mu).ln())
                }
            }
            FamilyKind::BinomialLogit => match j {
                0 => (-mu).ln_1p(),
                1 => mu.ln(),
                _ => f64::NEG_INFINITY,
            },
            _ => unreachable!(),
        }
    }

    /// ln f(j). Returns −∞ outside the support (including 0 for truncated kinds).
    pub fn ln_pmf(&self, j: u64) -> f64 {
        if self.kind.is_truncated() {
            if j == 0 {
                return f64::NEG_INFINITY;
            }
            self.ln_pmf_untruncated(j) - ln_one_minus_exp(self.ln_untruncated_zero())
        } else {
            self.ln_pmf_untruncated(j)
        }
    }

    pub fn pmf(&self, j: u64) -> f64 {
        self.ln_pmf(j).exp()
    }

    /// F(j) by forward summation; 0 for j < 0.
    pub fn cdf(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        if self.kind == FamilyKind::BinomialLogit && j >= 1 {
            return 1.0;
        }
        let mut acc = 0.0;
        for k in 0..=(j as u64) {
            acc += self.pmf(k);
        }
        acc.min(1.0)
    }

    /// Running cdf values F(0), …, F(max).
    pub fn cdf_table(&self, max: u64) -> Vec<f64> {
        let mut acc = 0.0;
        (0..=max)
            .map(|k| {
                acc += self.pmf(k);
                acc.min(1.0)
            })
            .collect()
    }

    /// Expected value of the distribution itself (truncation included).
    pub fn mean(&self) -> f64 {
        match self.kind {
            FamilyKind::Poisson | FamilyKind::Negbin | FamilyKind::BinomialLogit => self.mean,
            FamilyKind::ZtPoisson | FamilyKind::ZtNegbin => {
                self.mean / ln_one_minus_exp(self.ln_untruncated_zero()).exp()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean;
        match self.kind {
            FamilyKind::Poisson => mu,
            FamilyKind::Negbin => mu + mu * mu / self.theta.unwrap(),
            FamilyKind::BinomialLogit => mu * (1.0 - mu),
            FamilyKind::ZtPoisson | FamilyKind::ZtNegbin => {
                let base = self.untruncated();
                let p_pos = ln_one_minus_exp(self.ln_untruncated_zero()).exp();
                let second = (base.variance() + mu * mu) / p_pos;
                let m = mu / p_pos;
                second - m * m
            }
        }
    }

    /// One draw from the distribution.
    pub fn sample(&self, rng: &mut Rng) -> u64 {
        match self.kind {
            FamilyKind::Poisson => sample_poisson(self.mean, rng),
            FamilyKind::Negbin => {
                let theta = self.theta.unwrap();
                let rate = Gamma::new(theta, self.mean / theta)
                    .expect("validated gamma parameters")
                    .sample(rng);
                sample_poisson(rate, rng)
            }
            FamilyKind::BinomialLogit => u64::from(rng.random::<f64>() < self.mean),
            FamilyKind::ZtPoisson | FamilyKind::ZtNegbin => {
                let base = self.untruncated();
                // Rejection is exact; fall back to inversion when zeros dominate.
                if self.ln_untruncated_zero() < (0.9f64).ln() {
                    loop {
                        let y = base.sample(rng);
                        if y > 0 {
                            return y;
                        }
                    }
                }
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut j = 1;
                loop {
                    acc += self.pmf(j);
                    if u <= acc || j > 100_000 {
                        return j;
                    }
                    j += 1;
                }
            }
        }
    }
}

fn sample_poisson(rate: f64, rng: &mut Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// f(j) for the given family.
pub fn count_pmf(family: &FamilySpec, j: u64) -> f64 {
    family.pmf(j)
}

/// F(j) for the given family (zero for negative j).
pub fn count_cdf(family: &FamilySpec, j: i64) -> f64 {
    family.cdf(j)
}

pub fn count_sample(family: &FamilySpec, rng: &mut Rng) -> u64 {
    family.sample(rng)
}

/// Zero-truncated mass f(j)/(1 − f(0)); `j = 0` is outside the support.
pub fn zt_pmf(family: &FamilySpec, j: u64) -> Result<f64> {
    if !family.kind().is_truncated() {
        return Err(Error::domain(format!("{:?} is not a zero-truncated family", family.kind())));
    }
    if j == 0 {
        return Err(Error::domain("zero lies outside the zero-truncated support"));
    }
    Ok(family.pmf(j))
}
