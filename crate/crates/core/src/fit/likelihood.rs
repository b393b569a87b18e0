//! Per-observation log-likelihood contributions and scores on the linear
//! predictor scale, plus the weighted objective handed to the optimizer.

use crate::dist::FamilyKind;
use crate::fit::DesignMatrix;
use crate::optim::Objective;
use crate::special::{digamma_ratio, ln_factorial, ln_gamma_ratio, ln_one_minus_exp, logistic};

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ObsTerms {
    pub ll: f64,
    /// ∂ℓ/∂η
    pub d_eta: f64,
    /// ∂ℓ/∂log θ (zero for families without θ)
    pub d_log_theta: f64,
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn negbin_terms(y: f64, eta: f64, log_theta: f64) -> (ObsTerms, f64, f64, f64) {
    let mu = eta.exp();
    let theta = log_theta.exp();
    let ratio = mu / theta;
    let l1p = ratio.ln_1p(); // ln(1 + μ/θ)
    let ln_p0 = -theta * l1p;
    let ll = ln_gamma_ratio(y, theta) - ln_factorial(y) + ln_p0 - y * (theta / mu).ln_1p();
    let tm = theta + mu;
    let d_eta = (y - mu) * theta / tm;
    let d_theta = digamma_ratio(y, theta) - l1p + (mu - y) / tm;
    (
        ObsTerms {
            ll,
            d_eta,
            d_log_theta: theta * d_theta,
        },
        ln_p0,
        -theta * mu / tm,
        -l1p + mu / tm,
    )
}

/// ℓ and derivatives for one observation under `family` at linear predictor η.
pub(crate) fn obs_terms(family: FamilyKind, y: f64, eta: f64, log_theta: f64) -> ObsTerms {
    match family {
        FamilyKind::Poisson => {
            let mu = eta.exp();
            ObsTerms {
                ll: y * eta - mu - ln_factorial(y),
                d_eta: y - mu,
                d_log_theta: 0.0,
            }
        }
        FamilyKind::ZtPoisson => {
            let mu = eta.exp();
            ObsTerms {
                ll: y * eta - mu - ln_factorial(y) - ln_one_minus_exp(-mu),
                d_eta: y - mu - mu / mu.exp_m1(),
                d_log_theta: 0.0,
            }
        }
        FamilyKind::Negbin => negbin_terms(y, eta, log_theta).0,
        FamilyKind::ZtNegbin => {
            let (t, ln_p0, dlp0_eta, dlp0_theta) = negbin_terms(y, eta, log_theta);
            let theta = log_theta.exp();
            // p0 / (1 − p0)
            let odds = 1.0 / (-ln_p0).exp_m1();
            ObsTerms {
                ll: t.ll - ln_one_minus_exp(ln_p0),
                d_eta: t.d_eta + odds * dlp0_eta,
                d_log_theta: t.d_log_theta + odds * dlp0_theta * theta,
            }
        }
        FamilyKind::BinomialLogit => ObsTerms {
            ll: y * eta - softplus(eta),
            d_eta: y - logistic(eta),
            d_log_theta: 0.0,
        },
    }
}

/// Negative weighted log-likelihood over (β[, log θ]).
pub(crate) struct CountObjective<'a> {
    pub family: FamilyKind,
    pub x: &'a DesignMatrix,
    pub y: &'a [f64],
    pub w: &'a [f64],
}

impl CountObjective<'_> {
    pub fn n_params(&self) -> usize {
        self.x.ncols() + usize::from(self.family.has_theta())
    }

    pub fn loglik(&self, params: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n_params()];
        -self.eval(params, &mut g)
    }
}

impl Objective for CountObjective<'_> {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.x.ncols();
        let log_theta = if self.family.has_theta() { params[p] } else { 0.0 };
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for i in 0..self.x.nrows() {
            let wi = self.w[i];
            if wi == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            let eta: f64 = row.iter().zip(&params[..p]).map(|(a, b)| a * b).sum();
            let t = obs_terms(self.family, self.y[i], eta, log_theta);
            total += wi * t.ll;
            for (g, xv) in grad[..p].iter_mut().zip(row) {
                *g -= wi * t.d_eta * xv;
            }
            if self.family.has_theta() {
                grad[p] -= wi * t.d_log_theta;
            }
        }
        if !total.is_finite() {
            return f64::INFINITY;
        }
        -total
    }
}
