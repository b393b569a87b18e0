use serde::{Deserialize, Serialize};

use super::{fit_glm_with, fit_zerotrunc_with, information_criteria, validate_counts, DesignMatrix, FitOptions, FittedModel};
use crate::dist::FamilyKind;
use crate::special::logistic;
use crate::{Error, Result};

/// Two-part hurdle regression: a logit model for `y > 0` and a
/// zero-truncated count model fitted to the positive observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HurdleFit {
    pub zero_part: FittedModel,
    pub count_part: FittedModel,
    pub loglik: f64,
    pub df: usize,
    pub n_obs: f64,
    /// Untruncated count mean exp(x_cᵀβ_c) for every row, zeros included.
    pub count_means: Vec<f64>,
    /// P(Y = 0) = 1 − logistic(x_zᵀβ_z) for every row.
    pub zero_probs: Vec<f64>,
}

impl HurdleFit {
    pub fn aic(&self) -> f64 {
        information_criteria(self.loglik, self.df, self.n_obs).aic
    }

    pub fn bic(&self) -> f64 {
        information_criteria(self.loglik, self.df, self.n_obs).bic
    }

    pub fn count_family(&self) -> FamilyKind {
        self.count_part.family
    }
}

pub fn fit_hurdle(
    count_design: &DesignMatrix,
    zero_design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    count_family: FamilyKind,
) -> Result<HurdleFit> {
    fit_hurdle_with(
        count_design,
        zero_design,
        response,
        weights,
        count_family,
        &FitOptions::default(),
        &FitOptions::default(),
    )
}

/// As [`fit_hurdle`] with separate options (e.g. warm starts) for the zero
/// and count parts.
pub fn fit_hurdle_with(
    count_design: &DesignMatrix,
    zero_design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    count_family: FamilyKind,
    zero_opts: &FitOptions,
    count_opts: &FitOptions,
) -> Result<HurdleFit> {
    let n = response.len();
    if zero_design.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: zero_design.nrows(),
        });
    }
    if count_design.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: count_design.nrows(),
        });
    }
    validate_counts(response, weights, n, false)?;
    let positive: Vec<usize> = (0..n).filter(|&i| response[i] > 0.0 && weights[i] > 0.0).collect();
    let has_zero = (0..n).any(|i| response[i] == 0.0 && weights[i] > 0.0);
    if positive.is_empty() || !has_zero {
        return Err(Error::domain("hurdle model needs at least one zero and one positive response"));
    }

    let indicator: Vec<f64> = response.iter().map(|&y| f64::from(y > 0.0)).collect();
    let zero_part = fit_glm_with(zero_design, &indicator, weights, FamilyKind::BinomialLogit, zero_opts)?;

    let xc = count_design.select_rows(&positive);
    let yc: Vec<f64> = positive.iter().map(|&i| response[i]).collect();
    let wc: Vec<f64> = positive.iter().map(|&i| weights[i]).collect();
    let count_part = fit_zerotrunc_with(&xc, &yc, &wc, count_family, count_opts)?;

    let count_means = count_design
        .linear_predictor(&count_part.coefficients)
        .into_iter()
        .map(f64::exp)
        .collect();
    let zero_probs = zero_design
        .linear_predictor(&zero_part.coefficients)
        .into_iter()
        .map(|eta| logistic(-eta))
        .collect();

    Ok(HurdleFit {
        loglik: zero_part.loglik + count_part.loglik,
        df: zero_part.df + count_part.df,
        n_obs: zero_part.n_obs,
        zero_part,
        count_part,
        count_means,
        zero_probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DesignMatrix, Vec<f64>) {
        let xs = [0.1, 0.4, 0.2, 0.9, 1.3, 0.7, 1.8, 0.3, 1.1, 1.5, 0.5, 2.0];
        let y = vec![0.0, 1.0, 0.0, 2.0, 3.0, 0.0, 5.0, 1.0, 2.0, 0.0, 1.0, 4.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        (DesignMatrix::from_rows(vec!["(Intercept)".into(), "x".into()], &rows).unwrap(), y)
    }

    #[test]
    fn zero_mass_matches_observed_zeros() {
        let (x, y) = toy();
        let w = vec![1.0; y.len()];
        let fit = fit_hurdle(&x, &x, &y, &w, FamilyKind::Poisson).unwrap();
        let implied: f64 = fit.zero_probs.iter().sum();
        let observed = y.iter().filter(|&&v| v == 0.0).count() as f64;
        assert!((implied - observed).abs() < 1e-8);
        assert_eq!(fit.df, 4);
        assert!((fit.loglik - fit.zero_part.loglik - fit.count_part.loglik).abs() < 1e-12);
        assert_eq!(fit.count_family(), FamilyKind::ZtPoisson);
    }

    #[test]
    fn needs_zeros_and_positives() {
        let x = DesignMatrix::intercept_only(3);
        assert!(fit_hurdle(&x, &x, &[1.0, 2.0, 3.0], &[1.0; 3], FamilyKind::Poisson).is_err());
        assert!(fit_hurdle(&x, &x, &[0.0; 3], &[1.0; 3], FamilyKind::Poisson).is_err());
    }
}
