//! One handle over the fitted model types, so rootograms, residuals and
//! bootstrap bands can be written once for every family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::FamilyKind;
use crate::fit::{
    fit_glm_with, fit_hurdle_with, fit_mixture_with, predict_distribution, predict_hurdle, FitOptions, FittedModel,
    HurdleFit, MixtureFit, MixtureOptions, Predictive,
};
use crate::formula::ModelData;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Poisson,
    Negbin,
    HurdlePoisson,
    HurdleNegbin,
    MixtureNegbin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Poisson,
        ModelKind::Negbin,
        ModelKind::HurdlePoisson,
        ModelKind::HurdleNegbin,
        ModelKind::MixtureNegbin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Poisson => "poisson",
            ModelKind::Negbin => "negbin",
            ModelKind::HurdlePoisson => "hurdle-poisson",
            ModelKind::HurdleNegbin => "hurdle-negbin",
            ModelKind::MixtureNegbin => "mixture-negbin",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown family '{s}'")))
    }
}

/// What to fit: the family plus mixture settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Mixture components (mixtures only).
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            k: 2,
            restarts: 5,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Glm(FittedModel),
    Hurdle(HurdleFit),
    Mixture(MixtureFit),
}

/// Fit `spec` to `data` with observation weights `weights`.
pub fn fit_model(spec: &ModelSpec, data: &ModelData, weights: &[f64]) -> Result<Model> {
    let y = &data.response;
    match spec.kind {
        ModelKind::Poisson => Ok(Model::Glm(fit_glm_with(
            &data.count,
            y,
            weights,
            FamilyKind::Poisson,
            &FitOptions::default(),
        )?)),
        ModelKind::Negbin => Ok(Model::Glm(fit_glm_with(
            &data.count,
            y,
            weights,
            FamilyKind::Negbin,
            &FitOptions::default(),
        )?)),
        ModelKind::HurdlePoisson | ModelKind::HurdleNegbin => {
            let family = if spec.kind == ModelKind::HurdlePoisson {
                FamilyKind::ZtPoisson
            } else {
                FamilyKind::ZtNegbin
            };
            let opts = FitOptions::default();
            Ok(Model::Hurdle(fit_hurdle_with(
                &data.count,
                data.zero_design(),
                y,
                weights,
                family,
                &opts,
                &opts,
            )?))
        }
        ModelKind::MixtureNegbin => {
            if data.zero.is_some() {
                return Err(Error::Config("mixture models take no zero-part formula".into()));
            }
            let opts = MixtureOptions::new(spec.k, spec.restarts, spec.seed);
            Ok(Model::Mixture(fit_mixture_with(&data.count, y, weights, &opts)?))
        }
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Glm(m) if m.family == FamilyKind::Poisson => ModelKind::Poisson,
            Model::Glm(_) => ModelKind::Negbin,
            Model::Hurdle(h) if h.count_part.family == FamilyKind::ZtPoisson => ModelKind::HurdlePoisson,
            Model::Hurdle(_) => ModelKind::HurdleNegbin,
            Model::Mixture(_) => ModelKind::MixtureNegbin,
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            Model::Glm(m) => m.loglik,
            Model::Hurdle(h) => h.loglik,
            Model::Mixture(m) => m.loglik,
        }
    }

    pub fn df(&self) -> usize {
        match self {
            Model::Glm(m) => m.df,
            Model::Hurdle(h) => h.df,
            Model::Mixture(m) => m.df,
        }
    }

    pub fn n_obs(&self) -> f64 {
        match self {
            Model::Glm(m) => m.n_obs,
            Model::Hurdle(h) => h.n_obs,
            Model::Mixture(m) => m.n_obs,
        }
    }

    pub fn aic(&self) -> f64 {
        crate::fit::information_criteria(self.loglik(), self.df(), self.n_obs()).aic
    }

    pub fn bic(&self) -> f64 {
        crate::fit::information_criteria(self.loglik(), self.df(), self.n_obs()).bic
    }

    /// Predictive distribution of every row of `data`.
    pub fn predictives(&self, data: &ModelData) -> Result<Vec<Predictive>> {
        let n = data.count.nrows();
        (0..n).map(|i| self.predictive_at(data, i)).collect()
    }

    pub fn predictive_at(&self, data: &ModelData, i: usize) -> Result<Predictive> {
        match self {
            Model::Glm(m) => predict_distribution(m, data.count.row(i)),
            Model::Hurdle(h) => predict_hurdle(h, data.count.row(i), data.zero_design().row(i)),
            Model::Mixture(m) => m.predictive(data.count.row(i)),
        }
    }

    /// Per-row distributions of mixture component `k` (0-based, in sorted order).
    pub fn component_predictives(&self, data: &ModelData, k: usize) -> Result<Vec<Predictive>> {
        let Model::Mixture(m) = self else {
            return Err(Error::Config("component predictions need a mixture model".into()));
        };
        if k >= m.k {
            return Err(Error::Config(format!("component {} out of range 1..={}", k + 1, m.k)));
        }
        (0..data.count.nrows())
            .map(|i| Ok(Predictive::Count(m.component_family(k, data.count.row(i))?)))
            .collect()
    }

    /// Posterior membership probabilities of component `k` (mixtures only).
    pub fn posterior_weights(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            Model::Mixture(m) if k < m.k => Ok(m.posteriors.iter().map(|p| p[k]).collect()),
            Model::Mixture(m) => Err(Error::Config(format!("component {} out of range 1..={}", k + 1, m.k))),
            _ => Err(Error::Config("posterior weights need a mixture model".into())),
        }
    }

    /// Refit the same specification to a new response, warm-started at the
    /// current estimates. Mixtures rerun a single EM restart.
    pub fn refit(&self, data: &ModelData, response: &[f64], weights: &[f64], seed: u64) -> Result<Model> {
        let warm = |m: &FittedModel| FitOptions {
            start: Some(m.params()),
            covariance: false,
            ..Default::default()
        };
        match self {
            Model::Glm(m) => Ok(Model::Glm(fit_glm_with(&data.count, response, weights, m.family, &warm(m))?)),
            Model::Hurdle(h) => Ok(Model::Hurdle(fit_hurdle_with(
                &data.count,
                data.zero_design(),
                response,
                weights,
                h.count_part.family,
                &warm(&h.zero_part),
                &warm(&h.count_part),
            )?)),
            Model::Mixture(m) => {
                let opts = MixtureOptions {
                    covariance: false,
                    ..MixtureOptions::new(m.k, 1, seed)
                };
                Ok(Model::Mixture(fit_mixture_with(&data.count, response, weights, &opts)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::DesignMatrix;

    fn toy() -> ModelData {
        let y = vec![0.0, 1.0, 0.0, 3.0, 2.0, 0.0, 5.0, 1.0, 0.0, 2.0, 4.0, 0.0];
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![1.0, i as f64 / 4.0]).collect();
        let count = DesignMatrix::from_rows(vec!["(Intercept)".into(), "x".into()], &rows).unwrap();
        ModelData {
            response: y,
            count,
            zero: None,
        }
    }

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("zip".parse::<ModelKind>().is_err());
    }

    #[test]
    fn predictives_cover_each_row() {
        let data = toy();
        let w = vec![1.0; data.response.len()];
        for kind in [ModelKind::Poisson, ModelKind::HurdlePoisson] {
            let m = fit_model(&ModelSpec::new(kind), &data, &w).unwrap();
            assert_eq!(m.kind(), kind);
            let p = m.predictives(&data).unwrap();
            assert_eq!(p.len(), data.response.len());
            // Poisson: score equation for the intercept. Hurdle: logit margin at 0.
            let (fitted, observed): (f64, f64) = if kind == ModelKind::Poisson {
                (p.iter().map(|d| d.mean()).sum(), data.response.iter().sum())
            } else {
                (
                    p.iter().map(|d| d.pmf(0)).sum(),
                    data.response.iter().filter(|&&y| y == 0.0).count() as f64,
                )
            };
            assert!((fitted - observed).abs() < 1e-6, "{kind}: {fitted} vs {observed}");
        }
    }

    #[test]
    fn refit_on_own_response_is_a_fixed_point() {
        let data = toy();
        let w = vec![1.0; data.response.len()];
        let m = fit_model(&ModelSpec::new(ModelKind::Poisson), &data, &w).unwrap();
        let r = m.refit(&data, &data.response, &w, 1).unwrap();
        assert!((m.loglik() - r.loglik()).abs() < 1e-9);
    }

    #[test]
    fn component_requests_need_a_mixture() {
        let data = toy();
        let w = vec![1.0; data.response.len()];
        let m = fit_model(&ModelSpec::new(ModelKind::Poisson), &data, &w).unwrap();
        assert!(m.component_predictives(&data, 0).is_err());
        assert!(m.posterior_weights(0).is_err());
    }
}
