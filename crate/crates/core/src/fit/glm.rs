use nalgebra::{DMatrix, DVector};

use super::likelihood::CountObjective;
use super::{matrix_to_rows, validate_counts, DesignMatrix, FitOptions, FittedModel, Link};
use crate::dist::{FamilyKind, THETA_MAX};
use crate::optim::{invert_information, minimize, numeric_hessian, BfgsOptions};
use crate::special::logistic;
use crate::{Error, Result};

/// Linear predictors beyond this magnitude signal separation in logit fits.
const SEPARATION_ETA: f64 = 30.0;

/// Weighted maximum-likelihood GLM fit.
///
/// `Poisson` and `BinomialLogit` use IRLS; `Negbin` estimates (β, log θ)
/// jointly by BFGS. Zero-truncated kinds are forwarded to [`fit_zerotrunc`].
pub fn fit_glm(design: &DesignMatrix, response: &[f64], weights: &[f64], family: FamilyKind) -> Result<FittedModel> {
    fit_glm_with(design, response, weights, family, &FitOptions::default())
}

pub fn fit_glm_with(
    design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    family: FamilyKind,
    opts: &FitOptions,
) -> Result<FittedModel> {
    if family.is_truncated() {
        return fit_zerotrunc_with(design, response, weights, family, opts);
    }
    let n = design.nrows();
    validate_counts(response, weights, n, false)?;
    check_shape(design, weights)?;
    match family {
        FamilyKind::Poisson => {
            if response.iter().zip(weights).all(|(&y, &w)| y == 0.0 || w == 0.0) {
                return Err(Error::domain("all-zero response: Poisson likelihood is unbounded"));
            }
            let (beta, iterations) = irls(design, response, weights, family, opts.start.as_deref(), opts.max_iter)?;
            finish(design, response, weights, family, beta, iterations, opts)
        }
        FamilyKind::BinomialLogit => {
            if let Some((i, y)) = response.iter().enumerate().find(|(_, &y)| y > 1.0) {
                return Err(Error::domain(format!("binary response expected, got {y} at row {i}")));
            }
            let positive = response.iter().zip(weights).any(|(&y, &w)| y == 1.0 && w > 0.0);
            let negative = response.iter().zip(weights).any(|(&y, &w)| y == 0.0 && w > 0.0);
            if !(positive && negative) {
                return Err(Error::Separation);
            }
            let (beta, iterations) = irls(design, response, weights, family, opts.start.as_deref(), opts.max_iter)?;
            let eta_max = design
                .linear_predictor(&beta)
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0.0)
                .fold(0.0f64, |m, (e, _)| m.max(e.abs()));
            if eta_max > SEPARATION_ETA {
                return Err(Error::Separation);
            }
            finish(design, response, weights, family, beta, iterations, opts)
        }
        FamilyKind::Negbin => {
            if response.iter().zip(weights).all(|(&y, &w)| y == 0.0 || w == 0.0) {
                return Err(Error::domain("all-zero response: NB likelihood is unbounded"));
            }
            let start = match &opts.start {
                Some(s) => s.clone(),
                None => {
                    let (beta, _) = irls(design, response, weights, FamilyKind::Poisson, None, opts.max_iter)?;
                    let mut s = beta;
                    s.push(moment_log_theta(response, weights));
                    s
                }
            };
            let (params, iterations) = bfgs_fit(design, response, weights, family, &start, opts.max_iter)?;
            finish(design, response, weights, family, params, iterations, opts)
        }
        _ => unreachable!(),
    }
}

/// Zero-truncated Poisson or NB regression on strictly positive responses.
pub fn fit_zerotrunc(design: &DesignMatrix, response: &[f64], weights: &[f64], family: FamilyKind) -> Result<FittedModel> {
    fit_zerotrunc_with(design, response, weights, family, &FitOptions::default())
}

pub fn fit_zerotrunc_with(
    design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    family: FamilyKind,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let family = family.truncated()?;
    let n = design.nrows();
    validate_counts(response, weights, n, true)?;
    check_shape(design, weights)?;
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => {
            let (mut s, _) = irls(design, response, weights, FamilyKind::Poisson, None, opts.max_iter)?;
            if family.has_theta() {
                s.push(moment_log_theta(response, weights));
            }
            s
        }
    };
    let (params, iterations) = bfgs_fit(design, response, weights, family, &start, opts.max_iter)?;
    finish(design, response, weights, family, params, iterations, opts)
}

fn check_shape(design: &DesignMatrix, weights: &[f64]) -> Result<()> {
    let active = weights.iter().filter(|&&w| w > 0.0).count();
    if active < design.ncols() {
        return Err(Error::Config(format!(
            "{active} observations with positive weight cannot identify {} coefficients",
            design.ncols()
        )));
    }
    design.check_full_rank(Some(weights))
}

/// log θ from the moment estimate max(0.1, ȳ² / max(s² − ȳ, 1e-4)).
pub(crate) fn moment_log_theta(y: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let denom = if sw > 1.0 { sw - 1.0 } else { sw };
    let var = y.iter().zip(w).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>() / denom;
    let theta = (mean * mean / (var - mean).max(1e-4)).max(0.1).min(THETA_MAX);
    theta.ln()
}

/// Approximate NB M-step for the mixture EM (inputs already validated).
/// Every accepted step lowers the objective, so EM stays monotone.
pub(crate) fn negbin_weighted(design: &DesignMatrix, y: &[f64], w: &[f64], start: &[f64]) -> Result<Vec<f64>> {
    let tol = 1e-4 * w.iter().sum::<f64>().max(1.0);
    match bfgs_fit_tol(design, y, w, FamilyKind::Negbin, start, 200, tol) {
        Ok((x, _)) => Ok(x),
        Err(Error::NonConvergence { last_iterate, .. }) => Ok(last_iterate),
        Err(e) => Err(e),
    }
}

fn bfgs_fit(
    design: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    family: FamilyKind,
    start: &[f64],
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    bfgs_fit_tol(design, y, w, family, start, max_iter, 1e-6)
}

fn bfgs_fit_tol(
    design: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    family: FamilyKind,
    start: &[f64],
    max_iter: usize,
    grad_tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let obj = CountObjective { family, x: design, y, w };
    if start.len() != obj.n_params() {
        return Err(Error::DimensionMismatch {
            expected: obj.n_params(),
            got: start.len(),
        });
    }
    let mut upper = vec![f64::INFINITY; obj.n_params()];
    if family.has_theta() {
        upper[design.ncols()] = THETA_MAX.ln();
    }
    let opts = BfgsOptions {
        max_iter,
        upper: Some(upper),
        init_hessian: true,
        grad_tol,
        ..Default::default()
    };
    let min = minimize(&obj, start, &opts)?;
    Ok((min.x, min.iterations))
}

/// Iteratively reweighted least squares for the canonical-link families.
pub(crate) fn irls(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    family: FamilyKind,
    start: Option<&[f64]>,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = x.nrows();
    let p = x.ncols();
    let obj = CountObjective { family, x, y, w };
    let mut eta: Vec<f64> = match start {
        Some(b) => {
            if b.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: b.len() });
            }
            x.linear_predictor(b)
        }
        None => y
            .iter()
            .map(|&yi| match family {
                FamilyKind::Poisson => (yi + 0.1).ln(),
                _ => {
                    let m = (yi + 0.5) / 2.0;
                    (m / (1.0 - m)).ln()
                }
            })
            .collect(),
    };
    let mut beta: Option<Vec<f64>> = start.map(|b| b.to_vec());
    let mut ll_old = beta.as_ref().map(|b| obj.loglik(b)).unwrap_or(f64::NEG_INFINITY);
    let mut grad = vec![0.0; p];

    for iter in 0..max_iter {
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in 0..n {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let (mu, var) = match family {
                FamilyKind::Poisson => {
                    let mu = eta[i].exp();
                    (mu, mu)
                }
                _ => {
                    let pr = logistic(eta[i]);
                    (pr, (pr * (1.0 - pr)).max(1e-300))
                }
            };
            let z = eta[i] + (y[i] - mu) / var;
            let ww = wi * var;
            let row = x.row(i);
            for a in 0..p {
                xtwz[a] += ww * row[a] * z;
                for b in 0..=a {
                    xtwx[(a, b)] += ww * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let chol = match xtwx.cholesky() {
            Some(c) => c,
            None => {
                return Err(if family == FamilyKind::BinomialLogit {
                    Error::Separation
                } else {
                    Error::RankDeficient {
                        rank: x.rank(Some(w)),
                        cols: p,
                    }
                })
            }
        };
        let proposal: Vec<f64> = chol.solve(&xtwz).iter().copied().collect();

        // Step halving keeps the log-likelihood from decreasing.
        let mut candidate = proposal;
        let mut ll_new = obj.loglik(&candidate);
        if let Some(prev) = &beta {
            let mut halvings = 0;
            while !(ll_new >= ll_old - 1e-12 * ll_old.abs()) && halvings < 40 {
                candidate = candidate.iter().zip(prev).map(|(c, b)| 0.5 * (c + b)).collect();
                ll_new = obj.loglik(&candidate);
                halvings += 1;
            }
        }
        let rel = if ll_old.is_finite() {
            (ll_new - ll_old).abs() / ll_new.abs().max(1e-300)
        } else {
            f64::INFINITY
        };
        eta = x.linear_predictor(&candidate);
        use crate::optim::Objective;
        obj.eval(&candidate, &mut grad);
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        beta = Some(candidate);
        ll_old = ll_new;
        if (rel < 1e-10 && gnorm < 1e-6) || gnorm < 1e-10 {
            return Ok((beta.unwrap(), iter + 1));
        }
        if family == FamilyKind::BinomialLogit
            && eta.iter().zip(w).any(|(e, &wi)| wi > 0.0 && e.abs() > 2.0 * SEPARATION_ETA)
        {
            return Err(Error::Separation);
        }
    }
    let b = beta.unwrap_or_else(|| vec![0.0; p]);
    obj_grad_error(&obj, b, max_iter)
}

fn obj_grad_error(obj: &CountObjective<'_>, b: Vec<f64>, iterations: usize) -> Result<(Vec<f64>, usize)> {
    use crate::optim::Objective;
    let mut g = vec![0.0; b.len()];
    obj.eval(&b, &mut g);
    let grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if obj.family == FamilyKind::BinomialLogit {
        return Err(Error::Separation);
    }
    Err(Error::NonConvergence {
        iterations,
        grad_norm,
        last_iterate: b,
    })
}

fn finish(
    design: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    family: FamilyKind,
    params: Vec<f64>,
    iterations: usize,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let p = design.ncols();
    let obj = CountObjective { family, x: design, y, w };
    let loglik = obj.loglik(&params);
    let covariance = if opts.covariance {
        let info = numeric_hessian(&obj, &params);
        matrix_to_rows(&invert_information(&info)?)
    } else {
        Vec::new()
    };
    let coefficients = params[..p].to_vec();
    let log_theta = family.has_theta().then(|| params[p]);
    let fitted_means = design
        .linear_predictor(&coefficients)
        .into_iter()
        .map(|eta| match family {
            FamilyKind::BinomialLogit => logistic(eta),
            _ => eta.exp(),
        })
        .collect();
    Ok(FittedModel {
        family,
        link: if family == FamilyKind::BinomialLogit { Link::Logit } else { Link::Log },
        coef_names: design.column_names().to_vec(),
        coefficients,
        log_theta,
        loglik,
        df: params.len(),
        n_obs: w.iter().sum(),
        fitted_means,
        covariance,
        weights: w.to_vec(),
        iterations,
    })
}
