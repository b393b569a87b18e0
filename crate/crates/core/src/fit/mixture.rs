use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::glm::negbin_weighted;
use super::likelihood::obs_terms;
use super::{
    fit_glm_with, information_criteria, matrix_to_rows, validate_counts, DesignMatrix, FitOptions, FittedModel, Link,
    Predictive,
};
use crate::dist::{FamilyKind, FamilySpec, THETA_MAX};
use crate::optim::{invert_information, minimize, numeric_hessian, BfgsOptions, Objective};
use crate::{derive_seed, par, seeded_rng, Error, Result};

/// Smallest mixing weight before a component is declared degenerate.
const MIN_WEIGHT: f64 = 1e-6;
/// Largest fitted mean below which a component counts as a point mass at 0.
const MIN_MEAN: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct MixtureOptions {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    /// EM iteration cap.
    pub max_iter: usize,
    /// Relative log-likelihood change at which EM hands over to the
    /// quasi-Newton polish on the full mixture likelihood.
    pub em_tol: f64,
    /// Finish each restart with quasi-Newton on the full mixture likelihood.
    pub polish: bool,
    pub covariance: bool,
}

impl MixtureOptions {
    pub fn new(k: usize, restarts: usize, seed: u64) -> Self {
        MixtureOptions {
            k,
            restarts,
            seed,
            ..Default::default()
        }
    }
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions {
            k: 2,
            restarts: 5,
            seed: crate::DEFAULT_SEED,
            max_iter: 500,
            em_tol: 1e-4,
            polish: true,
            covariance: true,
        }
    }
}

/// A K-component negative binomial regression mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureFit {
    pub k: usize,
    /// Sorted by exp(intercept), ascending.
    pub components: Vec<FittedModel>,
    pub mixing_weights: Vec<f64>,
    /// n × K posterior membership probabilities.
    pub posteriors: Vec<Vec<f64>>,
    pub posterior_sums: Vec<f64>,
    pub loglik: f64,
    pub df: usize,
    pub n_obs: f64,
    /// EM log-likelihood sequence of the winning restart.
    pub loglik_trace: Vec<f64>,
    /// Final log-likelihood of each restart (`None` when it failed).
    pub restart_logliks: Vec<Option<f64>>,
    pub best_restart: usize,
    pub iterations: usize,
    /// Joint covariance over (β_1, log θ_1, …, β_K, log θ_K, mixing logits);
    /// the logits are relative to the last component.
    pub covariance: Vec<Vec<f64>>,
}

impl MixtureFit {
    pub fn aic(&self) -> f64 {
        information_criteria(self.loglik, self.df, self.n_obs).aic
    }

    pub fn bic(&self) -> f64 {
        information_criteria(self.loglik, self.df, self.n_obs).bic
    }

    /// Marginal predictive distribution at a covariate row.
    pub fn predictive(&self, row: &[f64]) -> Result<Predictive> {
        let components = (0..self.k)
            .map(|k| self.component_family(k, row))
            .collect::<Result<Vec<_>>>()?;
        Ok(Predictive::Mixture {
            weights: self.mixing_weights.clone(),
            components,
        })
    }

    pub fn component_family(&self, k: usize, row: &[f64]) -> Result<FamilySpec> {
        let c = &self.components[k];
        FamilySpec::negbin(c.linear_predictor(row)?.exp(), c.theta().unwrap())
    }
}

pub fn fit_mixture(
    design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<MixtureFit> {
    fit_mixture_with(design, response, weights, &MixtureOptions::new(k, restarts, seed))
}

pub fn fit_mixture_with(
    design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
    opts: &MixtureOptions,
) -> Result<MixtureFit> {
    let n = design.nrows();
    let p = design.ncols();
    let k = opts.k;
    if k == 0 {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::Config("mixture needs at least one restart".into()));
    }
    validate_counts(response, weights, n, false)?;
    if k * (p + 1) >= n {
        return Err(Error::Config(format!(
            "{k} components with {} parameters each need more than {n} observations",
            p + 1
        )));
    }
    design.check_full_rank(Some(weights))?;

    let problem = Problem {
        x: design,
        y: response,
        w: weights,
        k,
    };
    let base = fit_glm_with(
        design,
        response,
        weights,
        FamilyKind::Negbin,
        &FitOptions {
            covariance: false,
            ..Default::default()
        },
    )?
    .params();
    let runs = par::map_range(opts.restarts, |r| problem.run(r, opts, &base));
    let restart_logliks: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().ok().map(|s| s.loglik)).collect();
    let mut best: Option<usize> = None;
    for (r, run) in runs.iter().enumerate() {
        if let Ok(s) = run {
            if best.is_none_or(|b| s.loglik > runs[b].as_ref().unwrap().loglik) {
                best = Some(r);
            }
        }
    }
    let best_restart = match best {
        Some(b) => b,
        None => return Err(runs.into_iter().next().unwrap().unwrap_err()),
    };
    let run = runs.into_iter().nth(best_restart).unwrap().unwrap();
    problem.finish(run, restart_logliks, best_restart, opts)
}

struct Problem<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    w: &'a [f64],
    k: usize,
}

/// Outcome of one restart.
#[derive(Debug)]
struct Run {
    /// Per component: β followed by log θ.
    params: Vec<Vec<f64>>,
    pi: Vec<f64>,
    loglik: f64,
    trace: Vec<f64>,
    iterations: usize,
}

impl Problem<'_> {
    /// Restart 0 splits observations by response rank (0.9 weight on the
    /// group's own component). Later restarts draw component parameters around
    /// the single-component fit `base` and take one E-step from them.
    fn initial_posteriors(&self, restart: usize, seed: u64, base: &[f64]) -> Vec<Vec<f64>> {
        let n = self.y.len();
        let k = self.k;
        let mut post = vec![vec![0.0; k]; n];
        if restart == 0 || k == 1 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| self.y[a].total_cmp(&self.y[b]).then(a.cmp(&b)));
            for (rank, &i) in order.iter().enumerate() {
                let g = rank * k / n;
                for (j, v) in post[i].iter_mut().enumerate() {
                    *v = if k == 1 {
                        1.0
                    } else if j == g {
                        0.9
                    } else {
                        0.1 / (k - 1) as f64
                    };
                }
            }
            return post;
        }
        let p = self.x.ncols();
        let mut rng = seeded_rng(derive_seed(seed, restart as u64));
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let params: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                base.iter()
                    .enumerate()
                    .map(|(j, &b)| {
                        let sd = if j == p {
                            0.5
                        } else if j == 0 && self.x.has_intercept() {
                            1.0
                        } else {
                            0.3
                        };
                        b + sd * z()
                    })
                    .collect()
            })
            .collect();
        let logits: Vec<f64> = (1..k).map(|_| z()).collect();
        self.e_step(&params, &softmax(&logits), &mut post);
        post
    }

    /// E-step: posteriors and total log-likelihood.
    fn e_step(&self, params: &[Vec<f64>], pi: &[f64], post: &mut [Vec<f64>]) -> f64 {
        let p = self.x.ncols();
        let mut total = 0.0;
        let mut lk = vec![0.0; self.k];
        for i in 0..self.y.len() {
            let row = self.x.row(i);
            for (c, l) in lk.iter_mut().enumerate() {
                let eta: f64 = row.iter().zip(&params[c][..p]).map(|(a, b)| a * b).sum();
                *l = pi[c].ln() + obs_terms(FamilyKind::Negbin, self.y[i], eta, params[c][p]).ll;
            }
            let lse = log_sum_exp(&lk);
            for (c, v) in post[i].iter_mut().enumerate() {
                *v = (lk[c] - lse).exp();
            }
            if self.w[i] > 0.0 {
                total += self.w[i] * lse;
            }
        }
        total
    }

    fn run(&self, restart: usize, opts: &MixtureOptions, base: &[f64]) -> Result<Run> {
        let n = self.y.len();
        let k = self.k;
        let sw: f64 = self.w.iter().sum();
        let mut post = self.initial_posteriors(restart, opts.seed, base);
        let mut params: Vec<Option<Vec<f64>>> = vec![None; k];
        let mut pi = vec![0.0; k];
        let mut trace: Vec<f64> = Vec::new();
        let mut iterations = 0;
        let mut wk = vec![0.0; n];

        for it in 0..opts.max_iter {
            iterations = it + 1;
            for c in 0..k {
                for i in 0..n {
                    wk[i] = self.w[i] * post[i][c];
                }
                pi[c] = wk.iter().sum::<f64>() / sw;
                if pi[c] < MIN_WEIGHT {
                    return Err(Error::DegenerateComponent {
                        component: c,
                        weight: pi[c],
                    });
                }
                let start = params[c].as_deref().unwrap_or(base);
                params[c] = Some(negbin_weighted(self.x, self.y, &wk, start)?);
            }
            let current: Vec<Vec<f64>> = params.iter().map(|p| p.clone().unwrap()).collect();
            let ll = self.e_step(&current, &pi, &mut post);
            let done = trace
                .last()
                .is_some_and(|&prev: &f64| (ll - prev).abs() / ll.abs().max(1e-300) < opts.em_tol);
            trace.push(ll);
            if done {
                break;
            }
        }
        let mut params: Vec<Vec<f64>> = params.into_iter().map(Option::unwrap).collect();
        let mut loglik = *trace.last().unwrap();

        if opts.polish {
            let obj = MixtureObjective { problem: self };
            let bfgs = BfgsOptions {
                max_iter: 500,
                upper: Some(obj.upper()),
                init_hessian: true,
                ..Default::default()
            };
            if let Ok(min) = minimize(&obj, &pack(&params, &pi), &bfgs) {
                if -min.value >= loglik - 1e-9 * loglik.abs() {
                    (params, pi) = unpack(&min.x, k, self.x.ncols());
                    loglik = -min.value;
                }
            }
        }
        let p = self.x.ncols();
        for (c, &v) in pi.iter().enumerate() {
            // A component whose mean collapses to zero is a boundary point mass.
            let max_mean = self
                .x
                .linear_predictor(&params[c][..p])
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
                .exp();
            if v < MIN_WEIGHT || max_mean < MIN_MEAN {
                return Err(Error::DegenerateComponent { component: c, weight: v });
            }
        }
        Ok(Run {
            params,
            pi,
            loglik,
            trace,
            iterations,
        })
    }

    fn finish(
        &self,
        mut run: Run,
        restart_logliks: Vec<Option<f64>>,
        best_restart: usize,
        opts: &MixtureOptions,
    ) -> Result<MixtureFit> {
        let n = self.y.len();
        let p = self.x.ncols();
        let k = self.k;

        let key = |c: usize| -> f64 {
            if self.x.has_intercept() {
                run.params[c][0].exp()
            } else {
                let eta = self.x.linear_predictor(&run.params[c][..p]);
                eta.iter().map(|e| e.exp()).sum::<f64>() / n as f64
            }
        };
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        run.params = order.iter().map(|&c| run.params[c].clone()).collect();
        run.pi = order.iter().map(|&c| run.pi[c]).collect();

        let mut post = vec![vec![0.0; k]; n];
        let loglik = self.e_step(&run.params, &run.pi, &mut post);

        let block = p + 1;
        let covariance = if opts.covariance {
            let obj = MixtureObjective { problem: self };
            let info = numeric_hessian(&obj, &pack(&run.params, &run.pi));
            matrix_to_rows(&invert_information(&info)?)
        } else {
            Vec::new()
        };

        let mut components = Vec::with_capacity(k);
        let mut posterior_sums = Vec::with_capacity(k);
        for c in 0..k {
            let wk: Vec<f64> = (0..n).map(|i| self.w[i] * post[i][c]).collect();
            let beta = run.params[c][..p].to_vec();
            let lt = run.params[c][p];
            let eta = self.x.linear_predictor(&beta);
            let comp_ll: f64 = (0..n)
                .filter(|&i| wk[i] > 0.0)
                .map(|i| wk[i] * obs_terms(FamilyKind::Negbin, self.y[i], eta[i], lt).ll)
                .sum();
            let cov_block: Vec<Vec<f64>> = if covariance.is_empty() {
                Vec::new()
            } else {
                (0..block)
                    .map(|a| (0..block).map(|b| covariance[c * block + a][c * block + b]).collect())
                    .collect()
            };
            posterior_sums.push(wk.iter().sum());
            components.push(FittedModel {
                family: FamilyKind::Negbin,
                link: Link::Log,
                coef_names: self.x.column_names().to_vec(),
                coefficients: beta,
                log_theta: Some(lt),
                loglik: comp_ll,
                df: block,
                n_obs: wk.iter().sum(),
                fitted_means: eta.iter().map(|e| e.exp()).collect(),
                covariance: cov_block,
                weights: wk,
                iterations: run.iterations,
            });
        }

        Ok(MixtureFit {
            k,
            components,
            mixing_weights: run.pi,
            posteriors: post,
            posterior_sums,
            loglik,
            df: k * block + (k - 1),
            n_obs: self.w.iter().sum(),
            loglik_trace: run.trace,
            restart_logliks,
            best_restart,
            iterations: run.iterations,
            covariance,
        })
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn pack(params: &[Vec<f64>], pi: &[f64]) -> Vec<f64> {
    let k = pi.len();
    let mut x: Vec<f64> = params.iter().flatten().copied().collect();
    for &v in &pi[..k - 1] {
        x.push((v / pi[k - 1]).ln());
    }
    x
}

fn unpack(x: &[f64], k: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let block = p + 1;
    let params = (0..k).map(|c| x[c * block..(c + 1) * block].to_vec()).collect();
    (params, softmax(&x[k * block..]))
}

/// Mixing weights from K − 1 logits relative to the last component.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = logits.to_vec();
    a.push(0.0);
    let lse = log_sum_exp(&a);
    a.iter().map(|v| (v - lse).exp()).collect()
}

/// Negative mixture log-likelihood over all component parameters and the
/// mixing logits.
struct MixtureObjective<'a> {
    problem: &'a Problem<'a>,
}

impl MixtureObjective<'_> {
    fn upper(&self) -> Vec<f64> {
        let p = self.problem.x.ncols();
        let k = self.problem.k;
        let mut u = vec![f64::INFINITY; self.dim()];
        for c in 0..k {
            u[c * (p + 1) + p] = THETA_MAX.ln();
        }
        u
    }
}

impl Objective for MixtureObjective<'_> {
    fn dim(&self) -> usize {
        let k = self.problem.k;
        k * (self.problem.x.ncols() + 1) + k - 1
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let Problem { x: design, y, w, k } = *self.problem;
        let p = design.ncols();
        let block = p + 1;
        let pi = softmax(&x[k * block..]);
        let ln_pi: Vec<f64> = pi.iter().map(|v| v.ln()).collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut lk = vec![0.0; k];
        let mut terms = vec![Default::default(); k];
        let mut total = 0.0;
        for i in 0..y.len() {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let row = design.row(i);
            for c in 0..k {
                let beta = &x[c * block..c * block + p];
                let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
                let t = obs_terms(FamilyKind::Negbin, y[i], eta, x[c * block + p]);
                lk[c] = ln_pi[c] + t.ll;
                terms[c] = t;
            }
            let lse = log_sum_exp(&lk);
            total += wi * lse;
            for c in 0..k {
                let post = (lk[c] - lse).exp();
                let t: super::likelihood::ObsTerms = terms[c];
                let s = wi * post * t.d_eta;
                for (g, xv) in grad[c * block..c * block + p].iter_mut().zip(row) {
                    *g -= s * xv;
                }
                grad[c * block + p] -= wi * post * t.d_log_theta;
                if c + 1 < k {
                    grad[k * block + c] -= wi * (post - pi[c]);
                }
            }
        }
        if !total.is_finite() {
            return f64::INFINITY;
        }
        -total
    }
}
