//! Residual diagnostics and uncertainty bands for rootograms.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::fit::Predictive;
use crate::formula::ModelData;
use crate::model::Model;
use crate::rootogram::{expected_frequencies, observed_frequencies, BreakSpec};
use crate::special::{normal_cdf, normal_quantile};
use crate::{derive_seed, par, seeded_rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Quantile,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub kind: ResidualKind,
    pub values: Vec<f64>,
    pub fitted_means: Vec<f64>,
    /// Randomization seed (quantile residuals only).
    pub seed: Option<u64>,
    /// Probability interval of each observation, kept for re-randomization.
    #[serde(skip)]
    pub intervals: Vec<ProbInterval>,
}

/// `(F(y − 1), F(y))`, or `(P(Y > y), P(Y ≥ y))` when `upper` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbInterval {
    pub lo: f64,
    pub hi: f64,
    pub upper: bool,
}

impl ProbInterval {
    fn of(p: &Predictive, y: i64) -> Self {
        let hi = p.cdf(y);
        if hi < 0.5 {
            ProbInterval {
                lo: p.cdf(y - 1),
                hi,
                upper: false,
            }
        } else {
            ProbInterval {
                lo: p.sf(y),
                hi: p.sf(y - 1),
                upper: true,
            }
        }
    }

    fn residual(&self, v: f64) -> f64 {
        let (lo, hi) = (self.lo, self.hi);
        let u = (lo + (hi - lo) * v).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        if self.upper {
            -normal_quantile(u)
        } else {
            normal_quantile(u)
        }
    }
}

/// Randomized quantile residuals `Φ⁻¹(u_i)`, `u_i ~ U(F_i(y_i − 1), F_i(y_i))`.
pub fn quantile_residuals(model: &Model, data: &ModelData, seed: u64) -> Result<DiagnosticSeries> {
    quantile_residuals_from(&model.predictives(data)?, &data.response, seed)
}

pub fn quantile_residuals_from(predictives: &[Predictive], y: &[f64], seed: u64) -> Result<DiagnosticSeries> {
    if predictives.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: predictives.len(),
        });
    }
    let mut intervals = Vec::with_capacity(y.len());
    for (i, (p, &yi)) in predictives.iter().zip(y).enumerate() {
        let iv = ProbInterval::of(p, yi as i64);
        if !(iv.hi > iv.lo) {
            return Err(Error::data(
                Some(i),
                format!("F(y) = F(y - 1) at y = {yi}; the observation has zero probability"),
            ));
        }
        intervals.push(iv);
    }
    let mut rng = seeded_rng(seed);
    let values = randomize(&intervals, &mut rng);
    Ok(DiagnosticSeries {
        kind: ResidualKind::Quantile,
        values,
        fitted_means: predictives.iter().map(Predictive::mean).collect(),
        seed: Some(seed),
        intervals,
    })
}

fn randomize(intervals: &[ProbInterval], rng: &mut crate::Rng) -> Vec<f64> {
    intervals.iter().map(|iv| iv.residual(rng.random::<f64>())).collect()
}

/// Pearson residuals `(y_i − m_i) / √v_i` under the model-implied moments.
pub fn pearson_residuals(model: &Model, data: &ModelData) -> Result<DiagnosticSeries> {
    pearson_residuals_from(&model.predictives(data)?, &data.response)
}

pub fn pearson_residuals_from(predictives: &[Predictive], y: &[f64]) -> Result<DiagnosticSeries> {
    if predictives.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: predictives.len(),
        });
    }
    let mut values = Vec::with_capacity(y.len());
    let mut means = Vec::with_capacity(y.len());
    for (i, (p, &yi)) in predictives.iter().zip(y).enumerate() {
        let (m, v) = (p.mean(), p.variance());
        if !(v > 0.0) {
            return Err(Error::data(Some(i), format!("model variance {v} is not positive")));
        }
        values.push((yi - m) / v.sqrt());
        means.push(m);
    }
    Ok(DiagnosticSeries {
        kind: ResidualKind::Pearson,
        values,
        fitted_means: means,
        seed: None,
        intervals: Vec::new(),
    })
}

/// Normal Q-Q coordinates with a pointwise randomization envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqCoords {
    /// Φ⁻¹((i − 0.5)/n).
    pub theoretical: Vec<f64>,
    pub sample: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub levels: (f64, f64),
    pub envelope_draws: usize,
    pub seed: u64,
}

impl QqCoords {
    /// Share of points inside the envelope.
    pub fn coverage(&self) -> f64 {
        let inside = (0..self.sample.len())
            .filter(|&i| self.sample[i] >= self.lower[i] && self.sample[i] <= self.upper[i])
            .count();
        inside as f64 / self.sample.len() as f64
    }
}

pub const QQ_LEVELS: (f64, f64) = (0.05, 0.95);

/// Sorted residuals against normal quantiles. The envelope holds the 5% and
/// 95% pointwise quantiles of `envelope_draws` sorted residual sets drawn
/// under the fitted model. For a response simulated from the model the
/// randomized PIT is exactly U(0, 1), so each set is an N(0, 1) sample.
pub fn qq_coordinates(series: &DiagnosticSeries, envelope_draws: usize, seed: u64) -> Result<QqCoords> {
    let n = series.values.len();
    if n < 2 {
        return Err(Error::data(None, format!("insufficient observations for a Q-Q plot (n = {n})")));
    }
    let mut sample = series.values.clone();
    sample.sort_by(f64::total_cmp);
    let theoretical: Vec<f64> = (1..=n).map(|i| normal_quantile((i as f64 - 0.5) / n as f64)).collect();

    let draws: Vec<Vec<f64>> = par::map_range(envelope_draws, |d| {
        let mut rng = seeded_rng(derive_seed(seed, d as u64));
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        v.sort_by(f64::total_cmp);
        v
    });
    let (lower, upper) = pointwise_quantiles(&draws, n, QQ_LEVELS);
    Ok(QqCoords {
        theoretical,
        sample,
        lower,
        upper,
        levels: QQ_LEVELS,
        envelope_draws,
        seed,
    })
}

/// Type-7 quantiles per column of a row-major set of equally long rows.
fn pointwise_quantiles(rows: &[Vec<f64>], m: usize, levels: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    if rows.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut col = vec![0.0; rows.len()];
    for j in 0..m {
        for (c, r) in col.iter_mut().zip(rows) {
            *c = r[j];
        }
        col.sort_by(f64::total_cmp);
        lower.push(quantile_type7(&col, levels.0));
        upper.push(quantile_type7(&col, levels.1));
    }
    (lower, upper)
}

/// Hyndman–Fan type 7 quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov–Smirnov distance between the empirical cdf of `values` and Φ.
pub fn ks_distance_normal(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Tukey's rule-of-thumb limits on the √-deviation scale.
pub fn warning_limits() -> (f64, f64) {
    (-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Simulate y* from the fitted model and compare with the fitted
    /// expected frequencies: d_j = √exp_j − √obs*_j.
    #[default]
    FixedModel,
    /// Also refit on each y*: d_j = √exp*_j − √obs*_j.
    Refit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandOptions {
    pub replications: usize,
    pub levels: (f64, f64),
    pub seed: u64,
    pub mode: BandMode,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            replications: 1000,
            levels: (0.025, 0.975),
            seed: crate::DEFAULT_SEED,
            mode: BandMode::FixedModel,
        }
    }
}

/// Pointwise parametric-bootstrap quantiles of hanging-rootogram deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub bin_centers: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub levels: (f64, f64),
    pub replications: usize,
    /// Replications whose refit failed (always 0 for fixed-model bands).
    pub failures: usize,
    pub seed: u64,
    pub mode: BandMode,
    pub warning_limits: (f64, f64),
}

/// Largest share of failed refits tolerated before the band is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.01;

pub fn bootstrap_band(
    model: &Model,
    data: &ModelData,
    weights: &[f64],
    breaks: &BreakSpec,
    opts: &BandOptions,
) -> Result<BootstrapBand> {
    let b = opts.replications;
    if b == 0 {
        return Err(Error::Config("bootstrap needs at least one replication".into()));
    }
    let (lo, hi) = opts.levels;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::Config(format!("invalid band levels ({lo}, {hi})")));
    }
    let n = data.response.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    let predictives = model.predictives(data)?;
    let fixed_root: Vec<f64> = expected_frequencies(&predictives, weights, breaks)?
        .into_iter()
        .map(f64::sqrt)
        .collect();

    let reps: Vec<Option<Vec<f64>>> = par::map_range(b, |r| {
        let seed = derive_seed(opts.seed, r as u64);
        let mut rng = seeded_rng(seed);
        let y: Vec<f64> = predictives.iter().map(|p| p.sample(&mut rng) as f64).collect();
        let (obs, _) = observed_frequencies(&y, weights, breaks).ok()?;
        let root_exp = match opts.mode {
            BandMode::FixedModel => fixed_root.clone(),
            BandMode::Refit => {
                let refit = model.refit(data, &y, weights, seed).ok()?;
                let p = refit.predictives(data).ok()?;
                expected_frequencies(&p, weights, breaks).ok()?.into_iter().map(f64::sqrt).collect()
            }
        };
        Some(root_exp.iter().zip(&obs).map(|(e, o)| e - o.sqrt()).collect())
    });
    let ok: Vec<Vec<f64>> = reps.into_iter().flatten().collect();
    let failures = b - ok.len();
    if failures as f64 > MAX_FAILURE_RATE * b as f64 || ok.is_empty() {
        return Err(Error::BootstrapFailures { failed: failures, total: b });
    }
    let (lower, upper) = pointwise_quantiles(&ok, breaks.n_bins(), opts.levels);
    Ok(BootstrapBand {
        bin_centers: breaks.centers(),
        lower,
        upper,
        levels: opts.levels,
        replications: b,
        failures,
        seed: opts.seed,
        mode: opts.mode,
        warning_limits: warning_limits(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FamilySpec;

    #[test]
    fn type7_matches_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&x, 0.0), 1.0);
        assert_eq!(quantile_type7(&x, 1.0), 4.0);
        assert!((quantile_type7(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_type7(&x, 0.1) - 1.3).abs() < 1e-12);
        assert_eq!(quantile_type7(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn zero_response_draws_below_f0() {
        let p = vec![Predictive::Count(FamilySpec::poisson(2.0).unwrap()); 200];
        let y = vec![0.0; 200];
        let r = quantile_residuals_from(&p, &y, 3).unwrap();
        let cap = normal_quantile((-2.0f64).exp());
        assert!(r.values.iter().all(|&v| v <= cap));
        assert_eq!(r.intervals[0].lo, 0.0);
    }

    #[test]
    fn zero_probability_observation_is_named() {
        let p = vec![Predictive::Hurdle {
            p_zero: 1.0,
            count: FamilySpec::zt_poisson(1.0).unwrap(),
        }];
        assert!(matches!(
            quantile_residuals_from(&p, &[2.0], 1),
            Err(Error::Data { row: Some(0), .. })
        ));
    }

    #[test]
    fn far_upper_tail_stays_finite() {
        let p = vec![Predictive::Count(FamilySpec::poisson(3.0).unwrap()); 2];
        let r = quantile_residuals_from(&p, &[27.0, 40.0], 9).unwrap();
        assert!(r.values.iter().all(|v| v.is_finite() && *v > 7.0), "{:?}", r.values);
        assert!(r.values[1] > r.values[0]);
    }

    #[test]
    fn pearson_denominators() {
        let p = vec![
            Predictive::Count(FamilySpec::negbin(3.0, 2.0).unwrap()),
            Predictive::Count(FamilySpec::poisson(4.0).unwrap()),
        ];
        let r = pearson_residuals_from(&p, &[6.0, 4.0]).unwrap();
        assert!((r.values[0] - 3.0 / 7.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.values[1], 0.0);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let v: Vec<f64> = (1..=n).map(|i| normal_quantile((i as f64 - 0.5) / n as f64)).collect();
        assert!((ks_distance_normal(&v) - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn qq_needs_two_points() {
        let s = DiagnosticSeries {
            kind: ResidualKind::Quantile,
            values: vec![0.1],
            fitted_means: vec![1.0],
            seed: None,
            intervals: Vec::new(),
        };
        assert!(qq_coordinates(&s, 10, 1).is_err());
    }

    #[test]
    fn limits() {
        assert_eq!(warning_limits(), (-1.0, 1.0));
    }
}
