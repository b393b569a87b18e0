//! Observed and expected frequency tables and rootogram geometry.
//!
//! Bins are half-open intervals `(b_j, b_{j+1}]` over a strictly increasing
//! break vector. Expected frequencies use the discrete cdf at the floor of
//! each break, so the default half-integer breaks make bin `j` carry exactly
//! `Σ_i w_i f_i(j)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fit::Predictive;
use crate::formula::ModelData;
use crate::model::Model;
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakSpec {
    breaks: Vec<f64>,
    /// The last bin also absorbs `(b_m, ∞)`.
    open_tail: bool,
}

impl BreakSpec {
    pub fn new(breaks: Vec<f64>, open_tail: bool) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::Config("at least two breaks are needed".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("breaks must be finite and strictly increasing".into()));
        }
        Ok(BreakSpec { breaks, open_tail })
    }

    /// Breaks `-0.5, 0.5, …, max + 0.5`: one bin per count `0..=max`.
    pub fn integers(max: u64, open_tail: bool) -> Self {
        BreakSpec {
            breaks: (0..=max + 1).map(|j| j as f64 - 0.5).collect(),
            open_tail,
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn open_tail(&self) -> bool {
        self.open_tail
    }

    pub fn n_bins(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn centers(&self) -> Vec<f64> {
        self.breaks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Index of the bin containing `y`, if any.
    pub fn bin_of(&self, y: f64) -> Option<usize> {
        let b = &self.breaks;
        if y <= b[0] {
            return None;
        }
        let last = self.n_bins() - 1;
        if y > b[last + 1] {
            return self.open_tail.then_some(last);
        }
        // First break ≥ y closes the bin.
        Some(b.partition_point(|&x| x < y) - 1)
    }

    /// Largest integer that the cdf has to reach.
    fn cdf_span(&self) -> i64 {
        self.breaks[self.n_bins()].floor() as i64
    }
}

/// Weighted observed and expected frequencies over one set of bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub breaks: BreakSpec,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    /// Observed weight falling outside every bin.
    pub overflow_observed: f64,
    /// Expected weight outside every bin.
    pub overflow_expected: f64,
    pub total_weight: f64,
}

impl FrequencyTable {
    pub fn new(breaks: BreakSpec, observed: Vec<f64>, expected: Vec<f64>) -> Result<Self> {
        let m = breaks.n_bins();
        for v in [&observed, &expected] {
            if v.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: v.len() });
            }
        }
        if observed.iter().chain(&expected).any(|v| !(*v >= 0.0)) {
            return Err(Error::domain("frequencies must be nonnegative"));
        }
        let total_weight = observed.iter().sum();
        Ok(FrequencyTable {
            breaks,
            observed,
            expected,
            overflow_observed: 0.0,
            overflow_expected: 0.0,
            total_weight,
        })
    }

    /// Observed and expected frequencies from responses and per-row predictive
    /// distributions.
    pub fn compute(y: &[f64], w: &[f64], predictives: &[Predictive], breaks: &BreakSpec) -> Result<Self> {
        let (observed, overflow_observed) = observed_frequencies(y, w, breaks)?;
        let expected = expected_frequencies(predictives, w, breaks)?;
        let total_weight: f64 = w.iter().sum();
        let overflow_expected = (total_weight - expected.iter().sum::<f64>()).max(0.0);
        Ok(FrequencyTable {
            breaks: breaks.clone(),
            observed,
            expected,
            overflow_observed,
            overflow_expected,
            total_weight,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.observed.len()
    }
}

/// `obs_j = Σ_i w_i 1{b_j < y_i ≤ b_{j+1}}`, plus the weight of observations
/// outside every bin.
pub fn observed_frequencies(y: &[f64], w: &[f64], breaks: &BreakSpec) -> Result<(Vec<f64>, f64)> {
    if y.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: w.len(),
        });
    }
    let mut obs = vec![0.0; breaks.n_bins()];
    let mut overflow = 0.0;
    for (i, (&yi, &wi)) in y.iter().zip(w).enumerate() {
        if !(wi >= 0.0) {
            return Err(Error::domain(format!("negative weight {wi} at row {i}")));
        }
        match breaks.bin_of(yi) {
            Some(j) => obs[j] += wi,
            None => overflow += wi,
        }
    }
    Ok((obs, overflow))
}

/// `exp_j = Σ_i w_i [F_i(⌊b_{j+1}⌋) − F_i(⌊b_j⌋)]`, with `F_i(∞) = 1` for an
/// open tail.
pub fn expected_frequencies(predictives: &[Predictive], w: &[f64], breaks: &BreakSpec) -> Result<Vec<f64>> {
    if predictives.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: predictives.len(),
            got: w.len(),
        });
    }
    if let Some(i) = w.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::domain(format!("negative weight {} at row {i}", w[i])));
    }
    let m = breaks.n_bins();
    let span = breaks.cdf_span();
    let edges: Vec<i64> = breaks.breaks.iter().map(|b| b.floor() as i64).collect();
    let rows: Vec<Vec<f64>> = par::map_range(predictives.len(), |i| {
        if w[i] == 0.0 {
            return vec![0.0; m];
        }
        let table = if span >= 0 { predictives[i].cdf_table(span as u64) } else { Vec::new() };
        let cdf = |k: i64| if k < 0 { 0.0 } else { table[k as usize] };
        (0..m)
            .map(|j| {
                let upper = if breaks.open_tail && j == m - 1 { 1.0 } else { cdf(edges[j + 1]) };
                w[i] * (upper - cdf(edges[j])).max(0.0)
            })
            .collect()
    });
    let mut exp = vec![0.0; m];
    for row in &rows {
        for (e, v) in exp.iter_mut().zip(row) {
            *e += v;
        }
    }
    Ok(exp)
}

/// Frequencies of a fitted model on its own data.
pub fn model_frequencies(model: &Model, data: &ModelData, w: &[f64], breaks: &BreakSpec) -> Result<FrequencyTable> {
    let predictives = model.predictives(data)?;
    FrequencyTable::compute(&data.response, w, &predictives, breaks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Standing,
    #[default]
    Hanging,
    Suspended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Sqrt,
    Raw,
}

impl Scale {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Sqrt => v.sqrt(),
            Scale::Raw => v,
        }
    }

    pub fn invert(self, v: f64) -> f64 {
        match self {
            Scale::Sqrt => v * v,
            Scale::Raw => v,
        }
    }
}

macro_rules! parse_enum {
    ($ty:ty, $what:literal, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $v => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

parse_enum!(Style, "style", "standing" => Style::Standing, "hanging" => Style::Hanging, "suspended" => Style::Suspended);
parse_enum!(Scale, "scale", "sqrt" => Scale::Sqrt, "raw" => Scale::Raw);

/// Plot geometry for one rootogram.
///
/// With `t` the scale transform (√ or identity):
///
/// | style     | `bar_bottom`          | `bar_top`             |
/// |-----------|-----------------------|-----------------------|
/// | standing  | 0                     | t(obs)                |
/// | hanging   | t(exp) − t(obs)       | t(exp)                |
/// | suspended | 0                     | t(exp) − t(obs)       |
///
/// Suspended bars may have `bar_top < bar_bottom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootogramCoords {
    pub style: Style,
    pub scale: Scale,
    pub bin_centers: Vec<f64>,
    pub bar_bottom: Vec<f64>,
    pub bar_top: Vec<f64>,
    /// t(exp_j) at each bin center.
    pub expected_curve: Vec<f64>,
    pub reference_line: f64,
    pub bar_width: f64,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

pub const BAR_WIDTH_FRACTION: f64 = 0.9;

pub fn layout_rootogram(freqs: &FrequencyTable, style: Style, scale: Scale) -> RootogramCoords {
    let t_obs: Vec<f64> = freqs.observed.iter().map(|&v| scale.apply(v)).collect();
    let t_exp: Vec<f64> = freqs.expected.iter().map(|&v| scale.apply(v)).collect();
    let (bar_bottom, bar_top) = match style {
        Style::Standing => (vec![0.0; t_obs.len()], t_obs),
        Style::Hanging => (t_exp.iter().zip(&t_obs).map(|(e, o)| e - o).collect(), t_exp.clone()),
        Style::Suspended => (vec![0.0; t_obs.len()], t_exp.iter().zip(&t_obs).map(|(e, o)| e - o).collect()),
    };
    let min_width = freqs
        .breaks
        .breaks()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    RootogramCoords {
        style,
        scale,
        bin_centers: freqs.breaks.centers(),
        bar_bottom,
        bar_top,
        expected_curve: t_exp,
        reference_line: 0.0,
        bar_width: BAR_WIDTH_FRACTION * min_width,
        observed: freqs.observed.clone(),
        expected: freqs.expected.clone(),
    }
}

impl RootogramCoords {
    /// Recover (observed, expected) from the drawn geometry.
    pub fn invert(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.scale;
        let exp: Vec<f64> = self.expected_curve.iter().map(|&e| s.invert(e)).collect();
        let obs = match self.style {
            Style::Standing => self.bar_top.iter().map(|&t| s.invert(t)).collect(),
            Style::Hanging => self
                .bar_top
                .iter()
                .zip(&self.bar_bottom)
                .map(|(t, b)| s.invert(t - b))
                .collect(),
            Style::Suspended => self
                .expected_curve
                .iter()
                .zip(&self.bar_top)
                .map(|(e, d)| s.invert(e - d))
                .collect(),
        };
        (obs, exp)
    }
}
