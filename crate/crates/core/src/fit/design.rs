use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major n×p regressor matrix with column labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(n: usize, column_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let p = column_names.len();
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(Some(pos / p.max(1)), "non-finite entry in design matrix"));
        }
        Ok(DesignMatrix {
            n,
            p,
            values,
            column_names,
        })
    }

    /// Build from per-row vectors.
    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = column_names.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::data(Some(i), format!("row has {} entries, expected {p}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), column_names, values)
    }

    /// A single all-ones "(Intercept)" column.
    pub fn intercept_only(n: usize) -> Self {
        DesignMatrix {
            n,
            p: 1,
            values: vec![1.0; n],
            column_names: vec!["(Intercept)".into()],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn has_intercept(&self) -> bool {
        self.p > 0 && (0..self.n).all(|i| self.get(i, 0) == 1.0)
    }

    /// xᵢᵀβ for every row.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            n: rows.len(),
            p: self.p,
            values,
            column_names: self.column_names.clone(),
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.values)
    }

    /// Numerical rank from singular values of the column-scaled matrix,
    /// restricted to rows with positive weight.
    pub fn rank(&self, weights: Option<&[f64]>) -> usize {
        let rows: Vec<usize> = match weights {
            Some(w) => (0..self.n).filter(|&i| w[i] > 0.0).collect(),
            None => (0..self.n).collect(),
        };
        if rows.is_empty() || self.p == 0 {
            return 0;
        }
        let mut m = DMatrix::<f64>::zeros(rows.len(), self.p);
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..self.p {
                m[(r, j)] = self.get(i, j);
            }
        }
        for j in 0..self.p {
            let norm = m.column(j).norm();
            if norm > 0.0 {
                m.column_mut(j).scale_mut(1.0 / norm);
            }
        }
        let sv = m.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > max * 1e-10).count()
    }

    pub(crate) fn check_full_rank(&self, weights: Option<&[f64]>) -> Result<()> {
        let rank = self.rank(weights);
        if rank < self.p {
            return Err(Error::RankDeficient { rank, cols: self.p });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_detection() {
        let x = DesignMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 4.0], vec![1.0, 5.0, 6.0], vec![1.0, 0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(x.rank(None), 2);
        assert!(matches!(x.check_full_rank(None), Err(Error::RankDeficient { rank: 2, cols: 3 })));
        let ok = DesignMatrix::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(ok.has_intercept());
        assert_eq!(ok.rank(None), 2);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DesignMatrix::new(1, vec!["a".into()], vec![f64::NAN]).is_err());
    }
}
