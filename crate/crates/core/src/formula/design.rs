use super::parse::{FormulaAst, TermList};
use super::table::{Column, DataTable};
use crate::fit::DesignMatrix;
use crate::{Error, Result};

/// Response vector plus regressor matrices for one formula.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub response: Vec<f64>,
    pub count: DesignMatrix,
    /// Present when the formula has a `|` part.
    pub zero: Option<DesignMatrix>,
}

impl ModelData {
    /// Zero-part regressors, falling back to the count regressors.
    pub fn zero_design(&self) -> &DesignMatrix {
        self.zero.as_ref().unwrap_or(&self.count)
    }
}

pub fn build_design(ast: &FormulaAst, table: &DataTable) -> Result<ModelData> {
    let y = table.numeric(&ast.response)?;
    if let Some(i) = y.iter().position(|v| v.fract() != 0.0) {
        return Err(Error::data(
            Some(i),
            format!("response '{}' must be integer-valued, got {}", ast.response, y[i]),
        ));
    }
    Ok(ModelData {
        response: y.to_vec(),
        count: build_matrix(&ast.count, table)?,
        zero: ast.zero.as_ref().map(|z| build_matrix(z, table)).transpose()?,
    })
}

/// Regressor matrix for one term list: intercept first, then terms in order.
pub fn build_matrix(terms: &TermList, table: &DataTable) -> Result<DesignMatrix> {
    let n = table.n_rows();
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if terms.intercept {
        names.push("(Intercept)".into());
        cols.push(vec![1.0; n]);
    }
    for term in &terms.terms {
        match table.column(&term.variable)? {
            Column::Numeric { values } => {
                let col: Vec<f64> = values.iter().map(|v| v.powi(term.power as i32)).collect();
                names.push(if term.power == 1 {
                    term.variable.clone()
                } else {
                    format!("{}^{}", term.variable, term.power)
                });
                cols.push(col);
            }
            Column::Categorical { levels, codes } => {
                if term.power != 1 {
                    return Err(Error::Config(format!(
                        "power applied to categorical column '{}'",
                        term.variable
                    )));
                }
                for (l, level) in levels.iter().enumerate().skip(1) {
                    names.push(format!("{}: {}/{}", term.variable, level, levels[0]));
                    cols.push(codes.iter().map(|&c| f64::from(c == l)).collect());
                }
            }
        }
    }
    for (name, col) in names.iter().zip(&cols) {
        if name != "(Intercept)" && n > 0 && col.iter().all(|&v| v == col[0]) {
            return Err(Error::data(None, format!("regressor '{name}' is constant")));
        }
    }
    let p = cols.len();
    let mut values = Vec::with_capacity(n * p);
    for i in 0..n {
        values.extend(cols.iter().map(|c| c[i]));
    }
    DesignMatrix::new(n, names, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, read_table_from, Schema};

    fn table() -> DataTable {
        let schema = Schema::from_json(r#"{"categorical": {"health": ["average", "poor", "excellent"]}}"#).unwrap();
        read_table_from(
            "visits,health,size\n1,poor,2\n0,average,3\n4,excellent,2\n2,average,5\n".as_bytes(),
            Some(&schema),
        )
        .unwrap()
    }

    #[test]
    fn treatment_contrasts_and_powers() {
        let d = build_design(&parse_formula("visits ~ health + size^2").unwrap(), &table()).unwrap();
        assert_eq!(
            d.count.column_names(),
            &["(Intercept)", "health: poor/average", "health: excellent/average", "size^2"]
        );
        assert_eq!(d.count.row(0), &[1.0, 1.0, 0.0, 4.0]);
        assert_eq!(d.count.row(1), &[1.0, 0.0, 0.0, 9.0]);
        assert_eq!(d.response, vec![1.0, 0.0, 4.0, 2.0]);
        assert!(d.zero.is_none());
        assert_eq!(d.zero_design(), &d.count);
    }

    #[test]
    fn intercept_only_and_split() {
        let d = build_design(&parse_formula("visits ~ 1 | size").unwrap(), &table()).unwrap();
        assert_eq!(d.count.ncols(), 1);
        assert!(d.count.has_intercept());
        assert_eq!(d.zero_design().column_names(), &["(Intercept)", "size"]);
    }

    #[test]
    fn errors() {
        let t = table();
        assert!(build_design(&parse_formula("visits ~ missing").unwrap(), &t).is_err());
        assert!(build_design(&parse_formula("health ~ size").unwrap(), &t).is_err());
        assert!(build_design(&parse_formula("visits ~ health^2").unwrap(), &t).is_err());
        let t = t.with_numeric("flat", vec![1.0; 4]).unwrap();
        assert!(build_design(&parse_formula("visits ~ flat").unwrap(), &t).is_err());
        let t = t.with_numeric("visits", vec![1.5, 0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            build_design(&parse_formula("visits ~ size").unwrap(), &t),
            Err(Error::Data { row: Some(0), .. })
        ));
    }

    #[test]
    fn row_permutation_permutes_design() {
        let t = table();
        let f = parse_formula("visits ~ health + size").unwrap();
        let perm = [2, 0, 3, 1];
        let a = build_design(&f, &t).unwrap();
        let b = build_design(&f, &t.select_rows(&perm)).unwrap();
        for (r, &i) in perm.iter().enumerate() {
            assert_eq!(b.count.row(r), a.count.row(i));
            assert_eq!(b.response[r], a.response[i]);
        }
    }
}
