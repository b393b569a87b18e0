use countdiag::fit::FittedModel;
use countdiag::model::Model;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Estimate {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

/// One column of the coefficient table: the count part, the zero part, or a
/// mixture component.
#[derive(Debug, Serialize)]
pub struct Part {
    pub name: String,
    pub family: String,
    pub coefficients: Vec<Estimate>,
    pub log_theta: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_sum: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema: &'static str,
    pub model: String,
    pub formula: String,
    pub n: f64,
    pub loglik: f64,
    pub df: usize,
    pub aic: f64,
    pub bic: f64,
    pub parts: Vec<Part>,
}

fn part(name: String, m: &FittedModel) -> Part {
    let se = m.std_errors();
    let se_at = |i: usize| se.get(i).copied();
    let p = m.coefficients.len();
    Part {
        name,
        family: format!("{:?}", m.family).to_lowercase(),
        coefficients: m
            .coef_names
            .iter()
            .zip(&m.coefficients)
            .enumerate()
            .map(|(i, (n, &b))| Estimate {
                name: n.clone(),
                estimate: b,
                std_error: se_at(i),
            })
            .collect(),
        log_theta: m.log_theta.map(|lt| Estimate {
            name: "Log(theta)".into(),
            estimate: lt,
            std_error: se_at(p),
        }),
        mixing_weight: None,
        posterior_sum: None,
    }
}

pub fn fit_report(model: &Model, formula: &str) -> FitReport {
    let parts = match model {
        Model::Glm(m) => vec![part("count".into(), m)],
        Model::Hurdle(h) => vec![part("count".into(), &h.count_part), part("zero".into(), &h.zero_part)],
        Model::Mixture(m) => m
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| Part {
                mixing_weight: Some(m.mixing_weights[k]),
                posterior_sum: Some(m.posterior_sums[k]),
                ..part(format!("component {}", k + 1), c)
            })
            .collect(),
    };
    FitReport {
        schema: "countdiag.fit/1",
        model: model.kind().to_string(),
        formula: formula.to_string(),
        n: model.n_obs(),
        loglik: model.loglik(),
        df: model.df(),
        aic: model.aic(),
        bic: model.bic(),
        parts,
    }
}

fn cell(e: &Estimate) -> String {
    match e.std_error {
        Some(se) => format!("{:.3} ({:.3})", e.estimate, se),
        None => format!("{:.3}", e.estimate),
    }
}

/// Coefficients by row, one column per part.
pub fn fit_text(r: &FitReport) -> String {
    let mut rows: Vec<String> = Vec::new();
    for p in &r.parts {
        for c in &p.coefficients {
            if !rows.contains(&c.name) {
                rows.push(c.name.clone());
            }
        }
    }
    let has_theta = r.parts.iter().any(|p| p.log_theta.is_some());
    let label_w = rows.iter().map(|s| s.len()).chain([10]).max().unwrap_or(10) + 2;
    let col_w = 18;

    let mut s = format!("{} : {}\n\n", r.model, r.formula);
    s.push_str(&format!("{:label_w$}", ""));
    for p in &r.parts {
        s.push_str(&format!("{:>col_w$}", p.name));
    }
    s.push('\n');
    for name in &rows {
        s.push_str(&format!("{name:label_w$}"));
        for p in &r.parts {
            let c = p.coefficients.iter().find(|c| &c.name == name).map(cell).unwrap_or_default();
            s.push_str(&format!("{c:>col_w$}"));
        }
        s.push('\n');
    }
    if has_theta {
        s.push_str(&format!("{:label_w$}", "Log(theta)"));
        for p in &r.parts {
            let c = p.log_theta.as_ref().map(cell).unwrap_or_default();
            s.push_str(&format!("{c:>col_w$}"));
        }
        s.push('\n');
    }
    if r.parts.iter().any(|p| p.mixing_weight.is_some()) {
        s.push_str(&format!("{:label_w$}", "weight"));
        for p in &r.parts {
            s.push_str(&format!("{:>col_w$.4}", p.mixing_weight.unwrap_or(f64::NAN)));
        }
        s.push('\n');
        s.push_str(&format!("{:label_w$}", "posterior"));
        for p in &r.parts {
            s.push_str(&format!("{:>col_w$.1}", p.posterior_sum.unwrap_or(f64::NAN)));
        }
        s.push('\n');
    }
    s.push('\n');
    s.push_str(&format!("{:label_w$}{:>col_w$}\n", "N", r.n));
    s.push_str(&format!("{:label_w$}{:>col_w$.3}\n", "logLik", r.loglik));
    s.push_str(&format!("{:label_w$}{:>col_w$}\n", "df", r.df));
    s.push_str(&format!("{:label_w$}{:>col_w$.2}\n", "AIC", r.aic));
    s.push_str(&format!("{:label_w$}{:>col_w$.2}\n", "BIC", r.bic));
    s
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub model: String,
    pub df: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
}

pub fn compare_text(rows: &[CompareRow]) -> String {
    let mut s = format!("{:<16} {:>4} {:>12} {:>12} {:>12}\n", "model", "df", "logLik", "AIC", "BIC");
    for r in rows {
        s.push_str(&format!(
            "{:<16} {:>4} {:>12.3} {:>12.2} {:>12.2}\n",
            r.model, r.df, r.loglik, r.aic, r.bic
        ));
    }
    s
}
