use std::fs;
use std::io::Write;
use std::path::Path;

use countdiag::diagnostics::{
    bootstrap_band, pearson_residuals_from, qq_coordinates, quantile_residuals_from, BandMode, BandOptions,
};
use countdiag::dist::FamilySpec;
use countdiag::fit::Predictive;
use countdiag::formula::{build_design, parse_formula, read_table, DataTable, ModelData, Schema};
use countdiag::model::{fit_model, Model, ModelKind, ModelSpec};
use countdiag::rootogram::{layout_rootogram, BreakSpec, FrequencyTable, Scale, Style};
use countdiag::{seeded_rng, Error, Result};
use serde::Serialize;

use crate::report::{compare_text, fit_report, fit_text, CompareRow};
use crate::svg;
use crate::{BootstrapArgs, CompareArgs, DataArgs, FitArgs, Format, ModelArgs, OutArgs, QqArgs, RootogramArgs, SimulateArgs};

/// Weights used to fit, and weights (plus component) used for plotting.
enum Weighting {
    Column(Vec<f64>),
    Posterior(usize),
}

struct Loaded {
    table: DataTable,
    data: ModelData,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let schema = match &args.schema {
        Some(p) => Some(Schema::from_path(p)?),
        None => Schema::sidecar_for(&args.data)?,
    };
    let table = read_table(&args.data, schema.as_ref())?;
    let data = build_design(&parse_formula(&args.formula)?, &table)?;
    Ok(Loaded { table, data })
}

fn weighting(args: &DataArgs, table: &DataTable) -> Result<Weighting> {
    match args.weights.as_deref() {
        None => Ok(Weighting::Column(vec![1.0; table.n_rows()])),
        Some(w) => match w.strip_prefix("posterior:") {
            Some(k) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad component in --weights '{w}'")))?;
                if k == 0 {
                    return Err(Error::Config("mixture components are numbered from 1".into()));
                }
                Ok(Weighting::Posterior(k - 1))
            }
            None => Ok(Weighting::Column(table.numeric(w)?.to_vec())),
        },
    }
}

fn spec(family: &str, args: &DataArgs, data: &ModelData) -> Result<ModelSpec> {
    let kind: ModelKind = family.parse()?;
    if data.zero.is_some() && !matches!(kind, ModelKind::HurdlePoisson | ModelKind::HurdleNegbin) {
        return Err(Error::Config(format!("a '|' zero part needs a hurdle family, not '{kind}'")));
    }
    Ok(ModelSpec {
        kind,
        k: args.k,
        restarts: args.restarts,
        seed: args.seed,
    })
}

/// The fitted model with the weights and per-row distributions to plot.
struct Fitted {
    model: Model,
    data: ModelData,
    plot_weights: Vec<f64>,
    predictives: Vec<Predictive>,
}

fn fit_for_plot(args: &ModelArgs) -> Result<Fitted> {
    let Loaded { table, data } = load(&args.data)?;
    let spec = spec(&args.family, &args.data, &data)?;
    let weighting = weighting(&args.data, &table)?;
    let fit_weights = match &weighting {
        Weighting::Column(w) => w.clone(),
        Weighting::Posterior(_) => vec![1.0; data.response.len()],
    };
    let model = fit_model(&spec, &data, &fit_weights)?;
    let (plot_weights, predictives) = match weighting {
        Weighting::Column(w) => (w, model.predictives(&data)?),
        Weighting::Posterior(k) => (model.posterior_weights(k)?, model.component_predictives(&data, k)?),
    };
    Ok(Fitted {
        model,
        data,
        plot_weights,
        predictives,
    })
}

fn emit(out: &OutArgs, default: Format, text: impl FnOnce(Format) -> Result<String>) -> Result<()> {
    let body = text(out.format.unwrap_or(default))?;
    match &out.out {
        Some(p) => write_file(p, &body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn unsupported(format: Format, what: &str) -> Error {
    Error::Config(format!("{what} output is not available as {format:?}").to_lowercase())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let a = &args.model;
    let Loaded { table, data } = load(&a.data)?;
    let spec = spec(&a.family, &a.data, &data)?;
    let w = match weighting(&a.data, &table)? {
        Weighting::Column(w) => w,
        Weighting::Posterior(_) => return Err(Error::Config("posterior weights apply to plots, not fits".into())),
    };
    let model = fit_model(&spec, &data, &w)?;
    let report = fit_report(&model, &a.data.formula);
    emit(&a.out, Format::Text, |f| match f {
        Format::Text => Ok(fit_text(&report)),
        Format::Json => json(&report),
        Format::Svg => Err(unsupported(f, "fit")),
    })
}

#[derive(Serialize)]
struct RootogramDoc<'a> {
    schema: &'static str,
    model: String,
    coords: &'a countdiag::rootogram::RootogramCoords,
    overflow_observed: f64,
    overflow_expected: f64,
    total_weight: f64,
}

fn breaks_for(y: &[f64], max_count: Option<u64>) -> BreakSpec {
    let max = max_count.unwrap_or_else(|| y.iter().cloned().fold(0.0, f64::max) as u64);
    BreakSpec::integers(max, false)
}

pub fn rootogram(args: &RootogramArgs) -> Result<()> {
    let style: Style = args.style.parse()?;
    let scale: Scale = args.scale.parse()?;
    let f = fit_for_plot(&args.model)?;
    let breaks = breaks_for(&f.data.response, args.max_count);
    let table = FrequencyTable::compute(&f.data.response, &f.plot_weights, &f.predictives, &breaks)?;
    let coords = layout_rootogram(&table, style, scale);
    let name = f.model.kind().to_string();
    emit(&args.model.out, Format::Json, |fmt| match fmt {
        Format::Json => json(&RootogramDoc {
            schema: "countdiag.rootogram/1",
            model: name.clone(),
            coords: &coords,
            overflow_observed: table.overflow_observed,
            overflow_expected: table.overflow_expected,
            total_weight: table.total_weight,
        }),
        Format::Svg => svg::rootogram(&coords, None, &name),
        Format::Text => Ok(rootogram_text(&coords)),
    })
}

fn rootogram_text(c: &countdiag::rootogram::RootogramCoords) -> String {
    let mut s = format!("{:>6} {:>10} {:>10} {:>10} {:>10}\n", "bin", "observed", "expected", "bottom", "top");
    for j in 0..c.bin_centers.len() {
        s.push_str(&format!(
            "{:>6} {:>10.2} {:>10.2} {:>10.3} {:>10.3}\n",
            c.bin_centers[j], c.observed[j], c.expected[j], c.bar_bottom[j], c.bar_top[j]
        ));
    }
    s
}

#[derive(Serialize)]
struct QqDoc<'a> {
    schema: &'static str,
    model: String,
    #[serde(flatten)]
    qq: &'a countdiag::diagnostics::QqCoords,
}

pub fn qq(args: &QqArgs) -> Result<()> {
    let f = fit_for_plot(&args.model)?;
    let seed = args.model.data.seed;
    let res = quantile_residuals_from(&f.predictives, &f.data.response, seed)?;
    let qq = qq_coordinates(&res, args.draws, seed)?;
    let name = f.model.kind().to_string();
    emit(&args.model.out, Format::Json, |fmt| match fmt {
        Format::Json => json(&QqDoc {
            schema: "countdiag.qq/1",
            model: name.clone(),
            qq: &qq,
        }),
        Format::Svg => svg::qq(&qq, &name),
        Format::Text => Ok(format!(
            "{name}: {} of {} points inside the 5%/95% envelope ({:.1}%)\n",
            (qq.coverage() * qq.sample.len() as f64).round(),
            qq.sample.len(),
            100.0 * qq.coverage()
        )),
    })
}

#[derive(Serialize)]
struct PearsonDoc<'a> {
    schema: &'static str,
    model: String,
    fitted_means: &'a [f64],
    residuals: &'a [f64],
}

pub fn pearson(args: &ModelArgs) -> Result<()> {
    let f = fit_for_plot(args)?;
    let r = pearson_residuals_from(&f.predictives, &f.data.response)?;
    let name = f.model.kind().to_string();
    emit(&args.out, Format::Json, |fmt| match fmt {
        Format::Json => json(&PearsonDoc {
            schema: "countdiag.pearson/1",
            model: name.clone(),
            fitted_means: &r.fitted_means,
            residuals: &r.values,
        }),
        Format::Svg => svg::pearson(&r.fitted_means, &r.values, &name),
        Format::Text => {
            let ss: f64 = r.values.iter().map(|v| v * v).sum();
            Ok(format!("{name}: sum of squared Pearson residuals {ss:.3} over {} observations\n", r.values.len()))
        }
    })
}

#[derive(Serialize)]
struct BootstrapDoc<'a> {
    schema: &'static str,
    model: String,
    coords: &'a countdiag::rootogram::RootogramCoords,
    band: &'a countdiag::diagnostics::BootstrapBand,
}

pub fn bootstrap(args: &BootstrapArgs) -> Result<()> {
    if args.b == 0 {
        return Err(Error::Config("--B must be at least 1".into()));
    }
    let scale: Scale = args.scale.parse()?;
    let f = fit_for_plot(&args.model)?;
    let breaks = breaks_for(&f.data.response, args.max_count);
    let table = FrequencyTable::compute(&f.data.response, &f.plot_weights, &f.predictives, &breaks)?;
    let coords = layout_rootogram(&table, Style::Hanging, scale);
    if args.model.data.weights.as_deref().is_some_and(|w| w.starts_with("posterior:")) {
        return Err(Error::Config("bootstrap bands are drawn for the full model only".into()));
    }
    let opts = BandOptions {
        replications: args.b,
        seed: args.model.data.seed,
        mode: if args.refit { BandMode::Refit } else { BandMode::FixedModel },
        ..Default::default()
    };
    let band = bootstrap_band(&f.model, &f.data, &f.plot_weights, &breaks, &opts)?;
    let name = f.model.kind().to_string();
    emit(&args.model.out, Format::Json, |fmt| match fmt {
        Format::Json => json(&BootstrapDoc {
            schema: "countdiag.bootstrap/1",
            model: name.clone(),
            coords: &coords,
            band: &band,
        }),
        Format::Svg => svg::rootogram(&coords, Some(&band), &name),
        Format::Text => {
            let mut s = format!(
                "{name}: {} replications, {} failed, levels {:?}\n",
                band.replications, band.failures, band.levels
            );
            for j in 0..band.lower.len() {
                s.push_str(&format!(
                    "{:>6} {:>8.3} {:>8.3}\n",
                    band.bin_centers[j], band.lower[j], band.upper[j]
                ));
            }
            Ok(s)
        }
    })
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    if args.family.len() < 2 {
        return Err(Error::Config("compare needs at least two families".into()));
    }
    let Loaded { table, data } = load(&args.data)?;
    let w = match weighting(&args.data, &table)? {
        Weighting::Column(w) => w,
        Weighting::Posterior(_) => return Err(Error::Config("posterior weights apply to plots, not fits".into())),
    };
    let mut rows = Vec::with_capacity(args.family.len());
    for family in &args.family {
        // Hurdle families reuse the count regressors for the zero part
        // unless the formula gives one.
        let spec = spec(family.trim(), &args.data, &data).or_else(|e| match e {
            Error::Config(_) if data.zero.is_some() => {
                let mut d = data.clone();
                d.zero = None;
                spec(family.trim(), &args.data, &d)
            }
            e => Err(e),
        })?;
        let d = if matches!(spec.kind, ModelKind::HurdlePoisson | ModelKind::HurdleNegbin) {
            data.clone()
        } else {
            ModelData { zero: None, ..data.clone() }
        };
        let m = fit_model(&spec, &d, &w)?;
        rows.push(CompareRow {
            model: spec.kind.to_string(),
            df: m.df(),
            loglik: m.loglik(),
            aic: m.aic(),
            bic: m.bic(),
        });
    }
    rows.sort_by(|a, b| a.bic.total_cmp(&b.bic).then_with(|| a.model.cmp(&b.model)));
    emit(&args.out, Format::Text, |fmt| match fmt {
        Format::Text => Ok(compare_text(&rows)),
        Format::Json => json(&serde_json::json!({ "schema": "countdiag.compare/1", "models": rows })),
        Format::Svg => Err(unsupported(fmt, "compare")),
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let family = match args.family.as_str() {
        "poisson" => FamilySpec::poisson(args.mu)?,
        "negbin" => {
            let theta = args
                .theta
                .ok_or_else(|| Error::Config("negbin simulation needs --theta".into()))?;
            FamilySpec::negbin(args.mu, theta)?
        }
        other => return Err(Error::Config(format!("simulate supports poisson and negbin, not '{other}'"))),
    };
    let mut rng = seeded_rng(args.seed);
    let mut body = String::from("y\n");
    for _ in 0..args.n {
        body.push_str(&family.sample(&mut rng).to_string());
        body.push('\n');
    }
    match &args.out {
        Some(p) => write_file(p, &body),
        None => {
            std::io::stdout().lock().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}
