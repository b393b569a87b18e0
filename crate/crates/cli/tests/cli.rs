use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const CRAB_FULL: &str = "satellites ~ width + color";
const CRAB_SIMPLE: &str = "satellites ~ 1 | width + color";
const BIDS: &str =
    "bids ~ legalrest + realrest + finrest + whiteknight + bidpremium + insthold + regulation + size + size^2";

fn data(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    root.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_countdiag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn crab(cmd: &str, family: &str, formula: &str, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = [cmd, "--data", &data("crab_satellites.csv"), "--formula", formula, "--family", family]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn estimate<'a>(part: &'a Value, name: &str) -> &'a Value {
    part["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no coefficient {name}"))
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn hurdle_zero_part_matches_table_1() {
    let r = json(&refs(&crab("fit", "hurdle-negbin", CRAB_SIMPLE, &["--format", "json"])));
    assert_eq!(r["schema"], "countdiag.fit/1");
    let zero = r["parts"].as_array().unwrap().iter().find(|p| p["name"] == "zero").unwrap();
    for (name, est, se) in [("(Intercept)", -10.07, 2.81), ("width", 0.46, 0.10), ("color", -0.51, 0.22)] {
        let c = estimate(zero, name);
        assert!((f(&c["estimate"]) - est).abs() < 0.01, "{name}: {}", c["estimate"]);
        assert!((f(&c["std_error"]) - se).abs() < 0.01, "{name} se: {}", c["std_error"]);
    }
    assert!((f(&r["loglik"]) + 351.0).abs() < 0.05);
}

#[test]
fn text_report_has_count_and_zero_columns() {
    let text = ok(&refs(&crab("fit", "hurdle-negbin", CRAB_FULL, &[])));
    let header = text.lines().nth(2).unwrap();
    assert!(header.contains("count") && header.contains("zero"), "{header}");
    for label in ["Log(theta)", "logLik", "AIC", "BIC", "N "] {
        assert!(text.contains(label), "missing {label}");
    }
}

#[test]
fn bids_size_coefficient() {
    let r = json(&["fit", "--data", &data("takeover_bids.csv"), "--formula", BIDS, "--family", "poisson", "--format", "json"]);
    let c = estimate(&r["parts"][0], "size");
    assert!((f(&c["estimate"]) - 0.18).abs() < 0.005);
    assert!((f(&c["std_error"]) - 0.06).abs() < 0.005);
}

#[test]
fn empty_file_is_an_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    std::fs::write(&p, "").unwrap();
    let out = run(&["fit", "--data", p.to_str().unwrap(), "--formula", CRAB_FULL]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_DATA"));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = run(&["fit", "--data", "/nonexistent/x.csv", "--formula", CRAB_FULL]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_IO"));
}

#[test]
fn zero_part_needs_a_hurdle_family() {
    let out = run(&refs(&crab("fit", "negbin", CRAB_SIMPLE, &[])));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn poisson_rootogram_shows_the_wave() {
    let r = json(&refs(&crab("rootogram", "poisson", CRAB_FULL, &["--max-count", "15"])));
    let c = &r["coords"];
    let obs: Vec<f64> = c["observed"].as_array().unwrap().iter().map(f).collect();
    let exp: Vec<f64> = c["expected"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(obs.len(), 16);
    assert!(obs[0] > exp[0]);
    for j in 1..=4 {
        assert!(exp[j] > obs[j], "bin {j}");
    }
    assert_eq!(c["style"], "hanging");
    assert_eq!(c["scale"], "sqrt");
}

#[test]
fn hurdle_rootogram_hangs_bin_zero_on_the_axis() {
    let r = json(&refs(&crab("rootogram", "hurdle-negbin", CRAB_FULL, &[])));
    assert!(f(&r["coords"]["bar_bottom"][0]).abs() < 1e-6);
}

#[test]
fn standing_bars_start_at_zero() {
    let r = json(&refs(&crab("rootogram", "negbin", CRAB_FULL, &["--style", "standing"])));
    assert!(r["coords"]["bar_bottom"].as_array().unwrap().iter().all(|b| f(b) == 0.0));
}

#[test]
fn rootogram_svg_structure() {
    let svg = ok(&refs(&crab("rootogram", "poisson", CRAB_FULL, &["--max-count", "15", "--format", "svg"])));
    assert_eq!(svg.matches("<rect").count(), 16);
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("class=\"reference\""));
    // √ axis labels are squares of integers
    assert!(svg.contains(">16</text>") && svg.contains(">25</text>"));
    let again = ok(&refs(&crab("rootogram", "poisson", CRAB_FULL, &["--max-count", "15", "--format", "svg"])));
    assert_eq!(svg, again);
}

#[test]
fn posterior_weights_give_component_rootograms() {
    let args = crab(
        "rootogram",
        "mixture-negbin",
        CRAB_FULL,
        &["--weights", "posterior:1", "--restarts", "2"],
    );
    let r = json(&refs(&args));
    let fit = json(&refs(&crab("fit", "mixture-negbin", CRAB_FULL, &["--restarts", "2", "--format", "json"])));
    let sum = f(&fit["parts"][0]["posterior_sum"]);
    assert!((f(&r["total_weight"]) - sum).abs() < 1e-6);

    let out = run(&refs(&crab("rootogram", "negbin", CRAB_FULL, &["--weights", "posterior:1"])));
    assert_eq!(out.status.code(), Some(2));
}

fn qq_json(family: &str) -> Value {
    json(&refs(&crab("qq", family, CRAB_FULL, &[])))
}

#[test]
fn qq_envelope_separates_good_and_poor_fits() {
    let good = qq_json("hurdle-negbin");
    let inside = |q: &Value, i: usize| f(&q["lower"][i]) <= f(&q["sample"][i]) && f(&q["sample"][i]) <= f(&q["upper"][i]);
    let n = good["sample"].as_array().unwrap().len();
    let covered = (0..n).filter(|&i| inside(&good, i)).count();
    assert!(covered as f64 >= 0.95 * n as f64, "{covered}/{n}");

    let poor = qq_json("poisson");
    let above = (n - 10..n).filter(|&i| f(&poor["sample"][i]) > f(&poor["upper"][i])).count();
    assert_eq!(above, 10);
}

#[test]
fn qq_needs_two_observations() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.csv");
    std::fs::write(&p, "y,x\n3,1.0\n").unwrap();
    let out = run(&["qq", "--data", p.to_str().unwrap(), "--formula", "y ~ 1", "--family", "poisson"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient observations"));
}

#[test]
fn qq_and_pearson_svgs() {
    let svg = ok(&refs(&crab("qq", "poisson", CRAB_FULL, &["--format", "svg"])));
    assert_eq!(svg.matches("<polygon class=\"envelope\"").count(), 1);
    assert_eq!(svg.matches("<circle").count(), 173);
    let svg = ok(&refs(&crab("pearson", "poisson", CRAB_FULL, &["--format", "svg"])));
    assert_eq!(svg.matches("<circle").count(), 173);
}

#[test]
fn bootstrap_is_deterministic_and_draws_both_overlays() {
    let args = crab("bootstrap", "hurdle-negbin", CRAB_SIMPLE, &["--B", "10000", "--max-count", "15"]);
    let a = ok(&refs(&args));
    let b = ok(&refs(&args));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["band"]["replications"], 10000);
    assert_eq!(v["band"]["failures"], 0);
    assert_eq!(v["band"]["lower"].as_array().unwrap().len(), 16);

    let svg = ok(&refs(&crab("bootstrap", "hurdle-negbin", CRAB_SIMPLE, &["--B", "200", "--format", "svg"])));
    assert_eq!(svg.matches("stroke-dasharray").count(), 2);
    assert!(svg.contains("class=\"band-lower\"") && svg.contains("class=\"band-upper\""));
}

#[test]
fn bootstrap_needs_replications() {
    let out = run(&refs(&crab("bootstrap", "negbin", CRAB_FULL, &["--B", "0"])));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_CONFIG"));
}

#[test]
fn compare_orders_by_bic() {
    let v = json(&refs(&crab(
        "compare",
        "poisson,negbin,hurdle-poisson,hurdle-negbin",
        CRAB_FULL,
        &["--format", "json"],
    )));
    let rows = v["models"].as_array().unwrap();
    let expected = [("hurdle-negbin", 736.8), ("hurdle-poisson", 755.1), ("negbin", 769.5), ("poisson", 931.0)];
    for (row, (name, bic)) in rows.iter().zip(expected) {
        assert_eq!(row["model"], name);
        assert!((f(&row["bic"]) - bic).abs() < 0.15, "{name}: {}", row["bic"]);
    }
}

#[test]
fn compare_needs_two_specs_and_keeps_ties_stable() {
    let out = run(&refs(&crab("compare", "negbin", CRAB_FULL, &[])));
    assert_eq!(out.status.code(), Some(2));
    let v = json(&refs(&crab("compare", "negbin,negbin", CRAB_FULL, &["--format", "json"])));
    let rows = v["models"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

fn simulate(family: &str, n: usize, seed: u64) -> Vec<f64> {
    let (n, seed) = (n.to_string(), seed.to_string());
    let mut args = vec!["simulate", "--family", family, "--n", &n, "--mu", "3", "--seed", &seed];
    if family == "negbin" {
        args.extend(["--theta", "2"]);
    }
    let text = ok(&args);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y"));
    lines.map(|l| l.parse().unwrap()).collect()
}

fn mean_var(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    (m, y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn simulated_poisson_mean() {
    let y = simulate("poisson", 100, 20160906);
    assert_eq!(y.len(), 100);
    let (m, _) = mean_var(&y);
    assert!((m - 3.0).abs() < 0.6, "{m}");
    assert_eq!(y, simulate("poisson", 100, 20160906));
}

#[test]
fn simulated_negbin_is_overdispersed() {
    let over = (0..200u64)
        .filter(|&s| {
            let (m, v) = mean_var(&simulate("negbin", 100, s));
            v > m
        })
        .count();
    assert!(over >= 190, "{over}/200");
}

#[test]
fn simulate_preconditions() {
    let out = run(&["simulate", "--family", "poisson", "--n", "0", "--mu", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--family", "negbin", "--n", "10", "--mu", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fit.json");
    ok(&refs(&crab("fit", "poisson", CRAB_FULL, &["--format", "json", "--out", p.to_str().unwrap()])));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["df"], 3);
}
