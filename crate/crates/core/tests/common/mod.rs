#![allow(dead_code)]

use std::path::PathBuf;

use countdiag::formula::{build_design, parse_formula, read_table, ModelData, Schema};
use statrs::function::gamma::ln_gamma;

pub const CRAB_FULL: &str = "satellites ~ width + color";
pub const CRAB_SIMPLE: &str = "satellites ~ 1 | width + color";
pub const BIDS: &str =
    "bids ~ legalrest + realrest + finrest + whiteknight + bidpremium + insthold + regulation + size + size^2";
pub const NMES: &str = "visits ~ health + chronic + gender + school + insurance + medicaid";

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn load(file: &str, formula: &str) -> ModelData {
    let path = data_path(file);
    let schema = Schema::sidecar_for(&path).unwrap();
    let table = read_table(&path, schema.as_ref()).unwrap();
    build_design(&parse_formula(formula).unwrap(), &table).unwrap()
}

pub fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

// Reference log-likelihoods written directly from the textbook densities.

pub fn poisson_ll(y: f64, mu: f64) -> f64 {
    y * mu.ln() - mu - ln_gamma(y + 1.0)
}

pub fn negbin_ll(y: f64, mu: f64, theta: f64) -> f64 {
    ln_gamma(y + theta) - ln_gamma(theta) - ln_gamma(y + 1.0)
        + theta * (theta / (theta + mu)).ln()
        + y * (mu / (theta + mu)).ln()
}

pub fn zt_poisson_ll(y: f64, mu: f64) -> f64 {
    poisson_ll(y, mu) - (1.0 - (-mu).exp()).ln()
}

pub fn zt_negbin_ll(y: f64, mu: f64, theta: f64) -> f64 {
    negbin_ll(y, mu, theta) - (1.0 - (theta / (theta + mu)).powf(theta)).ln()
}

pub fn logit_ll(y: f64, eta: f64) -> f64 {
    let p = 1.0 / (1.0 + (-eta).exp());
    if y > 0.5 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Coordinate-free grid search: evaluate a 21^d grid around the incumbent,
/// move to the best point, shrink the span by 4, stop below `step`.
pub fn grid_maximize(f: &dyn Fn(&[f64]) -> f64, start: &[f64], span: f64, step: f64) -> Vec<f64> {
    let d = start.len();
    let mut best = start.to_vec();
    let mut best_f = f(&best);
    let mut h = span / 10.0;
    while h > step {
        let center = best.clone();
        let total = 21usize.pow(d as u32);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for (k, xv) in x.iter_mut().enumerate() {
                *xv = center[k] + h * ((r % 21) as f64 - 10.0);
                r /= 21;
            }
            let v = f(&x);
            if v > best_f {
                best_f = v;
                best.copy_from_slice(&x);
            }
        }
        h /= 4.0;
    }
    best
}

/// Root of a decreasing function on `[lo, hi]` by bisection.
pub fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Small regression problems for brute-force likelihood checks.
pub struct Toy {
    pub x: [f64; 10],
    pub y: [f64; 10],
}

pub const TOY_POISSON: Toy = Toy {
    x: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    y: [1.0, 0.0, 2.0, 1.0, 3.0, 2.0, 4.0, 3.0, 6.0, 5.0],
};

pub const TOY_NEGBIN: Toy = Toy {
    x: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    y: [0.0, 3.0, 1.0, 0.0, 7.0, 2.0, 0.0, 11.0, 4.0, 9.0],
};

pub const TOY_LOGIT: Toy = Toy {
    x: [-1.2, -0.8, -0.5, -0.3, 0.0, 0.2, 0.4, 0.7, 1.1, 1.5],
    y: [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0],
};

pub const TOY_ZT: Toy = Toy {
    x: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    y: [1.0, 1.0, 2.0, 1.0, 1.0, 3.0, 2.0, 1.0, 4.0, 6.0],
};

pub const TOY_ZT_NEGBIN: Toy = Toy {
    x: [0.0; 10],
    y: [1.0, 3.0, 2.0, 6.0, 1.0, 4.0, 2.0, 8.0, 1.0, 11.0],
};

impl Toy {
    pub fn design(&self, slope: bool) -> countdiag::fit::DesignMatrix {
        let rows: Vec<Vec<f64>> = self
            .x
            .iter()
            .map(|&x| if slope { vec![1.0, x] } else { vec![1.0] })
            .collect();
        let names = if slope { vec!["(Intercept)".into(), "x".into()] } else { vec!["(Intercept)".into()] };
        countdiag::fit::DesignMatrix::from_rows(names, &rows).unwrap()
    }
}
