//! Quasi-Newton minimization (BFGS with a strong-Wolfe line search and simple
//! upper bounds) plus finite-difference Hessians built from analytic gradients.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A smooth objective: returns f(x) and writes ∇f(x) into `grad`.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence requires max |∇f| below this.
    pub grad_tol: f64,
    /// … and a relative change in f below this.
    pub rel_tol: f64,
    /// Per-coordinate upper bounds (`f64::INFINITY` when unbounded).
    pub upper: Option<Vec<f64>>,
    /// Seed the inverse-Hessian approximation with the inverse of the
    /// finite-difference Hessian at the start (when positive definite).
    pub init_hessian: bool,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            upper: None,
            init_hessian: false,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, g| m.max(g.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Bounds {
    upper: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, x: &mut [f64]) {
        for (xi, &u) in x.iter_mut().zip(&self.upper) {
            if *xi > u {
                *xi = u;
            }
        }
    }

    /// Coordinates pinned at their bound with the gradient pushing outward.
    fn active(&self, x: &[f64], grad: &[f64]) -> Vec<bool> {
        x.iter()
            .zip(&self.upper)
            .zip(grad)
            .map(|((&xi, &u), &g)| u.is_finite() && xi >= u - 1e-12 && g < 0.0)
            .collect()
    }
}

fn projected_grad(grad: &[f64], active: &[bool]) -> Vec<f64> {
    grad.iter().zip(active).map(|(&g, &a)| if a { 0.0 } else { g }).collect()
}

pub(crate) fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &BfgsOptions) -> Result<Minimum> {
    let n = obj.dim();
    assert_eq!(x0.len(), n);
    let bounds = Bounds {
        upper: opts.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n]),
    };
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut grad = vec![0.0; n];
    let mut f = obj.eval(&x, &mut grad);
    if !f.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            grad_norm: f64::NAN,
            last_iterate: x,
        });
    }
    let mut active = bounds.active(&x, &grad);
    let mut pg = projected_grad(&grad, &active);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    if opts.init_hessian && !active.iter().any(|&a| a) {
        if let Some(chol) = numeric_hessian(obj, &x).cholesky() {
            let inv = chol.inverse();
            if inv.iter().all(|v| v.is_finite()) {
                h = inv;
                fresh = false;
            }
        }
    }
    let mut last_rel = f64::INFINITY;

    for iter in 0..opts.max_iter {
        let gnorm = max_abs(&pg);
        if gnorm < opts.grad_tol && (last_rel < opts.rel_tol || iter == 0 || gnorm < opts.grad_tol * 1e-3) {
            return Ok(Minimum { x, value: f, iterations: iter });
        }

        // Search direction restricted to free coordinates.
        let g = DVector::from_column_slice(&pg);
        let mut p: Vec<f64> = (-(&h * g)).iter().copied().collect();
        for (pi, &a) in p.iter_mut().zip(&active) {
            if a {
                *pi = 0.0;
            }
        }
        let mut slope = dot(&p, &grad);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            p = pg.iter().map(|g| -g).collect();
            slope = dot(&p, &grad);
        }
        if fresh {
            // Keep the first step of a fresh approximation modest.
            let pn = max_abs(&p);
            if pn > 1.0 {
                p.iter_mut().for_each(|v| *v /= pn);
                slope /= pn;
            }
        }

        let step = match line_search(obj, &bounds, &x, f, &p, slope) {
            Some(s) => s,
            None => {
                if !fresh {
                    h = DMatrix::identity(n, n);
                    fresh = true;
                    continue;
                }
                if let Some(step) = newton_step(obj, &bounds, &x, f, &active, gnorm) {
                    last_rel = (f - step.f).abs() / step.f.abs().max(1e-300);
                    x = step.x;
                    f = step.f;
                    grad = step.grad;
                    active = bounds.active(&x, &grad);
                    pg = projected_grad(&grad, &active);
                    continue;
                }
                if gnorm < opts.grad_tol {
                    return Ok(Minimum { x, value: f, iterations: iter });
                }
                return Err(Error::NonConvergence {
                    iterations: iter,
                    grad_norm: gnorm,
                    last_iterate: x,
                });
            }
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        last_rel = (f - step.f).abs() / step.f.abs().max(1e-300);
        x = step.x;
        f = step.f;
        grad = step.grad;
        let new_active = bounds.active(&x, &grad);
        let changed = new_active != active;
        active = new_active;
        pg = projected_grad(&grad, &active);

        let sy = dot(&s, &yv);
        if changed {
            h = DMatrix::identity(n, n);
            fresh = true;
        } else if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            let sv = DVector::from_column_slice(&s);
            let yvv = DVector::from_column_slice(&yv);
            if fresh {
                h *= sy / dot(&yv, &yv);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yvv;
            let yhy = yvv.dot(&hy);
            // H+ = H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h -= (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }
    }

    let gnorm = max_abs(&pg);
    if gnorm < opts.grad_tol {
        return Ok(Minimum {
            x,
            value: f,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        grad_norm: gnorm,
        last_iterate: x,
    })
}

struct Step {
    x: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
}

/// Strong-Wolfe line search (bracketing + zoom with cubic interpolation).
fn line_search<O: Objective + ?Sized>(
    obj: &O,
    bounds: &Bounds,
    x: &[f64],
    f0: f64,
    p: &[f64],
    slope0: f64,
) -> Option<Step> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let n = x.len();
    let mut grad = vec![0.0; n];
    let eval = |alpha: f64, grad: &mut [f64]| -> (Vec<f64>, f64, f64) {
        let mut xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        bounds.clamp(&mut xt);
        let f = obj.eval(&xt, grad);
        let slope = dot(grad, p);
        (xt, f, slope)
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut s_prev = slope0;
    let mut alpha = 1.0;
    for i in 0..40 {
        let (xt, ft, st) = eval(alpha, &mut grad);
        if !ft.is_finite() {
            alpha = 0.5 * (a_prev + alpha);
            continue;
        }
        if ft > f0 + C1 * alpha * slope0 || (i > 0 && ft >= f_prev) {
            return zoom(obj, bounds, x, p, f0, slope0, (a_prev, f_prev, s_prev), (alpha, ft, st));
        }
        if st.abs() <= -C2 * slope0 {
            return Some(Step { x: xt, f: ft, grad });
        }
        if st >= 0.0 {
            return zoom(obj, bounds, x, p, f0, slope0, (alpha, ft, st), (a_prev, f_prev, s_prev));
        }
        a_prev = alpha;
        f_prev = ft;
        s_prev = st;
        alpha *= 2.0;
        if alpha > 1e10 {
            break;
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<O: Objective + ?Sized>(
    obj: &O,
    bounds: &Bounds,
    x: &[f64],
    p: &[f64],
    f0: f64,
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<Step> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut best: Option<Step> = None;
    for _ in 0..60 {
        let (a_lo, f_lo, s_lo) = lo;
        let (a_hi, f_hi, s_hi) = hi;
        // Cubic interpolation, safeguarded into the inner 80% of the bracket.
        let d1 = s_lo + s_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
        let disc = d1 * d1 - s_lo * s_hi;
        let mut a = if disc >= 0.0 && a_hi != a_lo {
            let d2 = (a_hi - a_lo).signum() * disc.sqrt();
            a_hi - (a_hi - a_lo) * (s_hi + d2 - d1) / (s_hi - s_lo + 2.0 * d2)
        } else {
            f64::NAN
        };
        let (left, right) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
        let width = right - left;
        if !a.is_finite() || a < left + 0.1 * width || a > right - 0.1 * width {
            a = 0.5 * (a_lo + a_hi);
        }
        if width < 1e-16 * a_lo.abs().max(1.0) {
            break;
        }
        let mut xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect();
        bounds.clamp(&mut xt);
        let ft = obj.eval(&xt, &mut grad);
        let st = dot(&grad, p);
        if !ft.is_finite() {
            hi = (a, f64::INFINITY, s_hi);
            continue;
        }
        if ft > f0 + C1 * a * slope0 || ft >= f_lo {
            hi = (a, ft, st);
        } else {
            if best.as_ref().map(|b| ft < b.f).unwrap_or(true) {
                best = Some(Step {
                    x: xt.clone(),
                    f: ft,
                    grad: grad.clone(),
                });
            }
            if st.abs() <= -C2 * slope0 {
                return Some(Step { x: xt, f: ft, grad });
            }
            if st * (a_hi - a_lo) >= 0.0 {
                hi = lo;
            }
            lo = (a, ft, st);
        }
    }
    // Accept a sufficient-decrease point even if curvature was not reached.
    best.filter(|b| b.f < f0)
}

/// Full Newton step on the free coordinates using the finite-difference
/// Hessian. Near an optimum f is flat to machine precision and the line
/// search cannot certify a decrease, so the step is accepted when it shrinks
/// the projected gradient without raising f beyond rounding.
fn newton_step<O: Objective + ?Sized>(
    obj: &O,
    bounds: &Bounds,
    x: &[f64],
    f: f64,
    active: &[bool],
    gnorm: f64,
) -> Option<Step> {
    let n = x.len();
    let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
    if free.is_empty() {
        return None;
    }
    let hess = numeric_hessian(obj, x);
    let mut grad = vec![0.0; n];
    obj.eval(x, &mut grad);
    let m = free.len();
    let sub = DMatrix::from_fn(m, m, |a, b| hess[(free[a], free[b])]);
    let rhs = DVector::from_iterator(m, free.iter().map(|&i| -grad[i]));
    let dir = sub.cholesky()?.solve(&rhs);
    let mut xt = x.to_vec();
    for (a, &i) in free.iter().enumerate() {
        xt[i] += dir[a];
    }
    bounds.clamp(&mut xt);
    let ft = obj.eval(&xt, &mut grad);
    let new_active = bounds.active(&xt, &grad);
    let gt = max_abs(&projected_grad(&grad, &new_active));
    if ft.is_finite() && ft <= f + 1e-12 * f.abs().max(1.0) && gt < 0.5 * gnorm {
        Some(Step { x: xt, f: ft, grad })
    } else {
        None
    }
}

/// Hessian of an objective by central differences of its analytic gradient,
/// step 1e-5·(1 + |x_j|) per coordinate, symmetrized.
pub(crate) fn numeric_hessian<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut xt = x.to_vec();
    for j in 0..n {
        let step = 1e-5 * (1.0 + x[j].abs());
        xt[j] = x[j] + step;
        obj.eval(&xt, &mut gp);
        xt[j] = x[j] - step;
        obj.eval(&xt, &mut gm);
        xt[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix (the observed information).
pub(crate) fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if info.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let chol = info.clone().cholesky().ok_or(Error::SingularHessian)?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    struct Quadratic;
    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 4.0 * (x[1] + 1.0);
            (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2)
        }
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let m = minimize(&Rosenbrock, &[-1.2, 1.0], &BfgsOptions::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
        let mut g = [0.0; 2];
        Rosenbrock.eval(&m.x, &mut g);
        assert!(max_abs(&g) < 1e-6);
    }

    #[test]
    fn upper_bound_is_respected() {
        let opts = BfgsOptions {
            upper: Some(vec![2.0, f64::INFINITY]),
            ..Default::default()
        };
        let m = minimize(&Quadratic, &[0.0, 0.0], &opts).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-12);
        assert!((m.x[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn numeric_hessian_of_quadratic() {
        let h = numeric_hessian(&Quadratic, &[0.3, 0.7]);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((h[(1, 1)] - 4.0).abs() < 1e-8);
        assert!(h[(0, 1)].abs() < 1e-8);
        let inv = invert_information(&h).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn singular_information_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(invert_information(&m), Err(Error::SingularHessian));
    }
}
