//! Small derivative-based and derivative-free optimizers used by the fits.

use ndarray::{Array1, Array2};
use ndarray_linalg::LeastSquaresSvd;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Array1<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub residuals: Array1<f64>,
    pub jacobian: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// Parameter covariance `s^2 (J^T J)^+` with `s^2 = cost / (m - p)`.
    pub fn covariance(&self) -> Result<Array2<f64>> {
        let (m, p) = self.jacobian.dim();
        let dof = m.saturating_sub(p).max(1) as f64;
        let s2 = self.cost / dof;
        let jtj = self.jacobian.t().dot(&self.jacobian);
        Ok(pinv_symmetric(&jtj)? * s2)
    }
}

/// Moore-Penrose inverse of a symmetric positive semi-definite matrix.
pub fn pinv_symmetric(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (w, v) = linalg::eigh_real(a)?;
    let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = wmax * 1e-13 * w.len() as f64;
    let n = w.len();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        if w[k].abs() <= floor {
            continue;
        }
        let inv = 1.0 / w[k];
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += v[[i, k]] * inv * v[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Solve the symmetric system `a x = b` through its eigendecomposition,
/// discarding directions with negligible eigenvalues.
pub fn solve_symmetric(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(pinv_symmetric(a)?.dot(b))
}

/// Linear least squares `min |a x - b|` through an SVD.
pub fn lstsq(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(a.least_squares(b)?.solution)
}

/// Least squares with several right-hand sides.
pub fn lstsq_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(a.least_squares(b)?.solution)
}

/// Levenberg-Marquardt on `f(p) -> (residuals, jacobian)`.
pub fn levenberg_marquardt<F>(mut f: F, p0: Array1<f64>, max_iter: usize, tol: f64) -> Result<LmOutcome>
where
    F: FnMut(&Array1<f64>) -> (Array1<f64>, Array2<f64>),
{
    let mut p = p0;
    let (mut r, mut jac) = f(&p);
    let mut cost = r.dot(&r);
    if !cost.is_finite() {
        return Err(Error::Fit("non-finite residuals at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let jtj = jac.t().dot(&jac);
        let g = jac.t().dot(&r);
        if g.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= tol * tol.max(cost) {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[[i, i]] += lambda * jtj[[i, i]].max(1e-300);
            }
            let step = solve_symmetric(&a, &g)?;
            let trial = &p - &step;
            let (rt, jt) = f(&trial);
            let ct = rt.dot(&rt);
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                let step_small = step.iter().zip(p.iter()).all(|(s, x)| s.abs() <= tol * (x.abs() + tol));
                p = trial;
                r = rt;
                jac = jt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < tol * tol || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            // No downhill step at any damping: a (local) minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LmOutcome { params: p, cost, residuals: r, jacobian: jac, iterations, converged })
}

#[derive(Clone, Debug)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder-Mead simplex minimization inside a box. Points are clamped to the
/// bounds, so the objective is never evaluated outside them.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    bounds: &[(f64, f64)],
    max_eval: usize,
    ftol: f64,
) -> NelderMeadOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(*lo, *hi);
        }
    };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    clamp(&mut start);
    let v0 = eval(&start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..d {
        let mut x = start.clone();
        x[i] += step[i];
        if x[i] > bounds[i].1 {
            x[i] = start[i] - step[i];
        }
        clamp(&mut x);
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    while evals < max_eval {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        if (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in simplex.iter().take(d) {
            for i in 0..d {
                centroid[i] += x[i] / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut y: Vec<f64> = (0..d).map(|i| centroid[i] + t * (simplex[d].0[i] - centroid[i])).collect();
            clamp(&mut y);
            y
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = along(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for k in 1..=d {
                    let mut y: Vec<f64> = (0..d).map(|i| x0[i] + 0.5 * (simplex[k].0[i] - x0[i])).collect();
                    clamp(&mut y);
                    let v = eval(&y, &mut evals);
                    simplex[k] = (y, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadOutcome { x, value, evaluations: evals }
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lm_fits_exponential_decay() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-0.7 * x).exp() + 0.1).collect();
        let out = levenberg_marquardt(
            |p| {
                let r = Array1::from_iter(xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() + p[2] - y));
                let j = Array2::from_shape_fn((xs.len(), 3), |(i, k)| {
                    let e = (-p[1] * xs[i]).exp();
                    match k {
                        0 => e,
                        1 => -p[0] * xs[i] * e,
                        _ => 1.0,
                    }
                });
                (r, j)
            },
            array![1.0, 0.3, 0.0],
            200,
            1e-12,
        )
        .unwrap();
        assert!((out.params[0] - 2.5).abs() < 1e-8);
        assert!((out.params[1] - 0.7).abs() < 1e-8);
        assert!((out.params[2] - 0.1).abs() < 1e-8);
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let out = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            &[(-5.0, 5.0), (-5.0, 5.0)],
            5000,
            1e-14,
        );
        assert!((out.x[0] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!((out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn golden_section_on_parabola() {
        let x = golden_section(|x| (x - 1.3).powi(2), 0.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
    }

    #[test]
    fn lstsq_recovers_line() {
        let a = Array2::from_shape_fn((5, 2), |(i, j)| if j == 0 { 1.0 } else { i as f64 });
        let b = Array1::from_iter((0..5).map(|i| 3.0 - 2.0 * i as f64));
        let x = lstsq(&a, &b).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 2.0).abs() < 1e-12);
    }
}
