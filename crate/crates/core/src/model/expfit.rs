//! Sum-of-exponentials approximation of a power-law kernel,
//! `l^-alpha ~ sum_k w_k lambda_k^(l-1)` for `l = 1..n-1`.
//!
//! Rates come from a matrix-pencil estimate on the sampled kernel, weights
//! from linear least squares, and both are then polished with
//! Levenberg-Marquardt. The number of terms grows until the pointwise error
//! meets the tolerance.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, SVD};
use serde::{Deserialize, Serialize};

use super::spec::Alpha;
use crate::error::{Error, Result};
use crate::optim;

pub const MAX_TERMS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub weight: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpFit {
    pub terms: Vec<ExpTerm>,
    /// Largest absolute deviation over all fitted distances.
    pub max_error: f64,
}

impl ExpFit {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Fitted kernel at distance `l >= 1`.
    pub fn eval(&self, l: usize) -> f64 {
        self.terms.iter().map(|t| t.weight * t.rate.powi(l as i32 - 1)).sum()
    }
}

fn kernel(alpha: f64, lmax: usize) -> Array1<f64> {
    Array1::from_iter((1..=lmax).map(|l| (l as f64).powf(-alpha)))
}

fn max_error(terms: &[ExpTerm], target: &Array1<f64>) -> f64 {
    let fit = ExpFit { terms: terms.to_vec(), max_error: 0.0 };
    target.iter().enumerate().map(|(i, y)| (fit.eval(i + 1) - y).abs()).fold(0.0, f64::max)
}

/// Fit `l^-alpha` on `l in [1, n-1]` to absolute accuracy `tol`.
pub fn fit_exponentials(alpha: Alpha, n: usize, tol: f64) -> Result<ExpFit> {
    let alpha = match alpha {
        Alpha::NearestNeighbor => {
            return Err(Error::InvalidArgument("nearest-neighbor couplings have no power law to fit".into()))
        }
        Alpha::PowerLaw(a) => a,
    };
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("fit tolerance must be positive, got {tol}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    let lmax = n - 1;
    if alpha == 0.0 {
        let terms = vec![ExpTerm { weight: 1.0, rate: 1.0 - f64::EPSILON }];
        let err = max_error(&terms, &kernel(0.0, lmax));
        return Ok(ExpFit { terms, max_error: err });
    }
    if lmax == 1 {
        return Ok(ExpFit { terms: vec![ExpTerm { weight: 1.0, rate: 0.5 }], max_error: 0.0 });
    }
    let target = kernel(alpha, lmax);
    let mut best: Option<(Vec<ExpTerm>, f64)> = None;
    // Past lmax / 2 terms the fit interpolates; short chains may need that.
    let kmax = MAX_TERMS.min(lmax).max(1);
    for k in 1..=kmax {
        let mut candidates = Vec::new();
        if let Some(r) = pencil_rates(&target, k) {
            candidates.push(r);
        }
        candidates.push(log_spaced_rates(k, lmax));
        for rates in candidates {
            let Some(terms) = refine(&target, &rates) else { continue };
            let err = max_error(&terms, &target);
            if best.as_ref().is_none_or(|(_, e)| err < *e) {
                best = Some((terms, err));
            }
        }
        if let Some((terms, err)) = &best {
            if *err <= tol {
                let mut terms = terms.clone();
                terms.sort_by(|a, b| b.rate.total_cmp(&a.rate));
                return Ok(ExpFit { terms, max_error: *err });
            }
        }
    }
    let (terms, achieved) = best.unwrap_or((Vec::new(), f64::INFINITY));
    Err(Error::FitNotConverged { tol, achieved, terms: terms.len() })
}

/// Matrix-pencil estimate of `k` decay rates from uniformly sampled data.
fn pencil_rates(y: &Array1<f64>, k: usize) -> Option<Vec<f64>> {
    let m = y.len();
    let l = m / 2;
    if l < k || m - l < k {
        return None;
    }
    let hankel = Array2::from_shape_fn((m - l, l + 1), |(i, j)| y[i + j]);
    let (_, _, vt) = hankel.svd(false, true).ok()?;
    let vt = vt?;
    // Rows of vt are right singular vectors; keep the dominant k.
    let v = vt.slice(s![..k, ..]).t().to_owned();
    let v1 = v.slice(s![..l, ..]).to_owned();
    let v2 = v.slice(s![1.., ..]).to_owned();
    let a = optim::lstsq_matrix(&v1, &v2).ok()?;
    let (eigs, _) = a.eig().ok()?;
    let mut rates: Vec<f64> = eigs.iter().map(|z| z.re.clamp(1e-4, 1.0 - 1e-9)).collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    rates.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    (rates.len() == k).then_some(rates)
}

fn log_spaced_rates(k: usize, lmax: usize) -> Vec<f64> {
    // Decay lengths spread geometrically between 0.3 and the system size.
    let lo = 0.3f64.ln();
    let hi = (lmax as f64).max(1.0).ln();
    (0..k)
        .map(|i| {
            let t = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
            (-1.0 / (lo + t * (hi - lo)).exp()).exp()
        })
        .collect()
}

/// Linear weights for fixed rates, then joint nonlinear refinement with
/// rates parameterized as `exp(-exp(s))` so they stay inside (0, 1).
fn refine(target: &Array1<f64>, rates: &[f64]) -> Option<Vec<ExpTerm>> {
    let m = target.len();
    let k = rates.len();
    let design = Array2::from_shape_fn((m, k), |(l, j)| rates[j].powi(l as i32));
    let weights = optim::lstsq(&design, target).ok()?;
    let mut p0 = Array1::zeros(2 * k);
    for j in 0..k {
        p0[j] = weights[j];
        p0[k + j] = (-rates[j].ln()).ln();
    }
    let out = optim::levenberg_marquardt(
        |p| {
            let mut r = Array1::zeros(m);
            let mut jac = Array2::zeros((m, 2 * k));
            for j in 0..k {
                let es = p[k + j].exp();
                let lam = (-es).exp();
                let mut pow = 1.0;
                for l in 0..m {
                    r[l] += p[j] * pow;
                    jac[[l, j]] = pow;
                    // d/ds of lam^l = l lam^l (-e^s)
                    jac[[l, k + j]] = -p[j] * l as f64 * pow * es;
                    pow *= lam;
                }
            }
            (r - target, jac)
        },
        p0,
        500,
        1e-14,
    )
    .ok()?;
    let terms: Vec<ExpTerm> = (0..k)
        .map(|j| ExpTerm { weight: out.params[j], rate: (-out.params[k + j].exp()).exp() })
        .collect();
    let ok = terms.iter().all(|t| t.weight.is_finite() && t.rate > 0.0 && t.rate < 1.0);
    ok.then_some(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_is_one_term() {
        let fit = fit_exponentials(Alpha::PowerLaw(0.0), 30, 1e-10).unwrap();
        assert_eq!(fit.len(), 1);
        assert_eq!(fit.terms[0].weight, 1.0);
        assert!(fit.terms[0].rate < 1.0);
        assert!(fit.max_error <= 1e-12);
    }

    #[test]
    fn nearest_neighbor_is_rejected() {
        assert!(fit_exponentials(Alpha::NearestNeighbor, 10, 1e-6).is_err());
    }

    #[test]
    fn power_law_residual_checked_pointwise() {
        let fit = fit_exponentials(Alpha::PowerLaw(1.5), 50, 1e-6).unwrap();
        for l in 1..50 {
            let exact = (l as f64).powf(-1.5);
            assert!((fit.eval(l) - exact).abs() <= 1e-6, "l = {l}");
        }
        assert!(fit.terms.iter().all(|t| t.rate > 0.0 && t.rate < 1.0));
    }

    #[test]
    fn several_exponents_converge() {
        for &(alpha, n, tol) in &[(0.5, 40, 1e-5), (1.0, 60, 1e-6), (2.5, 30, 1e-8), (3.0, 100, 1e-6)] {
            let fit = fit_exponentials(Alpha::PowerLaw(alpha), n, tol).unwrap();
            assert!(fit.max_error <= tol, "alpha = {alpha}: {} with {} terms", fit.max_error, fit.len());
        }
    }

    #[test]
    fn impossible_tolerance_reports_achieved_error() {
        match fit_exponentials(Alpha::PowerLaw(1.5), 8, 1e-300) {
            Err(Error::FitNotConverged { achieved, .. }) => assert!(achieved.is_finite()),
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }
}
