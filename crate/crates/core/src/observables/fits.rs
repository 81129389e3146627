use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::optim::{self, levenberg_marquardt};

/// Values of `|C_zz|` at or below this are treated as noise.
pub const CZZ_NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub xi: f64,
    /// 95% confidence interval of `xi` from the slope's standard error.
    pub ci95: (f64, f64),
    /// Amplitude `C0` in `|C_zz| ~ C0 exp(-l / xi)`.
    pub c0: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub points: usize,
}

fn t_quantile(dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
}

/// Fit `ln|C_zz|` linearly in `l` over `l <= l_fit_max`.
pub fn fit_correlation_length(profile: &[(usize, f64)], l_fit_max: usize) -> Result<CorrelationFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|(l, c)| *l <= l_fit_max && c.abs() > CZZ_NOISE_FLOOR)
        .map(|(l, c)| (*l as f64, c.abs().ln()))
        .collect();
    let m = pts.len();
    if m < 3 {
        return Err(Error::Fit(format!("{m} usable points for the correlation length, need 3")));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("profile does not decay (slope {slope:.3e})")));
    }
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = (rss / (m - 2) as f64 / sxx).sqrt();
    let tq = t_quantile(m - 2);
    let xi = -1.0 / slope;
    // Steeper slope gives the lower end; a CI crossing zero is unbounded above.
    let lo = -1.0 / (slope - tq * slope_se);
    let hi_slope = slope + tq * slope_se;
    let hi = if hi_slope < 0.0 { -1.0 / hi_slope } else { f64::INFINITY };
    Ok(CorrelationFit { xi, ci95: (lo, hi), c0: intercept.exp(), slope, slope_se, points: m })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParabolaVertex {
    pub x: f64,
    pub se: f64,
    pub y: f64,
    /// `y = c0 + c1 x + c2 x^2`
    pub coeffs: [f64; 3],
    pub window: (f64, f64),
}

/// Points fitted around the raw minimum unless told otherwise.
pub const DEFAULT_PARABOLA_WINDOW: usize = 7;

/// Vertex of a least-squares parabola through the `window` points nearest
/// the raw minimum of `curve`.
pub fn locate_mzz_minimum(curve: &[(f64, f64)], window: usize) -> Result<ParabolaVertex> {
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = pts.len();
    if m < 5 {
        return Err(Error::Bracket(format!("{m} points, need at least 5")));
    }
    if window < 3 {
        return Err(Error::InvalidArgument(format!("window of {window} points")));
    }
    let imin = (0..m).min_by(|&i, &j| pts[i].1.total_cmp(&pts[j].1)).unwrap();
    if imin == 0 || imin == m - 1 {
        return Err(Error::Bracket(format!("raw minimum at the edge of the grid (B = {})", pts[imin].0)));
    }
    let w = window.min(m);
    let start = imin.saturating_sub(w / 2).min(m - w);
    let sel = &pts[start..start + w];
    // centred abscissa for conditioning
    let x0 = pts[imin].0;
    let a = Array2::from_shape_fn((w, 3), |(i, k)| (sel[i].0 - x0).powi(k as i32));
    let y = Array1::from_iter(sel.iter().map(|p| p.1));
    let c = optim::lstsq(&a, &y)?;
    if !(c[2] > 0.0) {
        return Err(Error::Bracket("fitted parabola opens downward".into()));
    }
    let dx = -c[1] / (2.0 * c[2]);
    let (lo, hi) = (sel[0].0, sel[w - 1].0);
    let xv = x0 + dx;
    if !(xv > lo && xv < hi) {
        return Err(Error::Bracket(format!("vertex {xv} outside the window [{lo}, {hi}]")));
    }
    let rss: f64 = (&a.dot(&c) - &y).mapv(|r| r * r).sum();
    let se = if w > 3 {
        let cov = optim::pinv_symmetric(&a.t().dot(&a))? * (rss / (w - 3) as f64);
        // gradient of -c1 / (2 c2) in (c0, c1, c2)
        let g = [0.0, -1.0 / (2.0 * c[2]), c[1] / (2.0 * c[2] * c[2])];
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += g[i] * cov[[i, j]] * g[j];
            }
        }
        v.max(0.0).sqrt()
    } else {
        f64::NAN
    };
    let coeffs = [c[0] - c[1] * x0 + c[2] * x0 * x0, c[1] - 2.0 * c[2] * x0, c[2]];
    let yv = c[0] + c[1] * dx + c[2] * dx * dx;
    Ok(ParabolaVertex { x: xv, se, y: yv, coeffs, window: (lo, hi) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermoFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Standard errors of `(a, b, c)`.
    pub sigma: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    pub residuals: Vec<f64>,
}

impl ThermoFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.a + self.b * n.powf(-self.c) * n.ln()
    }
}

/// Nonlinear least squares for `a + b n^{-c} ln n`. Weights are taken from
/// `sigma` when given.
pub fn extrapolate_thermodynamic(minima: &[(f64, f64)], sigma: Option<&[f64]>) -> Result<ThermoFit> {
    let m = minima.len();
    let mut ns: Vec<f64> = minima.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 4 || ns.len() != m {
        return Err(Error::Fit(format!("need at least 4 distinct sizes, got {} of {m}", ns.len())));
    }
    if minima.iter().any(|p| p.0 <= 1.0) {
        return Err(Error::Fit("sizes must exceed 1".into()));
    }
    let w: Vec<f64> = match sigma {
        Some(s) if s.len() == m && s.iter().all(|x| *x > 0.0) => s.iter().map(|x| 1.0 / x).collect(),
        Some(_) => return Err(Error::InvalidArgument("sigma must be positive, one per point".into())),
        None => vec![1.0; m],
    };
    // Linear solve for (a, b) at fixed c; scan c for a start.
    let linear = |c: f64| -> Result<(f64, f64, f64)> {
        let a = Array2::from_shape_fn((m, 2), |(i, k)| {
            let (n, _) = minima[i];
            w[i] * if k == 0 { 1.0 } else { n.powf(-c) * n.ln() }
        });
        let y = Array1::from_iter((0..m).map(|i| w[i] * minima[i].1));
        let p = optim::lstsq(&a, &y)?;
        let cost = (&a.dot(&p) - &y).mapv(|r| r * r).sum();
        Ok((p[0], p[1], cost))
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for k in 0..=60 {
        let c = 0.05 * k as f64;
        let (a, b, cost) = linear(c)?;
        if cost < best.0 {
            best = (cost, a, b, c);
        }
    }
    let p0 = Array1::from(vec![best.1, best.2, best.3]);
    let lm = levenberg_marquardt(
        |p| {
            let r = Array1::from_iter((0..m).map(|i| {
                let (n, y) = minima[i];
                w[i] * (p[0] + p[1] * n.powf(-p[2]) * n.ln() - y)
            }));
            let j = Array2::from_shape_fn((m, 3), |(i, k)| {
                let n = minima[i].0;
                let g = n.powf(-p[2]) * n.ln();
                w[i] * match k {
                    0 => 1.0,
                    1 => g,
                    _ => -p[1] * g * n.ln(),
                }
            });
            (r, j)
        },
        p0,
        500,
        1e-14,
    )?;
    if !lm.params.iter().all(|x| x.is_finite()) {
        return Err(Error::Fit(format!("extrapolation diverged; residuals {:?}", lm.residuals.to_vec())));
    }
    let cov = if sigma.is_some() {
        // absolute weights: (J^T J)^+
        optim::pinv_symmetric(&lm.jacobian.t().dot(&lm.jacobian))?
    } else {
        lm.covariance()?
    };
    let p = &lm.params;
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = cov[[i, j]];
        }
    }
    let residuals = (0..m).map(|i| minima[i].1 - (p[0] + p[1] * minima[i].0.powf(-p[2]) * minima[i].0.ln())).collect();
    Ok(ThermoFit {
        a: p[0],
        b: p[1],
        c: p[2],
        sigma: [cov[[0, 0]].max(0.0).sqrt(), cov[[1, 1]].max(0.0).sqrt(), cov[[2, 2]].max(0.0).sqrt()],
        covariance,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn noiseless_exponential() {
        let prof: Vec<(usize, f64)> = (1..=10).map(|l| (l, 0.8 * (-(l as f64) / 2.0).exp())).collect();
        let f = fit_correlation_length(&prof, 6).unwrap();
        assert!((f.xi - 2.0).abs() < 1e-12);
        assert!((f.c0 - 0.8).abs() < 1e-12);
        assert_eq!(f.points, 6);
    }

    #[test]
    fn two_slope_profile_selects_short_range_decay() {
        let xi1: f64 = 1.4;
        let xi2 = 4.0;
        let at6 = (-6.0 / xi1).exp();
        let prof: Vec<(usize, f64)> = (1..=20)
            .map(|l| {
                let l = l as f64;
                let c = if l <= 6.0 { (-l / xi1).exp() } else { at6 * (-(l - 6.0) / xi2).exp() };
                (l as usize, c)
            })
            .collect();
        let f = fit_correlation_length(&prof, 6).unwrap();
        assert!((f.xi - xi1).abs() < 1e-10);
        let all = fit_correlation_length(&prof, 20).unwrap();
        assert!(all.xi > xi1 + 0.3);
    }

    #[test]
    fn sign_oscillation_and_failures() {
        let prof: Vec<(usize, f64)> = (1..=6).map(|l| (l, (-1f64).powi(l as i32) * (-(l as f64) / 3.0).exp())).collect();
        assert!((fit_correlation_length(&prof, 6).unwrap().xi - 3.0).abs() < 1e-12);
        assert!(fit_correlation_length(&[(1, 0.5), (2, 0.2)], 6).is_err());
        let growing: Vec<(usize, f64)> = (1..=5).map(|l| (l, l as f64)).collect();
        assert!(fit_correlation_length(&growing, 6).is_err());
        let zeros: Vec<(usize, f64)> = (1..=5).map(|l| (l, 0.0)).collect();
        assert!(fit_correlation_length(&zeros, 6).is_err());
    }

    #[test]
    fn parabola_vertex_exact() {
        let curve: Vec<(f64, f64)> = (0..15).map(|k| 0.5 + 0.1 * k as f64).map(|x| (x, 0.3 + 2.0 * (x - 1.07).powi(2))).collect();
        let v = locate_mzz_minimum(&curve, DEFAULT_PARABOLA_WINDOW).unwrap();
        assert!((v.x - 1.07).abs() < 1e-12);
        assert!((v.y - 0.3).abs() < 1e-12);
        assert!(v.se < 1e-10);
        assert!((v.coeffs[2] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn parabola_bracket_errors() {
        let rising: Vec<(f64, f64)> = (0..8).map(|k| (k as f64, k as f64)).collect();
        assert!(matches!(locate_mzz_minimum(&rising, 7), Err(Error::Bracket(_))));
        let short: Vec<(f64, f64)> = (0..4).map(|k| (k as f64, (k as f64 - 1.5).powi(2))).collect();
        assert!(locate_mzz_minimum(&short, 7).is_err());
    }

    #[test]
    fn extrapolation_recovers_parameters() {
        let (a, b, c) = (1.04, 0.5, 0.7);
        let sizes = [10.0, 20.0, 30.0, 50.0, 70.0, 100.0, 150.0, 200.0];
        let noise = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nd = Normal::new(0.0, noise).unwrap();
        let pts: Vec<(f64, f64)> = sizes.iter().map(|&n: &f64| (n, a + b * n.powf(-c) * n.ln() + nd.sample(&mut rng))).collect();
        let sig = vec![noise; pts.len()];
        let f = extrapolate_thermodynamic(&pts, Some(&sig)).unwrap();
        assert!((f.a - a).abs() < 2.0 * f.sigma[0], "a = {} +- {}", f.a, f.sigma[0]);
        assert!((f.b - b).abs() < 2.0 * f.sigma[1], "b = {} +- {}", f.b, f.sigma[1]);
        assert!((f.c - c).abs() < 2.0 * f.sigma[2], "c = {} +- {}", f.c, f.sigma[2]);
    }

    #[test]
    fn extrapolation_of_constant() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0].iter().map(|&n| (n, 1.1)).collect();
        let f = extrapolate_thermodynamic(&pts, None).unwrap();
        assert!((f.a - 1.1).abs() < 1e-10);
        assert!(f.b.abs() < 1e-10);
        assert!(extrapolate_thermodynamic(&pts[..3], None).is_err());
    }

    proptest! {
        #[test]
        fn correlation_length_is_scale_equivariant(xi in 0.5f64..6.0, amp in 0.01f64..2.0, k in 0.001f64..100.0) {
            let prof: Vec<(usize, f64)> = (1..=6).map(|l| (l, amp * (-(l as f64) / xi).exp() * (1.0 + 0.05 * (l as f64).sin()))).collect();
            let scaled: Vec<(usize, f64)> = prof.iter().map(|(l, c)| (*l, k * c)).collect();
            let a = fit_correlation_length(&prof, 6).unwrap();
            let b = fit_correlation_length(&scaled, 6).unwrap();
            prop_assert!((a.xi - b.xi).abs() < 1e-9 * a.xi.max(1.0));
            prop_assert!((b.c0 / a.c0 - k).abs() < 1e-8 * k);
        }
    }
}
