//! Semiclassical long-time averages for the fully connected chain quenched
//! from `|up_z>^n`, with `h = B/J0`.
//!
//! Below `h = 1` the motion stays in one well between `0` and
//! `asin(h)`; above it sweeps both wells. The half-period averages are
//! ratios of integrals with `1/sqrt(h^2 - sin^2 theta)` weights. Setting
//! `sin theta = h sin u` removes the endpoint singularity for `h < 1`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance handed to the quadrature.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Semiclassical {
    pub value: f64,
    /// Set at `h = 1`, where the period diverges and the limit is returned.
    pub singular: bool,
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, QUAD_TOL).integral
}

fn check(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("B/J0 must be positive and finite, got {h}")));
    }
    Ok(())
}

/// Time-averaged `cos theta`.
pub fn semiclassical_mz(h: f64) -> Result<Semiclassical> {
    check(h)?;
    if h == 1.0 {
        return Ok(Semiclassical { value: 0.0, singular: true });
    }
    if h > 1.0 {
        return Ok(Semiclassical { value: 0.0, singular: false });
    }
    // numerator is int_0^{pi/2} du
    let period = integrate(|u| 1.0 / (1.0 - (h * u.sin()).powi(2)).sqrt(), 0.0, FRAC_PI_2);
    Ok(Semiclassical { value: FRAC_PI_2 / period, singular: false })
}

/// Time-averaged `cos^2 theta`.
pub fn semiclassical_mzz(h: f64) -> Result<Semiclassical> {
    check(h)?;
    if h == 1.0 {
        return Ok(Semiclassical { value: 0.0, singular: true });
    }
    let value = if h < 1.0 {
        let num = integrate(|u| (1.0 - (h * u.sin()).powi(2)).sqrt(), 0.0, FRAC_PI_2);
        let den = integrate(|u| 1.0 / (1.0 - (h * u.sin()).powi(2)).sqrt(), 0.0, FRAC_PI_2);
        num / den
    } else {
        let w = |th: f64| 1.0 / (h * h - th.sin().powi(2)).sqrt();
        let num = integrate(|th| th.cos().powi(2) * w(th), 0.0, FRAC_PI_2);
        let den = integrate(w, 0.0, FRAC_PI_2);
        num / den
    };
    Ok(Semiclassical { value, singular: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::golden_section;

    /// Complete elliptic integrals `K(k)`, `E(k)` of modulus `k` by the
    /// arithmetic-geometric mean.
    fn elliptic_ke(k: f64) -> (f64, f64) {
        let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
        let mut c = k;
        let mut sum = 0.5 * c * c;
        let mut pow = 0.5;
        while c.abs() > 1e-16 {
            let an = 0.5 * (a + b);
            c = 0.5 * (a - b);
            b = (a * b).sqrt();
            a = an;
            pow *= 2.0;
            sum += pow * c * c;
        }
        let kk = FRAC_PI_2 / a;
        (kk, kk * (1.0 - sum))
    }

    #[test]
    fn matches_elliptic_closed_forms() {
        for h in [0.05, 0.3, 0.7, 0.95, 0.999] {
            let (k, e) = elliptic_ke(h);
            assert!((semiclassical_mz(h).unwrap().value - FRAC_PI_2 / k).abs() < 1e-8, "h = {h}");
            assert!((semiclassical_mzz(h).unwrap().value - e / k).abs() < 1e-8, "h = {h}");
        }
        for h in [1.001, 1.2, 2.0, 10.0, 100.0] {
            let (k, e) = elliptic_ke(1.0 / h);
            let want = 1.0 - h * h + h * h * e / k;
            assert!((semiclassical_mzz(h).unwrap().value - want).abs() < 1e-8, "h = {h}");
            assert_eq!(semiclassical_mz(h).unwrap().value, 0.0);
        }
    }

    #[test]
    fn limits() {
        assert!((semiclassical_mz(1e-4).unwrap().value - 1.0).abs() < 1e-7);
        assert!((semiclassical_mzz(1e3).unwrap().value - 0.5).abs() < 1e-5);
        let at = semiclassical_mzz(1.0).unwrap();
        assert!(at.singular && at.value == 0.0);
        assert!(semiclassical_mz(1.0).unwrap().singular);
        assert!(semiclassical_mz(0.0).is_err());
        assert!(semiclassical_mzz(f64::NAN).is_err());
    }

    #[test]
    fn minimum_sits_at_the_critical_field() {
        let x = golden_section(|h| semiclassical_mzz(h).unwrap().value, 0.2, 5.0, 1e-6);
        assert!((x - 1.0).abs() < 1e-3, "{x}");
    }
}
