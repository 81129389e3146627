use std::f64::consts::PI;
use std::fmt;

use ndarray::Array2;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Interaction range: a power-law exponent or the nearest-neighbor limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Alpha {
    PowerLaw(f64),
    /// `alpha -> infinity`; only adjacent sites couple.
    NearestNeighbor,
}

impl Alpha {
    pub fn is_nearest_neighbor(self) -> bool {
        matches!(self, Alpha::NearestNeighbor)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Alpha::PowerLaw(a) => Some(a),
            Alpha::NearestNeighbor => None,
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::PowerLaw(a) => write!(f, "{a}"),
            Alpha::NearestNeighbor => f.write_str("inf"),
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::PowerLaw(a) => s.serialize_f64(*a),
            Alpha::NearestNeighbor => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Alpha;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative exponent or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Alpha, E> {
                if v.is_infinite() && v > 0.0 {
                    Ok(Alpha::NearestNeighbor)
                } else {
                    Ok(Alpha::PowerLaw(v))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Alpha, E> {
                Ok(Alpha::PowerLaw(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Alpha, E> {
                Ok(Alpha::PowerLaw(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Alpha, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "nn" => Ok(Alpha::NearestNeighbor),
                    other => other
                        .parse::<f64>()
                        .map(Alpha::PowerLaw)
                        .map_err(|_| E::custom(format!("cannot parse alpha from {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// One Ising-family Hamiltonian
/// `H = -sum_{i<j} J_ij Z_i Z_j - B sum_l (cos(theta) Z_l + sin(theta) X_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub alpha: Alpha,
    pub j0: f64,
    pub b: f64,
    #[serde(default = "transverse")]
    pub theta: f64,
    #[serde(default)]
    pub kac: bool,
}

fn transverse() -> f64 {
    PI / 2.0
}

impl ModelSpec {
    /// Kac-normalized power-law TFIM.
    pub fn power_law(n: usize, alpha: f64, j0: f64, b: f64) -> Self {
        ModelSpec { n, alpha: Alpha::PowerLaw(alpha), j0, b, theta: PI / 2.0, kac: true }
    }

    /// Nearest-neighbor TFIM.
    pub fn tfim(n: usize, j0: f64, b: f64) -> Self {
        ModelSpec { n, alpha: Alpha::NearestNeighbor, j0, b, theta: PI / 2.0, kac: false }
    }

    /// Nearest-neighbor Ising chain in a slanted field.
    pub fn sfim(n: usize, j0: f64, b: f64, theta: f64) -> Self {
        ModelSpec { n, alpha: Alpha::NearestNeighbor, j0, b, theta, kac: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("n = {} but at least 2 sites are required", self.n)));
        }
        if let Alpha::PowerLaw(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidSpec(format!("alpha = {a} must be finite and >= 0")));
            }
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::InvalidSpec(format!("theta = {} outside [0, pi]", self.theta)));
        }
        if !self.j0.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidSpec("j0 and b must be finite".into()));
        }
        if self.kac && self.alpha.is_nearest_neighbor() {
            return Err(Error::KacUndefined);
        }
        Ok(())
    }

    /// Longitudinal and transverse field components `(B cos theta, B sin theta)`.
    pub fn fields(&self) -> (f64, f64) {
        // theta = pi/2 should give an exactly vanishing Z field.
        let hz = if (self.theta - PI / 2.0).abs() < 1e-15 { 0.0 } else { self.b * self.theta.cos() };
        (hz, self.b * self.theta.sin())
    }

    /// Prefactor in front of `|i-j|^-alpha` for power-law couplings.
    pub fn coupling_scale(&self) -> Result<f64> {
        match self.alpha {
            Alpha::NearestNeighbor => Ok(self.j0),
            Alpha::PowerLaw(a) => {
                if self.kac {
                    Ok(self.j0 / kac_normalization(Alpha::PowerLaw(a), self.n)?)
                } else {
                    Ok(self.j0)
                }
            }
        }
    }

    /// Coupling between two sites at distance `d >= 1`.
    pub fn coupling_at(&self, d: usize) -> Result<f64> {
        match self.alpha {
            Alpha::NearestNeighbor => Ok(if d == 1 { self.j0 } else { 0.0 }),
            Alpha::PowerLaw(a) => Ok(self.coupling_scale()? * (d as f64).powf(-a)),
        }
    }

    /// Whether the global spin flip `prod X` commutes with `H`.
    pub fn has_spin_flip_symmetry(&self) -> bool {
        self.fields().0.abs() < 1e-14
    }
}

/// Kac factor `(1/(n-1)) sum_{l1<l2} |l1-l2|^-alpha`.
pub fn kac_normalization(alpha: Alpha, n: usize) -> Result<f64> {
    let a = match alpha {
        Alpha::NearestNeighbor => return Err(Error::KacUndefined),
        Alpha::PowerLaw(a) => a,
    };
    if n < 2 {
        return Err(Error::InvalidSpec(format!("Kac normalization needs n >= 2, got {n}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidSpec(format!("alpha = {a} must be finite and >= 0")));
    }
    // n - d pairs sit at distance d.
    let sum: f64 = (1..n).map(|d| (n - d) as f64 * (d as f64).powf(-a)).sum();
    Ok(sum / (n - 1) as f64)
}

/// Symmetric pair-coupling matrix with zero diagonal.
pub fn coupling_matrix(spec: &ModelSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let n = spec.n;
    let by_distance: Vec<f64> = (0..n).map(|d| if d == 0 { Ok(0.0) } else { spec.coupling_at(d) }).collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn((n, n), |(i, j)| by_distance[i.abs_diff(j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn kac_small_cases() {
        assert_relative_eq!(kac_normalization(Alpha::PowerLaw(1.0), 3).unwrap(), 1.25);
        assert_relative_eq!(kac_normalization(Alpha::PowerLaw(0.0), 7).unwrap(), 3.5);
        assert_relative_eq!(kac_normalization(Alpha::PowerLaw(2.7), 2).unwrap(), 1.0);
        assert!(matches!(kac_normalization(Alpha::NearestNeighbor, 5), Err(Error::KacUndefined)));
    }

    #[test]
    fn couplings_match_definitions() {
        let nn = coupling_matrix(&ModelSpec::tfim(3, 1.3, 0.0)).unwrap();
        assert_eq!(nn[[0, 1]], 1.3);
        assert_eq!(nn[[1, 2]], 1.3);
        assert_eq!(nn[[0, 2]], 0.0);

        let flat = coupling_matrix(&ModelSpec::power_law(4, 0.0, 1.0, 0.0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(flat[[i, j]], if i == j { 0.0 } else { 0.5 });
            }
        }

        let spec = ModelSpec::power_law(5, 1.5, 0.8, 1.0);
        let j = coupling_matrix(&spec).unwrap();
        // Direct pair enumeration for the normalization.
        let mut pairs = 0.0;
        for a in 0..5 {
            for b in a + 1..5 {
                pairs += ((b - a) as f64).powf(-1.5);
            }
        }
        let kac = pairs / 4.0;
        assert_relative_eq!(j[[0, 3]], 0.8 / (kac * 3f64.powf(1.5)), max_relative = 1e-14);
    }

    #[test]
    fn alpha_round_trips_through_toml() {
        let spec = ModelSpec::tfim(9, 1.0, 0.5);
        let text = toml::to_string(&spec).unwrap();
        assert!(text.contains("alpha = \"inf\""));
        let back: ModelSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let spec: ModelSpec = toml::from_str("n = 4\nalpha = 1.5\nj0 = 1.0\nb = 2.0\nkac = true").unwrap();
        assert_eq!(spec.alpha, Alpha::PowerLaw(1.5));
        assert!((spec.theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = ModelSpec::tfim(1, 1.0, 1.0);
        assert!(s.validate().is_err());
        s.n = 4;
        s.theta = 4.0;
        assert!(s.validate().is_err());
        s.theta = 1.0;
        s.kac = true;
        assert!(matches!(s.validate(), Err(Error::KacUndefined)));
    }

    proptest! {
        #[test]
        fn coupling_matrix_symmetric_zero_diagonal(n in 2usize..12, alpha in 0.0f64..4.0, nn in any::<bool>(), kac in any::<bool>()) {
            let spec = if nn {
                ModelSpec::tfim(n, 1.0, 0.3)
            } else {
                ModelSpec { kac, ..ModelSpec::power_law(n, alpha, 1.0, 0.3) }
            };
            let j = coupling_matrix(&spec).unwrap();
            for a in 0..n {
                prop_assert_eq!(j[[a, a]], 0.0);
                for b in 0..n {
                    prop_assert_eq!(j[[a, b]], j[[b, a]]);
                }
            }
        }

        #[test]
        fn kac_non_increasing_in_alpha(n in 2usize..60, a in 0.0f64..5.0, da in 0.0f64..2.0) {
            let lo = kac_normalization(Alpha::PowerLaw(a), n).unwrap();
            let hi = kac_normalization(Alpha::PowerLaw(a + da), n).unwrap();
            prop_assert!(hi <= lo * (1.0 + 1e-14));
            prop_assert!(hi > 0.0);
        }
    }
}
