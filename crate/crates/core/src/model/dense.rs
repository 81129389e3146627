//! Computational-basis representations. Site 0 is the most significant bit
//! of a basis index and bit value 0 is spin up (`Z = +1`).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::spec::{coupling_matrix, ModelSpec};
use crate::error::{Error, Result};

pub const DENSE_MAX_SITES: usize = 14;
pub const SPARSE_MAX_SITES: usize = 26;

/// Z eigenvalue of `site` in basis state `index`.
#[inline]
pub fn z_value(index: usize, site: usize, n: usize) -> f64 {
    if (index >> (n - 1 - site)) & 1 == 0 { 1.0 } else { -1.0 }
}

#[inline]
pub fn site_mask(site: usize, n: usize) -> usize {
    1 << (n - 1 - site)
}

/// `H` split into its diagonal part and a uniform transverse field,
/// `H = diag(E) - hx sum_j X_j`. Applied matrix-free.
#[derive(Clone, Debug)]
pub struct SpinHamiltonian {
    pub n: usize,
    pub diag: Vec<f64>,
    pub hx: f64,
}

impl SpinHamiltonian {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        if n > SPARSE_MAX_SITES {
            return Err(Error::TooLarge { what: "matrix-free Hamiltonian", n, max: SPARSE_MAX_SITES });
        }
        let j = coupling_matrix(spec)?;
        let (hz, hx) = spec.fields();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if j[[a, b]] != 0.0 {
                    pairs.push((a, b, j[[a, b]]));
                }
            }
        }
        let diag = (0..1usize << n)
            .into_par_iter()
            .map(|i| {
                let mut e = 0.0;
                for &(a, b, jab) in &pairs {
                    e -= jab * z_value(i, a, n) * z_value(i, b, n);
                }
                for a in 0..n {
                    e -= hz * z_value(i, a, n);
                }
                e
            })
            .collect();
        Ok(SpinHamiltonian { n, diag, hx })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        let hx = self.hx;
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        out.par_iter_mut().enumerate().with_min_len(1 << 12).for_each(|(i, o)| {
            let mut acc = v[i] * self.diag[i];
            if hx != 0.0 {
                let mut flips = C64::new(0.0, 0.0);
                for s in 0..n {
                    flips += v[i ^ site_mask(s, n)];
                }
                acc -= flips * hx;
            }
            *o = acc;
        });
        out
    }

    pub fn expectation(&self, v: &[C64]) -> f64 {
        let hv = self.apply(v);
        crate::linalg::vdot(v, &hv).re
    }
}

/// Dense real-symmetric `H` on the full `2^n` space.
pub fn dense_hamiltonian(spec: &ModelSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    if spec.n > DENSE_MAX_SITES {
        return Err(Error::TooLarge { what: "dense Hamiltonian", n: spec.n, max: DENSE_MAX_SITES });
    }
    let op = SpinHamiltonian::new(spec)?;
    let dim = op.dim();
    let n = spec.n;
    let mut h = Array2::zeros((dim, dim));
    for i in 0..dim {
        h[[i, i]] = op.diag[i];
        if op.hx != 0.0 {
            for s in 0..n {
                h[[i, i ^ site_mask(s, n)]] -= op.hx;
            }
        }
    }
    Ok(h)
}

/// Product state `|phi> ⊗ ... ⊗ |phi>` from a single-site spinor.
pub fn product_vector(n: usize, spinor: [C64; 2]) -> Vec<C64> {
    (0..1usize << n)
        .map(|i| (0..n).map(|s| spinor[(i >> (n - 1 - s)) & 1]).product())
        .collect()
}

/// Single-site spinor with Bloch vector `dir` (normalized by the caller).
pub fn bloch_spinor(dir: [f64; 3]) -> Result<[C64; 2]> {
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::InvalidArgument("Bloch direction must be a non-zero finite vector".into()));
    }
    let (x, y, z) = (dir[0] / norm, dir[1] / norm, dir[2] / norm);
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    Ok([C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
}
