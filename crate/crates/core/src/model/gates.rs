use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::spec::{Alpha, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg;

/// Two-site term for bond `(j, j+1)` in the basis `|s_j s_{j+1}>`. Field
/// terms on interior sites are shared equally between their two bonds; an
/// edge site belongs to one bond only and keeps its full field.
pub fn bond_hamiltonian(spec: &ModelSpec, bond: usize) -> Result<Array2<f64>> {
    spec.validate()?;
    if !spec.alpha.is_nearest_neighbor() {
        return Err(Error::UnsupportedScheme("two-site gates need nearest-neighbor couplings".into()));
    }
    let n = spec.n;
    if bond + 1 >= n {
        return Err(Error::OutOfRange(format!("bond {bond} in a chain of {n} sites")));
    }
    let (hz, hx) = spec.fields();
    let share = |site: usize| if site == 0 || site == n - 1 { 1.0 } else { 0.5 };
    let (cl, cr) = (share(bond), share(bond + 1));
    let mut h = Array2::zeros((4, 4));
    for i in 0..4 {
        let (zl, zr) = (1.0 - 2.0 * (i >> 1) as f64, 1.0 - 2.0 * (i & 1) as f64);
        h[[i, i]] = -spec.j0 * zl * zr - hz * (cl * zl + cr * zr);
        h[[i, i ^ 2]] -= hx * cl;
        h[[i, i ^ 1]] -= hx * cr;
    }
    Ok(h)
}

/// Gates `exp(-i h_b tau)` for one sweep, split by bond parity.
#[derive(Clone, Debug)]
pub struct GateSet {
    pub even: Vec<(usize, Array2<C64>)>,
    pub odd: Vec<(usize, Array2<C64>)>,
}

pub fn two_site_gates(spec: &ModelSpec, tau: f64) -> Result<GateSet> {
    if let Alpha::PowerLaw(_) = spec.alpha {
        return Err(Error::UnsupportedScheme("TEBD requires a nearest-neighbor model".into()));
    }
    let mut set = GateSet { even: Vec::new(), odd: Vec::new() };
    for bond in 0..spec.n - 1 {
        let g = linalg::expm_real_symmetric(&bond_hamiltonian(spec, bond)?, tau)?;
        if bond % 2 == 0 {
            set.even.push((bond, g));
        } else {
            set.odd.push((bond, g));
        }
    }
    Ok(set)
}
