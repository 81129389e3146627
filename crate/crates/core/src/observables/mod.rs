//! Order parameters of a quench and the estimators built on them.

pub mod fits;
pub mod series;

use crate::error::{Error, Result};
use crate::model::{pauli_z, Mpo};
use crate::mps::env::expectation;
use crate::mps::Mps;

pub use fits::{
    extrapolate_thermodynamic, fit_correlation_length, locate_mzz_minimum, CorrelationFit, ParabolaVertex, ThermoFit,
};
pub use series::{ObservableSeries, Sample};

/// `<2 S_z> / n = (1/n) sum_l <Z_l>`.
pub fn collective_z(state: &Mps) -> Result<f64> {
    let n = state.len();
    Ok(expectation(state, &Mpo::sum_local(n, &pauli_z()))?.re / n as f64)
}

/// `<4 S_z^2> / n^2`, one transfer sweep with a bond-dimension-3 MPO.
pub fn collective_zz(state: &Mps) -> Result<f64> {
    let n = state.len();
    Ok(expectation(state, &Mpo::sum_local_squared(n, &pauli_z()))?.re / (n * n) as f64)
}

/// Central site used for `C_zz`: `(n - 1) / 2`, counting from zero.
pub fn center_site(n: usize) -> usize {
    (n - 1) / 2
}

/// `<Z_b Z_{b+l}>` for `l = 1..=l_max` with `b` the central site.
pub fn czz_profile(state: &Mps, l_max: usize) -> Result<Vec<f64>> {
    let b = center_site(state.len());
    if l_max == 0 || b + l_max >= state.len() {
        return Err(Error::OutOfRange(format!("l_max = {l_max} from site {b} in a chain of {}", state.len())));
    }
    let z = pauli_z();
    Ok(state.correlator_from(b, &z, &z, l_max)?.into_iter().map(|c| c.re).collect())
}
