//! Hamiltonians of the Ising family: couplings, dense and matrix-free
//! operators, two-site gates and matrix product operators.

pub mod dense;
pub mod expfit;
pub mod gates;
pub mod mpo;
pub mod spec;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;

pub use dense::{dense_hamiltonian, SpinHamiltonian};
pub use expfit::{fit_exponentials, ExpFit, ExpTerm};
pub use gates::{bond_hamiltonian, two_site_gates, GateSet};
pub use mpo::{build_mpo, Mpo};
pub use spec::{coupling_matrix, kac_normalization, Alpha, ModelSpec};

const O: C64 = C64 { re: 0.0, im: 0.0 };
const L: C64 = C64 { re: 1.0, im: 0.0 };
const J: C64 = C64 { re: 0.0, im: 1.0 };

pub fn pauli_i() -> Array2<C64> {
    array![[L, O], [O, L]]
}

pub fn pauli_x() -> Array2<C64> {
    array![[O, L], [L, O]]
}

pub fn pauli_y() -> Array2<C64> {
    array![[O, -J], [J, O]]
}

pub fn pauli_z() -> Array2<C64> {
    array![[L, O], [O, -L]]
}
