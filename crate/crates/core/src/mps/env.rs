//! MPO-MPS environment contractions.
//!
//! Left environments are stored as `[w, bra, ket]`, right environments as
//! `[w, ket, bra]`, each of shape `(D, chi, chi)`.

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64 as C64;

use super::state::Mps;
use crate::error::{Error, Result};
use crate::linalg::ONE;
use crate::model::mpo::{Mpo, SparseSite};

pub fn trivial_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), ONE)
}

/// Extend a left environment by one site.
pub fn extend_left(env: &Array3<C64>, a: &Array3<C64>, w: &SparseSite, d_out: usize) -> Array3<C64> {
    let (d_in, chi_b, chi_k) = env.dim();
    let (_, _, kr) = a.dim();
    let br = kr;
    // T1[w, b, s, k'] = sum_k L[w, b, k] A[k, s, k']
    let l2 = env.view().into_shape((d_in * chi_b, chi_k)).unwrap();
    let a2 = a.view().into_shape((chi_k, 2 * kr)).unwrap();
    let t1 = l2.dot(&a2).into_shape((d_in, chi_b, 2, kr)).unwrap();
    // T2[w', b, s', k'] = sum_{w,s} W[w, w', s', s] T1[w, b, s, k']
    let mut t2 = ndarray::Array4::<C64>::zeros((d_out, chi_b, 2, kr));
    for (wi, wo, op) in w {
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[[sp, s]];
                if c.norm() == 0.0 {
                    continue;
                }
                let src = t1.slice(ndarray::s![*wi, .., s, ..]);
                let mut dst = t2.slice_mut(ndarray::s![*wo, .., sp, ..]);
                dst.scaled_add(c, &src);
            }
        }
    }
    // L'[w', b', k'] = sum_{b, s'} conj(A[b, s', b']) T2[w', b, s', k']
    let ad = a.view().into_shape((chi_b * 2, br)).unwrap().t().mapv(|x| x.conj());
    let mut out = Array3::zeros((d_out, br, kr));
    for wo in 0..d_out {
        let blk = t2.index_axis(Axis(0), wo);
        let blk = blk.into_shape((chi_b * 2, kr)).unwrap();
        out.index_axis_mut(Axis(0), wo).assign(&ad.dot(&blk));
    }
    out
}

/// Extend a right environment by one site.
pub fn extend_right(env: &Array3<C64>, a: &Array3<C64>, w: &SparseSite, d_out: usize) -> Array3<C64> {
    let (d_in, _, _) = env.dim();
    let (kl, _, kr) = a.dim();
    let a2 = a.view().into_shape((kl * 2, kr)).unwrap();
    // T1[w', k, s, b'] = sum_{k'} A[k, s, k'] R[w', k', b']
    let bl = env.dim().2;
    let mut t1 = ndarray::Array4::<C64>::zeros((d_in, kl, 2, bl));
    for wi in 0..d_in {
        let r = env.index_axis(Axis(0), wi);
        let prod = a2.dot(&r).into_shape((kl, 2, bl)).unwrap();
        t1.index_axis_mut(Axis(0), wi).assign(&prod);
    }
    // T2[w, k, s', b'] = sum_{w', s} W[w, w', s', s] T1[w', k, s, b']
    let mut t2 = ndarray::Array4::<C64>::zeros((d_out, kl, 2, bl));
    for (wo, wi, op) in w {
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[[sp, s]];
                if c.norm() == 0.0 {
                    continue;
                }
                let src = t1.slice(ndarray::s![*wi, .., s, ..]);
                let mut dst = t2.slice_mut(ndarray::s![*wo, .., sp, ..]);
                dst.scaled_add(c, &src);
            }
        }
    }
    // R'[w, k, b] = sum_{s', b'} T2[w, k, s', b'] conj(A[b, s', b'])
    let ac = a.view().into_shape((kl, 2 * kr)).unwrap().t().mapv(|x| x.conj());
    let mut out = Array3::zeros((d_out, kl, kl));
    for wo in 0..d_out {
        let blk = t2.index_axis(Axis(0), wo);
        let blk = blk.into_shape((kl, 2 * bl)).unwrap();
        out.index_axis_mut(Axis(0), wo).assign(&blk.dot(&ac));
    }
    out
}

/// `<psi|W|psi> / <psi|psi>`.
pub fn expectation(state: &Mps, mpo: &Mpo) -> Result<C64> {
    if state.len() != mpo.len() {
        return Err(Error::SizeMismatch(format!("MPS of {} sites, MPO of {}", state.len(), mpo.len())));
    }
    let mut env = trivial_env();
    for (l, a) in state.tensors().iter().enumerate() {
        let d_out = mpo.tensors[l].dim().1;
        env = extend_left(&env, a, &mpo.sparse_site(l), d_out);
    }
    let nrm = state.norm().powi(2);
    Ok(env[[0, 0, 0]] / nrm)
}

/// Dense check helper: `psi^dagger M psi` for a dense operator.
pub fn dense_expectation(psi: &[C64], m: &Array2<C64>) -> C64 {
    let v = ndarray::ArrayView1::from(psi);
    let mv = m.dot(&v);
    psi.iter().zip(mv.iter()).map(|(x, y)| x.conj() * y).sum()
}
