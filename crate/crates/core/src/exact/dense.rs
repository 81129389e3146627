//! State-vector oracles: exact propagation, partial traces and correlators.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};
use crate::model::dense::{site_mask, z_value, SpinHamiltonian};
use crate::model::{dense_hamiltonian, ModelSpec};
use crate::mps::rdm::{diagonal_embedding, swap_sites};
use rayon::prelude::*;

/// `exp(-iHt)` through the full eigendecomposition; suited to many sample
/// times at small `n`.
pub struct SpectralPropagator {
    pub energies: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SpectralPropagator {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let h = dense_hamiltonian(spec)?;
        let (energies, vectors) = linalg::eigh_real(&h)?;
        Ok(SpectralPropagator { energies, vectors })
    }

    /// Eigenbasis amplitudes of `psi`.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let dim = psi.len();
        (0..dim)
            .map(|k| (0..dim).map(|i| psi[i] * self.vectors[[i, k]]).sum())
            .collect()
    }

    /// `exp(-iHt) psi` given eigenbasis amplitudes.
    pub fn evolve_coefficients(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let dim = coeffs.len();
        let phased: Array1<C64> = (0..dim)
            .map(|k| coeffs[k] * C64::from_polar(1.0, -self.energies[k] * t))
            .collect();
        let v = self.vectors.mapv(C64::from);
        v.dot(&phased).to_vec()
    }

    pub fn evolve(&self, psi: &[C64], t: f64) -> Vec<C64> {
        self.evolve_coefficients(&self.coefficients(psi), t)
    }
}

/// `exp(-iHt) psi` by Krylov steps of size at most `dt`.
pub fn krylov_evolve(h: &SpinHamiltonian, psi: &[C64], t: f64, dt: f64) -> Result<Vec<C64>> {
    if t == 0.0 {
        return Ok(psi.to_vec());
    }
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let mut v = psi.to_vec();
    for _ in 0..steps {
        v = linalg::expm_krylov(|x| h.apply(x), &v, tau, 40, 1e-13)?.0;
    }
    Ok(v)
}

fn site_count(psi: &[C64], n: usize) -> Result<()> {
    if psi.len() != 1usize << n {
        return Err(Error::SizeMismatch(format!("state of length {} for {n} sites", psi.len())));
    }
    Ok(())
}

/// Reduced density on `sites` (first listed site most significant).
pub fn partial_trace(psi: &[C64], n: usize, sites: &[usize]) -> Result<Array2<C64>> {
    site_count(psi, n)?;
    if sites.iter().any(|&s| s >= n) {
        return Err(Error::OutOfRange(format!("sites {sites:?} for {n} sites")));
    }
    let k = sites.len();
    let rest: Vec<usize> = (0..n).filter(|s| !sites.contains(s)).collect();
    let mut m = Array2::<C64>::zeros((1 << k, 1 << rest.len()));
    for (i, amp) in psi.iter().enumerate() {
        let bits = |list: &[usize]| {
            list.iter().fold(0usize, |acc, &s| (acc << 1) | usize::from(i & site_mask(s, n) != 0))
        };
        m[[bits(sites), bits(&rest)]] = *amp;
    }
    Ok(m.dot(&linalg::dagger(&m.view())))
}

/// Ordered-pair density used by the site average: the two-site density for
/// `j != k`, the diagonal embedding of the one-site density for `j == k`.
pub fn pair_density(psi: &[C64], n: usize, j: usize, k: usize) -> Result<Array2<C64>> {
    if j == k {
        Ok(diagonal_embedding(&partial_trace(psi, n, &[j])?))
    } else {
        partial_trace(psi, n, &[j, k])
    }
}

/// `<Z_site>` for every site.
pub fn z_profile(psi: &[C64], n: usize) -> Result<Vec<f64>> {
    site_count(psi, n)?;
    let mut out = vec![0.0; n];
    for (i, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr();
        for (s, o) in out.iter_mut().enumerate() {
            *o += p * z_value(i, s, n);
        }
    }
    Ok(out)
}

/// `<Z_a Z_b>`.
pub fn zz(psi: &[C64], n: usize, a: usize, b: usize) -> Result<f64> {
    site_count(psi, n)?;
    Ok(psi.iter().enumerate().map(|(i, amp)| amp.norm_sqr() * z_value(i, a, n) * z_value(i, b, n)).sum())
}

/// `<2 S_z> / n`.
pub fn collective_z(psi: &[C64], n: usize) -> Result<f64> {
    Ok(z_profile(psi, n)?.iter().sum::<f64>() / n as f64)
}

/// `<4 S_z^2> / n^2`.
pub fn collective_zz(psi: &[C64], n: usize) -> Result<f64> {
    site_count(psi, n)?;
    Ok(psi
        .iter()
        .enumerate()
        .map(|(i, amp)| {
            let m: f64 = (0..n).map(|s| z_value(i, s, n)).sum();
            amp.norm_sqr() * m * m
        })
        .sum::<f64>()
        / (n * n) as f64)
}

/// `<Z_b Z_{b+l}>` for `l = 1..=l_max` from site `b`.
pub fn czz_profile(psi: &[C64], n: usize, b: usize, l_max: usize) -> Result<Vec<f64>> {
    if b + l_max >= n {
        return Err(Error::OutOfRange(format!("b = {b}, l_max = {l_max} for {n} sites")));
    }
    (1..=l_max).map(|l| zz(psi, n, b, b + l)).collect()
}

/// Fidelity `|<a|b>|^2`.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    linalg::vdot(a, b).norm_sqr()
}

/// Every ordered-pair density `[j * n + k]`, with [`diagonal_embedding`] on
/// `j = k`. One pass over the amplitudes per unordered pair.
pub fn all_pair_densities(psi: &[C64], n: usize) -> Result<Vec<Array2<C64>>> {
    site_count(psi, n)?;
    let mut out = vec![Array2::<C64>::zeros((4, 4)); n * n];
    for j in 0..n {
        out[j * n + j] = diagonal_embedding(&partial_trace(psi, n, &[j])?);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect();
    let blocks: Vec<Array2<C64>> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let (mj, mk) = (site_mask(j, n), site_mask(k, n));
            let mut acc = [[ZERO; 4]; 4];
            for x in 0..psi.len() {
                if x & (mj | mk) != 0 {
                    continue;
                }
                let a = [psi[x], psi[x | mk], psi[x | mj], psi[x | mj | mk]];
                for s in 0..4 {
                    for t in 0..4 {
                        acc[s][t] += a[s] * a[t].conj();
                    }
                }
            }
            Array2::from_shape_fn((4, 4), |(s, t)| acc[s][t])
        })
        .collect();
    for ((j, k), rho) in pairs.into_iter().zip(blocks) {
        out[k * n + j] = swap_sites(&rho);
        out[j * n + k] = rho;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dense::{bloch_spinor, product_vector};

    #[test]
    fn krylov_and_spectral_agree() {
        let spec = ModelSpec::sfim(7, 1.0, 0.9, 0.8);
        let psi = product_vector(7, bloch_spinor([1.0, 0.0, 0.0]).unwrap());
        let a = SpectralPropagator::new(&spec).unwrap().evolve(&psi, 2.3);
        let b = krylov_evolve(&SpinHamiltonian::new(&spec).unwrap(), &psi, 2.3, 0.2).unwrap();
        assert!(1.0 - fidelity(&a, &b) < 1e-12);
        assert!((linalg::norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlators_of_product_states() {
        let n = 6;
        let up = product_vector(n, bloch_spinor([0.0, 0.0, 1.0]).unwrap());
        assert!((collective_z(&up, n).unwrap() - 1.0).abs() < 1e-14);
        assert!((collective_zz(&up, n).unwrap() - 1.0).abs() < 1e-14);
        let x = product_vector(n, bloch_spinor([1.0, 0.0, 0.0]).unwrap());
        assert!(collective_z(&x, n).unwrap().abs() < 1e-14);
        assert!((collective_zz(&x, n).unwrap() - 1.0 / n as f64).abs() < 1e-14);
        assert!(czz_profile(&x, n, 2, 3).unwrap().iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn all_pairs_match_partial_traces() {
        let n = 6;
        let psi = crate::mps::Mps::random(n, 4, 9).unwrap().to_dense().unwrap();
        let all = all_pair_densities(&psi, n).unwrap();
        for j in 0..n {
            for k in 0..n {
                let want = pair_density(&psi, n, j, k).unwrap();
                assert!(linalg::frobenius(&(&all[j * n + k] - &want)) < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_of_product_is_product() {
        let n = 4;
        let sp = bloch_spinor([0.3, -0.5, 0.8]).unwrap();
        let psi = product_vector(n, sp);
        let rho = partial_trace(&psi, n, &[2]).unwrap();
        for s in 0..2 {
            for t in 0..2 {
                assert!((rho[[s, t]] - sp[s] * sp[t].conj()).norm() < 1e-14);
            }
        }
    }
}
