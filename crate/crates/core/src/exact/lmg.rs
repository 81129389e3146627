//! Fully connected (`alpha = 0`) chain in the permutation-symmetric
//! subspace. Basis state `k` is the Dicke state with `k` spins down, so
//! `sum Z = n - 2k`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::evolve::quench::step_count;
use crate::linalg;
use crate::observables::{ObservableSeries, Sample};

/// Above this dimension the tridiagonal generator is exponentiated with
/// Lanczos instead of being diagonalized.
pub const LMG_DENSE_MAX: usize = 2048;
/// Half-chain entropy is recorded up to this many sites; `NaN` above.
pub const LMG_ENTROPY_MAX_SITES: usize = 512;

/// `H = -(J0/n) ((sum Z)^2 - n) - B sum X` in the Dicke basis, as the
/// diagonal and the first off-diagonal.
pub fn lmg_hamiltonian(n: usize, j0: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let diag = (0..=n).map(|k| -(j0 / nf) * ((nf - 2.0 * k as f64).powi(2) - nf)).collect();
    let half = nf / 2.0;
    let off = (0..n)
        .map(|k| {
            let m = half - k as f64;
            -b * (half * (half + 1.0) - m * (m - 1.0)).sqrt()
        })
        .collect();
    (diag, off)
}

fn tridiagonal(diag: &[f64], off: &[f64]) -> Array2<f64> {
    let d = diag.len();
    let mut h = Array2::zeros((d, d));
    for k in 0..d {
        h[[k, k]] = diag[k];
        if k + 1 < d {
            h[[k, k + 1]] = off[k];
            h[[k + 1, k]] = off[k];
        }
    }
    h
}

fn apply_tridiagonal(diag: &[f64], off: &[f64], v: &[C64]) -> Vec<C64> {
    let d = diag.len();
    (0..d)
        .map(|k| {
            let mut acc = v[k] * diag[k];
            if k > 0 {
                acc += v[k - 1] * off[k - 1];
            }
            if k + 1 < d {
                acc += v[k + 1] * off[k];
            }
            acc
        })
        .collect()
}

/// `<sum Z> / n` and `<(sum Z)^2> / n^2`.
pub fn dicke_moments(psi: &[C64]) -> (f64, f64) {
    let n = (psi.len() - 1) as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, a) in psi.iter().enumerate() {
        let z = (n - 2.0 * k as f64) / n;
        let p = a.norm_sqr();
        m1 += p * z;
        m2 += p * z * z;
    }
    (m1, m2)
}

/// Von Neumann entropy of the first `n / 2` spins.
pub fn dicke_half_entropy(psi: &[C64]) -> Result<f64> {
    let n = psi.len() - 1;
    let na = n / 2;
    let nb = n - na;
    let ln_n: Vec<f64> = (0..=n).map(|k| ln_binomial(n as u64, k as u64)).collect();
    let m = Array2::from_shape_fn((na + 1, nb + 1), |(a, b)| {
        let w = 0.5 * (ln_binomial(na as u64, a as u64) + ln_binomial(nb as u64, b as u64) - ln_n[a + b]);
        psi[a + b] * w.exp()
    });
    let (_, s, _) = linalg::svd(&m)?;
    Ok(s.iter().map(|x| x * x).filter(|p| *p > 1e-300).map(|p| -p * p.ln()).sum())
}

/// Embeds a Dicke-basis vector into the `2^n` computational basis.
pub fn dicke_to_full(psi: &[C64]) -> Result<Vec<C64>> {
    let n = psi.len() - 1;
    if n > crate::model::dense::SPARSE_MAX_SITES {
        return Err(Error::TooLarge { what: "Dicke embedding", n, max: crate::model::dense::SPARSE_MAX_SITES });
    }
    let norms: Vec<f64> = (0..=n).map(|k| (-0.5 * ln_binomial(n as u64, k as u64)).exp()).collect();
    Ok((0..1usize << n).map(|x| psi[x.count_ones() as usize] * norms[x.count_ones() as usize]).collect())
}

enum Propagator {
    Spectral { energies: Array1<f64>, vectors: Array2<f64> },
    Lanczos { diag: Vec<f64>, off: Vec<f64> },
}

/// Quench from `|up_z>^n` at `J0 = 1`, sampled every `dt` up to `t_final`.
pub fn lmg_evolve(n: usize, b_over_j0: f64, t_final: f64, dt: f64) -> Result<ObservableSeries> {
    if n < 2 {
        return Err(Error::InvalidArgument("at least two spins are required".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) || !b_over_j0.is_finite() {
        return Err(Error::InvalidArgument(format!("dt = {dt}, B/J0 = {b_over_j0}")));
    }
    let steps = step_count(t_final, dt)?;
    let (diag, off) = lmg_hamiltonian(n, 1.0, b_over_j0);
    let prop = if n < LMG_DENSE_MAX {
        let (energies, vectors) = linalg::eigh_real(&tridiagonal(&diag, &off))?;
        Propagator::Spectral { energies, vectors }
    } else {
        Propagator::Lanczos { diag, off }
    };
    let mut psi = vec![C64::new(0.0, 0.0); n + 1];
    psi[0] = C64::new(1.0, 0.0);
    // eigenbasis coefficients of the initial state
    let coeffs: Vec<C64> = match &prop {
        Propagator::Spectral { vectors, .. } => vectors.row(0).iter().map(|v| C64::new(*v, 0.0)).collect(),
        Propagator::Lanczos { .. } => Vec::new(),
    };
    let mut series = ObservableSeries::new(0);
    for step in 0..=steps {
        let t = dt * step as f64;
        if step > 0 {
            psi = match &prop {
                Propagator::Spectral { energies, vectors } => {
                    let c: Vec<C64> =
                        coeffs.iter().zip(energies.iter()).map(|(c, e)| c * C64::from_polar(1.0, -e * t)).collect();
                    vectors.rows().into_iter().map(|r| r.iter().zip(&c).map(|(v, ci)| ci * v).sum()).collect()
                }
                Propagator::Lanczos { diag, off } => {
                    linalg::expm_krylov(|v| apply_tridiagonal(diag, off, v), &psi, dt, 40, 1e-13)?.0
                }
            };
        }
        let (mz, mzz) = dicke_moments(&psi);
        let s1 = if n <= LMG_ENTROPY_MAX_SITES { dicke_half_entropy(&psi)? } else { f64::NAN };
        series.push(Sample { t, mz, mzz, s1_half: s1, discarded: 0.0, czz: Vec::new() })?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense::{self, krylov_evolve, SpectralPropagator};
    use crate::model::dense::{bloch_spinor, product_vector, SpinHamiltonian};
    use crate::model::ModelSpec;

    fn total_spin_squared(psi: &[C64], n: usize) -> f64 {
        // S^2 = 3n/4 + sum_{i<j} (SWAP_ij - 1/2)
        let mut acc = 0.75 * n as f64;
        for i in 0..n {
            for j in i + 1..n {
                let (bi, bj) = (1usize << (n - 1 - i), 1usize << (n - 1 - j));
                let swap: C64 = (0..psi.len())
                    .map(|x| {
                        let y = if ((x & bi) != 0) != ((x & bj) != 0) { x ^ bi ^ bj } else { x };
                        psi[x].conj() * psi[y]
                    })
                    .sum();
                acc += swap.re - 0.5;
            }
        }
        acc
    }

    #[test]
    fn matches_kac_normalized_full_model() {
        let n = 10;
        let spec = ModelSpec::power_law(n, 0.0, 1.0, 0.5);
        let prop = SpectralPropagator::new(&spec).unwrap();
        let up = product_vector(n, bloch_spinor([0.0, 0.0, 1.0]).unwrap());
        let series = lmg_evolve(n, 0.5, 10.0, 0.05).unwrap();
        let mut worst = 0.0f64;
        for (i, t) in series.t.iter().enumerate() {
            let psi = prop.evolve(&up, *t);
            worst = worst.max((dense::collective_z(&psi, n).unwrap() - series.inst_mz[i]).abs());
            worst = worst.max((dense::collective_zz(&psi, n).unwrap() - series.inst_mzz[i]).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn embedding_tracks_full_evolution_and_conserves_total_spin() {
        let n = 8;
        let b = 1.3;
        let spec = ModelSpec::power_law(n, 0.0, 1.0, b);
        let h = SpinHamiltonian::new(&spec).unwrap();
        let (diag, off) = lmg_hamiltonian(n, 1.0, b);
        let (e, v) = linalg::eigh_real(&tridiagonal(&diag, &off)).unwrap();
        let s2 = 0.5 * n as f64 * (0.5 * n as f64 + 1.0);
        let mut full = product_vector(n, bloch_spinor([0.0, 0.0, 1.0]).unwrap());
        for k in 1..=6 {
            let t = 0.5 * k as f64;
            full = krylov_evolve(&h, &full, 0.5, 0.05).unwrap();
            assert!((total_spin_squared(&full, n) - s2).abs() < 1e-10);
            let c: Vec<C64> = (0..=n).map(|m| v[[0, m]] * C64::from_polar(1.0, -e[m] * t)).collect();
            let dicke: Vec<C64> = (0..=n).map(|r| (0..=n).map(|m| c[m] * v[[r, m]]).sum()).collect();
            let emb = dicke_to_full(&dicke).unwrap();
            assert!((dense::fidelity(&emb, &full) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_field_keeps_full_magnetization() {
        let s = lmg_evolve(30, 0.0, 5.0, 0.1).unwrap();
        assert!(s.inst_mz.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert!(s.avg_mzz.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert!(s.s1_half.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn dicke_entropy_matches_dense_partial_trace() {
        let n = 8;
        let s = 0.5f64.sqrt();
        let psi: Vec<C64> = (0..=n).map(|k| if k == 0 || k == 4 { C64::new(s, 0.0) } else { C64::new(0.0, 0.0) }).collect();
        let full = dicke_to_full(&psi).unwrap();
        let rho = dense::partial_trace(&full, n, &[0, 1, 2, 3]).unwrap();
        let w = linalg::eigh_herm(&rho).unwrap().0;
        let want: f64 = w.iter().filter(|p| **p > 1e-14).map(|p| -p * p.ln()).sum();
        assert!((dicke_half_entropy(&psi).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn lanczos_path_agrees_with_spectral_path() {
        let n = 300;
        let (diag, off) = lmg_hamiltonian(n, 1.0, 0.8);
        let (e, v) = linalg::eigh_real(&tridiagonal(&diag, &off)).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); n + 1];
        psi[0] = C64::new(1.0, 0.0);
        for _ in 0..20 {
            psi = linalg::expm_krylov(|x| apply_tridiagonal(&diag, &off, x), &psi, 0.1, 40, 1e-13).unwrap().0;
        }
        let t = 2.0;
        let want: Vec<C64> = (0..=n)
            .map(|r| (0..=n).map(|m| v[[0, m]] * v[[r, m]] * C64::from_polar(1.0, -e[m] * t)).sum())
            .collect();
        let err = psi.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
