//! Free-fermion solution of the open nearest-neighbor transverse-field chain
//! `H = -J sum Z_l Z_{l+1} - B sum X_l`.
//!
//! The Jordan-Wigner string is built from `X`, so the field is the fermion
//! number and `Z_l Z_{l+1}` is a Majorana bilinear. States are described by
//! the real antisymmetric covariance `G_pq = (i/2) <[a_p, a_q]>`, evolving
//! as `G(t) = R G R^T` with `R = exp(A t)` for `H = (i/4) a^T A a`.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelSpec;
use crate::observables::center_site;

/// Initial condition of the quench.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialField {
    /// Ground state at field `B_i`.
    Finite(f64),
    /// `B_i -> infinity`: the `|+x ... +x>` product state.
    Infinite,
}

/// Majorana coupling matrix `A` of the chain.
pub fn majorana_hamiltonian(n: usize, j: f64, b: f64) -> Array2<f64> {
    let mut a = Array2::zeros((2 * n, 2 * n));
    for l in 0..n {
        a[[2 * l, 2 * l + 1]] = 2.0 * b;
        a[[2 * l + 1, 2 * l]] = -2.0 * b;
        if l + 1 < n {
            a[[2 * l + 1, 2 * l + 2]] = 2.0 * j;
            a[[2 * l + 2, 2 * l + 1]] = -2.0 * j;
        }
    }
    a
}

/// Covariance of the ground state of `H = (i/4) a^T A a`: `G = -i sign(iA)`.
pub fn ground_covariance(a: &Array2<f64>) -> Result<Array2<f64>> {
    let h = a.mapv(|x| C64::new(0.0, x));
    let (w, v) = linalg::eigh_herm(&h)?;
    if w.iter().any(|x| x.abs() < 1e-13) {
        return Err(Error::InvalidArgument("zero mode: ground state is degenerate".into()));
    }
    let sign = Array2::from_diag(&w.mapv(|x| C64::new(x.signum(), 0.0)));
    let g = v.dot(&sign).dot(&linalg::dagger(&v.view()));
    Ok(g.mapv(|z| z.im))
}

/// Covariance of `|+x>^n`: every site has `X = +1`.
pub fn polarized_covariance(n: usize) -> Array2<f64> {
    let mut g = Array2::zeros((2 * n, 2 * n));
    for l in 0..n {
        g[[2 * l, 2 * l + 1]] = -1.0;
        g[[2 * l + 1, 2 * l]] = 1.0;
    }
    g
}

/// Snapshot of a Gaussian state.
#[derive(Clone, Debug)]
pub struct FermionState {
    pub covariance: Array2<f64>,
    pub b_initial: InitialField,
    pub b_final: f64,
    pub time: f64,
}

impl FermionState {
    /// Largest violation of antisymmetry and of `|lambda| <= 1`.
    pub fn gaussian_defect(&self) -> Result<f64> {
        let g = &self.covariance;
        let anti = (g + &g.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // eigenvalues of i G are the +-lambda
        let w = linalg::eigh_herm(&g.mapv(|x| C64::new(0.0, x)))?.0;
        let over = w.iter().fold(0.0f64, |m, x| m.max(x.abs() - 1.0));
        Ok(anti.max(over))
    }

    /// Purity defect `|G G^T - 1|_max`; zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        let g = &self.covariance;
        let p = g.dot(&g.t()) - Array2::<f64>::eye(g.nrows());
        p.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Quench of the open chain between two fields, solved exactly.
pub struct FermionQuench {
    pub n: usize,
    pub j: f64,
    pub b_initial: InitialField,
    pub b_final: f64,
    g0: Array2<f64>,
    /// eigen-decomposition of `iA` for the final Hamiltonian
    w: Array1<f64>,
    v: Array2<C64>,
}

impl FermionQuench {
    pub fn new(n: usize, j: f64, b_initial: InitialField, b_final: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("chain needs at least two sites".into()));
        }
        let g0 = match b_initial {
            InitialField::Infinite => polarized_covariance(n),
            InitialField::Finite(bi) => ground_covariance(&majorana_hamiltonian(n, j, bi))?,
        };
        let af = majorana_hamiltonian(n, j, b_final);
        let (w, v) = linalg::eigh_herm(&af.mapv(|x| C64::new(0.0, x)))?;
        Ok(FermionQuench { n, j, b_initial, b_final, g0, w, v })
    }

    /// Quench to the Hamiltonian of `spec`, which must be the open
    /// nearest-neighbor chain with a transverse field.
    pub fn from_spec(spec: &ModelSpec, b_initial: InitialField) -> Result<Self> {
        spec.validate()?;
        if !spec.alpha.is_nearest_neighbor() || spec.kac || !spec.has_spin_flip_symmetry() {
            return Err(Error::UnsupportedScheme(
                "the free-fermion solution needs the nearest-neighbor chain in a transverse field".into(),
            ));
        }
        Self::new(spec.n, spec.j0, b_initial, spec.b)
    }

    /// `exp(A t)`.
    pub fn rotation(&self, t: f64) -> Array2<f64> {
        // A = -i (iA) => exp(At) = V exp(-i w t) V^dagger
        let phase = Array1::from_iter(self.w.iter().map(|x| C64::from_polar(1.0, -x * t)));
        let vp = &self.v * &phase;
        vp.dot(&linalg::dagger(&self.v.view())).mapv(|z| z.re)
    }

    pub fn state_at(&self, t: f64) -> FermionState {
        let r = self.rotation(t);
        let g = r.dot(&self.g0).dot(&r.t());
        FermionState { covariance: g, b_initial: self.b_initial, b_final: self.b_final, time: t }
    }

    /// `<Z_b Z_{b+l}>` with `b` the central site, for each `l` in `separations`.
    pub fn czz(&self, t: f64, separations: &[usize]) -> Result<Vec<f64>> {
        let b = center_site(self.n);
        let st = self.state_at(t);
        separations.iter().map(|&l| string_correlator(&st.covariance, self.n, b, l)).collect()
    }
}

/// `<Z_a Z_{a+l}>` from a covariance matrix:
/// `Z_a Z_{a+l} = (-i)^l a_{2a+1} ... a_{2a+2l}` and Wick's theorem give
/// `(-1)^l Pf(G[2a+1 .. 2a+2l])`.
pub fn string_correlator(g: &Array2<f64>, n: usize, a: usize, l: usize) -> Result<f64> {
    if l == 0 {
        return Ok(1.0);
    }
    if a + l >= n {
        return Err(Error::OutOfRange(format!("separation {l} from site {a} in a chain of {n}")));
    }
    let lo = 2 * a + 1;
    let sub = g.slice(s![lo..lo + 2 * l, lo..lo + 2 * l]).to_owned();
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * pfaffian(&sub)?)
}

/// Pfaffian of a real antisymmetric matrix by Householder
/// tridiagonalization.
pub fn pfaffian(m: &Array2<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::SizeMismatch(format!("{:?} is not square", m.dim())));
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut a = m.clone();
    let mut pf = 1.0;
    for i in 0..n - 2 {
        let x = a.slice(s![i + 1.., i]).to_owned();
        let sigma: f64 = x.iter().skip(1).map(|v| v * v).sum();
        let alpha;
        if sigma == 0.0 {
            alpha = x[0];
        } else {
            let norm_x = (x[0] * x[0] + sigma).sqrt();
            let mut v = x.clone();
            if x[0] <= 0.0 {
                v[0] -= norm_x;
                alpha = norm_x;
            } else {
                v[0] += norm_x;
                alpha = -norm_x;
            }
            let vn = v.dot(&v).sqrt();
            v /= vn;
            // A[i+1:, i+1:] <- P A P with P = 1 - 2 v v^T
            let w = a.slice(s![i + 1.., i + 1..]).dot(&v) * 2.0;
            let vw = Array2::from_shape_fn((n - i - 1, n - i - 1), |(p, q)| v[p] * w[q] - w[p] * v[q]);
            let mut blk = a.slice_mut(s![i + 1.., i + 1..]);
            blk += &vw;
            // reflection has determinant -1
            pf = -pf;
        }
        a[[i + 1, i]] = alpha;
        a[[i, i + 1]] = -alpha;
        for k in i + 2..n {
            a[[k, i]] = 0.0;
            a[[i, k]] = 0.0;
        }
        if i % 2 == 0 {
            pf *= -alpha;
        }
    }
    Ok(pf * a[[n - 2, n - 1]])
}

/// Long-time amplitude for a quench `B_i -> B_f` in units of `J`:
/// `C0 = [ (B_i - B_f) B_f sqrt(B_i^2 - 1) / ((B_i + B_f)(B_i B_f - 1)) ]^{1/2}`.
pub fn asymptotic_c0(b_final: f64, b_initial: f64) -> f64 {
    let (bi, bf) = (b_initial, b_final);
    ((bi - bf) * bf * (bi * bi - 1.0).sqrt() / ((bi + bf) * (bi * bf - 1.0))).sqrt()
}

/// Long-time inverse correlation length for a quench ending at
/// `B_f <= J`: `1/xi = -(1/pi) int_0^pi ln|cos D_k| dk` with
/// `cos D_k = (1 + h_i h_f - (h_i + h_f) cos k) / (e_i e_f)`.
pub fn asymptotic_xi(b_final: f64, b_initial: InitialField) -> Result<f64> {
    let hf = b_final;
    if !(hf > 0.0 && hf <= 1.0) {
        return Err(Error::InvalidArgument(format!("final field {hf} outside (0, 1]")));
    }
    // 1 - cos k is written as 2 sin^2(k/2) to keep precision near k = 0
    let vers = |k: f64| 2.0 * (0.5 * k).sin().powi(2);
    let eps = |h: f64, k: f64| ((1.0 - h).powi(2) + 2.0 * h * vers(k)).sqrt();
    let cos_d = |k: f64| match b_initial {
        InitialField::Infinite => (hf - 1.0 + vers(k)) / eps(hf, k),
        InitialField::Finite(hi) => ((1.0 - hi) * (1.0 - hf) + (hi + hf) * vers(k)) / (eps(hi, k) * eps(hf, k)),
    };
    let out = quadrature::integrate(|k| cos_d(k).abs().max(1e-300).ln(), 0.0, std::f64::consts::PI, 1e-12);
    Ok(-std::f64::consts::PI / out.integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense::{czz_profile, SpectralPropagator};
    use crate::model::dense::{bloch_spinor, product_vector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Pfaffian by expansion along the first row.
    fn pf_expand(m: &Array2<f64>) -> f64 {
        let n = m.nrows();
        if n == 0 {
            return 1.0;
        }
        let mut total = 0.0;
        for j in 1..n {
            let keep: Vec<usize> = (1..n).filter(|&k| k != j).collect();
            let minor = Array2::from_shape_fn((n - 2, n - 2), |(p, q)| m[[keep[p], keep[q]]]);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * m[[0, j]] * pf_expand(&minor);
        }
        total
    }

    fn random_antisymmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Array2<f64> = Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(&mut rng));
        &a - &a.t()
    }

    #[test]
    fn pfaffian_small_cases() {
        let m = ndarray::array![[0.0, 2.5], [-2.5, 0.0]];
        assert_eq!(pfaffian(&m).unwrap(), 2.5);
        assert_eq!(pfaffian(&Array2::zeros((3, 3))).unwrap(), 0.0);
        for n in [2, 4, 6, 8] {
            let m = random_antisymmetric(n, n as u64);
            assert!((pfaffian(&m).unwrap() - pf_expand(&m)).abs() < 1e-10 * pf_expand(&m).abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn pfaffian_squared_is_determinant(seed in 0u64..500, half in 1usize..8) {
            let m = random_antisymmetric(2 * half, seed);
            let pf = pfaffian(&m).unwrap();
            let det: f64 = {
                use ndarray_linalg::Determinant;
                m.det().unwrap()
            };
            prop_assert!((pf * pf - det).abs() < 1e-8 * det.abs().max(1.0));
        }
    }

    #[test]
    fn polarized_start_has_no_correlations() {
        let q = FermionQuench::new(11, 1.0, InitialField::Infinite, 1.0).unwrap();
        let c = q.czz(0.0, &[1, 2, 3, 4, 5]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn classical_ground_state_is_ordered() {
        // Small field: ground-state correlations close to 1.
        let q = FermionQuench::new(8, 1.0, InitialField::Finite(0.05), 0.05).unwrap();
        let c = q.czz(0.0, &[1, 2, 3]).unwrap();
        assert!(c.iter().all(|x| *x > 0.99), "{c:?}");
    }

    #[test]
    fn matches_dense_evolution() {
        let n = 10;
        let spec = ModelSpec::tfim(n, 1.0, 1.0);
        let prop = SpectralPropagator::new(&spec).unwrap();
        let x0 = product_vector(n, bloch_spinor([1.0, 0.0, 0.0]).unwrap());
        let coeffs = prop.coefficients(&x0);
        let q = FermionQuench::from_spec(&spec, InitialField::Infinite).unwrap();
        let b = center_site(n);
        let mut worst = 0.0f64;
        for k in 0..=50 {
            let t = 0.1 * k as f64;
            let psi = prop.evolve_coefficients(&coeffs, t);
            let want = czz_profile(&psi, n, b, 4).unwrap();
            let got = q.czz(t, &[1, 2, 3, 4]).unwrap();
            for (g, w) in got.iter().zip(&want) {
                worst = worst.max((g - w).abs());
            }
        }
        assert!(worst < 1e-8, "max deviation {worst}");
    }

    #[test]
    fn finite_initial_field_matches_dense_ground_state() {
        let n = 8;
        let (bi, bf) = (2.0, 0.7);
        let pre = SpectralPropagator::new(&ModelSpec::tfim(n, 1.0, bi)).unwrap();
        let gs: Vec<C64> = pre.vectors.column(0).iter().map(|x| C64::new(*x, 0.0)).collect();
        let post = SpectralPropagator::new(&ModelSpec::tfim(n, 1.0, bf)).unwrap();
        let q = FermionQuench::new(n, 1.0, InitialField::Finite(bi), bf).unwrap();
        for t in [0.0, 0.7, 2.3] {
            let psi = post.evolve(&gs, t);
            let want = czz_profile(&psi, n, center_site(n), 3).unwrap();
            let got = q.czz(t, &[1, 2, 3]).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-8, "t = {t}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn gaussian_constraints_survive_evolution() {
        let q = FermionQuench::new(12, 1.0, InitialField::Finite(1.7), 0.6).unwrap();
        for t in [0.0, 1.0, 5.0, 20.0] {
            let st = q.state_at(t);
            assert!(st.gaussian_defect().unwrap() < 1e-10 * t.max(1.0));
            assert!(st.purity_defect() < 1e-10 * t.max(1.0));
        }
    }

    #[test]
    fn rejects_other_models() {
        assert!(FermionQuench::from_spec(&ModelSpec::power_law(6, 1.5, 1.0, 1.0), InitialField::Infinite).is_err());
        assert!(FermionQuench::from_spec(&ModelSpec::sfim(6, 1.0, 1.0, 0.8), InitialField::Infinite).is_err());
    }

    #[test]
    fn long_time_amplitude_and_length() {
        assert!((asymptotic_c0(1.0, 2.0) - 3f64.powf(-0.25)).abs() < 1e-15);
        let xi = asymptotic_xi(1.0, InitialField::Infinite).unwrap();
        assert!((xi - 1.0 / 2f64.ln()).abs() < 1e-9, "{xi}");
        // a huge finite initial field approaches the polarized limit
        let big = asymptotic_xi(1.0, InitialField::Finite(1e6)).unwrap();
        assert!((big - xi).abs() < 1e-4);
    }
}
