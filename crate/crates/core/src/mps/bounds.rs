//! Hilbert-Schmidt bounds on observable errors, for single densities and for
//! site- and time-averaged two-site densities.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

use super::rdm::{hs_distance2, ReducedDensity};
use super::Mps;

/// `Tr(A rho)` for Hermitian `A`, real part.
fn expect(rho: &Array2<C64>, a: &Array2<C64>) -> f64 {
    rho.iter().zip(a.t().iter()).map(|(r, x)| r * x).sum::<C64>().re
}

/// `Tr(A^2)` of a Hermitian operator.
pub fn trace_square(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `Tr(A^2) D^2(rho1, rho2) - (Tr((rho1 - rho2) A))^2`; never negative.
pub fn cauchy_schwarz_slack(rho1: &Array2<C64>, rho2: &Array2<C64>, a: &Array2<C64>) -> Result<f64> {
    if a.dim() != rho1.dim() {
        return Err(Error::SizeMismatch(format!("operator {:?} vs density {:?}", a.dim(), rho1.dim())));
    }
    let d2 = hs_distance2(rho1, rho2)?;
    let diff = expect(rho1, a) - expect(rho2, a);
    Ok(trace_square(a) * d2 - diff * diff)
}

fn complex_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array2<C64> {
    Array2::from_shape_simple_fn((dim, dim), || {
        C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
    })
}

/// Random density `G G^dagger / Tr(G G^dagger)` with a Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array2<C64> {
    let g = complex_gaussian(dim, rng);
    let rho = g.dot(&linalg::dagger(&g.view()));
    let tr = linalg::trace(&rho);
    rho / tr
}

/// Random Hermitian observable normalized to `Tr(A^2) = 4`, the value for
/// a product of two Pauli matrices.
pub fn random_observable<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array2<C64> {
    let g = complex_gaussian(dim, rng);
    let h = (&g + &linalg::dagger(&g.view())) * C64::new(0.5, 0.0);
    let s = (4.0 / trace_square(&h)).sqrt();
    h * C64::new(s, 0.0)
}

/// All ordered-pair two-site densities of a state at one time, indexed
/// `[j * n + k]`; `j = k` entries hold the diagonal embedding.
#[derive(Clone, Debug)]
pub struct PairDensities {
    pub n: usize,
    pub time: f64,
    pub rho: Vec<Array2<C64>>,
}

impl PairDensities {
    pub fn from_mps(state: &Mps, time: f64) -> Result<Self> {
        let n = state.len();
        let mut rho = vec![Array2::zeros((4, 4)); n * n];
        for (j, r1) in state.rdm1_all()?.into_iter().enumerate() {
            rho[j * n + j] = super::rdm::diagonal_embedding(&r1);
        }
        for (j, row) in state.rdm2_all_pairs()?.into_iter().enumerate() {
            for (off, r) in row.into_iter().enumerate() {
                let k = j + 1 + off;
                rho[k * n + j] = super::rdm::swap_sites(&r);
                rho[j * n + k] = r;
            }
        }
        Ok(PairDensities { n, time, rho })
    }

    pub fn from_dense(psi: &[C64], n: usize, time: f64) -> Result<Self> {
        Ok(PairDensities { n, time, rho: crate::exact::dense::all_pair_densities(psi, n)? })
    }

    /// `(1/n^2) sum_{j,k} rho^(j,k)`.
    pub fn site_average(&self) -> Array2<C64> {
        let mut acc = Array2::<C64>::zeros((4, 4));
        for r in &self.rho {
            acc += r;
        }
        acc / C64::from((self.n * self.n) as f64)
    }

    pub fn site_averaged(&self) -> ReducedDensity {
        ReducedDensity::new(self.site_average(), Vec::new(), self.time)
    }
}

/// Trapezoid weights normalized by the total duration `T`.
fn time_weights(times: &[f64]) -> Result<Vec<f64>> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("time averages need at least two samples".into()));
    }
    let total = times[times.len() - 1] - times[0];
    if !(total > 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sample times must increase".into()));
    }
    let mut w = vec![0.0; times.len()];
    for (i, d) in times.windows(2).map(|p| p[1] - p[0]).enumerate() {
        w[i] += 0.5 * d / total;
        w[i + 1] += 0.5 * d / total;
    }
    Ok(w)
}

/// Trapezoid time average of the pair densities of a trajectory.
pub fn time_average(traj: &[PairDensities]) -> Result<PairDensities> {
    let times: Vec<f64> = traj.iter().map(|p| p.time).collect();
    let w = time_weights(&times)?;
    let n = traj[0].n;
    let mut rho = vec![Array2::<C64>::zeros((4, 4)); n * n];
    for (p, wi) in traj.iter().zip(&w) {
        if p.n != n {
            return Err(Error::SizeMismatch("trajectories mix chain lengths".into()));
        }
        for (acc, r) in rho.iter_mut().zip(&p.rho) {
            acc.scaled_add(C64::from(*wi), r);
        }
    }
    Ok(PairDensities { n, time: times[times.len() - 1], rho })
}

/// One inequality `lhs <= rhs`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn violation(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// The four averaged bounds comparing two trajectories with one two-site
/// observable `A` applied to every pair.
#[derive(Clone, Debug, Serialize)]
pub struct BoundChain {
    /// Pair-averaged squared error at each time.
    pub case1: Vec<BoundCheck>,
    /// Squared error of the site average at each time.
    pub case2: Vec<BoundCheck>,
    /// Pair-averaged squared error of the time averages.
    pub case3: BoundCheck,
    /// Squared error of the site and time average, normalized by `1/n^2`.
    pub case4: BoundCheck,
}

impl BoundChain {
    /// Largest `lhs - rhs` over all checks.
    pub fn max_violation(&self) -> f64 {
        self.case1
            .iter()
            .chain(&self.case2)
            .chain([&self.case3, &self.case4])
            .map(BoundCheck::violation)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn pairwise(p: &PairDensities, q: &PairDensities, a: &Array2<C64>, tr_a2: f64) -> Result<BoundCheck> {
    let nn = (p.n * p.n) as f64;
    let mut lhs = 0.0;
    let mut d2 = 0.0;
    for (r1, r2) in p.rho.iter().zip(&q.rho) {
        let e = expect(r1, a) - expect(r2, a);
        lhs += e * e;
        d2 += hs_distance2(r1, r2)?;
    }
    Ok(BoundCheck { lhs: lhs / nn, rhs: tr_a2 * d2 / nn })
}

fn averaged(p: &PairDensities, q: &PairDensities, a: &Array2<C64>, tr_a2: f64) -> Result<BoundCheck> {
    let (m1, m2) = (p.site_average(), q.site_average());
    let e = expect(&m1, a) - expect(&m2, a);
    Ok(BoundCheck { lhs: e * e, rhs: tr_a2 * hs_distance2(&m1, &m2)? })
}

/// Evaluates all four bounds on two trajectories sampled at equal times.
pub fn bound_chain(first: &[PairDensities], second: &[PairDensities], a: &Array2<C64>) -> Result<BoundChain> {
    if first.len() != second.len() || first.is_empty() {
        return Err(Error::SizeMismatch(format!("{} vs {} samples", first.len(), second.len())));
    }
    if a.dim() != (4, 4) {
        return Err(Error::SizeMismatch(format!("two-site observable expected, got {:?}", a.dim())));
    }
    for (p, q) in first.iter().zip(second) {
        if p.n != q.n || (p.time - q.time).abs() > 1e-12 {
            return Err(Error::SizeMismatch("trajectories are not sampled alike".into()));
        }
    }
    let tr_a2 = trace_square(a);
    let mut case1 = Vec::with_capacity(first.len());
    let mut case2 = Vec::with_capacity(first.len());
    for (p, q) in first.iter().zip(second) {
        case1.push(pairwise(p, q, a, tr_a2)?);
        case2.push(averaged(p, q, a, tr_a2)?);
    }
    let (p, q) = (time_average(first)?, time_average(second)?);
    Ok(BoundChain { case1, case2, case3: pairwise(&p, &q, a, tr_a2)?, case4: averaged(&p, &q, a, tr_a2)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense::SpectralPropagator;
    use crate::model::dense::{bloch_spinor, product_vector};
    use crate::model::ModelSpec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_have_the_stated_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2, 4] {
            let rho = ReducedDensity::new(random_density(dim, &mut rng), Vec::new(), 0.0);
            assert!(rho.defect().unwrap() < 1e-12);
            let a = random_observable(dim, &mut rng);
            assert!((trace_square(&a) - 4.0).abs() < 1e-12);
            assert!(linalg::hermiticity_defect(&a) < 1e-14);
        }
    }

    #[test]
    fn equality_for_aligned_observable() {
        // A proportional to rho1 - rho2 saturates the inequality
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (r1, r2) = (random_density(4, &mut rng), random_density(4, &mut rng));
        let a = &r1 - &r2;
        assert!(cauchy_schwarz_slack(&r1, &r2, &a).unwrap().abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn single_density_bound(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (r1, r2, a) = (random_density(dim, &mut rng), random_density(dim, &mut rng), random_observable(dim, &mut rng));
            prop_assert!(cauchy_schwarz_slack(&r1, &r2, &a).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn pair_densities_agree_between_mps_and_dense() {
        let n = 6;
        let mps = Mps::random(n, 4, 11).unwrap();
        let psi = mps.to_dense().unwrap();
        let a = PairDensities::from_mps(&mps, 0.0).unwrap();
        let b = PairDensities::from_dense(&psi, n, 0.0).unwrap();
        for (x, y) in a.rho.iter().zip(&b.rho) {
            assert!(linalg::frobenius(&(x - y)) < 1e-10);
        }
        let site = mps.site_averaged_rdm2().unwrap();
        assert!(site.hs_distance2(&a.site_averaged()).unwrap() < 1e-20);
    }

    #[test]
    fn chain_holds_on_dense_trajectories() {
        let n = 6;
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let start = product_vector(n, bloch_spinor([1.0, 0.0, 0.0]).unwrap());
        let traj = |spec: &ModelSpec| -> Vec<PairDensities> {
            let prop = SpectralPropagator::new(spec).unwrap();
            times.iter().map(|t| PairDensities::from_dense(&prop.evolve(&start, *t), n, *t).unwrap()).collect()
        };
        let t1 = traj(&ModelSpec::power_law(n, 1.5, 1.0, 1.0));
        let t2 = traj(&ModelSpec::power_law(n, 1.5, 1.0, 1.1));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let a = random_observable(4, &mut rng);
            let chain = bound_chain(&t1, &t2, &a).unwrap();
            assert!(chain.max_violation() <= 1e-12);
            assert!(chain.case4.lhs > 0.0);
        }
        // ZZ on every pair: the case-4 left side is the squared change of Mzz
        let z = crate::model::pauli_z();
        let zz = linalg::kron(&z, &z);
        let chain = bound_chain(&t1, &t2, &zz).unwrap();
        let mzz = |tr: &[PairDensities]| expect(&time_average(tr).unwrap().site_average(), &zz);
        assert!((chain.case4.lhs - (mzz(&t1) - mzz(&t2)).powi(2)).abs() < 1e-14);
    }
}
