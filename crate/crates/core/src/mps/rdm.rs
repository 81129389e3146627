use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::state::Mps;
use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};

/// One- or two-site reduced density matrix. Two-site matrices use the basis
/// `|s_a s_b>` with `sites = [a, b]`, first site most significant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedDensity {
    #[serde(with = "complex_matrix")]
    pub matrix: Array2<C64>,
    pub sites: Vec<usize>,
    pub time: f64,
}

impl ReducedDensity {
    pub fn new(matrix: Array2<C64>, sites: Vec<usize>, time: f64) -> Self {
        ReducedDensity { matrix, sites, time }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `Tr(rho A)`.
    pub fn expectation(&self, op: &Array2<C64>) -> Result<C64> {
        if op.dim() != self.matrix.dim() {
            return Err(Error::SizeMismatch(format!("operator {:?} vs density {:?}", op.dim(), self.matrix.dim())));
        }
        Ok(self.matrix.iter().zip(op.t().iter()).map(|(r, a)| r * a).sum())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::eigh_herm(&self.matrix)?.0.to_vec())
    }

    /// Largest violation among Hermiticity, unit trace and positivity.
    pub fn defect(&self) -> Result<f64> {
        let herm = linalg::hermiticity_defect(&self.matrix);
        let tr = (self.trace() - C64::new(1.0, 0.0)).norm();
        let neg = self.eigenvalues()?.into_iter().fold(0.0f64, |m, x| m.max(-x));
        Ok(herm.max(tr).max(neg))
    }

    /// Squared Hilbert-Schmidt distance to another density of equal size.
    pub fn hs_distance2(&self, other: &ReducedDensity) -> Result<f64> {
        hs_distance2(&self.matrix, &other.matrix)
    }

    /// Squared HS distance to the maximally mixed state of the same size.
    pub fn distance2_to_maximally_mixed(&self) -> Result<f64> {
        let d = self.dim();
        hs_distance2(&self.matrix, &(Array2::<C64>::eye(d) / C64::from(d as f64)))
    }
}

/// `Tr((p - q)^dagger (p - q))`.
pub fn hs_distance2(p: &Array2<C64>, q: &Array2<C64>) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::SizeMismatch(format!("{:?} vs {:?}", p.dim(), q.dim())));
    }
    Ok(p.iter().zip(q.iter()).map(|(a, b)| (a - b).norm_sqr()).sum())
}

/// Squared HS distance between the projectors onto two pure states,
/// `2 (1 - |<a|b>|^2)` for normalized inputs.
pub fn hs_distance2_pure(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    let na = linalg::vdot(a, a).re;
    let nb = linalg::vdot(b, b).re;
    let ov = linalg::vdot(a, b).norm_sqr();
    Ok((na * na + nb * nb - 2.0 * ov).max(0.0))
}

/// Same as [`hs_distance2_pure`] for two MPS.
pub fn hs_distance2_mps(a: &Mps, b: &Mps) -> Result<f64> {
    let ov = a.overlap(b)?.norm_sqr();
    let na = a.norm().powi(2);
    let nb = b.norm().powi(2);
    Ok((na * na + nb * nb - 2.0 * ov).max(0.0))
}

/// Swap the two sites of a 4x4 two-site operator.
pub fn swap_sites(m: &Array2<C64>) -> Array2<C64> {
    let sw = |i: usize| ((i & 1) << 1) | (i >> 1);
    Array2::from_shape_fn((4, 4), |(i, j)| m[[sw(i), sw(j)]])
}

/// Two-site embedding `sum_st rho_st |ss><tt|` of a one-site density; its
/// `ZZ` expectation is exactly one.
pub fn diagonal_embedding(rho1: &Array2<C64>) -> Array2<C64> {
    let mut out = Array2::zeros((4, 4));
    for s in 0..2 {
        for t in 0..2 {
            out[[3 * s, 3 * t]] = rho1[[s, t]];
        }
    }
    out
}

impl Mps {
    /// One-site reduced density at `site`.
    pub fn rdm1(&self, site: usize) -> Result<ReducedDensity> {
        if site >= self.len() {
            return Err(Error::OutOfRange(format!("site {site} in a chain of {}", self.len())));
        }
        let mut work = self.clone();
        work.move_center(site)?;
        Ok(ReducedDensity::new(center_rdm1(&work.tensors[site]), vec![site], 0.0))
    }

    /// All one-site densities in one sweep.
    pub fn rdm1_all(&self) -> Result<Vec<Array2<C64>>> {
        let mut work = self.clone();
        work.move_center(0)?;
        let mut out = Vec::with_capacity(self.len());
        for l in 0..self.len() {
            work.move_center(l)?;
            out.push(center_rdm1(&work.tensors[l]));
        }
        Ok(out)
    }

    /// Two-site reduced density on distinct sites `(a, b)`; the first label is
    /// the more significant index.
    pub fn rdm2(&self, a: usize, b: usize) -> Result<ReducedDensity> {
        let n = self.len();
        if a >= n || b >= n || a == b {
            return Err(Error::OutOfRange(format!("sites ({a}, {b}) in a chain of {n}")));
        }
        let (i, j) = (a.min(b), a.max(b));
        let mut work = self.clone();
        work.move_center(i)?;
        let mut env = open_env(&work.tensors[i]);
        for k in i + 1..j {
            env = pass_env(&env, &work.tensors[k]);
        }
        let rho = close_env(&env, &work.tensors[j]);
        let rho = if a < b { rho } else { swap_sites(&rho) };
        Ok(ReducedDensity::new(rho, vec![a, b], 0.0))
    }

    /// Densities for every pair `i < j`, indexed `[i][j - i - 1]`, computed
    /// with one environment sweep per left site.
    pub fn rdm2_all_pairs(&self) -> Result<Vec<Vec<Array2<C64>>>> {
        let n = self.len();
        let mut work = self.clone();
        work.move_center(0)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            work.move_center(i)?;
            let mut row = Vec::with_capacity(n - i - 1);
            let mut env = open_env(&work.tensors[i]);
            for j in i + 1..n {
                row.push(close_env(&env, &work.tensors[j]));
                if j + 1 < n {
                    env = pass_env(&env, &work.tensors[j]);
                }
            }
            out.push(row);
        }
        Ok(out)
    }

    /// `<A_b B_{b+l}>` for `l = 1..=l_max` in a single sweep from `b`.
    pub fn correlator_from(&self, b: usize, op_a: &Array2<C64>, op_b: &Array2<C64>, l_max: usize) -> Result<Vec<C64>> {
        let n = self.len();
        if b + l_max >= n {
            return Err(Error::OutOfRange(format!("b = {b}, l_max = {l_max} in a chain of {n}")));
        }
        let mut work = self.clone();
        work.move_center(b)?;
        let t = &work.tensors[b];
        // E[c, c'] = sum_{a,s,u} A[a,s,c] op[u,s] conj(A[a,u,c'])
        let mut env: Array2<C64> = Array2::zeros((t.dim().2, t.dim().2));
        for s in 0..2 {
            for u in 0..2 {
                let c = op_a[[u, s]];
                if c.norm() == 0.0 {
                    continue;
                }
                let ks = t.index_axis(ndarray::Axis(1), s);
                let bs = t.index_axis(ndarray::Axis(1), u).mapv(|x| x.conj());
                env.scaled_add(c, &ks.t().dot(&bs));
            }
        }
        let mut out = Vec::with_capacity(l_max);
        for l in 1..=l_max {
            let m = &work.tensors[b + l];
            let mut val = C64::new(0.0, 0.0);
            for s in 0..2 {
                for u in 0..2 {
                    let c = op_b[[u, s]];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let ms = m.index_axis(ndarray::Axis(1), s);
                    let mu = m.index_axis(ndarray::Axis(1), u).mapv(|x| x.conj());
                    val += c * (&ms.t().dot(&env) * &mu.t()).sum();
                }
            }
            out.push(val);
            if l < l_max {
                let mut next = Array2::<C64>::zeros((m.dim().2, m.dim().2));
                for s in 0..2 {
                    let ms = m.index_axis(ndarray::Axis(1), s);
                    next += &ms.t().dot(&env).dot(&ms.mapv(|x| x.conj()));
                }
                env = next;
            }
        }
        Ok(out)
    }

    /// `(1/n^2) sum_{j,k} rho^(j,k)` over ordered pairs, where the `j = k`
    /// terms use [`diagonal_embedding`].
    pub fn site_averaged_rdm2(&self) -> Result<ReducedDensity> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidArgument("site-averaged 2-RDM needs n >= 2".into()));
        }
        let mut acc = Array2::<C64>::zeros((4, 4));
        for rho in self.rdm1_all()? {
            acc += &diagonal_embedding(&rho);
        }
        for row in self.rdm2_all_pairs()? {
            for rho in row {
                acc += &rho;
                acc += &swap_sites(&rho);
            }
        }
        acc /= C64::from((n * n) as f64);
        Ok(ReducedDensity::new(acc, Vec::new(), 0.0))
    }
}

fn center_rdm1(t: &Array3<C64>) -> Array2<C64> {
    let (a, _, b) = t.dim();
    let mut rho = Array2::zeros((2, 2));
    for s in 0..2 {
        for u in 0..2 {
            let mut acc = ZERO;
            for i in 0..a {
                for k in 0..b {
                    acc += t[[i, s, k]] * t[[i, u, k]].conj();
                }
            }
            rho[[s, u]] = acc;
        }
    }
    rho
}

/// `E[(s,t), b, b'] = sum_a A[a,s,b] conj(A[a,t,b'])` at the center site.
fn open_env(t: &Array3<C64>) -> Array3<C64> {
    let (a, _, b) = t.dim();
    let mut env = Array3::zeros((4, b, b));
    for s in 0..2 {
        for u in 0..2 {
            let ks = t.index_axis(ndarray::Axis(1), s);
            let bs = t.index_axis(ndarray::Axis(1), u).mapv(|x| x.conj());
            let blk = ks.t().dot(&bs);
            env.index_axis_mut(ndarray::Axis(0), 2 * s + u).assign(&blk);
            let _ = a;
        }
    }
    env
}

/// Carry an open environment through a site with its physical index traced.
fn pass_env(env: &Array3<C64>, t: &Array3<C64>) -> Array3<C64> {
    let (_, _, c) = t.dim();
    let mut out = Array3::zeros((4, c, c));
    for p in 0..4 {
        let e = env.index_axis(ndarray::Axis(0), p);
        let mut acc = Array2::<C64>::zeros((c, c));
        for u in 0..2 {
            let m = t.index_axis(ndarray::Axis(1), u);
            let mc = m.mapv(|x| x.conj());
            acc += &m.t().dot(&e).dot(&mc);
        }
        out.index_axis_mut(ndarray::Axis(0), p).assign(&acc);
    }
    out
}

/// Close an open environment on the second site, tracing everything right
/// of it (right-canonical).
fn close_env(env: &Array3<C64>, t: &Array3<C64>) -> Array2<C64> {
    let mut rho = Array2::zeros((4, 4));
    for p in 0..4 {
        let (s, u) = (p >> 1, p & 1);
        let e = env.index_axis(ndarray::Axis(0), p);
        for s2 in 0..2 {
            for u2 in 0..2 {
                let m = t.index_axis(ndarray::Axis(1), s2);
                let mc = t.index_axis(ndarray::Axis(1), u2).mapv(|x| x.conj());
                // sum_{b,b',c} E[b,b'] M[b,c] conj(M'[b',c])
                let val: C64 = (&m.t().dot(&e) * &mc.t()).sum();
                rho[[2 * s + s2, 2 * u + u2]] = val;
            }
        }
    }
    rho
}

mod complex_matrix {
    use ndarray::Array2;
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &Array2<C64>, s: S) -> Result<S::Ok, S::Error> {
        Raw {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|x| x.re).collect(),
            im: m.iter().map(|x| x.im).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<C64>, D::Error> {
        let raw = Raw::deserialize(d)?;
        let data = raw.re.iter().zip(&raw.im).map(|(r, i)| C64::new(*r, *i)).collect();
        Array2::from_shape_vec((raw.rows, raw.cols), data).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense::{partial_trace, pair_density};
    use crate::linalg::ONE;

    #[test]
    fn x_product_pair_is_pure() {
        let mps = Mps::product_state(5, [1.0, 0.0, 0.0], 4).unwrap();
        let rho = mps.rdm2(1, 3).unwrap();
        for x in rho.matrix.iter() {
            assert!((x - C64::from(0.25)).norm() < 1e-14);
        }
    }

    #[test]
    fn bell_pair_halves_are_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![C64::from(h), ZERO, ZERO, C64::from(h)];
        let mps = Mps::from_dense(&psi, 4, 1e-12).unwrap();
        for site in 0..2 {
            let rho = mps.rdm1(site).unwrap();
            assert!(rho.distance2_to_maximally_mixed().unwrap() < 1e-24);
        }
    }

    #[test]
    fn random_state_pair_matches_dense_partial_trace() {
        let mps = Mps::random(10, 8, 5).unwrap();
        let psi = mps.to_dense().unwrap();
        for &(a, b) in &[(4, 7), (7, 4), (0, 9), (3, 4)] {
            let got = mps.rdm2(a, b).unwrap();
            let want = partial_trace(&psi, 10, &[a, b]).unwrap();
            assert!(hs_distance2(&got.matrix, &want).unwrap() < 1e-20, "({a}, {b})");
            assert!(got.defect().unwrap() < 1e-10);
        }
        let one = mps.rdm1(6).unwrap();
        let want = partial_trace(&psi, 10, &[6]).unwrap();
        assert!(hs_distance2(&one.matrix, &want).unwrap() < 1e-20);
    }

    #[test]
    fn averaged_rdm_on_z_product_is_pure_up_up() {
        let mps = Mps::product_state(6, [0.0, 0.0, 1.0], 2).unwrap();
        let avg = mps.site_averaged_rdm2().unwrap();
        for ((i, j), x) in avg.matrix.indexed_iter() {
            let want = if i == 0 && j == 0 { ONE } else { ZERO };
            assert!((x - want).norm() < 1e-14);
        }
    }

    #[test]
    fn averaged_rdm_matches_dense_pair_enumeration() {
        let mps = Mps::random(8, 6, 17).unwrap();
        let psi = mps.to_dense().unwrap();
        let avg = mps.site_averaged_rdm2().unwrap();
        let mut want = Array2::<C64>::zeros((4, 4));
        for j in 0..8 {
            for k in 0..8 {
                want += &pair_density(&psi, 8, j, k).unwrap();
            }
        }
        want /= C64::from(64.0);
        assert!(hs_distance2(&avg.matrix, &want).unwrap() < 1e-22);
        assert!(avg.defect().unwrap() < 1e-10);
    }

    #[test]
    fn correlator_sweep_matches_pair_densities() {
        let mps = Mps::random(9, 6, 23).unwrap();
        let z = crate::model::pauli_z();
        let x = crate::model::pauli_x();
        let got = mps.correlator_from(4, &z, &x, 4).unwrap();
        let zx = crate::linalg::kron(&z, &x);
        for (l, g) in got.iter().enumerate() {
            let want = mps.rdm2(4, 5 + l).unwrap().expectation(&zx).unwrap();
            assert!((g - want).norm() < 1e-12);
        }
        assert!(mps.correlator_from(4, &z, &z, 5).is_err());
    }

    #[test]
    fn pure_state_identity() {
        let a = Mps::random(6, 4, 1).unwrap();
        let b = Mps::random(6, 4, 2).unwrap();
        let (da, db) = (a.to_dense().unwrap(), b.to_dense().unwrap());
        let pa = Array2::from_shape_fn((64, 64), |(i, j)| da[i] * da[j].conj());
        let pb = Array2::from_shape_fn((64, 64), |(i, j)| db[i] * db[j].conj());
        let direct = hs_distance2(&pa, &pb).unwrap();
        let ov = a.overlap(&b).unwrap().norm_sqr();
        assert!((direct - 2.0 * (1.0 - ov)).abs() < 1e-10);
        assert!((hs_distance2_mps(&a, &b).unwrap() - direct).abs() < 1e-10);
        assert!((hs_distance2_pure(&da, &db).unwrap() - direct).abs() < 1e-10);
    }
}
