use ndarray::{Array2, Array4};
use num_complex::Complex64 as C64;

use super::expfit::{fit_exponentials, ExpFit, ExpTerm};
use super::spec::{Alpha, ModelSpec};
use super::{pauli_i, pauli_x, pauli_z};
use crate::error::{Error, Result};
use crate::linalg;

/// Matrix product operator. Site tensors have shape `(Dl, Dr, 2, 2)` indexed
/// `[a, b, s_out, s_in]`; the outer bonds have dimension 1.
#[derive(Clone, Debug)]
pub struct Mpo {
    pub tensors: Vec<Array4<C64>>,
    /// Exponential fit behind the long-range couplings, if any.
    pub fit: Option<ExpFit>,
}

/// Nonzero blocks of one MPO tensor.
pub type SparseSite = Vec<(usize, usize, Array2<C64>)>;

impl Mpo {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Bulk bond dimension.
    pub fn bond_dim(&self) -> usize {
        self.tensors.iter().map(|w| w.dim().1).max().unwrap_or(1)
    }

    pub fn sparse_site(&self, site: usize) -> SparseSite {
        let w = &self.tensors[site];
        let (dl, dr, _, _) = w.dim();
        let mut out = Vec::new();
        for a in 0..dl {
            for b in 0..dr {
                let blk = Array2::from_shape_fn((2, 2), |(s, t)| w[[a, b, s, t]]);
                if blk.iter().any(|x| x.norm() > 0.0) {
                    out.push((a, b, blk));
                }
            }
        }
        out
    }

    /// Build from a bulk tensor by taking its first row on the left edge and
    /// its last column on the right edge.
    fn from_bulk(n: usize, bulk: impl Fn(usize) -> Array4<C64>) -> Mpo {
        let tensors = (0..n)
            .map(|site| {
                let w = bulk(site);
                let (d, _, _, _) = w.dim();
                let rows = if site == 0 { 0..1 } else { 0..d };
                let cols = if site == n - 1 { d - 1..d } else { 0..d };
                w.slice(ndarray::s![rows, cols, .., ..]).to_owned()
            })
            .collect();
        Mpo { tensors, fit: None }
    }

    /// `sum_l op_l`.
    pub fn sum_local(n: usize, op: &Array2<C64>) -> Mpo {
        Mpo::from_bulk(n, |_| {
            let mut w = Array4::zeros((2, 2, 2, 2));
            put(&mut w, 0, 0, &pauli_i(), 1.0);
            put(&mut w, 0, 1, op, 1.0);
            put(&mut w, 1, 1, &pauli_i(), 1.0);
            w
        })
    }

    /// `(sum_l op_l)^2`.
    pub fn sum_local_squared(n: usize, op: &Array2<C64>) -> Mpo {
        let op2 = op.dot(op);
        Mpo::from_bulk(n, |_| {
            let mut w = Array4::zeros((3, 3, 2, 2));
            put(&mut w, 0, 0, &pauli_i(), 1.0);
            put(&mut w, 0, 1, op, 2.0);
            put(&mut w, 0, 2, &op2, 1.0);
            put(&mut w, 1, 1, &pauli_i(), 1.0);
            put(&mut w, 1, 2, op, 1.0);
            put(&mut w, 2, 2, &pauli_i(), 1.0);
            w
        })
    }

    /// Dense contraction on the full `2^n` space, site 0 most significant.
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let n = self.len();
        if n > 12 {
            return Err(Error::TooLarge { what: "dense MPO contraction", n, max: 12 });
        }
        let mut acc: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), linalg::ONE)];
        for w in &self.tensors {
            let (dl, dr, _, _) = w.dim();
            let dim = acc[0].nrows() * 2;
            let mut next = vec![Array2::zeros((dim, dim)); dr];
            for a in 0..dl {
                for b in 0..dr {
                    let blk = Array2::from_shape_fn((2, 2), |(s, t)| w[[a, b, s, t]]);
                    if blk.iter().all(|x| x.norm() == 0.0) {
                        continue;
                    }
                    next[b] += &linalg::kron(&acc[a], &blk);
                }
            }
            acc = next;
        }
        Ok(acc.swap_remove(0))
    }
}

fn put(w: &mut Array4<C64>, a: usize, b: usize, op: &Array2<C64>, c: f64) {
    for s in 0..2 {
        for t in 0..2 {
            w[[a, b, s, t]] += op[[s, t]] * c;
        }
    }
}

/// MPO of the model Hamiltonian. Long-range couplings are carried by one
/// decaying channel per exponential term, so the bond dimension is `K + 2`;
/// nearest-neighbor models need a single channel (bond dimension 3).
pub fn build_mpo(spec: &ModelSpec, tol: f64) -> Result<Mpo> {
    spec.validate()?;
    let (terms, fit) = match spec.alpha {
        Alpha::NearestNeighbor => (vec![ExpTerm { weight: 1.0, rate: 0.0 }], None),
        Alpha::PowerLaw(a) => {
            let fit = fit_exponentials(Alpha::PowerLaw(a), spec.n, tol)?;
            (fit.terms.clone(), Some(fit))
        }
    };
    let scale = spec.coupling_scale()?;
    let (hz, hx) = spec.fields();
    let k = terms.len();
    let d = k + 2;
    let field = pauli_z() * C64::from(-hz) + pauli_x() * C64::from(-hx);
    let z = pauli_z();
    let id = pauli_i();
    let mut mpo = Mpo::from_bulk(spec.n, |_| {
        let mut w = Array4::zeros((d, d, 2, 2));
        put(&mut w, 0, 0, &id, 1.0);
        put(&mut w, d - 1, d - 1, &id, 1.0);
        put(&mut w, 0, d - 1, &field, 1.0);
        for (i, t) in terms.iter().enumerate() {
            put(&mut w, 0, i + 1, &z, -scale * t.weight);
            if t.rate != 0.0 {
                put(&mut w, i + 1, i + 1, &id, t.rate);
            }
            put(&mut w, i + 1, d - 1, &z, 1.0);
        }
        w
    });
    mpo.fit = fit;
    Ok(mpo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dense::dense_hamiltonian;

    fn rel_frobenius(a: &Array2<C64>, b: &Array2<f64>) -> f64 {
        let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let base: f64 = b.iter().map(|y| y * y).sum();
        (diff / base).sqrt()
    }

    #[test]
    fn bond_dimensions() {
        assert_eq!(build_mpo(&ModelSpec::tfim(6, 1.0, 0.5), 1e-8).unwrap().bond_dim(), 3);
        let sfim = ModelSpec::sfim(6, 1.0, 0.5, std::f64::consts::FRAC_PI_4);
        assert_eq!(build_mpo(&sfim, 1e-8).unwrap().bond_dim(), 3);
        let lr = build_mpo(&ModelSpec::power_law(20, 1.5, 1.0, 1.0), 1e-6).unwrap();
        assert_eq!(lr.bond_dim(), lr.fit.as_ref().unwrap().len() + 2);
        assert_eq!(lr.tensors[0].dim().0, 1);
        assert_eq!(lr.tensors[19].dim().1, 1);
    }

    #[test]
    fn contraction_matches_dense_for_all_families() {
        let specs = [
            ModelSpec::tfim(7, 1.1, 0.6),
            ModelSpec::sfim(7, 1.0, 0.9, 0.7),
            ModelSpec::power_law(8, 1.5, 1.0, 1.0),
            ModelSpec::power_law(8, 0.0, 1.0, 0.4),
            ModelSpec { kac: false, ..ModelSpec::power_law(6, 2.2, 0.5, 0.3) },
        ];
        for spec in specs {
            let tol = 1e-9;
            let mpo = build_mpo(&spec, tol).unwrap();
            let h = dense_hamiltonian(&spec).unwrap();
            let err = rel_frobenius(&mpo.to_dense().unwrap(), &h);
            assert!(err <= tol.max(1e-10), "{spec:?}: {err}");
        }
    }

    #[test]
    fn power_law_n10_matches_dense_to_fit_tolerance() {
        let spec = ModelSpec::power_law(10, 1.5, 1.0, 1.0);
        let mpo = build_mpo(&spec, 1e-6).unwrap();
        let err = rel_frobenius(&mpo.to_dense().unwrap(), &dense_hamiltonian(&spec).unwrap());
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn collective_operators() {
        let n = 4;
        let z = pauli_z();
        let s = Mpo::sum_local(n, &z).to_dense().unwrap();
        let s2 = Mpo::sum_local_squared(n, &z).to_dense().unwrap();
        let want = s.dot(&s);
        for (a, b) in s2.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((s[[0, 0]].re - 4.0).abs() < 1e-12);
    }
}
