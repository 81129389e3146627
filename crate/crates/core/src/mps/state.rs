use ndarray::{s, Array1, Array2, Array3, Axis};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};
use crate::model::dense::bloch_spinor;

pub const DEFAULT_SVD_CUTOFF: f64 = 1e-12;
pub const DENSE_MAX_SITES: usize = 24;

/// Which neighbor receives the singular values after a two-site update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Center ends on the right site.
    Right,
    /// Center ends on the left site.
    Left,
}

/// Open-boundary MPS in mixed canonical form. Site tensors have shape
/// `(chi_left, 2, chi_right)`; physical index 0 is spin up.
#[derive(Clone, Debug)]
pub struct Mps {
    pub(crate) tensors: Vec<Array3<C64>>,
    pub(crate) center: usize,
    chi_max: usize,
    svd_cutoff: f64,
}

impl Mps {
    /// Wrap raw site tensors, then canonicalize at site 0 and normalize.
    pub fn from_tensors(tensors: Vec<Array3<C64>>, chi_max: usize, svd_cutoff: f64) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        if chi_max == 0 {
            return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
        }
        let n = tensors.len();
        for (l, t) in tensors.iter().enumerate() {
            let (a, d, b) = t.dim();
            if d != 2 {
                return Err(Error::SizeMismatch(format!("site {l} has physical dimension {d}")));
            }
            if (l == 0 && a != 1) || (l == n - 1 && b != 1) {
                return Err(Error::SizeMismatch("boundary bonds must have dimension 1".into()));
            }
            if l + 1 < n && tensors[l + 1].dim().0 != b {
                return Err(Error::SizeMismatch(format!("bond {l} dimensions disagree")));
            }
        }
        let mut mps = Mps { tensors, center: n - 1, chi_max, svd_cutoff };
        mps.canonicalize(0)?;
        mps.normalize();
        Ok(mps)
    }

    /// Reassemble a state from trusted parts (snapshot loading).
    pub(crate) fn from_raw_parts(tensors: Vec<Array3<C64>>, center: usize, chi_max: usize, svd_cutoff: f64) -> Self {
        Mps { tensors, center, chi_max, svd_cutoff }
    }

    /// Every site in the single-qubit state with Bloch vector `dir`.
    pub fn product_state(n: usize, dir: [f64; 3], chi_max: usize) -> Result<Self> {
        let spinor = bloch_spinor(dir)?;
        Mps::product_from_spinors(&vec![spinor; n], chi_max)
    }

    pub fn product_from_spinors(spinors: &[[C64; 2]], chi_max: usize) -> Result<Self> {
        let tensors = spinors
            .iter()
            .map(|sp| Array3::from_shape_fn((1, 2, 1), |(_, s, _)| sp[s]))
            .collect();
        Mps::from_tensors(tensors, chi_max, DEFAULT_SVD_CUTOFF)
    }

    /// Gaussian tensor ensemble: i.i.d. standard complex normal entries with
    /// bond dimensions `min(chi, 2^l, 2^(n-l))`, then canonicalized.
    pub fn random(n: usize, chi: usize, seed: u64) -> Result<Self> {
        if chi == 0 || n == 0 {
            return Err(Error::InvalidArgument("random MPS needs n >= 1 and chi >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond = |b: usize| -> usize {
            // b counts sites to the left of the bond.
            if b == 0 || b == n {
                return 1;
            }
            let lim = b.min(n - b).min(62);
            chi.min(1usize << lim)
        };
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let tensors = (0..n)
            .map(|l| {
                Array3::from_shape_simple_fn((bond(l), 2, bond(l + 1)), || {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re * scale, im * scale)
                })
            })
            .collect();
        Mps::from_tensors(tensors, chi, DEFAULT_SVD_CUTOFF)
    }

    /// Exact MPS of a dense state vector, truncated to `chi_max`.
    pub fn from_dense(psi: &[C64], chi_max: usize, svd_cutoff: f64) -> Result<Self> {
        let dim = psi.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::SizeMismatch(format!("state length {dim} is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        let mut tensors = Vec::with_capacity(n);
        let mut rest = Array2::from_shape_vec((1, dim), psi.to_vec())?;
        for _ in 0..n - 1 {
            let chi = rest.nrows();
            let cols = rest.ncols() / 2;
            let m = rest.into_shape((chi * 2, cols))?;
            let (u, sv, vt) = linalg::svd(&m)?;
            let cut = linalg::cut_spectrum(&sv, chi_max, svd_cutoff);
            let k = cut.keep;
            tensors.push(u.slice(s![.., ..k]).to_owned().into_shape((chi, 2, k))?);
            let mut r = vt.slice(s![..k, ..]).to_owned();
            for (mut row, sv) in r.axis_iter_mut(Axis(0)).zip(sv.iter()) {
                row.mapv_inplace(|x| x * *sv);
            }
            rest = r;
        }
        let chi = rest.nrows();
        tensors.push(rest.into_shape((chi, 2, 1))?);
        let mut mps = Mps { tensors, center: n - 1, chi_max, svd_cutoff };
        mps.normalize();
        Ok(mps)
    }

    /// Full state vector, site 0 most significant.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let n = self.len();
        if n > DENSE_MAX_SITES {
            return Err(Error::TooLarge { what: "dense MPS contraction", n, max: DENSE_MAX_SITES });
        }
        let mut acc = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (a, _, b) = t.dim();
            let m = t.view().into_shape((a, 2 * b)).unwrap();
            let rows = acc.nrows();
            acc = acc.dot(&m).into_shape((rows * 2, b))?;
        }
        Ok(acc.into_raw_vec())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn svd_cutoff(&self) -> f64 {
        self.svd_cutoff
    }

    pub fn set_truncation(&mut self, chi_max: usize, svd_cutoff: f64) {
        self.chi_max = chi_max.max(1);
        self.svd_cutoff = svd_cutoff;
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    /// Dimensions of the `n - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().take(self.len() - 1).map(|t| t.dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Norm, read off the center tensor.
    pub fn norm(&self) -> f64 {
        self.tensors[self.center].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            self.tensors[self.center].mapv_inplace(|x| x / nrm);
        }
    }

    /// Bring the state into mixed canonical form around `center`, from
    /// scratch.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let n = self.len();
        if center >= n {
            return Err(Error::OutOfRange(format!("center {center} in a chain of {n} sites")));
        }
        for l in 0..center {
            self.shift_right(l)?;
        }
        for l in (center + 1..n).rev() {
            self.shift_left(l)?;
        }
        self.center = center;
        Ok(())
    }

    /// Move the orthogonality center, assuming the state is already in mixed
    /// canonical form.
    pub fn move_center(&mut self, to: usize) -> Result<()> {
        let n = self.len();
        if to >= n {
            return Err(Error::OutOfRange(format!("center {to} in a chain of {n} sites")));
        }
        while self.center < to {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > to {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    /// QR site `l`, push R into `l + 1`.
    fn shift_right(&mut self, l: usize) -> Result<()> {
        let (a, _, b) = self.tensors[l].dim();
        let m = self.tensors[l].view().into_shape((2 * a, b)).unwrap().to_owned();
        let (q, r) = linalg::qr(&m)?;
        let k = q.ncols();
        self.tensors[l] = q.into_shape((a, 2, k))?;
        let next = &self.tensors[l + 1];
        let (_, _, c) = next.dim();
        let nm = next.view().into_shape((b, 2 * c)).unwrap();
        self.tensors[l + 1] = r.dot(&nm).into_shape((k, 2, c))?;
        Ok(())
    }

    /// LQ site `l`, push L into `l - 1`.
    fn shift_left(&mut self, l: usize) -> Result<()> {
        let (a, _, b) = self.tensors[l].dim();
        let m = self.tensors[l].view().into_shape((a, 2 * b)).unwrap();
        let (q, r) = linalg::qr(&m.t().to_owned())?;
        let k = q.ncols();
        self.tensors[l] = q.t().as_standard_layout().to_owned().into_shape((k, 2, b))?;
        let prev = &self.tensors[l - 1];
        let (p, _, _) = prev.dim();
        let pm = prev.view().into_shape((2 * p, a)).unwrap();
        self.tensors[l - 1] = pm.dot(&r.t()).into_shape((p, 2, k))?;
        Ok(())
    }

    /// Largest deviation of `A^dagger A` (left) or `A A^dagger` (right) from
    /// the identity at `site`.
    pub fn isometry_defect(&self, site: usize, left: bool) -> f64 {
        let t = &self.tensors[site];
        let (a, _, b) = t.dim();
        let prod = if left {
            let m = t.view().into_shape((2 * a, b)).unwrap();
            linalg::dagger(&m).dot(&m)
        } else {
            let m = t.view().into_shape((a, 2 * b)).unwrap();
            m.dot(&linalg::dagger(&m))
        };
        prod.indexed_iter()
            .map(|((i, j), x)| (x - if i == j { ONE } else { ZERO }).norm())
            .fold(0.0, f64::max)
    }

    /// Largest isometry defect over all off-center sites.
    pub fn canonical_defect(&self) -> f64 {
        (0..self.len())
            .filter(|&l| l != self.center)
            .map(|l| self.isometry_defect(l, l < self.center))
            .fold(0.0, f64::max)
    }

    /// Schmidt values across `bond` (between sites `bond` and `bond + 1`),
    /// normalized so their squares sum to one.
    pub fn schmidt_values(&self, bond: usize) -> Result<Array1<f64>> {
        self.check_bond(bond)?;
        let mut work = self.clone();
        work.move_center(bond)?;
        let t = &work.tensors[bond];
        let (a, _, b) = t.dim();
        let (_, sv, _) = linalg::svd(&t.view().into_shape((2 * a, b)).unwrap().to_owned())?;
        let total = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(sv.mapv(|x| x / total))
    }

    fn check_bond(&self, bond: usize) -> Result<()> {
        if bond + 1 >= self.len() {
            return Err(Error::OutOfRange(format!("bond {bond} in a chain of {} sites", self.len())));
        }
        Ok(())
    }

    /// Entanglement entropy across `bond` in nats: Renyi-0 (`order = 0`) or
    /// von Neumann (`order = 1`).
    pub fn entanglement_entropy(&self, bond: usize, order: u32) -> Result<f64> {
        let sv = self.schmidt_values(bond)?;
        entropy_from_schmidt(&sv, order, self.svd_cutoff)
    }

    /// Von Neumann entropy of the left `floor(n/2)` sites.
    pub fn half_chain_entropy(&self) -> Result<f64> {
        let n = self.len();
        if n < 2 {
            return Ok(0.0);
        }
        self.entanglement_entropy(n / 2 - 1, 1)
    }

    /// SVD-compress every bond, sweeping left to right from a right-canonical
    /// state. Returns the summed relative discarded weight.
    pub fn truncate(&mut self, chi_max: usize, svd_cutoff: f64) -> Result<f64> {
        self.set_truncation(chi_max, svd_cutoff);
        self.move_center(0)?;
        let mut discarded = 0.0;
        for l in 0..self.len() - 1 {
            discarded += self.split_center(l, Sweep::Right)?;
        }
        Ok(discarded)
    }

    /// Compress the single bond `bond` to `chi_max` with everything else
    /// untouched. Returns the relative discarded weight.
    pub fn truncate_bond(&mut self, bond: usize, chi_max: usize, svd_cutoff: f64) -> Result<f64> {
        self.check_bond(bond)?;
        let (old_chi, old_cut) = (self.chi_max, self.svd_cutoff);
        self.set_truncation(chi_max, svd_cutoff);
        self.move_center(bond)?;
        let w = self.split_center(bond, Sweep::Right);
        self.set_truncation(old_chi, old_cut);
        w
    }

    /// SVD the center tensor at `l` across its right bond and absorb into
    /// `l + 1`. The center must sit on `l`.
    fn split_center(&mut self, l: usize, dir: Sweep) -> Result<f64> {
        debug_assert_eq!(self.center, l);
        let (a, _, b) = self.tensors[l].dim();
        let m = self.tensors[l].view().into_shape((2 * a, b)).unwrap().to_owned();
        let (u, sv, vt) = linalg::svd(&m)?;
        let cut = linalg::cut_spectrum(&sv, self.chi_max, self.svd_cutoff);
        let k = cut.keep;
        let kept = sv.slice(s![..k]);
        let nrm = kept.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut svt = vt.slice(s![..k, ..]).to_owned();
        for (mut row, x) in svt.axis_iter_mut(Axis(0)).zip(kept.iter()) {
            row.mapv_inplace(|v| v * (*x / nrm));
        }
        self.tensors[l] = u.slice(s![.., ..k]).to_owned().into_shape((a, 2, k))?;
        let next = &self.tensors[l + 1];
        let (_, _, c) = next.dim();
        let nm = next.view().into_shape((b, 2 * c)).unwrap();
        self.tensors[l + 1] = svt.dot(&nm).into_shape((k, 2, c))?;
        self.center = l + 1;
        if dir == Sweep::Left {
            self.move_center(l)?;
        }
        Ok(cut.discarded)
    }

    /// Two-site wavefunction on `(bond, bond + 1)` with shape
    /// `(chi_l, 4, chi_r)`, moving the center onto `bond` first.
    pub fn two_site_theta(&mut self, bond: usize) -> Result<Array3<C64>> {
        self.check_bond(bond)?;
        if self.center != bond && self.center != bond + 1 {
            self.move_center(bond)?;
        }
        let (a, _, m) = self.tensors[bond].dim();
        let (_, _, c) = self.tensors[bond + 1].dim();
        let left = self.tensors[bond].view().into_shape((2 * a, m)).unwrap();
        let right = self.tensors[bond + 1].view().into_shape((m, 2 * c)).unwrap();
        Ok(left.dot(&right).into_shape((a, 4, c))?)
    }

    /// Replace sites `(bond, bond + 1)` by the truncated SVD of `theta`.
    /// Returns the relative discarded weight; the state is renormalized.
    pub fn set_two_site(&mut self, bond: usize, theta: &Array3<C64>, dir: Sweep) -> Result<f64> {
        let (a, _, c) = theta.dim();
        let m = theta.view().into_shape((2 * a, 2 * c)).unwrap().to_owned();
        let (u, sv, vt) = linalg::svd(&m)?;
        let cut = linalg::cut_spectrum(&sv, self.chi_max, self.svd_cutoff);
        let k = cut.keep;
        let kept = sv.slice(s![..k]);
        let nrm = kept.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut u = u.slice(s![.., ..k]).to_owned();
        let mut vt = vt.slice(s![..k, ..]).to_owned();
        match dir {
            Sweep::Right => {
                for (mut row, x) in vt.axis_iter_mut(Axis(0)).zip(kept.iter()) {
                    row.mapv_inplace(|v| v * (*x / nrm));
                }
                self.center = bond + 1;
            }
            Sweep::Left => {
                for (mut col, x) in u.axis_iter_mut(Axis(1)).zip(kept.iter()) {
                    col.mapv_inplace(|v| v * (*x / nrm));
                }
                self.center = bond;
            }
        }
        self.tensors[bond] = u.into_shape((a, 2, k))?;
        self.tensors[bond + 1] = vt.into_shape((k, 2, c))?;
        Ok(cut.discarded)
    }

    /// Apply a 4x4 gate (basis `|s_bond s_bond+1>`) and truncate.
    pub fn apply_two_site(&mut self, bond: usize, gate: &Array2<C64>, dir: Sweep) -> Result<f64> {
        let theta = self.two_site_theta(bond)?;
        let (a, _, c) = theta.dim();
        let mut out = Array3::<C64>::zeros((a, 4, c));
        for i in 0..a {
            for k in 0..c {
                let v = [theta[[i, 0, k]], theta[[i, 1, k]], theta[[i, 2, k]], theta[[i, 3, k]]];
                for p in 0..4 {
                    out[[i, p, k]] = gate[[p, 0]] * v[0] + gate[[p, 1]] * v[1] + gate[[p, 2]] * v[2] + gate[[p, 3]] * v[3];
                }
            }
        }
        self.set_two_site(bond, &out, dir)
    }

    /// Apply a 2x2 operator to one site (no truncation needed).
    pub fn apply_one_site(&mut self, site: usize, op: &Array2<C64>) -> Result<()> {
        if site >= self.len() {
            return Err(Error::OutOfRange(format!("site {site}")));
        }
        let t = &self.tensors[site];
        let (a, _, b) = t.dim();
        self.tensors[site] = Array3::from_shape_fn((a, 2, b), |(i, s, k)| op[[s, 0]] * t[[i, 0, k]] + op[[s, 1]] * t[[i, 1, k]]);
        if site != self.center {
            // The isometry may be broken; re-gauge from scratch.
            let c = self.center;
            self.canonicalize(c)?;
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch(format!("overlap of {} and {} sites", self.len(), other.len())));
        }
        let mut env = Array2::from_elem((1, 1), ONE);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let (_, _, br) = b.dim();
            let (al, _, ar) = a.dim();
            let bl = b.dim().0;
            let bm = b.view().into_shape((bl, 2 * br)).unwrap();
            let t = env.dot(&bm).into_shape((al * 2, br))?;
            let am = a.view().into_shape((al * 2, ar)).unwrap();
            env = linalg::dagger(&am).dot(&t);
        }
        Ok(env[[0, 0]])
    }
}

pub fn entropy_from_schmidt(sv: &Array1<f64>, order: u32, cutoff: f64) -> Result<f64> {
    match order {
        0 => {
            let s0 = sv.iter().cloned().fold(0.0, f64::max);
            let count = sv.iter().filter(|&&x| x > cutoff * s0).count().max(1);
            Ok((count as f64).ln())
        }
        1 => Ok(sv
            .iter()
            .map(|x| x * x)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()),
        k => Err(Error::InvalidArgument(format!("Renyi order {k} not supported (0 or 1)"))),
    }
}
