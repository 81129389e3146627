use ndarray::{Array3, ArrayView2};
use num_complex::Complex64 as C64;

use super::{EvolverConfig, StepInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, KrylovStats};
use crate::model::mpo::{Mpo, SparseSite};
use crate::mps::env::{extend_left, extend_right, trivial_env};
use crate::mps::{Mps, Sweep};

/// Two-site TDVP with a symmetric (left-to-right, right-to-left) sweep per
/// step; each half sweep advances by `dt / 2`.
pub struct Tdvp2 {
    sites: Vec<SparseSite>,
    ops: Vec<Vec<Entry>>,
    dims: Vec<(usize, usize)>,
    dt: f64,
    krylov_dim: usize,
    krylov_tol: f64,
}

impl Tdvp2 {
    pub fn new(mpo: &Mpo, cfg: &EvolverConfig) -> Result<Self> {
        let sites: Vec<SparseSite> = (0..mpo.len()).map(|l| mpo.sparse_site(l)).collect();
        let ops = sites.iter().map(entries).collect();
        let dims = mpo.tensors.iter().map(|w| (w.dim().0, w.dim().1)).collect();
        Ok(Tdvp2 { sites, ops, dims, dt: cfg.dt, krylov_dim: cfg.krylov_dim, krylov_tol: cfg.krylov_tol })
    }

    pub fn step(&self, state: &mut Mps) -> Result<StepInfo> {
        let n = state.len();
        if n != self.sites.len() {
            return Err(Error::SizeMismatch(format!("MPS of {n} sites, MPO of {}", self.sites.len())));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("TDVP needs at least two sites".into()));
        }
        let tau = self.dt / 2.0;
        let mut info = StepInfo::default();
        state.move_center(0)?;
        let mut lenv: Vec<Array3<C64>> = vec![trivial_env(); n];
        let mut renv: Vec<Array3<C64>> = vec![trivial_env(); n];
        for l in (1..n).rev() {
            renv[l - 1] = extend_right(&renv[l], &state.tensors[l], &self.sites[l], self.dims[l].0);
        }

        for i in 0..n - 1 {
            let theta = state.two_site_theta(i)?;
            let theta = self.evolve_two(&lenv[i], &renv[i + 1], i, &theta, tau, &mut info.krylov)?;
            info.discarded += state.set_two_site(i, &theta, Sweep::Right)?;
            lenv[i + 1] = extend_left(&lenv[i], &state.tensors[i], &self.sites[i], self.dims[i].1);
            if i + 1 < n - 1 {
                let a = state.tensors[i + 1].clone();
                state.tensors[i + 1] = self.evolve_one(&lenv[i + 1], &renv[i + 1], i + 1, &a, -tau, &mut info.krylov)?;
            }
        }
        for i in (0..n - 1).rev() {
            let theta = state.two_site_theta(i)?;
            let theta = self.evolve_two(&lenv[i], &renv[i + 1], i, &theta, tau, &mut info.krylov)?;
            info.discarded += state.set_two_site(i, &theta, Sweep::Left)?;
            renv[i] = extend_right(&renv[i + 1], &state.tensors[i + 1], &self.sites[i + 1], self.dims[i + 1].0);
            if i > 0 {
                let a = state.tensors[i].clone();
                state.tensors[i] = self.evolve_one(&lenv[i], &renv[i], i, &a, -tau, &mut info.krylov)?;
            }
        }
        state.normalize();
        Ok(info)
    }

    fn evolve_two(
        &self,
        l: &Array3<C64>,
        r: &Array3<C64>,
        i: usize,
        theta: &Array3<C64>,
        tau: f64,
        stats: &mut KrylovStats,
    ) -> Result<Array3<C64>> {
        let shape = theta.dim();
        let v: Vec<C64> = theta.iter().copied().collect();
        let (w, s) = linalg::expm_krylov(
            |x| apply_heff2(l, r, &self.ops[i], &self.ops[i + 1], self.dims[i].1, shape, x),
            &v,
            tau,
            self.krylov_dim,
            self.krylov_tol,
        )?;
        merge(stats, s);
        Ok(Array3::from_shape_vec(shape, w)?)
    }

    fn evolve_one(
        &self,
        l: &Array3<C64>,
        r: &Array3<C64>,
        i: usize,
        a: &Array3<C64>,
        tau: f64,
        stats: &mut KrylovStats,
    ) -> Result<Array3<C64>> {
        let shape = a.dim();
        let v: Vec<C64> = a.iter().copied().collect();
        let (w, s) = linalg::expm_krylov(
            |x| apply_heff1(l, r, &self.ops[i], self.dims[i].1, shape, x),
            &v,
            tau,
            self.krylov_dim,
            self.krylov_tol,
        )?;
        merge(stats, s);
        Ok(Array3::from_shape_vec(shape, w)?)
    }
}

fn merge(acc: &mut KrylovStats, s: KrylovStats) {
    acc.matvecs += s.matvecs;
    acc.splits += s.splits;
    acc.residual = acc.residual.max(s.residual);
}

/// One nonzero matrix element `W[wi, wo][sp, s]` of an MPO site.
#[derive(Clone, Copy)]
struct Entry {
    wi: usize,
    wo: usize,
    sp: usize,
    s: usize,
    c: C64,
}

fn entries(site: &SparseSite) -> Vec<Entry> {
    let mut out = Vec::new();
    for (wi, wo, op) in site {
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[[sp, s]];
                if c.norm() != 0.0 {
                    out.push(Entry { wi: *wi, wo: *wo, sp, s, c });
                }
            }
        }
    }
    out
}

/// Apply MPO entries to the physical axis of `t[w, pre, s, post]`. The
/// result is laid out as `[w', pre, s', post]`, or as `[pre, s', w', post]`
/// when `w_inner` is set.
fn apply_site(t: &[C64], pre: usize, post: usize, ops: &[Entry], d_out: usize, w_inner: bool) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d_out * pre * 2 * post];
    for e in ops {
        for p in 0..pre {
            let src = &t[((e.wi * pre + p) * 2 + e.s) * post..][..post];
            let off = if w_inner { ((p * 2 + e.sp) * d_out + e.wo) * post } else { ((e.wo * pre + p) * 2 + e.sp) * post };
            let dst = &mut out[off..off + post];
            if e.c.im == 0.0 {
                let c = e.c.re;
                for (d, x) in dst.iter_mut().zip(src) {
                    d.re += c * x.re;
                    d.im += c * x.im;
                }
            } else {
                for (d, x) in dst.iter_mut().zip(src) {
                    *d += e.c * x;
                }
            }
        }
    }
    out
}

/// Effective two-site Hamiltonian on `theta[a, (s1 s2), b]`.
#[allow(clippy::too_many_arguments)]
fn apply_heff2(
    l: &Array3<C64>,
    r: &Array3<C64>,
    w1: &[Entry],
    w2: &[Entry],
    d_mid: usize,
    shape: (usize, usize, usize),
    x: &[C64],
) -> Vec<C64> {
    let (chi_l, _, chi_r) = shape;
    let (d_l, _, _) = l.dim();
    let d_r = r.dim().0;
    let theta = ArrayView2::from_shape((chi_l, 4 * chi_r), x).unwrap();
    let lm = l.view().into_shape((d_l * chi_l, chi_l)).unwrap();
    // [w, a', s1, (s2 b)]
    let t1 = lm.dot(&theta);
    let t1 = t1.as_slice().unwrap();
    // [w', (a' s1'), s2, b]
    let t2 = apply_site(t1, chi_l, 2 * chi_r, w1, d_mid, false);
    // [(a' s1'), s2', w'', b]
    let t3 = apply_site(&t2, 2 * chi_l, chi_r, w2, d_r, true);
    let t3 = ArrayView2::from_shape((4 * chi_l, d_r * chi_r), &t3).unwrap();
    let rm = r.view().into_shape((d_r * chi_r, chi_r)).unwrap();
    t3.dot(&rm).into_raw_vec()
}

/// Effective one-site Hamiltonian on `a[a, s, b]`.
fn apply_heff1(l: &Array3<C64>, r: &Array3<C64>, w: &[Entry], d_out: usize, shape: (usize, usize, usize), x: &[C64]) -> Vec<C64> {
    let (chi_l, _, chi_r) = shape;
    let d_l = l.dim().0;
    let a = ArrayView2::from_shape((chi_l, 2 * chi_r), x).unwrap();
    let lm = l.view().into_shape((d_l * chi_l, chi_l)).unwrap();
    let t1 = lm.dot(&a);
    let t2 = apply_site(t1.as_slice().unwrap(), chi_l, chi_r, w, d_out, true);
    let t2 = ArrayView2::from_shape((2 * chi_l, d_out * chi_r), &t2).unwrap();
    let rm = r.view().into_shape((d_out * chi_r, chi_r)).unwrap();
    t2.dot(&rm).into_raw_vec()
}
