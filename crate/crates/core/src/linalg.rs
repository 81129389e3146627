//! Dense linear algebra helpers shared by the tensor-network and exact code.
//!
//! Everything here is a thin layer over LAPACK (through `ndarray-linalg` or
//! direct `lapack-sys` calls where the high-level crate only exposes the slow
//! QR-iteration drivers).

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, SVD, UPLO, QR};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Reduced SVD `m = u · diag(s) · vt`, singular values descending.
pub fn svd(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    // gesdd occasionally fails to converge on nearly rank-deficient input;
    // gesvd is slower but more forgiving.
    match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok((u, s, vt)),
        _ => {
            let (u, s, vt) = m.svd(true, true)?;
            let (u, vt) = (u.unwrap(), vt.unwrap());
            let k = s.len();
            Ok((
                u.slice(s![.., ..k]).to_owned(),
                s,
                vt.slice(s![..k, ..]).to_owned(),
            ))
        }
    }
}

/// Outcome of cutting a singular-value spectrum.
#[derive(Clone, Copy, Debug)]
pub struct Cut {
    pub keep: usize,
    /// Discarded squared weight relative to the total squared weight.
    pub discarded: f64,
}

/// Keep at most `chi_max` singular values, then drop those below
/// `cutoff * s[0]`. At least one value is always kept.
pub fn cut_spectrum(s: &Array1<f64>, chi_max: usize, cutoff: f64) -> Cut {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if s.is_empty() || total == 0.0 {
        return Cut { keep: s.len().min(1), discarded: 0.0 };
    }
    let floor = cutoff * s[0];
    let mut keep = s.len().min(chi_max.max(1));
    while keep > 1 && s[keep - 1] <= floor {
        keep -= 1;
    }
    let discarded: f64 = s.iter().skip(keep).map(|x| x * x).sum::<f64>() / total;
    Cut { keep, discarded }
}

/// Thin QR of a tall or wide matrix; `q` has `min(rows, cols)` columns.
pub fn qr(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (q, r) = m.qr()?;
    let k = m.nrows().min(m.ncols());
    Ok((q.slice(s![.., ..k]).to_owned(), r.slice(s![..k, ..]).to_owned()))
}

fn lapack_char(c: u8) -> std::os::raw::c_char {
    c as std::os::raw::c_char
}

/// Eigen-decomposition of a real symmetric matrix with the divide-and-conquer
/// driver. Returns ascending eigenvalues and eigenvectors as columns.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (w, z) = syevd(a, true)?;
    Ok((w, z.unwrap()))
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn eigvalsh_real(a: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(syevd(a, false)?.0)
}

fn syevd(a: &Array2<f64>, vectors: bool) -> Result<(Array1<f64>, Option<Array2<f64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::SizeMismatch(format!("eigh of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), vectors.then(|| Array2::zeros((0, 0)))));
    }
    // Row-major storage of a symmetric matrix is its own column-major image.
    let mut buf: Vec<f64> = a.as_standard_layout().iter().copied().collect();
    let mut w = vec![0.0; n];
    let jobz = lapack_char(if vectors { b'V' } else { b'N' });
    let uplo = lapack_char(b'L');
    let ni = n as i32;
    let mut info = 0;
    let mut wq = [0.0f64];
    let mut iwq = [0i32];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            wq.as_mut_ptr(), &-1, iwq.as_mut_ptr(), &-1, &mut info,
        );
    }
    let lwork = wq[0] as i32;
    let liwork = iwq[0];
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd returned info = {info}")));
    }
    let vecs = vectors.then(|| {
        // Column-major eigenvectors read back row-major give V^T.
        Array2::from_shape_vec((n, n), buf).unwrap().reversed_axes().as_standard_layout().to_owned()
    });
    Ok((Array1::from(w), vecs))
}

/// Eigen-decomposition of a complex Hermitian matrix (small sizes).
pub fn eigh_herm(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (w, v) = a.eigh(UPLO::Lower)?;
    Ok((w, v))
}

/// `exp(-i tau H)` for a small real symmetric `H`.
pub fn expm_real_symmetric(h: &Array2<f64>, tau: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh_real(h)?;
    let n = w.len();
    let mut out = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let phase = C64::from_polar(1.0, -tau * w[k]);
        for i in 0..n {
            let vik = v[[i, k]] * phase;
            for j in 0..n {
                out[[i, j]] += vik * v[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn dagger(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

pub fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace of a square complex matrix.
pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Kronecker product of two square matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|x| x * aij));
        }
    }
    out
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), x) in m.indexed_iter() {
        worst = worst.max((x - m[[j, i]].conj()).norm());
    }
    worst
}

pub fn sum_axis0_sq(m: &Array2<C64>) -> Array1<f64> {
    m.mapv(|x| x.norm_sqr()).sum_axis(Axis(0))
}

/// Statistics of one Krylov exponential.
#[derive(Clone, Copy, Debug, Default)]
pub struct KrylovStats {
    pub matvecs: usize,
    pub splits: usize,
    pub residual: f64,
}

/// `exp(-i tau H) v` for a Hermitian operator given only through its action,
/// using Lanczos with full re-orthogonalization. If the subspace of size
/// `max_dim` does not reach `tol`, the step is split in halves (up to a
/// fixed depth) before giving up.
pub fn expm_krylov<F>(mut apply: F, v: &[C64], tau: f64, max_dim: usize, tol: f64) -> Result<(Vec<C64>, KrylovStats)>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let mut stats = KrylovStats::default();
    let out = expm_krylov_split(&mut apply, v, tau, max_dim.max(2), tol, 0, &mut stats)?;
    Ok((out, stats))
}

const MAX_SPLIT_DEPTH: usize = 8;

fn expm_krylov_split<F>(
    apply: &mut F,
    v: &[C64],
    tau: f64,
    max_dim: usize,
    tol: f64,
    depth: usize,
    stats: &mut KrylovStats,
) -> Result<Vec<C64>>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    match lanczos_expm(apply, v, tau, max_dim, tol, stats) {
        Ok(w) => Ok(w),
        Err(residual) if depth < MAX_SPLIT_DEPTH => {
            stats.splits += 1;
            let _ = residual;
            let half = expm_krylov_split(apply, v, tau / 2.0, max_dim, tol / 2.0, depth + 1, stats)?;
            expm_krylov_split(apply, &half, tau / 2.0, max_dim, tol / 2.0, depth + 1, stats)
        }
        Err(residual) => Err(Error::Krylov { residual, dim: max_dim, splits: stats.splits }),
    }
}

/// One Lanczos pass; on failure returns the achieved residual estimate.
fn lanczos_expm<F>(
    apply: &mut F,
    v: &[C64],
    tau: f64,
    max_dim: usize,
    tol: f64,
    stats: &mut KrylovStats,
) -> std::result::Result<Vec<C64>, f64>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let beta0 = norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return Ok(v.to_vec());
    }
    let len = v.len();
    let max_dim = max_dim.min(len.max(1));
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim + 1);
    basis.push(v.iter().map(|x| x / beta0).collect());
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut residual = f64::INFINITY;

    for j in 0..max_dim {
        let mut w = apply(&basis[j]);
        stats.matvecs += 1;
        let a = vdot(&basis[j], &w).re;
        alpha.push(a);
        // Full re-orthogonalization, applied twice for stability.
        for _ in 0..2 {
            for q in basis.iter() {
                let c = vdot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm(&w);
        let m = j + 1;
        let coeffs = tridiagonal_expm_first_column(&alpha, &beta, tau);
        let coeffs = match coeffs {
            Some(c) => c,
            None => return Err(f64::INFINITY),
        };
        // Happy breakdown: the subspace is invariant, result is exact.
        let breakdown = b <= 1e-13 * beta0.max(1.0) * alpha.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        residual = b * coeffs[m - 1].norm();
        if breakdown || residual <= tol || m == len {
            stats.residual = stats.residual.max(if breakdown { 0.0 } else { residual });
            let mut out = vec![ZERO; len];
            for (q, c) in basis.iter().zip(coeffs.iter()) {
                let c = c * beta0;
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += c * qi;
                }
            }
            return Ok(out);
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    Err(residual)
}

/// First column of `exp(-i tau T)` for the symmetric tridiagonal `T`.
fn tridiagonal_expm_first_column(alpha: &[f64], beta: &[f64], tau: f64) -> Option<Vec<C64>> {
    let m = alpha.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (w, v) = t.eigh(UPLO::Lower).ok()?;
    let mut out = vec![ZERO; m];
    for k in 0..m {
        let c = C64::from_polar(1.0, -tau * w[k]) * v[[0, k]];
        for i in 0..m {
            out[i] += c * v[[i, k]];
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cut_keeps_at_most_chi_and_reports_weight() {
        let s = array![0.8f64.sqrt(), 0.15f64.sqrt(), 0.05f64.sqrt()];
        let c = cut_spectrum(&s, 2, 1e-12);
        assert_eq!(c.keep, 2);
        assert!((c.discarded - 0.05).abs() < 1e-14);
        let c = cut_spectrum(&s, 10, 0.3);
        assert_eq!(c.keep, 2);
        let c = cut_spectrum(&s, 0, 0.0);
        assert_eq!(c.keep, 1);
    }

    #[test]
    fn syevd_reconstructs() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 1.5]];
        let (w, v) = eigh_real(&a).unwrap();
        let rebuilt = v.dot(&Array2::from_diag(&w)).dot(&v.t());
        for (x, y) in rebuilt.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(w[0] <= w[1] && w[1] <= w[2]);
        let w2 = eigvalsh_real(&a).unwrap();
        for (x, y) in w.iter().zip(w2.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        let n = 40;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            ((a * 1.3 + b * 0.7).sin() + if i == j { 0.5 * a } else { 0.0 }) / 3.0
        });
        let v: Vec<C64> = (0..n).map(|i| C64::new((i as f64).cos(), (i as f64 * 0.3).sin())).collect();
        let tau = 0.7;
        let dense = expm_real_symmetric(&h, tau).unwrap();
        let want = dense.dot(&Array1::from(v.clone()));
        let hc = h.mapv(C64::from);
        let (got, stats) = expm_krylov(
            |x| hc.dot(&Array1::from(x.to_vec())).to_vec(),
            &v,
            tau,
            30,
            1e-12,
        )
        .unwrap();
        assert!(stats.matvecs > 0);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn krylov_splits_when_subspace_too_small() {
        let n = 30;
        let h = Array2::from_shape_fn((n, n), |(i, j)| if i == j { i as f64 } else if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        let v: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.0)).collect();
        let want = expm_real_symmetric(&h, 1.0).unwrap().dot(&Array1::from(v.clone()));
        let hc = h.mapv(C64::from);
        let (got, stats) =
            expm_krylov(|x| hc.dot(&Array1::from(x.to_vec())).to_vec(), &v, 1.0, 10, 1e-10).unwrap();
        assert!(stats.splits > 0);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn qr_shapes_are_thin() {
        let m = Array2::from_shape_fn((6, 3), |(i, j)| C64::new((i + j) as f64, (i * j) as f64 * 0.1));
        let (q, r) = qr(&m).unwrap();
        assert_eq!(q.dim(), (6, 3));
        assert_eq!(r.dim(), (3, 3));
        let back = q.dot(&r);
        for (a, b) in back.iter().zip(m.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let w = m.t().to_owned();
        let (q, r) = qr(&w).unwrap();
        assert_eq!(q.dim(), (3, 3));
        assert_eq!(r.dim(), (3, 6));
    }
}
