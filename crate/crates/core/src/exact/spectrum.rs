//! Dense spectra, symmetry sectors and level statistics.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::quench::sha256_hex;
use crate::linalg;
use crate::model::dense::{site_mask, SpinHamiltonian, DENSE_MAX_SITES};
use crate::model::{dense_hamiltonian, ModelSpec};

/// Gaps below this are treated as exact degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors on the full `2^n` space as columns, when retained.
    #[serde(skip)]
    pub vectors: Option<Array2<f64>>,
    pub fingerprint: String,
    pub sector: String,
}

pub fn spec_fingerprint(spec: &ModelSpec) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(spec)?.as_bytes()))
}

/// Full diagonalization without symmetry resolution.
pub fn full_spectrum(spec: &ModelSpec, vectors: bool) -> Result<Spectrum> {
    let h = dense_hamiltonian(spec)?;
    let fingerprint = spec_fingerprint(spec)?;
    if vectors {
        let (e, v) = linalg::eigh_real(&h)?;
        Ok(Spectrum { energies: e.to_vec(), vectors: Some(v), fingerprint, sector: "full".into() })
    } else {
        Ok(Spectrum { energies: linalg::eigvalsh_real(&h)?.to_vec(), vectors: None, fingerprint, sector: "full".into() })
    }
}

/// Symmetries used to block-diagonalize: spatial reflection always, global
/// spin flip `prod_j X_j` when the model has it.
#[derive(Clone, Debug)]
pub struct SymmetrySectors {
    pub n: usize,
    pub spin_flip: bool,
    pub sectors: Vec<Sector>,
}

/// One block: orthonormal symmetric combinations of basis states.
#[derive(Clone, Debug)]
pub struct Sector {
    pub reflection: i8,
    /// `0` when spin flip is not resolved.
    pub parity: i8,
    /// Each basis vector as (basis index, amplitude) pairs.
    pub basis: Vec<Vec<(usize, f64)>>,
}

impl Sector {
    pub fn label(&self) -> String {
        let r = if self.reflection > 0 { "R+" } else { "R-" };
        match self.parity {
            0 => r.to_string(),
            p if p > 0 => format!("{r},P+"),
            _ => format!("{r},P-"),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Embed sector coefficients into the full space.
    pub fn embed(&self, coeffs: &[f64], full_dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; full_dim];
        for (c, v) in coeffs.iter().zip(&self.basis) {
            for &(i, a) in v {
                out[i] += c * a;
            }
        }
        out
    }
}

fn reflect(i: usize, n: usize) -> usize {
    let mut r = 0;
    for s in 0..n {
        r |= ((i >> s) & 1) << (n - 1 - s);
    }
    r
}

impl SymmetrySectors {
    pub fn new(n: usize, spin_flip: bool) -> Result<Self> {
        if n > DENSE_MAX_SITES {
            return Err(Error::TooLarge { what: "symmetry sectors", n, max: DENSE_MAX_SITES });
        }
        let dim = 1usize << n;
        let all = dim - 1;
        let group: Vec<(bool, bool)> = if spin_flip {
            vec![(false, false), (true, false), (false, true), (true, true)]
        } else {
            vec![(false, false), (true, false)]
        };
        let act = |i: usize, (r, p): (bool, bool)| {
            let j = if r { reflect(i, n) } else { i };
            if p { j ^ all } else { j }
        };
        let chars: Vec<(i8, i8)> = if spin_flip {
            vec![(1, 1), (1, -1), (-1, 1), (-1, -1)]
        } else {
            vec![(1, 0), (-1, 0)]
        };
        let mut sectors: Vec<Sector> =
            chars.iter().map(|&(r, p)| Sector { reflection: r, parity: p, basis: Vec::new() }).collect();
        for s in 0..dim {
            let orbit: Vec<usize> = group.iter().map(|&g| act(s, g)).collect();
            if orbit.iter().any(|&o| o < s) {
                continue;
            }
            for sec in sectors.iter_mut() {
                let mut amps: Vec<(usize, f64)> = Vec::with_capacity(4);
                for (&g, &img) in group.iter().zip(&orbit) {
                    let chi = (if g.0 { sec.reflection as f64 } else { 1.0 }) * (if g.1 { sec.parity as f64 } else { 1.0 });
                    match amps.iter_mut().find(|(i, _)| *i == img) {
                        Some(e) => e.1 += chi,
                        None => amps.push((img, chi)),
                    }
                }
                amps.retain(|(_, a)| a.abs() > 1e-12);
                if amps.is_empty() {
                    continue;
                }
                let nrm = amps.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
                amps.iter_mut().for_each(|(_, a)| *a /= nrm);
                amps.sort_by_key(|(i, _)| *i);
                sec.basis.push(amps);
            }
        }
        Ok(SymmetrySectors { n, spin_flip, sectors })
    }

    /// Symmetries of `spec`.
    pub fn for_spec(spec: &ModelSpec) -> Result<Self> {
        Self::new(spec.n, spec.has_spin_flip_symmetry())
    }

    /// Block of `H` in one sector, built from the matrix-free operator.
    pub fn block(&self, h: &SpinHamiltonian, sector: usize) -> Array2<f64> {
        let sec = &self.sectors[sector];
        let n = self.n;
        let dim = 1usize << n;
        let mut pos = vec![(usize::MAX, 0.0); dim];
        for (a, v) in sec.basis.iter().enumerate() {
            for &(i, c) in v {
                pos[i] = (a, c);
            }
        }
        let d = sec.dim();
        let mut m = Array2::zeros((d, d));
        for (b, v) in sec.basis.iter().enumerate() {
            for &(i, c) in v {
                // diagonal
                let (a, ca) = pos[i];
                m[[a, b]] += ca * h.diag[i] * c;
                if h.hx != 0.0 {
                    for s in 0..n {
                        let j = i ^ site_mask(s, n);
                        let (a, ca) = pos[j];
                        if a != usize::MAX {
                            m[[a, b]] -= ca * h.hx * c;
                        }
                    }
                }
            }
        }
        m
    }
}

/// Spectra of every symmetry sector of `spec`.
pub fn sector_spectra(spec: &ModelSpec, vectors: bool) -> Result<Vec<Spectrum>> {
    let sym = SymmetrySectors::for_spec(spec)?;
    let h = SpinHamiltonian::new(spec)?;
    let fingerprint = spec_fingerprint(spec)?;
    let full = 1usize << spec.n;
    let mut out = Vec::with_capacity(sym.sectors.len());
    for (k, sec) in sym.sectors.iter().enumerate() {
        if sec.dim() == 0 {
            continue;
        }
        let block = sym.block(&h, k);
        let (energies, vecs) = if vectors {
            let (e, v) = linalg::eigh_real(&block)?;
            let mut emb = Array2::zeros((full, e.len()));
            for c in 0..e.len() {
                let col = sec.embed(&v.column(c).to_vec(), full);
                emb.column_mut(c).assign(&Array1::from(col));
            }
            (e.to_vec(), Some(emb))
        } else {
            (linalg::eigvalsh_real(&block)?.to_vec(), None)
        };
        out.push(Spectrum { energies, vectors: vecs, fingerprint: fingerprint.clone(), sector: sec.label() });
    }
    Ok(out)
}

/// Collapse levels closer than [`DEGENERACY_TOL`].
pub fn merge_degenerate(energies: &[f64]) -> Vec<f64> {
    let mut e = energies.to_vec();
    e.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(e.len());
    for x in e {
        match out.last() {
            Some(&last) if x - last < DEGENERACY_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

/// Adjacent gap ratios `min(d_k, d_{k+1}) / max(d_k, d_{k+1})`.
pub fn gap_ratios(energies: &[f64]) -> Result<Vec<f64>> {
    let e = merge_degenerate(energies);
    if e.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} distinct levels, need at least 3", e.len())));
    }
    Ok(e.windows(3)
        .map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            a.min(b) / a.max(b)
        })
        .collect())
}

/// Mean adjacent gap ratio.
pub fn mean_gap_ratio(energies: &[f64]) -> Result<f64> {
    let r = gap_ratios(energies)?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorRatio {
    /// Mean over all ratios of all sectors.
    pub mean: f64,
    /// (label, mean ratio, number of ratios)
    pub per_sector: Vec<(String, f64, usize)>,
    pub convention: String,
}

/// Gap ratio computed inside every sector, pooled over sectors weighted by
/// their number of ratios.
pub fn sector_gap_ratio(spec: &ModelSpec) -> Result<SectorRatio> {
    let spectra = sector_spectra(spec, false)?;
    let mut per_sector = Vec::new();
    let mut total = 0.0;
    let mut count = 0;
    for s in &spectra {
        if let Ok(r) = gap_ratios(&s.energies) {
            total += r.iter().sum::<f64>();
            count += r.len();
            per_sector.push((s.sector.clone(), r.iter().sum::<f64>() / r.len() as f64, r.len()));
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no sector has three distinct levels".into()));
    }
    let convention = if spec.has_spin_flip_symmetry() { "reflection x spin-flip" } else { "reflection" };
    Ok(SectorRatio { mean: total / count as f64, per_sector, convention: convention.into() })
}

/// Eigenvalues of a GOE matrix `(A + A^T) / 2`, `A` with standard normal entries.
pub fn synthetic_goe(dim: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_simple_fn((dim, dim), || StandardNormal.sample(&mut rng));
    let h = (&a + &a.t()) * 0.5;
    Ok(linalg::eigvalsh_real(&h)?.to_vec())
}

/// Levels with i.i.d. exponential gaps.
pub fn synthetic_poisson(levels: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = 0.0;
    (0..levels)
        .map(|_| {
            let g: f64 = Exp1.sample(&mut rng);
            e += g;
            e
        })
        .collect()
}

/// How eigenvectors are chosen inside degenerate subspaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenBasis {
    /// Whatever the dense solver returns on the full space.
    Full,
    /// Simultaneous eigenvectors of `H` and its symmetries.
    Sectors,
}

/// Von Neumann entropy of the left `n / 2` sites of a real state vector.
pub fn half_chain_entropy_dense(psi: &[f64], n: usize) -> Result<f64> {
    if psi.len() != 1usize << n {
        return Err(Error::SizeMismatch(format!("vector of {} for {n} sites", psi.len())));
    }
    let left = n / 2;
    let rows = 1usize << left;
    let cols = 1usize << (n - left);
    let m = Array2::from_shape_fn((rows, cols), |(i, j)| C64::new(psi[i * cols + j], 0.0));
    let (_, s, _) = linalg::svd(&m)?;
    let tot: f64 = s.iter().map(|x| x * x).sum();
    Ok(s.iter()
        .map(|x| x * x / tot)
        .filter(|p| *p > 1e-300)
        .map(|p| -p * p.ln())
        .sum())
}

/// `(E_k, S_1)` of the left half for every eigenvector, sorted by energy.
pub fn eigenvector_entropy_profile(spec: &ModelSpec, basis: EigenBasis) -> Result<Vec<(f64, f64)>> {
    let n = spec.n;
    let spectra = match basis {
        EigenBasis::Full => vec![full_spectrum(spec, true)?],
        EigenBasis::Sectors => sector_spectra(spec, true)?,
    };
    let mut out = Vec::new();
    for s in &spectra {
        let v = s.vectors.as_ref().expect("vectors retained");
        for (k, e) in s.energies.iter().enumerate() {
            out.push((*e, half_chain_entropy_dense(&v.column(k).to_vec(), n)?));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Median of the entropies of the middle `fraction` of the spectrum.
pub fn bulk_median_entropy(profile: &[(f64, f64)], fraction: f64) -> f64 {
    let m = profile.len();
    let skip = ((1.0 - fraction) / 2.0 * m as f64).floor() as usize;
    let mut s: Vec<f64> = profile[skip..m - skip].iter().map(|p| p.1).collect();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 { s[k / 2] } else { 0.5 * (s[k / 2 - 1] + s[k / 2]) }
}
