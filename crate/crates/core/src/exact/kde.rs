//! Energy-density profile of a product state: eigenbasis populations
//! smoothed with Gaussian kernels.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::dense::{bloch_spinor, product_vector, SpinHamiltonian, DENSE_MAX_SITES};
use crate::model::ModelSpec;

use super::spectrum::SymmetrySectors;

/// Eigenvalues with their populations `|<E_k|psi>|^2`.
#[derive(Clone, Debug)]
pub struct Populations {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Populations {
    pub fn mean(&self) -> f64 {
        self.energies.iter().zip(&self.weights).map(|(e, w)| e * w).sum::<f64>() / self.total()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        let v = self.energies.iter().zip(&self.weights).map(|(e, w)| w * (e - m).powi(2)).sum::<f64>() / self.total();
        v.max(0.0).sqrt()
    }

    /// Kish effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_size(&self) -> f64 {
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        self.total().powi(2) / s2
    }

    /// Weighted quantile with the step-function CDF.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut idx: Vec<usize> = (0..self.energies.len()).collect();
        idx.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        let target = q * self.total();
        let mut acc = 0.0;
        for &i in &idx {
            acc += self.weights[i];
            if acc >= target {
                return self.energies[i];
            }
        }
        self.energies[*idx.last().expect("non-empty")]
    }

    fn mean_level_spacing(&self) -> f64 {
        let lo = self.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / (self.energies.len().max(2) - 1) as f64
    }
}

/// Eigenbasis populations of `psi`, diagonalizing symmetry blocks.
pub fn eigen_populations(spec: &ModelSpec, psi: &[C64]) -> Result<Populations> {
    let n = spec.n;
    if n > DENSE_MAX_SITES {
        return Err(Error::TooLarge { what: "energy density profile", n, max: DENSE_MAX_SITES });
    }
    if psi.len() != 1usize << n {
        return Err(Error::SizeMismatch(format!("vector of {} for {n} sites", psi.len())));
    }
    let sym = SymmetrySectors::for_spec(spec)?;
    let h = SpinHamiltonian::new(spec)?;
    let mut energies = Vec::with_capacity(psi.len());
    let mut weights = Vec::with_capacity(psi.len());
    for (k, sec) in sym.sectors.iter().enumerate() {
        if sec.dim() == 0 {
            continue;
        }
        let c: Vec<C64> = sec.basis.iter().map(|v| v.iter().map(|&(i, a)| psi[i] * a).sum()).collect();
        let (e, vecs) = linalg::eigh_real(&sym.block(&h, k))?;
        for (col, ek) in e.iter().enumerate() {
            let amp: C64 = vecs.column(col).iter().zip(&c).map(|(v, ci)| ci * v).sum();
            energies.push(*ek);
            weights.push(amp.norm_sqr());
        }
    }
    Ok(Populations { energies, weights })
}

/// Smoothed density of eigenbasis populations on a uniform grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KdeCurve {
    #[serde(skip)]
    pub grid: Vec<f64>,
    #[serde(skip)]
    pub density: Vec<f64>,
    pub range: (f64, f64),
    pub points: usize,
    pub bandwidth: f64,
    /// How the bandwidth was chosen: `silverman`, `std` or `level_spacing`.
    pub bandwidth_rule: String,
    pub mean_energy: f64,
    pub effective_size: f64,
}

impl KdeCurve {
    /// Trapezoid integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid.windows(2).zip(self.density.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
    }

    /// Writes `stem.csv` (energy, density) and `stem.json` with the grid metadata.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        w.write_record(["energy", "density"])?;
        for (x, y) in self.grid.iter().zip(&self.density) {
            w.write_record([format!("{x:.12e}"), format!("{y:.12e}")])?;
        }
        w.flush()?;
        let mut f = std::fs::File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Gaussian KDE of weighted samples with Silverman's bandwidth
/// `0.9 min(std, IQR/1.34) m^(-1/5)`, `m` the effective sample size.
pub fn weighted_kde(pop: &Populations) -> Result<KdeCurve> {
    if pop.energies.is_empty() || !(pop.total() > 0.0) {
        return Err(Error::InvalidArgument("no populated levels".into()));
    }
    let m = pop.effective_size();
    let std = pop.std();
    let iqr = pop.quantile(0.75) - pop.quantile(0.25);
    let spread = std.min(iqr / 1.34);
    let (spread, rule) = if spread > 0.0 {
        (spread, "silverman")
    } else if std > 0.0 {
        (std, "std")
    } else {
        (pop.mean_level_spacing(), "level_spacing")
    };
    let h = 0.9 * spread * m.powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("degenerate bandwidth".into()));
    }
    let lo = pop.energies.iter().cloned().fold(f64::INFINITY, f64::min) - 8.0 * h;
    let hi = pop.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 8.0 * h;
    let points = ((hi - lo) / (0.25 * h)).ceil() as usize + 1;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (pop.total() * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|x| {
            pop.energies
                .iter()
                .zip(&pop.weights)
                .map(|(e, w)| w * (-0.5 * ((x - e) / h).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        range: (lo, hi),
        points,
        bandwidth: h,
        bandwidth_rule: rule.into(),
        mean_energy: pop.mean(),
        effective_size: m,
    })
}

/// Energy-density profile of the product state pointing along `direction`.
pub fn energy_density_profile(spec: &ModelSpec, direction: [f64; 3]) -> Result<KdeCurve> {
    spec.validate()?;
    if spec.n > DENSE_MAX_SITES {
        return Err(Error::TooLarge { what: "energy density profile", n: spec.n, max: DENSE_MAX_SITES });
    }
    let psi = product_vector(spec.n, bloch_spinor(direction)?);
    weighted_kde(&eigen_populations(spec, &psi)?)
}
