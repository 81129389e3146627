//! Declarative sweeps: a TOML configuration names an experiment kind and
//! the grid of models, bond dimensions and fields to run. Every grid point
//! writes its own tables; the run ends with a summary and a manifest.

mod output;
mod run;

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{EvolverConfig, Scheme};
use crate::exact::spectrum::EigenBasis;
use crate::fss::{Ansatz, ParamBounds};
use crate::model::{Alpha, ModelSpec};

pub use output::{FailureEntry, FileEntry, Manifest};
pub use run::{compare_oracle, run_experiment, RunReport};

/// Overrides the worker cap of every configuration.
pub const WORKERS_ENV: &str = "ISING_QUENCH_WORKERS";
/// Prefix for relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "ISING_QUENCH_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Long-time averaged order parameters against the field.
    DqptSweep,
    /// Correlation profiles and correlation lengths.
    CzzQuench,
    /// Level statistics and eigenvector entropies.
    ChaosSpectrum,
    /// Collective-spin limit and its semiclassical counterpart.
    LmgBenchmark,
    /// Scaling collapse of previously written trajectories.
    FssCollapse,
    /// MPS against the free-fermion solution.
    OracleCompare,
}

/// A scalar or a list in the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(x) => vec![x.clone()],
            Sweep::Many(v) => v.clone(),
        }
    }

    fn is_empty(&self) -> bool {
        matches!(self, Sweep::Many(v) if v.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSweep {
    pub n: Sweep<usize>,
    #[serde(default = "nearest_neighbor")]
    pub alpha: Alpha,
    #[serde(default = "one")]
    pub j0: f64,
    /// Field in units of `J0`.
    pub b: Sweep<f64>,
    #[serde(default = "transverse")]
    pub theta: Sweep<f64>,
    #[serde(default)]
    pub kac: bool,
}

fn nearest_neighbor() -> Alpha {
    Alpha::NearestNeighbor
}

fn one() -> f64 {
    1.0
}

fn transverse() -> Sweep<f64> {
    Sweep::One(FRAC_PI_2)
}

/// Evolver settings; `chi` may be swept. Unset fields take the
/// [`EvolverConfig`] defaults, an unset scheme the natural one for the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolverSweep {
    pub chi: Option<Sweep<usize>>,
    pub dt: Option<f64>,
    pub svd_cutoff: Option<f64>,
    pub scheme: Option<Scheme>,
    pub krylov_dim: Option<usize>,
    pub krylov_tol: Option<f64>,
    pub fit_tol: Option<f64>,
}

impl EvolverSweep {
    pub fn chis(&self) -> Vec<usize> {
        match &self.chi {
            Some(c) => c.values(),
            None => vec![EvolverConfig::default().chi_max],
        }
    }

    pub fn config(&self, spec: &ModelSpec, chi: usize) -> EvolverConfig {
        let d = EvolverConfig::default();
        EvolverConfig {
            dt: self.dt.unwrap_or(d.dt),
            chi_max: chi,
            svd_cutoff: self.svd_cutoff.unwrap_or(d.svd_cutoff),
            scheme: self.scheme.unwrap_or_else(|| Scheme::natural_for(spec)),
            krylov_dim: self.krylov_dim.unwrap_or(d.krylov_dim),
            krylov_tol: self.krylov_tol.unwrap_or(d.krylov_tol),
            fit_tol: self.fit_tol.unwrap_or(d.fit_tol),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverKind {
    /// Largest bond dimension after every step.
    BondDims,
    /// Final MPS as a binary snapshot.
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub t_final: f64,
    /// Bloch vector of the initial product state.
    pub initial: [f64; 3],
    pub czz_lmax: usize,
    /// Largest separation in correlation-length fits.
    pub l_fit_max: usize,
    /// Points in the parabola fit around a minimum.
    pub window: usize,
    /// Interval between oracle comparisons.
    pub compare_dt: f64,
    /// Middle fraction of the spectrum for the bulk entropy median.
    pub bulk_fraction: f64,
    pub basis: EigenBasis,
    pub observers: Vec<ObserverKind>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            t_final: 5.0,
            initial: [0.0, 0.0, 1.0],
            czz_lmax: 0,
            l_fit_max: 6,
            window: 7,
            compare_dt: 0.1,
            bulk_fraction: 0.5,
            basis: EigenBasis::Sectors,
            observers: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSection {
    /// CSV with `label,path[,column,control,error]` rows.
    pub manifest: PathBuf,
    pub ansatz: Ansatz,
    #[serde(default = "default_error")]
    pub default_error: f64,
    /// `[B_c, nu, beta]`
    pub init: [f64; 3],
    pub bounds: ParamBounds,
    #[serde(default)]
    pub min_label: Option<f64>,
    #[serde(default)]
    pub control_window: Option<(f64, f64)>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_max_eval")]
    pub max_eval: usize,
}

fn default_error() -> f64 {
    1e-3
}

fn default_replicas() -> usize {
    200
}

fn default_grid() -> usize {
    3
}

fn default_max_eval() -> usize {
    3000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelSweep>,
    #[serde(default)]
    pub evolver: EvolverSweep,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub collapse: Option<CollapseSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        // manifests are resolved next to the configuration
        if let Some(c) = cfg.collapse.as_mut() {
            if c.manifest.is_relative() {
                c.manifest = path.parent().unwrap_or(Path::new(".")).join(&c.manifest);
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(c) = &self.evolver.chi {
            if c.is_empty() {
                return Err(Error::Config("evolver.chi is an empty sweep list".into()));
            }
            if c.values().contains(&0) {
                return Err(Error::Config("evolver.chi must be positive".into()));
            }
        }
        if self.kind == ExperimentKind::FssCollapse {
            let c = self.collapse.as_ref().ok_or_else(|| Error::Config("fss-collapse needs a [collapse] section".into()))?;
            if !(c.default_error > 0.0) {
                return Err(Error::Config("collapse.default_error must be positive".into()));
            }
            return Ok(());
        }
        let m = self.model.as_ref().ok_or_else(|| Error::Config(format!("{:?} needs a [model] section", self.kind)))?;
        for (name, empty) in [("model.n", m.n.is_empty()), ("model.b", m.b.is_empty()), ("model.theta", m.theta.is_empty())] {
            if empty {
                return Err(Error::Config(format!("{name} is an empty sweep list")));
            }
        }
        for spec in self.specs()? {
            spec.validate()?;
        }
        if !(self.run.t_final > 0.0) {
            return Err(Error::Config("run.t_final must be positive".into()));
        }
        let norm: f64 = self.run.initial.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("run.initial must be a unit vector, norm {norm}")));
        }
        if !(self.run.compare_dt > 0.0) {
            return Err(Error::Config("run.compare_dt must be positive".into()));
        }
        if !(self.run.bulk_fraction > 0.0 && self.run.bulk_fraction <= 1.0) {
            return Err(Error::Config("run.bulk_fraction must be in (0, 1]".into()));
        }
        if matches!(self.kind, ExperimentKind::OracleCompare | ExperimentKind::CzzQuench) && self.run.czz_lmax == 0 {
            return Err(Error::Config("run.czz_lmax must be positive for correlation runs".into()));
        }
        if self.kind == ExperimentKind::OracleCompare {
            for spec in self.specs()? {
                if !(spec.alpha.is_nearest_neighbor() && !spec.kac && spec.has_spin_flip_symmetry()) {
                    return Err(Error::Config("oracle-compare needs a nearest-neighbor transverse-field model".into()));
                }
            }
            if (self.run.initial[0] - 1.0).abs() > 1e-12 {
                return Err(Error::Config("oracle-compare starts from the +x product state".into()));
            }
        }
        if self.kind == ExperimentKind::LmgBenchmark && (m.initial_is_not_up(&self.run) || !m.alpha_is_zero()) {
            return Err(Error::Config("lmg-benchmark uses alpha = 0 and the +z initial state".into()));
        }
        Ok(())
    }

    /// Model grid in `(n, theta, b)` order.
    pub fn specs(&self) -> Result<Vec<ModelSpec>> {
        let m = self.model.as_ref().ok_or_else(|| Error::Config("no [model] section".into()))?;
        let mut out = Vec::new();
        for n in m.n.values() {
            for theta in m.theta.values() {
                for b in m.b.values() {
                    out.push(ModelSpec { n, alpha: m.alpha, j0: m.j0, b: b * m.j0, theta, kac: m.kac });
                }
            }
        }
        Ok(out)
    }

    /// Output directory after applying [`OUTPUT_ROOT_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output.is_relative() => PathBuf::from(root).join(&self.output),
            _ => self.output.clone(),
        }
    }

    /// Worker cap after applying [`WORKERS_ENV`]; `None` leaves rayon's default.
    pub fn worker_cap(&self) -> Result<Option<usize>> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(k) if k > 0 => Ok(Some(k)),
                _ => Err(Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(self.workers),
        }
    }
}

impl ModelSweep {
    fn initial_is_not_up(&self, run: &RunOptions) -> bool {
        (run.initial[2] - 1.0).abs() > 1e-12
    }

    fn alpha_is_zero(&self) -> bool {
        self.alpha == Alpha::PowerLaw(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DQPT: &str = r#"
kind = "dqpt-sweep"
output = "out"
[model]
n = 8
alpha = 1.5
kac = true
b = [0.8, 1.0]
[evolver]
chi = [4, 8]
dt = 0.05
[run]
t_final = 0.5
"#;

    #[test]
    fn parses_and_expands_grid() {
        let cfg = ExperimentConfig::from_toml(DQPT).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::DqptSweep);
        let specs = cfg.specs().unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].b, 1.0);
        assert_eq!(cfg.evolver.chis(), vec![4, 8]);
        assert_eq!(cfg.evolver.config(&specs[0], 4).scheme, Scheme::Tdvp2);
        assert_eq!(cfg.run.initial, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let bad = DQPT.replace("b = [0.8, 1.0]", "b = []");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = DQPT.replace("chi = [4, 8]", "chi = []");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = DQPT.replace("n = 8", "n = 8\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn oracle_compare_requires_a_free_fermion_model() {
        let text = r#"
kind = "oracle-compare"
output = "out"
[model]
n = 8
alpha = 1.5
b = 1.0
[run]
initial = [1.0, 0.0, 0.0]
czz_lmax = 3
"#;
        assert!(ExperimentConfig::from_toml(text).is_err());
        let ok = text.replace("alpha = 1.5\n", "");
        assert!(ExperimentConfig::from_toml(&ok).is_ok());
    }
}
