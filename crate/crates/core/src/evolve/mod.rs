//! Real-time evolution: fourth-order TEBD for nearest-neighbor chains and
//! two-site TDVP for MPO Hamiltonians, behind one stepping interface.

pub mod quench;
mod tdvp;
pub mod tebd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::KrylovStats;
use crate::model::{build_mpo, ModelSpec};
use crate::mps::{Mps, DEFAULT_SVD_CUTOFF};

pub use quench::{run_quench, Observer, RecordOptions, Trajectory, WallTimes};
pub use tdvp::Tdvp2;
pub use tebd::Tebd4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tebd4,
    Tdvp2,
}

impl Scheme {
    /// TEBD where the couplings allow it, TDVP otherwise.
    pub fn natural_for(spec: &ModelSpec) -> Scheme {
        if spec.alpha.is_nearest_neighbor() {
            Scheme::Tebd4
        } else {
            Scheme::Tdvp2
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolverConfig {
    /// Time step in units of `1/J0`.
    pub dt: f64,
    pub chi_max: usize,
    /// Relative singular-value floor.
    pub svd_cutoff: f64,
    pub scheme: Scheme,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    /// Max abs error of the exponential fit behind power-law MPOs.
    pub fit_tol: f64,
}

impl Default for EvolverConfig {
    fn default() -> Self {
        EvolverConfig {
            dt: 0.01,
            chi_max: 32,
            svd_cutoff: DEFAULT_SVD_CUTOFF,
            scheme: Scheme::Tdvp2,
            krylov_dim: 30,
            krylov_tol: 1e-12,
            fit_tol: 1e-8,
        }
    }
}

impl EvolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.chi_max == 0 {
            return Err(Error::Config("chi_max must be at least 1".into()));
        }
        if !(self.svd_cutoff >= 0.0 && self.svd_cutoff < 1.0) {
            return Err(Error::Config(format!("svd_cutoff must lie in [0, 1), got {}", self.svd_cutoff)));
        }
        if self.krylov_dim < 3 {
            return Err(Error::Config(format!("krylov_dim must be at least 3, got {}", self.krylov_dim)));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::Config("krylov_tol must be positive".into()));
        }
        if !(self.fit_tol > 0.0) {
            return Err(Error::Config("fit_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one time step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    /// Sum of the relative discarded weights of every truncation in the step.
    pub discarded: f64,
    pub krylov: KrylovStats,
}

pub enum Engine {
    Tebd4(Tebd4),
    Tdvp2(Tdvp2),
}

impl Engine {
    pub fn new(spec: &ModelSpec, cfg: &EvolverConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        match cfg.scheme {
            Scheme::Tebd4 => Ok(Engine::Tebd4(Tebd4::new(spec, cfg)?)),
            Scheme::Tdvp2 => Ok(Engine::Tdvp2(Tdvp2::new(&build_mpo(spec, cfg.fit_tol)?, cfg)?)),
        }
    }

    pub fn step(&self, state: &mut Mps) -> Result<StepInfo> {
        match self {
            Engine::Tebd4(e) => e.step(state),
            Engine::Tdvp2(e) => e.step(state),
        }
    }
}
