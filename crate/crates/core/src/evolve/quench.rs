use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Engine, EvolverConfig, StepInfo};
use crate::error::{Error, Result};
use crate::linalg::KrylovStats;
use crate::model::ModelSpec;
use crate::mps::Mps;
use crate::observables::{collective_z, collective_zz, czz_profile, ObservableSeries, Sample};

/// Callback run on every sample, including `t0`.
pub trait Observer {
    fn name(&self) -> &str;
    fn observe(&mut self, t: f64, state: &Mps, info: &StepInfo) -> Result<()>;
}

/// What the built-in series records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordOptions {
    /// Number of `C_zz` separations; zero disables the profile.
    pub czz_lmax: usize,
    /// Time of the initial state, for runs that continue an earlier one.
    pub t0: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct WallTimes {
    pub setup_s: f64,
    pub evolve_s: f64,
    pub observe_s: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub cfg: EvolverConfig,
    pub record: RecordOptions,
    pub t_final: f64,
    pub steps: usize,
    pub series: ObservableSeries,
    pub final_state: Mps,
    pub discarded_total: f64,
    pub krylov: KrylovStats,
    pub wall: WallTimes,
    pub fingerprint: String,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.series.t
    }

    /// Write `<stem>.csv` and the `<stem>.json` sidecar into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        self.series.write_csv(BufWriter::new(File::create(&csv_path)?))?;
        let json_path = dir.join(format!("{stem}.json"));
        serde_json::to_writer_pretty(BufWriter::new(File::create(&json_path)?), &self.sidecar())?;
        Ok(vec![csv_path, json_path])
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            fingerprint: self.fingerprint.clone(),
            spec: self.spec.clone(),
            evolver: self.cfg.clone(),
            record: self.record.clone(),
            t_final: self.t_final,
            steps: self.steps,
            samples: self.series.len(),
            discarded_total: self.discarded_total,
            final_bond_dims: self.final_state.bond_dims(),
            krylov_matvecs: self.krylov.matvecs,
            krylov_splits: self.krylov.splits,
            krylov_max_residual: self.krylov.residual,
            wall: self.wall,
        }
    }
}

/// JSON companion of a trajectory CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub fingerprint: String,
    pub spec: ModelSpec,
    pub evolver: EvolverConfig,
    pub record: RecordOptions,
    pub t_final: f64,
    pub steps: usize,
    pub samples: usize,
    pub discarded_total: f64,
    pub final_bond_dims: Vec<usize>,
    pub krylov_matvecs: usize,
    pub krylov_splits: usize,
    pub krylov_max_residual: f64,
    pub wall: WallTimes,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the run configuration; identical inputs give identical hashes.
pub fn fingerprint(spec: &ModelSpec, cfg: &EvolverConfig, t_final: f64, record: &RecordOptions) -> Result<String> {
    let text = serde_json::to_string(&(spec, cfg, t_final, record))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Number of `dt` steps in `t_final`; the ratio must be an integer.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {t_final}")));
    }
    let steps = (t_final / dt).round();
    if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

fn measure(state: &Mps, t: f64, info: &StepInfo, record: &RecordOptions) -> Result<Sample> {
    let czz = if record.czz_lmax > 0 { czz_profile(state, record.czz_lmax)? } else { Vec::new() };
    Ok(Sample {
        t,
        mz: collective_z(state)?,
        mzz: collective_zz(state)?,
        s1_half: state.half_chain_entropy()?,
        discarded: info.discarded,
        czz,
    })
}

/// Evolve `initial` to `t0 + t_final`, sampling after every step.
pub fn run_quench(
    initial: Mps,
    spec: &ModelSpec,
    cfg: &EvolverConfig,
    t_final: f64,
    record: &RecordOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let start = Instant::now();
    spec.validate()?;
    cfg.validate()?;
    if initial.len() != spec.n {
        return Err(Error::SizeMismatch(format!("initial state has {} sites, spec {}", initial.len(), spec.n)));
    }
    let steps = step_count(t_final, cfg.dt)?;
    let engine = Engine::new(spec, cfg)?;
    let mut state = initial;
    state.set_truncation(cfg.chi_max, cfg.svd_cutoff);
    let mut wall = WallTimes { setup_s: start.elapsed().as_secs_f64(), ..Default::default() };

    let mut series = ObservableSeries::new(record.czz_lmax);
    let mut krylov = KrylovStats::default();
    let mut discarded_total = 0.0;
    let mut observe = |t: f64, state: &Mps, info: &StepInfo, series: &mut ObservableSeries, wall: &mut WallTimes| -> Result<()> {
        let clock = Instant::now();
        series.push(measure(state, t, info, record)?)?;
        for obs in observers.iter_mut() {
            obs.observe(t, state, info).map_err(|e| Error::Observer { name: obs.name().to_string(), t, source: Box::new(e) })?;
        }
        wall.observe_s += clock.elapsed().as_secs_f64();
        Ok(())
    };

    observe(record.t0, &state, &StepInfo::default(), &mut series, &mut wall)?;
    for k in 1..=steps {
        let clock = Instant::now();
        let info = engine.step(&mut state)?;
        wall.evolve_s += clock.elapsed().as_secs_f64();
        discarded_total += info.discarded;
        krylov.matvecs += info.krylov.matvecs;
        krylov.splits += info.krylov.splits;
        krylov.residual = krylov.residual.max(info.krylov.residual);
        observe(record.t0 + k as f64 * cfg.dt, &state, &info, &mut series, &mut wall)?;
    }
    Ok(Trajectory {
        spec: spec.clone(),
        cfg: cfg.clone(),
        record: record.clone(),
        t_final,
        steps,
        series,
        final_state: state,
        discarded_total,
        krylov,
        wall,
        fingerprint: fingerprint(spec, cfg, t_final, record)?,
    })
}
