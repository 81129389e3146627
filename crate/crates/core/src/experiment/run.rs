use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::output::{write_json, FailureEntry, Manifest};
use super::{ExperimentConfig, ExperimentKind, ObserverKind};
use crate::error::{Error, Result};
use crate::evolve::quench::sha256_hex;
use crate::evolve::{run_quench, Observer, RecordOptions, StepInfo, Trajectory};
use crate::exact::fermion::{FermionQuench, InitialField};
use crate::exact::lmg::lmg_evolve;
use crate::exact::semiclassical::semiclassical_mzz;
use crate::exact::spectrum::{bulk_median_entropy, eigenvector_entropy_profile, sector_gap_ratio, sector_spectra};
use crate::fss::{master_curve, optimize_collapse, CollapseOptions, ScalingDataset, ScalingParams};
use crate::model::ModelSpec;
use crate::mps::io::write_snapshot;
use crate::mps::Mps;
use crate::observables::{extrapolate_thermodynamic, fit_correlation_length, locate_mzz_minimum};

/// Where a run left its outputs.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub summary: PathBuf,
    pub manifest: Manifest,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        !self.manifest.failures.is_empty()
    }
}

enum Point {
    Quench { spec: ModelSpec, chi: usize },
    Spectrum { spec: ModelSpec },
    Lmg { spec: ModelSpec },
    Collapse,
}

impl Point {
    fn label(&self) -> String {
        match self {
            Point::Quench { spec, chi } => format!("{}_chi{chi}", spec_label(spec)),
            Point::Spectrum { spec } | Point::Lmg { spec } => spec_label(spec),
            Point::Collapse => "collapse".into(),
        }
    }
}

fn spec_label(spec: &ModelSpec) -> String {
    let mut s = format!("n{}_b{}", spec.n, spec.b / spec.j0);
    if (spec.theta - std::f64::consts::FRAC_PI_2).abs() > 1e-12 {
        s.push_str(&format!("_th{:.4}", spec.theta));
    }
    s
}

struct PointOutput {
    files: Vec<PathBuf>,
    result: Value,
}

/// Runs every grid point of `cfg`, then writes `summary.json` and
/// `manifest.json` into the output directory. Point failures are recorded
/// in the manifest and do not stop the grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    let points_dir = dir.join("points");
    std::fs::create_dir_all(&points_dir)?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?)?;

    let points: Vec<Point> = match cfg.kind {
        ExperimentKind::DqptSweep | ExperimentKind::CzzQuench | ExperimentKind::OracleCompare => {
            let mut v = Vec::new();
            for spec in cfg.specs()? {
                for chi in cfg.evolver.chis() {
                    v.push(Point::Quench { spec: spec.clone(), chi });
                }
            }
            v
        }
        ExperimentKind::ChaosSpectrum => cfg.specs()?.into_iter().map(|spec| Point::Spectrum { spec }).collect(),
        ExperimentKind::LmgBenchmark => cfg.specs()?.into_iter().map(|spec| Point::Lmg { spec }).collect(),
        ExperimentKind::FssCollapse => vec![Point::Collapse],
    };

    let work = || -> Vec<(String, Result<PointOutput>)> {
        points.par_iter().map(|p| (p.label(), run_point(cfg, p, &points_dir))).collect()
    };
    let outcomes = match cfg.worker_cap()? {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let config_json = serde_json::to_value(cfg)?;
    let mut manifest = Manifest::new(kind_name(cfg.kind), config_json.clone());
    manifest.points = outcomes.len();
    let mut entries = Vec::new();
    let mut ok: Vec<&Value> = Vec::new();
    for (label, outcome) in &outcomes {
        match outcome {
            Ok(out) => {
                for f in &out.files {
                    manifest.add_file(&dir, f)?;
                }
                entries.push(json!({ "point": label, "result": out.result }));
                ok.push(&out.result);
            }
            Err(e) => {
                manifest.failures.push(FailureEntry { point: label.clone(), error: e.to_string() });
                entries.push(json!({ "point": label, "error": e.to_string() }));
            }
        }
    }
    let aggregates = aggregate(cfg, &ok);
    // the output location does not change any result
    let mut located = cfg.clone();
    located.output = PathBuf::new();
    let summary = json!({
        "kind": kind_name(cfg.kind),
        "config_sha256": sha256_hex(serde_json::to_string(&located)?.as_bytes()),
        "points": entries,
        "aggregates": aggregates,
    });
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    manifest.add_file(&dir, &config_path)?;
    manifest.add_file(&dir, &summary_path)?;
    manifest.write(&dir)?;
    Ok(RunReport { dir, summary: summary_path, manifest })
}

/// Runs `cfg` as an MPS-against-free-fermion comparison.
pub fn compare_oracle(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    cfg.kind = ExperimentKind::OracleCompare;
    run_experiment(&cfg)
}

fn kind_name(kind: ExperimentKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn run_point(cfg: &ExperimentConfig, p: &Point, dir: &Path) -> Result<PointOutput> {
    let label = p.label();
    match p {
        Point::Quench { spec, chi } => quench_point(cfg, spec, *chi, dir, &label),
        Point::Spectrum { spec } => spectrum_point(cfg, spec, dir, &label),
        Point::Lmg { spec } => lmg_point(cfg, spec, dir, &label),
        Point::Collapse => collapse_point(cfg, dir),
    }
}

#[derive(Default)]
struct BondObserver {
    rows: Vec<(f64, usize, f64)>,
}

impl Observer for BondObserver {
    fn name(&self) -> &str {
        "bond-dims"
    }

    fn observe(&mut self, t: f64, state: &Mps, info: &StepInfo) -> Result<()> {
        self.rows.push((t, state.max_bond(), info.discarded));
        Ok(())
    }
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn quench_point(cfg: &ExperimentConfig, spec: &ModelSpec, chi: usize, dir: &Path, label: &str) -> Result<PointOutput> {
    let evolver = cfg.evolver.config(spec, chi);
    let record = RecordOptions {
        czz_lmax: if cfg.kind == ExperimentKind::DqptSweep { cfg.run.czz_lmax } else { cfg.run.czz_lmax.max(1) },
        t0: 0.0,
    };
    let init = Mps::product_state(spec.n, cfg.run.initial, chi)?;
    let mut bonds = BondObserver::default();
    let want_bonds = cfg.run.observers.contains(&ObserverKind::BondDims);
    let traj = if want_bonds {
        run_quench(init, spec, &evolver, cfg.run.t_final, &record, &mut [&mut bonds])?
    } else {
        run_quench(init, spec, &evolver, cfg.run.t_final, &record, &mut [])?
    };
    let mut files = traj.write(dir, label)?;
    if want_bonds {
        let path = dir.join(format!("{label}_bonds.csv"));
        write_rows(&path, &["t", "max_bond", "discarded"], bonds.rows.iter().copied())?;
        files.push(path);
    }
    if cfg.run.observers.contains(&ObserverKind::Snapshot) {
        let path = dir.join(format!("{label}.mps"));
        write_snapshot(&traj.final_state, BufWriter::new(File::create(&path)?))?;
        files.push(path);
    }
    let s = &traj.series;
    let last = s.len() - 1;
    let mut result = json!({
        "n": spec.n,
        "b_over_j0": spec.b / spec.j0,
        "theta": spec.theta,
        "chi": chi,
        "avg_mz": s.avg_mz[last],
        "avg_mzz": s.avg_mzz[last],
        "s1_half": s.s1_half[last],
        "discarded_total": traj.discarded_total,
        "max_bond": traj.final_state.max_bond(),
    });
    match cfg.kind {
        ExperimentKind::CzzQuench => {
            let (path, fits) = xi_table(cfg, &traj, dir, label)?;
            files.push(path);
            result["xi_final"] = fits;
        }
        ExperimentKind::OracleCompare => {
            let (path, report) = oracle_table(cfg, spec, &traj, dir, label)?;
            files.push(path);
            result["oracle"] = report;
        }
        _ => {}
    }
    Ok(PointOutput { files, result })
}

/// Indices of the samples closest to multiples of `compare_dt`.
fn sample_indices(t: &[f64], every: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut next = 0.0;
    for (i, ti) in t.iter().enumerate() {
        if *ti + 1e-9 >= next {
            out.push(i);
            next = (ti / every + 1e-9).floor() * every + every;
        }
    }
    out
}

fn xi_table(cfg: &ExperimentConfig, traj: &Trajectory, dir: &Path, label: &str) -> Result<(PathBuf, Value)> {
    let s = &traj.series;
    let mut rows = Vec::new();
    let mut last = Value::Null;
    for i in sample_indices(&s.t, cfg.run.compare_dt) {
        let prof: Vec<(usize, f64)> = s.czz[i].iter().enumerate().map(|(k, c)| (k + 1, *c)).collect();
        match fit_correlation_length(&prof, cfg.run.l_fit_max) {
            Ok(f) => {
                rows.push((s.t[i], f.xi, f.ci95.0, f.ci95.1, f.c0));
                last = json!({ "t": s.t[i], "xi": f.xi, "ci95": [f.ci95.0, f.ci95.1], "c0": f.c0 });
            }
            Err(e) => last = json!({ "t": s.t[i], "error": e.to_string() }),
        }
    }
    let path = dir.join(format!("{label}_xi.csv"));
    write_rows(&path, &["t", "xi", "ci95_lo", "ci95_hi", "c0"], rows)?;
    Ok((path, last))
}

fn oracle_table(cfg: &ExperimentConfig, spec: &ModelSpec, traj: &Trajectory, dir: &Path, label: &str) -> Result<(PathBuf, Value)> {
    let q = FermionQuench::from_spec(spec, InitialField::Infinite)?;
    let s = &traj.series;
    let seps: Vec<usize> = (1..=s.czz_lmax).collect();
    let mut rows = Vec::new();
    let (mut max_dev, mut sum, mut count) = (0.0f64, 0.0, 0usize);
    for i in sample_indices(&s.t, cfg.run.compare_dt) {
        let exact = q.czz(s.t[i], &seps)?;
        for (k, (e, m)) in exact.iter().zip(&s.czz[i]).enumerate() {
            let d = (m - e).abs();
            max_dev = max_dev.max(d);
            sum += d;
            count += 1;
            rows.push((s.t[i], k + 1, *m, *e, d));
        }
    }
    let path = dir.join(format!("{label}_oracle.csv"));
    write_rows(&path, &["t", "l", "mps", "exact", "abs_dev"], rows)?;
    Ok((path, json!({ "max_dev": max_dev, "mean_dev": sum / count.max(1) as f64, "comparisons": count })))
}

fn spectrum_point(cfg: &ExperimentConfig, spec: &ModelSpec, dir: &Path, label: &str) -> Result<PointOutput> {
    let ratio = sector_gap_ratio(spec)?;
    let levels = sector_spectra(spec, false)?;
    let lpath = dir.join(format!("{label}_levels.csv"));
    write_rows(&lpath, &["sector", "energy"], levels.iter().flat_map(|s| s.energies.iter().map(move |e| (s.sector.clone(), *e))))?;
    let profile = eigenvector_entropy_profile(spec, cfg.run.basis)?;
    let epath = dir.join(format!("{label}_entropy.csv"));
    write_rows(&epath, &["energy", "s1_half"], profile.iter().copied())?;
    let result = json!({
        "n": spec.n,
        "b_over_j0": spec.b / spec.j0,
        "theta": spec.theta,
        "r_mean": ratio.mean,
        "per_sector": ratio.per_sector,
        "convention": ratio.convention,
        "bulk_median_entropy": bulk_median_entropy(&profile, cfg.run.bulk_fraction),
        "levels": profile.len(),
    });
    Ok(PointOutput { files: vec![lpath, epath], result })
}

fn lmg_point(cfg: &ExperimentConfig, spec: &ModelSpec, dir: &Path, label: &str) -> Result<PointOutput> {
    let h = spec.b / spec.j0;
    let dt = cfg.evolver.dt.unwrap_or(crate::evolve::EvolverConfig::default().dt);
    let s = lmg_evolve(spec.n, h, cfg.run.t_final, dt)?;
    let path = dir.join(format!("{label}.csv"));
    s.write_csv(BufWriter::new(File::create(&path)?))?;
    let side = dir.join(format!("{label}.json"));
    write_json(&side, &json!({ "spec": spec, "t_final": cfg.run.t_final, "dt": dt, "samples": s.len() }))?;
    let last = s.len() - 1;
    let semi = semiclassical_mzz(h).ok().map(|x| x.value);
    let result = json!({
        "n": spec.n,
        "b_over_j0": h,
        "avg_mz": s.avg_mz[last],
        "avg_mzz": s.avg_mzz[last],
        "semiclassical_mzz": semi,
    });
    Ok(PointOutput { files: vec![path, side], result })
}

fn collapse_point(cfg: &ExperimentConfig, dir: &Path) -> Result<PointOutput> {
    let c = cfg.collapse.as_ref().ok_or_else(|| Error::Config("missing [collapse]".into()))?;
    let mut data = ScalingDataset::from_manifest(&c.manifest, c.ansatz, c.default_error)?;
    if let Some(min) = c.min_label {
        data = data.with_min_label(min)?;
    }
    if let Some((lo, hi)) = c.control_window {
        data = data.with_control_window(lo, hi)?;
    }
    let init = ScalingParams::new(c.init[0], c.init[1], c.init[2]);
    let opts = CollapseOptions { replicas: c.replicas, seed: cfg.seed, grid: c.grid, max_eval: c.max_eval, ..Default::default() };
    let res = optimize_collapse(&data, &init, &c.bounds, &opts)?;
    let mpath = dir.join("collapse_master.csv");
    write_rows(&mpath, &["x", "y"], master_curve(&res.params, &data))?;
    let bpath = dir.join("collapse_bootstrap.csv");
    write_rows(&bpath, &["critical", "nu", "beta"], res.bootstrap.iter().map(|p| (p[0], p[1], p[2])))?;
    let result = json!({
        "critical": res.params.critical,
        "nu": res.params.nu(),
        "beta": res.params.beta(),
        "errors": res.params.errors,
        "quality": res.quality,
        "at_bound": res.at_bound,
        "poor_collapse": res.poor_collapse,
        "evaluations": res.evaluations,
        "curves": data.curves.len(),
        "points": data.points(),
    });
    Ok(PointOutput { files: vec![mpath, bpath], result })
}

fn group_key(r: &Value, keys: &[&str]) -> String {
    keys.iter().map(|k| format!("{k}={}", r[*k])).collect::<Vec<_>>().join(",")
}

fn minima_by(results: &[&Value], keys: &[&str], window: usize) -> BTreeMap<String, Value> {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in results {
        if let (Some(b), Some(m)) = (r["b_over_j0"].as_f64(), r["avg_mzz"].as_f64()) {
            groups.entry(group_key(r, keys)).or_default().push((b, m));
        }
    }
    groups
        .into_iter()
        .map(|(k, curve)| {
            let v = match locate_mzz_minimum(&curve, window) {
                Ok(p) => json!({ "b_min": p.x, "se": p.se, "mzz_min": p.y, "window": [p.window.0, p.window.1] }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            (k, v)
        })
        .collect()
}

fn aggregate(cfg: &ExperimentConfig, results: &[&Value]) -> Value {
    match cfg.kind {
        ExperimentKind::DqptSweep => {
            let minima = minima_by(results, &["n", "theta", "chi"], cfg.run.window);
            // thermodynamic extrapolation per (theta, chi) over sizes
            let mut by_chi: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
            for r in results {
                let key = group_key(r, &["n", "theta", "chi"]);
                if let Some(m) = minima.get(&key) {
                    if let (Some(x), Some(se)) = (m["b_min"].as_f64(), m["se"].as_f64()) {
                        let n = r["n"].as_f64().unwrap_or(0.0);
                        let e = by_chi.entry(group_key(r, &["theta", "chi"])).or_default();
                        if !e.iter().any(|p| p.0 == n) {
                            e.push((n, x, se));
                        }
                    }
                }
            }
            let extrapolated: BTreeMap<String, Value> = by_chi
                .into_iter()
                .filter(|(_, v)| v.len() >= 4)
                .map(|(k, v)| {
                    let pts: Vec<(f64, f64)> = v.iter().map(|p| (p.0, p.1)).collect();
                    let sig: Vec<f64> = v.iter().map(|p| p.2).collect();
                    let sig = if sig.iter().all(|s| *s > 0.0 && s.is_finite()) { Some(sig.as_slice()) } else { None };
                    let fit = match extrapolate_thermodynamic(&pts, sig) {
                        Ok(f) => json!({ "b_inf": f.a, "b_inf_se": f.sigma[0], "b": f.b, "c": f.c }),
                        Err(e) => json!({ "error": e.to_string() }),
                    };
                    (k, fit)
                })
                .collect();
            json!({ "minima": minima, "extrapolated": extrapolated })
        }
        ExperimentKind::LmgBenchmark => json!({ "minima": minima_by(results, &["n"], cfg.run.window) }),
        ExperimentKind::OracleCompare => {
            let mut by_chi: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
            for r in results {
                let e = by_chi.entry(group_key(r, &["chi"])).or_insert((0.0, 0.0, 0));
                e.0 = e.0.max(r["oracle"]["max_dev"].as_f64().unwrap_or(f64::NAN));
                e.1 += r["oracle"]["mean_dev"].as_f64().unwrap_or(f64::NAN);
                e.2 += 1;
            }
            let v: BTreeMap<String, Value> = by_chi
                .into_iter()
                .map(|(k, (mx, s, c))| (k, json!({ "max_dev": mx, "mean_dev": s / c as f64 })))
                .collect();
            json!({ "per_chi": v })
        }
        _ => json!({}),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid() {
        let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        assert_eq!(sample_indices(&t, 0.1), vec![0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(sample_indices(&t, 0.01).len(), 21);
    }
}
