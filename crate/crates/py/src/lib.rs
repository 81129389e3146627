//! Python bindings: model specs, MPS quenches, exact oracles, spectra,
//! fits, scaling collapses and the experiment runner.

#![allow(clippy::type_complexity)]

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ising_quench::evolve::{self, EvolverConfig, RecordOptions, Scheme};
use ising_quench::exact::fermion::{FermionQuench, InitialField};
use ising_quench::exact::{lmg, semiclassical, spectrum};
use ising_quench::experiment::{run_experiment as run_exp, ExperimentConfig};
use ising_quench::fss::{self, Ansatz, Curve, ParamBounds, ScalingDataset, ScalingParams};
use ising_quench::model::{Alpha, ModelSpec};
use ising_quench::observables::{self, ObservableSeries};
use ising_quench::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidSpec(_)
        | Error::InvalidArgument(_)
        | Error::Config(_)
        | Error::SizeMismatch(_)
        | Error::OutOfRange(_)
        | Error::TooLarge { .. }
        | Error::KacUndefined
        | Error::UnsupportedScheme(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// `H = -sum J_ij Z_i Z_j - B sum (cos(theta) Z + sin(theta) X)`.
#[pyclass(name = "ModelSpec", module = "ising_quench_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModelSpec {
    inner: ModelSpec,
}

#[pymethods]
impl PyModelSpec {
    /// `alpha = None` (or `inf`) selects nearest-neighbor couplings.
    #[new]
    #[pyo3(signature = (n, b, alpha=None, j0=1.0, theta=std::f64::consts::FRAC_PI_2, kac=false))]
    fn new(n: usize, b: f64, alpha: Option<f64>, j0: f64, theta: f64, kac: bool) -> PyResult<Self> {
        let alpha = match alpha {
            Some(a) if a.is_finite() => Alpha::PowerLaw(a),
            _ => Alpha::NearestNeighbor,
        };
        let inner = ModelSpec { n, alpha, j0, b, theta, kac };
        inner.validate().map_err(err)?;
        Ok(PyModelSpec { inner })
    }

    #[staticmethod]
    fn tfim(n: usize, j0: f64, b: f64) -> Self {
        PyModelSpec { inner: ModelSpec::tfim(n, j0, b) }
    }

    #[staticmethod]
    fn sfim(n: usize, j0: f64, b: f64, theta: f64) -> Self {
        PyModelSpec { inner: ModelSpec::sfim(n, j0, b, theta) }
    }

    #[staticmethod]
    fn power_law(n: usize, alpha: f64, j0: f64, b: f64) -> Self {
        PyModelSpec { inner: ModelSpec::power_law(n, alpha, j0, b) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha.finite().unwrap_or(f64::INFINITY)
    }

    #[getter]
    fn j0(&self) -> f64 {
        self.inner.j0
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn kac(&self) -> bool {
        self.inner.kac
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!("ModelSpec(n={}, alpha={}, j0={}, b={}, theta={}, kac={})", s.n, s.alpha, s.j0, s.b, s.theta, s.kac)
    }
}

fn series_dict<'py>(py: Python<'py>, s: &ObservableSeries) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", &s.t)?;
    d.set_item("inst_mz", &s.inst_mz)?;
    d.set_item("inst_mzz", &s.inst_mzz)?;
    d.set_item("avg_mz", &s.avg_mz)?;
    d.set_item("avg_mzz", &s.avg_mzz)?;
    d.set_item("s1_half", &s.s1_half)?;
    d.set_item("discarded", &s.discarded)?;
    d.set_item("czz", &s.czz)?;
    Ok(d)
}

fn parse_scheme(s: Option<&str>, spec: &ModelSpec) -> PyResult<Scheme> {
    match s {
        None => Ok(Scheme::natural_for(spec)),
        Some("tebd4") => Ok(Scheme::Tebd4),
        Some("tdvp2") => Ok(Scheme::Tdvp2),
        Some(other) => Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    }
}

/// Quench from the product state along `initial` and return the recorded
/// series as a dict of lists.
#[pyfunction]
#[pyo3(signature = (spec, t_final, chi=32, dt=0.01, initial=[0.0, 0.0, 1.0], scheme=None, czz_lmax=0, fit_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn run_quench<'py>(
    py: Python<'py>,
    spec: PyRef<'_, PyModelSpec>,
    t_final: f64,
    chi: usize,
    dt: f64,
    initial: [f64; 3],
    scheme: Option<&str>,
    czz_lmax: usize,
    fit_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec.inner.clone();
    let cfg = EvolverConfig { dt, chi_max: chi, scheme: parse_scheme(scheme, &spec)?, fit_tol, ..Default::default() };
    let traj = py
        .detach(|| {
            let init = ising_quench::mps::Mps::product_state(spec.n, initial, chi)?;
            evolve::run_quench(init, &spec, &cfg, t_final, &RecordOptions { czz_lmax, t0: 0.0 }, &mut [])
        })
        .map_err(err)?;
    let d = series_dict(py, &traj.series)?;
    d.set_item("bond_dims", traj.final_state.bond_dims())?;
    d.set_item("discarded_total", traj.discarded_total)?;
    Ok(d)
}

/// Free-fermion solution of the nearest-neighbor transverse-field chain.
#[pyclass(name = "FermionQuench", module = "ising_quench_py")]
struct PyFermionQuench {
    inner: FermionQuench,
}

#[pymethods]
impl PyFermionQuench {
    /// `b_initial = None` starts from the `+x` product state.
    #[new]
    #[pyo3(signature = (n, b_final, b_initial=None, j=1.0))]
    fn new(n: usize, b_final: f64, b_initial: Option<f64>, j: f64) -> PyResult<Self> {
        let init = b_initial.map(InitialField::Finite).unwrap_or(InitialField::Infinite);
        Ok(PyFermionQuench { inner: FermionQuench::new(n, j, init, b_final).map_err(err)? })
    }

    /// Connected `C_zz(t, l)` about the central site.
    fn czz(&self, t: f64, separations: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.czz(t, &separations).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (b_final, b_initial=None))]
fn asymptotic_xi(b_final: f64, b_initial: Option<f64>) -> PyResult<f64> {
    let init = b_initial.map(InitialField::Finite).unwrap_or(InitialField::Infinite);
    ising_quench::exact::fermion::asymptotic_xi(b_final, init).map_err(err)
}

/// Collective-spin evolution from all spins up, `J0 = 1`.
#[pyfunction]
fn lmg_evolve<'py>(py: Python<'py>, n: usize, b_over_j0: f64, t_final: f64, dt: f64) -> PyResult<Bound<'py, PyDict>> {
    let s = py.detach(|| lmg::lmg_evolve(n, b_over_j0, t_final, dt)).map_err(err)?;
    series_dict(py, &s)
}

#[pyfunction]
fn semiclassical_mzz(h: f64) -> PyResult<f64> {
    semiclassical::semiclassical_mzz(h).map(|s| s.value).map_err(err)
}

#[pyfunction]
fn semiclassical_mz(h: f64) -> PyResult<f64> {
    semiclassical::semiclassical_mz(h).map(|s| s.value).map_err(err)
}

/// Mean gap ratio pooled over symmetry sectors, and the per-sector values.
#[pyfunction]
fn sector_gap_ratio(py: Python<'_>, spec: PyRef<'_, PyModelSpec>) -> PyResult<(f64, Vec<(String, f64, usize)>)> {
    let spec = spec.inner.clone();
    let r = py.detach(|| spectrum::sector_gap_ratio(&spec)).map_err(err)?;
    Ok((r.mean, r.per_sector))
}

#[pyfunction]
fn mean_gap_ratio(energies: Vec<f64>) -> PyResult<f64> {
    spectrum::mean_gap_ratio(&energies).map_err(err)
}

#[pyfunction]
fn synthetic_goe(dim: usize, seed: u64) -> PyResult<Vec<f64>> {
    spectrum::synthetic_goe(dim, seed).map_err(err)
}

#[pyfunction]
fn synthetic_poisson(levels: usize, seed: u64) -> Vec<f64> {
    spectrum::synthetic_poisson(levels, seed)
}

/// `(xi, ci_low, ci_high)` from a profile of `(l, C_zz)` pairs.
#[pyfunction]
#[pyo3(signature = (profile, l_fit_max=6))]
fn fit_correlation_length(profile: Vec<(usize, f64)>, l_fit_max: usize) -> PyResult<(f64, f64, f64)> {
    let f = observables::fit_correlation_length(&profile, l_fit_max).map_err(err)?;
    Ok((f.xi, f.ci95.0, f.ci95.1))
}

/// `(x_min, standard_error)` of a parabola through the points nearest the
/// smallest value.
#[pyfunction]
#[pyo3(signature = (curve, window=7))]
fn locate_mzz_minimum(curve: Vec<(f64, f64)>, window: usize) -> PyResult<(f64, f64)> {
    let v = observables::locate_mzz_minimum(&curve, window).map_err(err)?;
    Ok((v.x, v.se))
}

fn parse_ansatz(s: &str) -> PyResult<Ansatz> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| PyValueError::new_err(format!("unknown ansatz {s:?}")))
}

/// Scaling collapse. `curves` holds `(label, controls, values, errors)`;
/// `init` is `(B_c, nu, beta)`, each bound a `(lo, hi)` pair for
/// `B_c`, `beta/nu` and `1/nu`.
#[pyfunction]
#[pyo3(signature = (curves, init, critical, beta_over_nu, inv_nu, ansatz="size-mzz", replicas=200, seed=0))]
#[allow(clippy::too_many_arguments)]
fn optimize_collapse<'py>(
    py: Python<'py>,
    curves: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>,
    init: (f64, f64, f64),
    critical: (f64, f64),
    beta_over_nu: (f64, f64),
    inv_nu: (f64, f64),
    ansatz: &str,
    replicas: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cs = Vec::new();
    for (label, x, y, e) in curves {
        if x.len() != y.len() || x.len() != e.len() {
            return Err(PyValueError::new_err(format!("curve {label} has ragged columns")));
        }
        cs.push(Curve::new(label, (0..x.len()).map(|i| (x[i], y[i], e[i])).collect()));
    }
    let data = ScalingDataset::new(parse_ansatz(ansatz)?, cs).map_err(err)?;
    let bounds = ParamBounds { critical, beta_over_nu, inv_nu };
    let opts = fss::CollapseOptions { replicas, seed, ..Default::default() };
    let start = ScalingParams::new(init.0, init.1, init.2);
    let r = py.detach(|| fss::optimize_collapse(&data, &start, &bounds, &opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("critical", r.params.critical)?;
    d.set_item("nu", r.params.nu())?;
    d.set_item("beta", r.params.beta())?;
    if let Some(e) = r.params.errors {
        d.set_item("errors", (e.critical, e.nu, e.beta))?;
    }
    d.set_item("quality", r.quality)?;
    d.set_item("at_bound", r.at_bound)?;
    d.set_item("poor_collapse", r.poor_collapse)?;
    Ok(d)
}

/// Runs a TOML experiment configuration; returns the summary path and the
/// failed points.
#[pyfunction]
#[pyo3(signature = (config, output=None))]
fn run_experiment(py: Python<'_>, config: PathBuf, output: Option<PathBuf>) -> PyResult<(String, Vec<(String, String)>)> {
    let report = py
        .detach(|| {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            run_exp(&cfg)
        })
        .map_err(err)?;
    let failures = report.manifest.failures.iter().map(|f| (f.point.clone(), f.error.clone())).collect();
    Ok((report.summary.to_string_lossy().into_owned(), failures))
}

/// Dense state vector of an MPS product state, for quick checks.
#[pyfunction]
fn product_state_vector(n: usize, direction: [f64; 3]) -> PyResult<Vec<(f64, f64)>> {
    let m = ising_quench::mps::Mps::product_state(n, direction, 1).map_err(err)?;
    let v: Vec<C64> = m.to_dense().map_err(err)?;
    Ok(v.into_iter().map(|z| (z.re, z.im)).collect())
}

#[pymodule]
fn ising_quench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelSpec>()?;
    m.add_class::<PyFermionQuench>()?;
    m.add_function(wrap_pyfunction!(run_quench, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_xi, m)?)?;
    m.add_function(wrap_pyfunction!(lmg_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(semiclassical_mz, m)?)?;
    m.add_function(wrap_pyfunction!(semiclassical_mzz, m)?)?;
    m.add_function(wrap_pyfunction!(sector_gap_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mean_gap_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_goe, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(fit_correlation_length, m)?)?;
    m.add_function(wrap_pyfunction!(locate_mzz_minimum, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(product_state_vector, m)?)?;
    Ok(())
}
