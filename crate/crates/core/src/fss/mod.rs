//! Finite-size (or finite-time) scaling collapse.
//!
//! Points are rescaled to `x = L^(1/nu) (B - B_c)`, `y = L^(beta/nu) M`.
//! Collapse quality is the reduced chi-square of every point against a
//! weighted linear fit through the bracketing points of the other curves
//! (Houdayer and Hartmann). Parameters are found with Nelder-Mead restarted
//! from a grid, and their errors from a point bootstrap.

pub mod dataset;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::nelder_mead;

pub use dataset::{reference_scaling_function, synthetic_dataset, Ansatz, Curve, ScalingDataset};

/// Quality above this marks a poor collapse.
pub const POOR_COLLAPSE: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamErrors {
    pub critical: f64,
    pub beta_over_nu: f64,
    pub inv_nu: f64,
    pub nu: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// `(B/J0)_c`
    pub critical: f64,
    /// `beta/nu`, or `beta/(z nu)` for the time ansatz.
    pub beta_over_nu: f64,
    /// `1/nu`, or `1/(z nu)`.
    pub inv_nu: f64,
    #[serde(default)]
    pub errors: Option<ParamErrors>,
}

impl ScalingParams {
    pub fn new(critical: f64, nu: f64, beta: f64) -> Self {
        ScalingParams { critical, beta_over_nu: beta / nu, inv_nu: 1.0 / nu, errors: None }
    }

    pub fn nu(&self) -> f64 {
        1.0 / self.inv_nu
    }

    pub fn beta(&self) -> f64 {
        self.beta_over_nu / self.inv_nu
    }

    fn to_vec(self) -> [f64; 3] {
        [self.critical, self.beta_over_nu, self.inv_nu]
    }

    fn from_slice(x: &[f64]) -> Self {
        ScalingParams { critical: x[0], beta_over_nu: x[1], inv_nu: x[2], errors: None }
    }
}

/// Box constraints for `(B_c, beta/nu, 1/nu)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub critical: (f64, f64),
    pub beta_over_nu: (f64, f64),
    pub inv_nu: (f64, f64),
}

impl ParamBounds {
    fn as_array(&self) -> [(f64, f64); 3] {
        [self.critical, self.beta_over_nu, self.inv_nu]
    }

    pub fn contains(&self, p: &ScalingParams) -> bool {
        self.as_array().iter().zip(p.to_vec()).all(|((lo, hi), x)| x >= *lo && x <= *hi)
    }
}

/// One point after rescaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MasterPoint {
    pub label: f64,
    pub x: f64,
    pub y: f64,
    pub dy: f64,
}

/// Rescaled curves, in curve order.
pub fn rescale(params: &ScalingParams, data: &ScalingDataset) -> Vec<Vec<MasterPoint>> {
    data.curves
        .iter()
        .map(|c| {
            let sx = c.label.powf(params.inv_nu);
            let sy = c.label.powf(params.beta_over_nu);
            (0..c.len())
                .map(|i| MasterPoint { label: c.label, x: sx * (c.control[i] - params.critical), y: sy * c.value[i], dy: sy * c.error[i] })
                .collect()
        })
        .collect()
}

/// Reduced chi-square of the collapse; about 1 for a collapse consistent
/// with the errors.
pub fn collapse_quality(params: &ScalingParams, data: &ScalingDataset) -> Result<f64> {
    if data.curves.len() < 2 {
        return Err(Error::InvalidArgument("collapse needs at least two curves".into()));
    }
    let curves = rescale(params, data);
    let mut total = 0.0;
    let mut used = 0usize;
    for (ci, curve) in curves.iter().enumerate() {
        for p in curve {
            // weighted sums over bracketing neighbors from the other curves
            let (mut k, mut kx, mut ky, mut kxx, mut kxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut count = 0;
            for (cj, other) in curves.iter().enumerate() {
                if cj == ci || other.len() < 2 {
                    continue;
                }
                let (first, last) = (other[0].x, other[other.len() - 1].x);
                if p.x < first || p.x > last {
                    continue;
                }
                let idx = other.partition_point(|q| q.x <= p.x).clamp(1, other.len() - 1);
                for q in &other[idx - 1..=idx] {
                    let w = 1.0 / (q.dy * q.dy);
                    k += w;
                    kx += w * q.x;
                    ky += w * q.y;
                    kxx += w * q.x * q.x;
                    kxy += w * q.x * q.y;
                    count += 1;
                }
            }
            if count < 2 {
                continue;
            }
            let delta = k * kxx - kx * kx;
            let (y_hat, var) = if delta > 1e-12 * k * kxx.max(1e-300) {
                (
                    (kxx * ky - kx * kxy + p.x * (k * kxy - kx * ky)) / delta,
                    ((kxx - 2.0 * p.x * kx + p.x * p.x * k) / delta).max(0.0),
                )
            } else {
                (ky / k, 1.0 / k)
            };
            total += (p.y - y_hat).powi(2) / (p.dy * p.dy + var);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::CollapseUndefined("rescaled curves do not overlap".into()));
    }
    Ok(total / used as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollapseOptions {
    /// Bootstrap replicas; zero skips error estimation.
    pub replicas: usize,
    pub seed: u64,
    /// Restart points per parameter axis.
    pub grid: usize,
    /// Restart points per axis for each bootstrap refit, on top of the
    /// best-fit start. A purely local refit understates the spread.
    pub replica_grid: usize,
    pub max_eval: usize,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { replicas: 200, seed: 0, grid: 3, replica_grid: 2, max_eval: 3000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CollapseResult {
    pub params: ScalingParams,
    pub quality: f64,
    /// A parameter ended on its bound.
    pub at_bound: bool,
    /// `quality > POOR_COLLAPSE`.
    pub poor_collapse: bool,
    pub evaluations: usize,
    /// `(B_c, nu, beta)` of every replica, in replica order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub bootstrap: Vec<[f64; 3]>,
}

fn objective(data: &ScalingDataset) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| collapse_quality(&ScalingParams::from_slice(x), data).unwrap_or(f64::INFINITY)
}

fn local_search(data: &ScalingDataset, start: [f64; 3], bounds: &[(f64, f64); 3], max_eval: usize) -> (Vec<f64>, f64, usize) {
    let f = objective(data);
    let step: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
    let first = nelder_mead(&f, &start, &step, bounds, max_eval, 1e-10);
    // restart once from the optimum to undo a collapsed simplex
    let small: Vec<f64> = step.iter().map(|s| 0.1 * s).collect();
    let second = nelder_mead(&f, &first.x, &small, bounds, max_eval, 1e-12);
    let evals = first.evaluations + second.evaluations;
    if second.value <= first.value {
        (second.x, second.value, evals)
    } else {
        (first.x, first.value, evals)
    }
}

fn grid_points(bounds: &[(f64, f64); 3], per_axis: usize) -> Vec<[f64; 3]> {
    if per_axis == 0 {
        return Vec::new();
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..per_axis).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64).collect()
    };
    let (a, b, c) = (axis(bounds[0]), axis(bounds[1]), axis(bounds[2]));
    let mut out = Vec::with_capacity(per_axis.pow(3));
    for x in &a {
        for y in &b {
            for z in &c {
                out.push([*x, *y, *z]);
            }
        }
    }
    out
}

fn resample(data: &ScalingDataset, rng: &mut ChaCha8Rng) -> ScalingDataset {
    let curves = data
        .curves
        .iter()
        .map(|c| {
            let idx: Vec<usize> = (0..c.len()).collect();
            let pts = (0..c.len())
                .map(|_| {
                    let i = *idx.choose(rng).expect("non-empty curve");
                    (c.control[i], c.value[i], c.error[i])
                })
                .collect();
            Curve::new(c.label, pts)
        })
        .collect();
    ScalingDataset { ansatz: data.ansatz, curves }
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64).sqrt()
}

/// Minimizes [`collapse_quality`] inside `bounds`, then estimates errors by
/// refitting `opts.replicas` bootstrap resamples (replica `r` draws from
/// stream `r` of a generator seeded with `opts.seed`). Each refit restarts
/// from the best fit and from a coarse grid of `opts.replica_grid` points
/// per axis.
pub fn optimize_collapse(
    data: &ScalingDataset,
    init: &ScalingParams,
    bounds: &ParamBounds,
    opts: &CollapseOptions,
) -> Result<CollapseResult> {
    data.validate()?;
    if !bounds.contains(init) {
        return Err(Error::InvalidArgument(format!("initial parameters {init:?} outside bounds")));
    }
    if bounds.inv_nu.0 <= 0.0 && bounds.inv_nu.1 <= 0.0 {
        return Err(Error::InvalidArgument("1/nu must be allowed to be positive".into()));
    }
    let b = bounds.as_array();
    let mut starts = vec![init.to_vec()];
    starts.extend(grid_points(&b, opts.grid));
    let runs: Vec<(Vec<f64>, f64, usize)> = starts.par_iter().map(|s| local_search(data, *s, &b, opts.max_eval)).collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    if !best.1.is_finite() {
        return Err(Error::CollapseUndefined("no parameters inside the bounds give overlapping curves".into()));
    }
    let mut params = ScalingParams::from_slice(&best.0);
    let at_bound = best
        .0
        .iter()
        .zip(&b)
        .any(|(x, (lo, hi))| (x - lo).abs() <= 1e-6 * (hi - lo) || (hi - x).abs() <= 1e-6 * (hi - lo));
    let mut replica_starts = vec![params.to_vec()];
    replica_starts.extend(grid_points(&b, opts.replica_grid));
    let bootstrap: Vec<[f64; 3]> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let sample = resample(data, &mut rng);
            let x = replica_starts
                .iter()
                .map(|s| local_search(&sample, *s, &b, opts.max_eval))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .expect("at least one start")
                .0;
            let p = ScalingParams::from_slice(&x);
            [p.critical, p.nu(), p.beta()]
        })
        .collect();
    if opts.replicas >= 2 {
        let col = |f: &dyn Fn(&[f64; 3]) -> f64| bootstrap.iter().map(f).collect::<Vec<f64>>();
        let bon: Vec<f64> = col(&|p| p[2] / p[1]);
        let inu: Vec<f64> = col(&|p| 1.0 / p[1]);
        params.errors = Some(ParamErrors {
            critical: std_dev(&col(&|p| p[0])),
            beta_over_nu: std_dev(&bon),
            inv_nu: std_dev(&inu),
            nu: std_dev(&col(&|p| p[1])),
            beta: std_dev(&col(&|p| p[2])),
        });
    }
    Ok(CollapseResult {
        params,
        quality: best.1,
        at_bound,
        poor_collapse: best.1 > POOR_COLLAPSE,
        evaluations,
        bootstrap,
    })
}

/// Which end of the master curve to examine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Negative,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub slope_se: f64,
    pub expected: f64,
    pub deviation: f64,
    pub points: usize,
}

/// Log-log slope of `|y|` against `|x|` over the part of the master curve
/// with `|x| >= min_abs_x` on one branch, compared with `expected`
/// (`beta` for the negative branch, zero for the positive one).
pub fn asymptotic_check(master: &[(f64, f64)], branch: Branch, min_abs_x: f64, expected: f64) -> Result<SlopeReport> {
    let pts: Vec<(f64, f64)> = master
        .iter()
        .filter(|(x, y)| {
            let side = match branch {
                Branch::Negative => *x <= -min_abs_x,
                Branch::Positive => *x >= min_abs_x,
            };
            side && *y != 0.0 && x.abs() > 0.0
        })
        .map(|(x, y)| (x.abs().ln(), y.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} points on the {branch:?} branch, at least 3 needed", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("branch points share one |x|".into()));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let slope_se = if pts.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeReport { slope, slope_se, expected, deviation: slope - expected, points: pts.len() })
}

/// Master curve of a dataset as `(x, y)` pairs sorted by `x`.
pub fn master_curve(params: &ScalingParams, data: &ScalingDataset) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = rescale(params, data).into_iter().flatten().map(|p| (p.x, p.y)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
