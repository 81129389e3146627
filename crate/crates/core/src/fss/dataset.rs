//! Curves of an order parameter against the control field, one per size
//! (or quench time), and their import from trajectory tables.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::ObservableSeries;

/// Which scaling variable labels the curves and which observable is fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ansatz {
    /// `M_z = n^(-beta/nu) f(n^(1/nu) (B - B_c))`.
    SizeMz,
    /// `M_z = t^(-beta/(z nu)) g(t^(1/(z nu)) (B - B_c))`.
    TimeMz,
    /// Size ansatz for `M_zz`.
    SizeMzz,
    /// Time ansatz for `M_zz`.
    TimeMzz,
}

impl Ansatz {
    /// Series column holding the observable.
    pub fn column(self) -> &'static str {
        match self {
            Ansatz::SizeMz | Ansatz::TimeMz => "avg_mz",
            Ansatz::SizeMzz | Ansatz::TimeMzz => "avg_mzz",
        }
    }

    pub fn labels_are_times(self) -> bool {
        matches!(self, Ansatz::TimeMz | Ansatz::TimeMzz)
    }
}

/// One curve at fixed label `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: f64,
    pub control: Vec<f64>,
    pub value: Vec<f64>,
    pub error: Vec<f64>,
}

impl Curve {
    pub fn new(label: f64, mut points: Vec<(f64, f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Curve {
            label,
            control: points.iter().map(|p| p.0).collect(),
            value: points.iter().map(|p| p.1).collect(),
            error: points.iter().map(|p| p.2).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.control.len()
    }

    pub fn is_empty(&self) -> bool {
        self.control.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub ansatz: Ansatz,
    pub curves: Vec<Curve>,
}

impl ScalingDataset {
    pub fn new(ansatz: Ansatz, curves: Vec<Curve>) -> Result<Self> {
        let d = ScalingDataset { ansatz, curves };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.len() < 2 {
            return Err(Error::InvalidArgument(format!("{} curves, at least 2 are required", self.curves.len())));
        }
        for c in &self.curves {
            if !(c.label > 0.0) {
                return Err(Error::InvalidArgument(format!("curve label {} must be positive", c.label)));
            }
            if c.len() < 4 {
                return Err(Error::InvalidArgument(format!("curve {} has {} points, at least 4 needed", c.label, c.len())));
            }
            if c.value.len() != c.len() || c.error.len() != c.len() {
                return Err(Error::SizeMismatch(format!("curve {} has ragged columns", c.label)));
            }
            if c.error.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::InvalidArgument(format!("curve {} has non-positive errors", c.label)));
            }
            if c.control.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidArgument(format!("curve {} is not sorted", c.label)));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }

    /// Drops curves with label below `min` (short quenches or small sizes).
    pub fn with_min_label(&self, min: f64) -> Result<Self> {
        Self::new(self.ansatz, self.curves.iter().filter(|c| c.label >= min).cloned().collect())
    }

    /// Keeps control values inside `[lo, hi]`.
    pub fn with_control_window(&self, lo: f64, hi: f64) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .map(|c| {
                let pts = (0..c.len())
                    .filter(|&i| c.control[i] >= lo && c.control[i] <= hi)
                    .map(|i| (c.control[i], c.value[i], c.error[i]))
                    .collect();
                Curve::new(c.label, pts)
            })
            .collect();
        Self::new(self.ansatz, curves)
    }

    /// Loads curves from a manifest with columns `label,path,column` and
    /// optional `control` and `error`. Each row contributes the last value
    /// of `column` in the series table at `path`; the control value falls
    /// back to `b / j0` from the JSON sidecar next to it, the error to
    /// `default_error`.
    pub fn from_manifest(path: &Path, ansatz: Ansatz, default_error: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            label: f64,
            path: PathBuf,
            column: Option<String>,
            control: Option<f64>,
            error: Option<f64>,
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut rdr = csv::Reader::from_path(path)?;
        let mut groups: Vec<(f64, Vec<(f64, f64, f64)>)> = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            let file = if row.path.is_absolute() { row.path.clone() } else { base.join(&row.path) };
            let series = ObservableSeries::read_csv(std::fs::File::open(&file)?)?;
            let column = row.column.as_deref().unwrap_or(ansatz.column());
            let values = series.column(column)?;
            let value = *values
                .last()
                .ok_or_else(|| Error::Format(format!("{} has no samples", file.display())))?;
            let control = match row.control {
                Some(c) => c,
                None => sidecar_control(&file)?,
            };
            let error = row.error.unwrap_or(default_error);
            match groups.iter_mut().find(|g| g.0 == row.label) {
                Some(g) => g.1.push((control, value, error)),
                None => groups.push((row.label, vec![(control, value, error)])),
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(ansatz, groups.into_iter().map(|(l, p)| Curve::new(l, p)).collect())
    }
}

fn sidecar_control(csv_path: &Path) -> Result<f64> {
    let side = csv_path.with_extension("json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&side)?)?;
    let spec = &v["spec"];
    match (spec["b"].as_f64(), spec["j0"].as_f64()) {
        (Some(b), Some(j0)) if j0 != 0.0 => Ok(b / j0),
        _ => Err(Error::Format(format!("{} has no spec.b / spec.j0", side.display()))),
    }
}

/// `f(x) = (1 + (sqrt(1 + x^2) - x) / 2)^beta`: `|x|^beta` for `x -> -inf`,
/// `1` for `x -> +inf`.
pub fn reference_scaling_function(x: f64, beta: f64) -> f64 {
    (1.0 + 0.5 * ((1.0 + x * x).sqrt() - x)).powf(beta)
}

/// Data following `M = L^(-beta/nu) f(L^(1/nu) (B - B_c))` with relative
/// Gaussian noise, each point's error set to `noise * M`.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_dataset<R: Rng + ?Sized>(
    ansatz: Ansatz,
    critical: f64,
    nu: f64,
    beta: f64,
    labels: &[f64],
    controls: &[f64],
    noise: f64,
    rng: &mut R,
) -> Result<ScalingDataset> {
    let curves = labels
        .iter()
        .map(|&l| {
            let pts = controls
                .iter()
                .map(|&b| {
                    let m = l.powf(-beta / nu) * reference_scaling_function(l.powf(1.0 / nu) * (b - critical), beta);
                    let eps: f64 = StandardNormal.sample(&mut *rng);
                    let err = if noise > 0.0 { noise * m } else { 1e-3 * m };
                    (b, m * (1.0 + noise * eps), err)
                })
                .collect();
            Curve::new(l, pts)
        })
        .collect();
    ScalingDataset::new(ansatz, curves)
}
