use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sample of a quench.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `<2 S_z> / n`
    pub mz: f64,
    /// `<4 S_z^2> / n^2`
    pub mzz: f64,
    pub s1_half: f64,
    /// Discarded weight accumulated during the step that produced the sample.
    pub discarded: f64,
    /// `C_zz(l)` for `l = 1..`, empty when not recorded.
    pub czz: Vec<f64>,
}

/// Time series of the collective observables with running trapezoid
/// averages `(1/t) int_0^t`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub inst_mz: Vec<f64>,
    pub inst_mzz: Vec<f64>,
    pub avg_mz: Vec<f64>,
    pub avg_mzz: Vec<f64>,
    pub s1_half: Vec<f64>,
    pub discarded: Vec<f64>,
    /// Rows of `C_zz(l)`, one per sample; empty when disabled.
    pub czz: Vec<Vec<f64>>,
    pub czz_lmax: usize,
    /// Start of the averaging window.
    pub origin: f64,
    int_mz: f64,
    int_mzz: f64,
}

impl ObservableSeries {
    pub fn new(czz_lmax: usize) -> Self {
        ObservableSeries { czz_lmax, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, s: Sample) -> Result<()> {
        if s.czz.len() != self.czz_lmax {
            return Err(Error::SizeMismatch(format!("{} correlator values, expected {}", s.czz.len(), self.czz_lmax)));
        }
        match self.t.last() {
            None => {
                self.origin = s.t;
                self.avg_mz.push(s.mz);
                self.avg_mzz.push(s.mzz);
            }
            Some(&prev) => {
                if s.t <= prev {
                    return Err(Error::InvalidArgument(format!("sample time {} does not follow {prev}", s.t)));
                }
                let h = s.t - prev;
                self.int_mz += 0.5 * h * (s.mz + self.inst_mz[self.len() - 1]);
                self.int_mzz += 0.5 * h * (s.mzz + self.inst_mzz[self.len() - 1]);
                let span = s.t - self.origin;
                self.avg_mz.push(self.int_mz / span);
                self.avg_mzz.push(self.int_mzz / span);
            }
        }
        self.t.push(s.t);
        self.inst_mz.push(s.mz);
        self.inst_mzz.push(s.mzz);
        self.s1_half.push(s.s1_half);
        self.discarded.push(s.discarded);
        if self.czz_lmax > 0 {
            self.czz.push(s.czz);
        }
        Ok(())
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            t: self.t[i],
            mz: self.inst_mz[i],
            mzz: self.inst_mzz[i],
            s1_half: self.s1_half[i],
            discarded: self.discarded[i],
            czz: self.czz.get(i).cloned().unwrap_or_default(),
        }
    }

    /// Continue with a later run whose first sample repeats this series'
    /// last one (same time to 1e-9).
    pub fn append(&mut self, later: &ObservableSeries) -> Result<()> {
        if later.is_empty() {
            return Ok(());
        }
        if let Some(&last) = self.t.last() {
            if (later.t[0] - last).abs() > 1e-9 * last.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!("later run starts at {} instead of {last}", later.t[0])));
            }
            for i in 1..later.len() {
                self.push(later.sample(i))?;
            }
            Ok(())
        } else {
            *self = later.clone();
            Ok(())
        }
    }

    /// Index of the last sample with `t <= time + 1e-9`.
    pub fn index_at(&self, time: f64) -> Option<usize> {
        self.t.iter().rposition(|&t| t <= time + 1e-9)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "inst_mz", "inst_mzz", "avg_mz", "avg_mzz", "S1_half", "discarded_weight"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((1..=self.czz_lmax).map(|l| format!("czz_l{l}")));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for i in 0..self.len() {
            let mut row = vec![
                self.t[i],
                self.inst_mz[i],
                self.inst_mzz[i],
                self.avg_mz[i],
                self.avg_mzz[i],
                self.s1_half[i],
                self.discarded[i],
            ];
            if self.czz_lmax > 0 {
                row.extend_from_slice(&self.czz[i]);
            }
            out.write_record(row.iter().map(|x| x.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse a CSV written by [`write_csv`](Self::write_csv). Averages are
    /// recomputed from the instantaneous columns.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        let base = ["t", "inst_mz", "inst_mzz", "avg_mz", "avg_mzz", "S1_half", "discarded_weight"];
        if header.len() < base.len() || header[..base.len()] != base {
            return Err(Error::Format(format!("unexpected series header {header:?}")));
        }
        let lmax = header.len() - base.len();
        let mut series = ObservableSeries::new(lmax);
        for rec in rd.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Format(format!("'{f}': {e}"))))
                .collect::<Result<_>>()?;
            series.push(Sample { t: v[0], mz: v[1], mzz: v[2], s1_half: v[5], discarded: v[6], czz: v[7..].to_vec() })?;
        }
        Ok(series)
    }

    /// Values of a named CSV column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(match name {
            "t" => self.t.clone(),
            "inst_mz" => self.inst_mz.clone(),
            "inst_mzz" => self.inst_mzz.clone(),
            "avg_mz" => self.avg_mz.clone(),
            "avg_mzz" => self.avg_mzz.clone(),
            "S1_half" => self.s1_half.clone(),
            "discarded_weight" => self.discarded.clone(),
            other => {
                let l: usize = other
                    .strip_prefix("czz_l")
                    .and_then(|s| s.parse().ok())
                    .filter(|&l| l >= 1 && l <= self.czz_lmax)
                    .ok_or_else(|| Error::Format(format!("unknown column '{other}'")))?;
                self.czz.iter().map(|row| row[l - 1]).collect()
            }
        })
    }
}
