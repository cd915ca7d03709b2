//! Experiment outputs and the log-log slope fit they share.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
    pub target: Option<f64>,
    pub pass: bool,
    pub seed: u64,
    /// Reasons the experiment could not be judged, e.g. too few points.
    pub flags: Vec<String>,
}

impl SlopeReport {
    pub fn invalid(&self) -> bool {
        !self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen; non-positive when every trial satisfied the bound.
    pub worst_margin: f64,
    pub pass: bool,
    pub params: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub seed: u64,
}

impl CheckReport {
    pub fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            trials: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
            pass: false,
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            seed,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Records one trial with margin `lhs − rhs`; positive margins are violations.
    pub fn record(&mut self, margin: f64) {
        self.trials += 1;
        if !(margin <= 0.0) {
            self.violations += 1;
        }
        if margin > self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }
}

/// Ordinary least squares of `ys` on `xs`, on log scales when `log` is set.
/// Returns `(slope, r²)`; constant `ys` gives `(0, 0)`.
pub fn slope_fit(xs: &[f64], ys: &[f64], log: bool) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} xs vs {} ys", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Parameter("slope fit needs at least 3 points".into()));
    }
    let (u, v): (Vec<f64>, Vec<f64>) = if log {
        if let Some(bad) = xs.iter().chain(ys).find(|&&z| !(z > 0.0)) {
            return Err(Error::Domain(format!("non-positive value {bad} in log-log fit")));
        }
        (xs.iter().map(|x| x.ln()).collect(), ys.iter().map(|y| y.ln()).collect())
    } else {
        (xs.to_vec(), ys.to_vec())
    };
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    let svv: f64 = v.iter().map(|b| (b - mv).powi(2)).sum();
    let suv: f64 = u.iter().zip(&v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    if !(suu > 0.0) {
        return Err(Error::Parameter("xs must be distinct".into()));
    }
    let slope = suv / suu;
    let r2 = if svv > 0.0 { (suv * suv / (suu * svv)).clamp(0.0, 1.0) } else { 0.0 };
    Ok((slope, r2))
}
