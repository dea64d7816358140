use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One check outcome. `pass` is `None` for informational records, which
/// never affect the overall verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub n: usize,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub statistic: f64,
    pub tolerance: Option<f64>,
    pub order: Option<f64>,
    pub pass: Option<bool>,
    pub seed: Option<u64>,
    pub detail: String,
}

impl CheckRecord {
    pub fn new(check: impl Into<String>, n: usize, lambda: f64, statistic: f64) -> Self {
        Self {
            check: check.into(),
            n,
            lambda,
            gamma: None,
            statistic,
            tolerance: None,
            order: None,
            pass: None,
            seed: None,
            detail: String::new(),
        }
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn order(mut self, order: f64) -> Self {
        self.order = Some(order);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Passes iff `statistic <= tol`.
    pub fn at_most(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self.pass = Some(self.statistic <= tol);
        self
    }

    /// Passes iff `statistic >= tol`.
    pub fn at_least(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self.pass = Some(self.statistic >= tol);
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn informational(mut self) -> Self {
        self.pass = None;
        self
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    /// Wall-clock stamp, the only field allowed to differ between reruns.
    pub generated_unix: Option<u64>,
    pub config: serde_json::Value,
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generated_unix: None,
            config,
            records: Vec::new(),
        }
    }

    pub fn stamp_now(&mut self) {
        self.generated_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    pub fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(rs);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.failed())
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let io = |e: Error| std::io::Error::other(e.to_string());
        fs::write(dir.join("report.json"), self.to_json().map_err(io)?)?;
        fs::write(dir.join("report.csv"), self.to_csv().map_err(io)?)?;
        Ok(())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub(crate) fn fmt_point(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|a| format!("{a:.6e}")).collect();
    format!("({})", parts.join(", "))
}
