//! Output files: trace CSV, run summary JSON, certificate JSON and the
//! Monte-Carlo run table and aggregate.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use afdr_core::lft::SmallGainCertificate;
use afdr_core::sim::{MonteCarloSummary, RunSummary, SimResult, TraceRow, WindowStats};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const TRACE_HEADER: &str = "k,t,d,n,what,r_circ,r,y,saturated,theta_norm";
pub const RUNS_HEADER: &str = "run,delta_seed,std_pre,std_post,stable,diverged_at";

/// Nine significant digits.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// JSON has no infinities; non-finite statistics become `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn write_trace<W: Write>(out: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            sig9(r.t),
            sig9(r.d),
            sig9(r.n),
            sig9(r.w_hat),
            sig9(r.r_circ),
            sig9(r.r),
            sig9(r.y),
            u8::from(r.saturated),
            sig9(r.theta_norm),
        )?;
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

pub fn write_trace_file(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types always serialize");
    fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryJson {
    pub std_pre: Option<f64>,
    pub std_post: Option<f64>,
    pub stable: bool,
    pub diverged_at: Option<usize>,
    pub config_hash: String,
}

impl RunSummaryJson {
    pub fn new(result: &SimResult, config_hash: String) -> Self {
        Self {
            std_pre: finite(result.std_pre),
            std_post: finite(result.std_post),
            stable: result.stable,
            diverged_at: result.diverged_at,
            config_hash,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormsJson {
    pub h11: f64,
    pub h12: f64,
    pub h21: f64,
    pub h22: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    /// `null` when the condition places no bound on β.
    pub beta_star: Option<f64>,
    pub s1: Option<f64>,
    pub norms: NormsJson,
    pub feasible: bool,
}

impl From<&SmallGainCertificate> for CertificateJson {
    fn from(c: &SmallGainCertificate) -> Self {
        Self {
            beta_star: finite(c.beta_star),
            s1: c.feasible.then_some(c.s1).and_then(finite),
            norms: NormsJson {
                h11: c.norms.h11,
                h12: c.norms.h12,
                h21: c.norms.h21,
                h22: c.norms.h22,
            },
            feasible: c.feasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsJson {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl From<WindowStats> for StatsJson {
    fn from(s: WindowStats) -> Self {
        Self {
            mean: s.mean,
            min: s.min,
            max: s.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateJson {
    pub runs: usize,
    pub unstable_count: usize,
    /// Statistics over stable runs only.
    pub std_pre: Option<StatsJson>,
    pub std_post: Option<StatsJson>,
    pub base_seed: u64,
    pub delta: f64,
    pub config_hash: String,
}

impl AggregateJson {
    pub fn new(summary: &MonteCarloSummary, base_seed: u64, delta: f64, config_hash: String) -> Self {
        Self {
            runs: summary.runs.len(),
            unstable_count: summary.unstable,
            std_pre: summary.pre.map(Into::into),
            std_post: summary.post.map(Into::into),
            base_seed,
            delta,
            config_hash,
        }
    }
}

pub fn write_runs<W: Write>(out: &mut W, runs: &[RunSummary]) -> std::io::Result<()> {
    writeln!(out, "{RUNS_HEADER}")?;
    let stat = |x: f64| if x.is_finite() { sig9(x) } else { "inf".into() };
    for r in runs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            r.delta_seed,
            stat(r.std_pre),
            stat(r.std_post),
            u8::from(r.stable),
            r.diverged_at.map(|k| k.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

pub fn write_runs_file(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_runs(&mut w, runs)
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize) -> TraceRow {
        TraceRow {
            k,
            t: k as f64 * 0.01,
            d: 0.35,
            n: -0.0123456789012,
            w_hat: 1.0 / 3.0,
            r_circ: 0.0,
            r: 0.0,
            y: 2.0,
            saturated: k == 1,
            theta_norm: 0.0,
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[row(0), row(1)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[0], "0");
        assert_eq!(fields[3], "-1.23456789e-2");
        assert_eq!(fields[4], "3.33333333e-1");
        assert_eq!(lines[2].split(',').nth(8), Some("1"));
        // Nine significant digits round-trip to within 5e-9 relative.
        let back: f64 = fields[4].parse().unwrap();
        assert!((back - 1.0 / 3.0).abs() < 5e-9);
    }

    #[test]
    fn summary_uses_null_for_divergence() {
        let res = SimResult {
            trace: vec![row(0)],
            std_pre: 0.28,
            std_post: f64::INFINITY,
            stable: false,
            diverged_at: Some(1400),
            on_index: 1000,
        };
        let json = serde_json::to_value(RunSummaryJson::new(&res, "abc".into())).unwrap();
        assert_eq!(json["std_post"], serde_json::Value::Null);
        assert_eq!(json["diverged_at"], 1400);
        assert_eq!(json["stable"], false);
        assert_eq!(json["config_hash"], "abc");
    }
}
