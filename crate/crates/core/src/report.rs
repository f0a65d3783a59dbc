//! Structured run report and its deterministic serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::{CheckName, PipelineConfig};
use crate::convergence::{order, refinement, ROUNDOFF_FLOOR};
use crate::error::{Error, Result};
use crate::model::DerivedConstants;

pub const SCHEMA: &str = "fibrelab-report/1";

/// Shortest round-trip decimal form; exponent notation outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*v))
}

fn ser_f64_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| fmt_f64(*x)))
}

fn ser_opt_f64_vec<S: Serializer>(v: &[Option<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.map(fmt_f64)))
}

/// How a metric is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Discretization residual: finest value within the bound and, above
    /// the roundoff floor, order at least 1.8 between consecutive grids.
    Refine(f64),
    /// Every grid value within the bound.
    Bound(f64),
    /// Boolean stored as 1.0 / 0.0.
    Flag,
    /// Reported only.
    Info,
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&match self {
            Rule::Refine(t) => format!("refine<={}", fmt_f64(*t)),
            Rule::Bound(t) => format!("bound<={}", fmt_f64(*t)),
            Rule::Flag => "flag".into(),
            Rule::Info => "info".into(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub name: String,
    pub rule: Rule,
    /// One entry per grid; `null` where the grid was not reached.
    #[serde(serialize_with = "ser_opt_f64_vec")]
    pub values: Vec<Option<f64>>,
    #[serde(serialize_with = "ser_f64_vec")]
    pub orders: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

impl MetricRecord {
    pub fn new(name: String, rule: Rule, values: Vec<Option<f64>>) -> Self {
        let complete: Option<Vec<f64>> = values.iter().copied().collect();
        let orders = match (&complete, rule) {
            (Some(v), Rule::Refine(_) | Rule::Bound(_)) => v.windows(2).map(|w| order(w[0], w[1])).collect(),
            _ => Vec::new(),
        };
        let pass = match (rule, complete) {
            (Rule::Info, _) => None,
            (_, None) => Some(false),
            (Rule::Refine(t), Some(v)) if v.len() == 1 => Some(v[0] <= t),
            (Rule::Refine(t), Some(v)) => Some(refinement(&v, t).pass),
            (Rule::Bound(t), Some(v)) => Some(v.iter().all(|&x| x <= t)),
            (Rule::Flag, Some(v)) => Some(v.iter().all(|&x| x == 1.0)),
        };
        MetricRecord {
            name,
            rule,
            values,
            orders,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: CheckName,
    pub metrics: Vec<MetricRecord>,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: CheckName, metrics: Vec<MetricRecord>) -> Self {
        let pass = !metrics.is_empty() && metrics.iter().all(|m| m.pass != Some(false));
        CheckRecord { name, metrics, pass }
    }

    /// Smallest order per grid pair over residual metrics still above the
    /// roundoff floor; `None` when all of them sit below it.
    pub fn governing_orders(&self) -> Vec<Option<f64>> {
        let n = self.metrics.iter().map(|m| m.orders.len()).max().unwrap_or(0);
        (0..n)
            .map(|k| {
                self.metrics
                    .iter()
                    .filter(|m| matches!(m.rule, Rule::Refine(_)) && m.orders.len() > k)
                    .filter(|m| m.values[k + 1].is_some_and(|v| v > ROUNDOFF_FLOOR))
                    .map(|m| m.orders[k])
                    .reduce(f64::min)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub check: CheckName,
    /// `"roundoff"` where every residual of the check is below the floor.
    pub orders: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub code_version: String,
    pub config_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: String,
    pub provenance: Provenance,
    pub config: PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<DerivedConstants>,
    pub checks: Vec<CheckRecord>,
    pub convergence: Vec<ConvergenceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    pub all_pass: bool,
    #[serde(skip)]
    pub profiles: Vec<Profile>,
}

impl Report {
    pub fn new(
        config: &PipelineConfig,
        constants: Option<DerivedConstants>,
        checks: Vec<CheckRecord>,
        failure: Option<StageFailure>,
        profiles: Vec<Profile>,
    ) -> Self {
        let convergence = if config.grids.len() > 1 {
            checks
                .iter()
                .map(|c| ConvergenceRow {
                    check: c.name,
                    orders: c
                        .governing_orders()
                        .into_iter()
                        .map(|o| o.map_or_else(|| "roundoff".to_string(), fmt_f64))
                        .collect(),
                })
                .collect()
        } else {
            Vec::new()
        };
        let all_pass = failure.is_none() && checks.iter().all(|c| c.pass);
        let mut config = config.clone();
        config.out = None;
        Report {
            schema: SCHEMA.into(),
            provenance: Provenance {
                code_version: env!("CARGO_PKG_VERSION").into(),
                config_sha256: config_hash(&config),
            },
            config,
            constants,
            checks,
            convergence,
            failure,
            all_pass,
            profiles,
        }
    }

    pub fn check(&self, name: CheckName) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, check: CheckName, metric: &str) -> Option<&MetricRecord> {
        self.check(check)?.metrics.iter().find(|m| m.name == metric)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn config_hash(config: &PipelineConfig) -> String {
    let digest = Sha256::digest(config.canonical_json().as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Per-grid base profiles for external plotting.
#[derive(Debug, Clone)]
pub struct Profile {
    pub file_stem: String,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        let rows = self.columns.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        for r in 0..rows {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|(_, v)| v.get(r).map_or_else(String::new, |x| fmt_f64(*x)))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes `report.json` and one CSV per profile into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| Error::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json()).map_err(io(&path))?;
    written.push(path);
    for p in &report.profiles {
        let path = dir.join(format!("{}.csv", p.file_stem));
        std::fs::write(&path, p.to_csv()).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
