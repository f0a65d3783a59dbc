//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! pipeline = "both"
//! grids = [[64, 64], [128, 128]]
//! checks = ["fiber", "wp_routes"]
//! out = "out/model_b"
//!
//! [model]
//! a = "2"
//! c = "1"
//! warp_amplitude = 0.2
//! warp_shape = "bump"
//!
//! [tolerances]
//! residual_tol = 1e-3
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num::rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{rational_str, ModelSpec, WarpShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Spr,
    Ske,
    Both,
}

impl FromStr for PipelineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spr" => Ok(PipelineKind::Spr),
            "ske" => Ok(PipelineKind::Ske),
            "both" => Ok(PipelineKind::Both),
            _ => Err(Error::Config(format!("unknown pipeline {s:?} (spr|ske|both)"))),
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineKind::Spr => "spr",
            PipelineKind::Ske => "ske",
            PipelineKind::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Fiber,
    WpRoutes,
    Gprime,
    BaseMa,
    TwistedKe,
    WplFs,
    VolumeIdentities,
    Cohomology,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::Fiber,
        CheckName::WpRoutes,
        CheckName::Gprime,
        CheckName::BaseMa,
        CheckName::TwistedKe,
        CheckName::WplFs,
        CheckName::VolumeIdentities,
        CheckName::Cohomology,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Fiber => "fiber",
            CheckName::WpRoutes => "wp_routes",
            CheckName::Gprime => "gprime",
            CheckName::BaseMa => "base_ma",
            CheckName::TwistedKe => "twisted_ke",
            CheckName::WplFs => "wpl_fs",
            CheckName::VolumeIdentities => "volume_identities",
            CheckName::Cohomology => "cohomology",
        }
    }
}

impl FromStr for CheckName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(with = "rational_str")]
    pub a: Rational64,
    #[serde(with = "rational_str")]
    pub c: Rational64,
    #[serde(default)]
    pub warp_amplitude: f64,
    #[serde(default)]
    pub warp_shape: WarpShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub newton_tol: f64,
    /// Bound on discretization residuals at the finest grid.
    pub residual_tol: f64,
    /// Bound on quantities that are exact up to quadrature or roundoff.
    pub quadrature_tol: f64,
    /// `ε` in the `L^{1+ε}` norm of `G'`.
    pub lp_epsilon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton_tol: 1e-10,
            residual_tol: 1e-3,
            quadrature_tol: 1e-8,
            lp_epsilon: 0.1,
        }
    }
}

fn default_grids() -> Vec<(usize, usize)> {
    vec![(64, 64), (128, 128)]
}

fn default_pipeline() -> PipelineKind {
    PipelineKind::Both
}

fn default_checks() -> Vec<CheckName> {
    CheckName::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSection,
    #[serde(default = "default_pipeline")]
    pub pipeline: PipelineKind,
    #[serde(default = "default_grids")]
    pub grids: Vec<(usize, usize)>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Model A or Model B with default settings.
    pub fn preset(spec: &ModelSpec) -> Self {
        PipelineConfig {
            model: ModelSection {
                a: spec.a,
                c: spec.c,
                warp_amplitude: spec.warp_amplitude,
                warp_shape: spec.warp_shape,
            },
            pipeline: default_pipeline(),
            grids: default_grids(),
            tolerances: Tolerances::default(),
            checks: default_checks(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() {
            return Err(Error::Config("grids must be nonempty".into()));
        }
        for &(nf, nb) in &self.grids {
            Grid::new(nf, nb).map_err(|e| Error::Config(e.to_string()))?;
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("newton_tol", t.newton_tol),
            ("residual_tol", t.residual_tol),
            ("quadrature_tol", t.quadrature_tol),
            ("lp_epsilon", t.lp_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.checks.is_empty() {
            return Err(Error::Config("checks must be nonempty".into()));
        }
        let mut seen = self.checks.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.checks.len() {
            return Err(Error::Config("checks contain duplicates".into()));
        }
        Ok(())
    }

    pub fn spec(&self, n_fiber: usize, n_base: usize) -> ModelSpec {
        ModelSpec {
            a: self.model.a,
            c: self.model.c,
            warp_amplitude: self.model.warp_amplitude,
            warp_shape: self.model.warp_shape,
            n_fiber,
            n_base,
        }
    }

    /// Canonical JSON used for the provenance hash.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}

/// Parses `NxM` into interval counts.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("grid must look like 64x64, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let g = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    Grid::new(g.0, g.1).map_err(|e| Error::Config(e.to_string()))?;
    Ok(g)
}
