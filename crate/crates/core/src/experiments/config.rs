//! TOML experiment configuration.
//!
//! ```toml
//! kind = "rfk"                      # optional; must match the subcommand
//! resolutions = [0.03125, 0.015625] # cell sizes h, strictly descending
//! p = [3, 4, "inf"]                 # Schatten exponents
//! exploratory = false               # allow non-integer p or p <= d/alpha
//! output_dir = "out"
//!
//! [params]
//! alpha = 1.0
//! dim = 2
//! # constant = 1.0                 # optional kernel-constant override
//!
//! [assembly]
//! diagonal = "equal_volume_ball"    # or "subdivided"
//! max_cells = 20000
//!
//! [[shapes]]
//! label = "disk"
//! shape = { type = "ball", center = [0.0, 0.0], radius = 0.5641895835477563 }
//!
//! [[shapes]]
//! label = "square"
//! shape = { type = "box", corner = [-0.5, -0.5], sides = [1.0, 1.0] }
//!
//! [mc]                              # trace-mc, bll, schatten cross-check
//! s = 3
//! n_samples = 1000000
//! seed = 42
//! lanes = 8
//!
//! [hks]
//! total_measure = 1.0
//! distances = [0.5, 1.0, 2.0, 4.0, 8.0]
//!
//! [rearrange]
//! count = 50
//! first_seed = 0
//!
//! [probe]
//! alpha1 = 0.3
//! alpha2 = 0.3
//! dim = 1
//! r_values = [0.5, 1.0, 2.0]
//! truncation_radius = 20000.0
//! quad_points = 16
//! ```
//!
//! Shape expressions use the `type` tag: `ball`, `box`, `ellipse`,
//! `annulus`, `union` (with `members`), `translate` (with `shape`, `offset`).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assemble::AssemblyOptions;
use crate::domain::ShapeSpec;
use crate::error::{Result, RieszError};
use crate::kernel::RieszParams;
use crate::spectra::SchattenExponent;
use crate::tolerances::NOMINAL_MEASURE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Schatten,
    Rfk,
    Hks,
    TraceMc,
    Bll,
    RearrangeCheck,
    Converge,
    ProbeConvolution,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Schatten => "schatten",
            ExperimentKind::Rfk => "rfk",
            ExperimentKind::Hks => "hks",
            ExperimentKind::TraceMc => "trace_mc",
            ExperimentKind::Bll => "bll",
            ExperimentKind::RearrangeCheck => "rearrange_check",
            ExperimentKind::Converge => "converge",
            ExperimentKind::ProbeConvolution => "probe_convolution",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<RieszParams> {
        let p = RieszParams::new(self.alpha, self.dim)?;
        match self.constant {
            Some(c) => p.with_constant(c),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledShape {
    pub label: String,
    pub shape: ShapeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub s: u32,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default = "default_lanes")]
    pub lanes: usize,
}

fn default_lanes() -> usize {
    crate::trace_mc::DEFAULT_LANES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HksConfig {
    pub total_measure: f64,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangeConfig {
    pub count: u32,
    #[serde(default)]
    pub first_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub dim: usize,
    pub r_values: Vec<f64>,
    pub truncation_radius: f64,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
}

fn default_quad_points() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub resolutions: Vec<f64>,
    #[serde(default)]
    pub p: Vec<SchattenExponent>,
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub assembly: AssemblyOptions,
    #[serde(default)]
    pub shapes: Vec<LabeledShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hks: Option<HksConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rearrange: Option<RearrangeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
}

impl ExperimentConfig {
    pub fn new(params: ParamsConfig) -> Self {
        Self {
            kind: None,
            resolutions: Vec::new(),
            p: Vec::new(),
            exploratory: false,
            output_dir: None,
            params,
            assembly: AssemblyOptions::default(),
            shapes: Vec::new(),
            mc: None,
            hks: None,
            rearrange: None,
            probe: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RieszError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| RieszError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RieszError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn params(&self) -> Result<RieszParams> {
        self.params.build().map_err(|e| RieszError::Config(e.to_string()))
    }

    pub fn shape(&self, label: &str) -> Option<&ShapeSpec> {
        self.shapes.iter().find(|s| s.label == label).map(|s| &s.shape)
    }

    /// Checks shared by every experiment kind.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        if self.resolutions.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(RieszError::Config("resolutions must be positive".into()));
        }
        if self.resolutions.windows(2).any(|w| w[0] <= w[1]) {
            return Err(RieszError::Config(format!(
                "resolutions must be strictly descending, got {:?}",
                self.resolutions
            )));
        }
        for p in &self.p {
            if let SchattenExponent::Finite(v) = p {
                if !(*v >= 1.0) {
                    return Err(RieszError::Config(format!("Schatten exponent {v} is below 1")));
                }
            }
        }
        let mut nominal = None;
        for s in &self.shapes {
            let d = s
                .shape
                .dim()
                .map_err(|e| RieszError::Config(format!("shape {:?}: {e}", s.label)))?;
            if d != params.dim() {
                return Err(RieszError::Config(format!(
                    "shape {:?} has dimension {d}, params have {}",
                    s.label,
                    params.dim()
                )));
            }
            let m = s.shape.nominal_measure().ok_or_else(|| {
                RieszError::Config(format!(
                    "shape {:?} has no analytic measure (overlapping union?)",
                    s.label
                ))
            })?;
            match nominal {
                None => nominal = Some(m),
                Some(m0) => {
                    if (m - m0).abs() > NOMINAL_MEASURE * m0 {
                        return Err(RieszError::Config(format!(
                            "shape {:?} has nominal measure {m}, expected {m0}",
                            s.label
                        )));
                    }
                }
            }
        }
        let mut labels: Vec<&str> = self.shapes.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(RieszError::Config("shape labels must be unique".into()));
        }
        Ok(())
    }

    /// Common nominal measure of the shape list.
    pub fn nominal_measure(&self) -> Option<f64> {
        self.shapes.first().and_then(|s| s.shape.nominal_measure())
    }
}
