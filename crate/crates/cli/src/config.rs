//! Scenario configuration: versioned JSON, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Paneitz,
    Green,
    Qcflow,
    Ricciflow,
    Compose,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Paneitz, Kind::Green, Kind::Qcflow, Kind::Ricciflow, Kind::Compose];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Paneitz => "paneitz",
            Kind::Green => "green",
            Kind::Qcflow => "qcflow",
            Kind::Ricciflow => "ricciflow",
            Kind::Compose => "compose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    /// `||eta||_1` targets for conformal factors.
    pub alphas: Vec<f64>,
    /// `int |W|^2` targets for warped metrics.
    pub betas: Vec<f64>,
    /// QC-flow time steps `k`.
    pub steps: usize,
    /// Ricci-flow end time.
    pub t_end: f64,
    pub kernel_truncation: usize,
    /// Profile modes carried by the Ricci flow.
    pub flow_modes: usize,
    /// Random factors checked by the Paneitz scenario.
    pub samples: usize,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            alphas: vec![0.02, 0.05, 0.1],
            betas: vec![8e-3, 2e-3, 5e-4],
            steps: 16,
            t_end: 5.0,
            kernel_truncation: 64,
            flow_modes: 16,
            samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub parameters: Parameters,
}

fn default_resolution() -> usize {
    256
}

impl Scenario {
    pub fn new(kind: Kind) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            kind,
            seed: 0,
            resolution: default_resolution(),
            parameters: Parameters::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let r = self.resolution;
        if !r.is_power_of_two() || !(64..=1024).contains(&r) {
            return Err(CliError::Config(format!(
                "resolution must be a power of two in [64, 1024], got {r}"
            )));
        }
        let p = &self.parameters;
        if p.alphas.iter().chain(&p.betas).any(|v| !(*v >= 0.0)) {
            return Err(CliError::Config("alpha and beta targets must be non-negative".into()));
        }
        if p.steps == 0 || p.samples == 0 || p.flow_modes < 4 || !(p.t_end > 0.0) {
            return Err(CliError::Config("steps, samples, flow_modes and t_end must be positive".into()));
        }
        Ok(())
    }

    /// Zonal band limit used at this resolution.
    pub fn k_max(&self) -> usize {
        self.resolution / 4
    }
}
