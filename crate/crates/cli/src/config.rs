// SPDX-License-Identifier: Apache-2.0

//! Campaign configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowbond::testfn::{battery, Family};
use slowbond::{BetaRegime, LatticeConfig, TestFunction};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: Option<u64>,
    pub regime: Option<BetaRegime>,
    pub battery: Option<Vec<FunctionSpec>>,
    pub validate: Option<ValidateSection>,
    pub evolve: Option<EvolveSection>,
    pub lattice: Option<LatticeConfig>,
    pub probes: Option<Vec<FunctionSpec>>,
    pub martingale: Option<MartingaleSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub id: String,
    pub function: Family,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub suites: Vec<Suite>,
    pub tol: f64,
    pub max_k: usize,
    pub times: Vec<f64>,
    pub generator_eps: Vec<f64>,
    pub generator_times: Vec<f64>,
    pub continuity_t: f64,
    pub continuity_gap: f64,
    pub gradnorm_horizon: f64,
    pub gradnorm_steps: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            tol: 1e-6,
            max_k: 2,
            times: vec![0.01, 0.1, 1.0],
            generator_eps: vec![1e-2, 5e-3, 2.5e-3],
            generator_times: vec![0.0, 0.1, 1.0],
            continuity_t: 0.1,
            continuity_gap: 2e-3,
            gradnorm_horizon: 1.0,
            gradnorm_steps: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Membership,
    Laplacian,
    Evolution,
    Generator,
    Continuity,
    Gradnorm,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Membership, Suite::Laplacian, Suite::Evolution, Suite::Generator, Suite::Continuity, Suite::Gradnorm];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Membership => "membership",
            Suite::Laplacian => "laplacian",
            Suite::Evolution => "evolution",
            Suite::Generator => "generator",
            Suite::Continuity => "continuity",
            Suite::Gradnorm => "gradnorm",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    /// Battery ids; all members when absent.
    pub functions: Option<Vec<String>>,
    pub times: Vec<f64>,
    pub grid: GridSpec,
    #[serde(default = "zeroth")]
    pub orders: Vec<usize>,
}

fn zeroth() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.points < 2 || !(self.to > self.from) {
            return Err(CliError::Usage("evolve.grid needs points >= 2 and to > from".into()));
        }
        let step = (self.to - self.from) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.from + step * i as f64).collect())
    }
}

/// Extra probes for the martingale checks on a simulated campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleSection {
    /// Probe id of `H`.
    pub function: String,
    /// Times of the `Z_t` probes; the horizon is the lattice `T`.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Probe id of `H`.
    pub function: String,
    pub times: Vec<f64>,
    pub inputs: Vec<CompareInput>,
    #[serde(default)]
    pub atom: bool,
    /// Label of the Line-regime input used for the martingale checks.
    pub martingale_input: Option<String>,
    #[serde(default)]
    pub dynkin_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareInput {
    pub label: String,
    pub samples: PathBuf,
    #[serde(with = "slowbond::testfn::beta_repr")]
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
        Ok((config, text))
    }

    /// Resolved `(id, function)` pairs of the battery, defaulting to the regime's own.
    pub fn battery(&self, regime: &BetaRegime) -> Result<Vec<(String, TestFunction)>, CliError> {
        match &self.battery {
            Some(specs) if specs.is_empty() => Err(CliError::Usage("battery is empty".into())),
            Some(specs) => build(specs),
            None => Ok(battery(regime)?.into_iter().map(|(id, h)| (id.to_string(), h)).collect()),
        }
    }

    pub fn probes(&self) -> Result<Vec<(String, TestFunction)>, CliError> {
        match &self.probes {
            Some(specs) if !specs.is_empty() => build(specs),
            _ => Err(CliError::Usage("at least one [[probes]] entry is required".into())),
        }
    }
}

fn build(specs: &[FunctionSpec]) -> Result<Vec<(String, TestFunction)>, CliError> {
    let mut seen = std::collections::HashSet::new();
    specs
        .iter()
        .map(|s| {
            if !seen.insert(s.id.as_str()) {
                return Err(CliError::Usage(format!("duplicate function id `{}`", s.id)));
            }
            Ok((s.id.clone(), TestFunction::from_family(&s.function)?))
        })
        .collect()
}

/// Probe id of the Laplacian of `id`.
pub fn laplacian_id(id: &str) -> String {
    format!("{id}:lap")
}

/// Probe id of `T_{S-t} H` measured at time `t`.
pub fn z_id(id: &str, t: f64) -> String {
    format!("{id}:z@{t}")
}
