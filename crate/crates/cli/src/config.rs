//! Run configuration file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qstokes::{Realization, StateSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanOverrides {
    /// θ values of the φ = 0 family (at least five, distinct mod π).
    pub theta_phi0: Option<Vec<f64>>,
    /// θ values of the φ = π/2 family (at least three, distinct mod π).
    pub theta_phi_half: Option<Vec<f64>>,
    /// Add θ = π/4 and 3π/4 to both families.
    pub verify_identities: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    /// Records file (`.json`, or `.csv` for the flat export).
    pub records: Option<PathBuf>,
    /// Reconstruction report JSON.
    pub report: Option<PathBuf>,
    /// State summary JSON.
    pub state: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest boundary mass accepted without a truncation warning.
    pub boundary: f64,
    /// Absolute slack of the record consistency checks.
    pub consistency: f64,
    /// Largest reconstructed-vs-oracle deviation accepted in exact mode.
    pub oracle: f64,
    /// Largest add/subtract identity discrepancy accepted in exact mode.
    pub identity: f64,
    /// Accepted deviation in bootstrap standard errors for sampled runs.
    pub sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            boundary: 1e-10,
            consistency: 1e-8,
            oracle: 1e-8,
            identity: 1e-8,
            sigma: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub state: Option<StateSpec>,
    pub plan: PlanOverrides,
    pub realization: Realization,
    pub mode: RunMode,
    pub shots: u64,
    pub seed: u64,
    pub bootstrap: BootstrapConfig,
    pub outputs: OutputPaths,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            state: None,
            plan: PlanOverrides::default(),
            realization: Realization::AbstractSu2,
            mode: RunMode::Exact,
            shots: 10_000,
            seed: 0,
            bootstrap: BootstrapConfig::default(),
            outputs: OutputPaths::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn state_spec(&self) -> Result<&StateSpec> {
        self.state
            .as_ref()
            .context("no state given: pass --state FILE or set \"state\" in the config")
    }

    pub fn reconstruct_options(&self) -> qstokes::ReconstructOptions {
        qstokes::ReconstructOptions {
            bootstrap_resamples: self.bootstrap.resamples,
            bootstrap_seed: self.bootstrap.seed,
            consistency_tol: self.tolerances.consistency,
            ..Default::default()
        }
    }
}

pub fn load_state_spec(path: &Path) -> Result<StateSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading state spec {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid state spec {}", path.display()))
}

/// Parses `phi0=0.1,0.2,...` or `phi_half=...` into the plan overrides.
pub fn apply_theta_set(plan: &mut PlanOverrides, arg: &str) -> Result<()> {
    let (family, values) = arg
        .split_once('=')
        .with_context(|| format!("--theta-set expects FAMILY=θ1,θ2,..., got {arg:?}"))?;
    let thetas = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad angle {v:?} in --theta-set"))
        })
        .collect::<Result<Vec<_>>>()?;
    match family.trim() {
        "phi0" => plan.theta_phi0 = Some(thetas),
        "phi_half" => plan.theta_phi_half = Some(thetas),
        other => anyhow::bail!("unknown θ family {other:?} in --theta-set (expected phi0 or phi_half)"),
    }
    Ok(())
}
