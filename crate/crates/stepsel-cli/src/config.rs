//! Strict JSON run configuration.
//!
//! Every command accepts `--config file.json`; unknown keys are fatal so a
//! saved manifest can't silently drift out of sync with the binary. Command
//! line flags override config values field by field.

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<String>,
    pub simulate: SimulateParams,
    pub fit: FitParams,
    pub explain: ExplainParams,
    pub bench: BenchParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: None,
            output: None,
            simulate: SimulateParams::default(),
            fit: FitParams::default(),
            explain: ExplainParams::default(),
            bench: BenchParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub scenario: u8,
    pub beta: f64,
    pub truth: String,
    pub strata: usize,
    pub controls: usize,
    pub groups: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams { scenario: 1, beta: 1.0, truth: "hump".into(), strata: 2000, controls: 9, groups: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitParams {
    pub model: String,
    pub formula: Option<String>,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub dropout: f64,
    pub l2: f64,
    pub l1: f64,
    pub embed: Option<String>,
    pub embed_wiring: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: String,
    pub early_stop_patience: Option<usize>,
    pub feature: Option<String>,
    pub knots: usize,
    pub degree: usize,
    pub penalty: Option<f64>,
    pub cv_folds: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            model: "glm".into(),
            formula: None,
            hidden: vec![32, 32],
            activation: "relu".into(),
            dropout: 0.0,
            l2: 0.0,
            l1: 0.0,
            embed: None,
            embed_wiring: "concat".into(),
            learning_rate: 0.01,
            epochs: 150,
            batch: 64,
            optimizer: "adam".into(),
            early_stop_patience: None,
            feature: None,
            knots: 20,
            degree: 3,
            penalty: None,
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainParams {
    pub bootstrap: usize,
    pub permutations: usize,
    pub bins: usize,
    pub feature: Option<String>,
    pub epsilon: Option<f64>,
}

impl Default for ExplainParams {
    fn default() -> Self {
        ExplainParams { bootstrap: 20, permutations: 5, bins: 20, feature: None, epsilon: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    pub reps: Option<usize>,
    pub strata: Option<usize>,
    pub controls: Option<usize>,
    pub bootstrap: Option<usize>,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams { reps: None, strata: None, controls: None, bootstrap: None }
    }
}

pub fn load_config(path: Option<&std::path::Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::config(format!("config {} is invalid at line {}, column {}: {e}", p.display(), e.line(), e.column()))
            })
        }
    }
}
