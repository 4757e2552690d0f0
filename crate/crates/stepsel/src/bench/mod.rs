//! End-to-end benchmark harness: five canned experiments with calibration
//! and accuracy metrics.
//!
//! Every repetition derives its own RNG stream from (master seed, scenario,
//! repetition index), runs independently (rayon), and is reduced in index
//! order, so results are bit-identical across thread counts. Repetition
//! failures are logged and excluded, never fatal; completion counts are part
//! of every summary.

pub mod cluster;

pub use cluster::{adjusted_rand_index, ari_permutation_p, kmeans, mean_silhouette};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{fit_clogit_glm, wald_inference, FormulaSpec, SplineSettings};
use crate::data::{to_csv, StrataDataset};
use crate::modelfile::ModelDocument;
use crate::net::{build_network, train, ArchSpec, EmbeddingSpec, EmbeddingTarget, EmbeddingWiring, SsfNetwork, TrainConfig};
use crate::rng::derive_seed;
use crate::sim::{simulate_selection, simulate_social, Arena, MovementKernel, SelectionSpec, SocialSpec, Transform};
use crate::stats::{mean, population_variance};
use crate::xai::{ale_curve, average_conditional_effect, bootstrap_inference, default_epsilon, embedding_biplot, mean_cross_partial, BiplotResult, XaiError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] crate::sim::SimError),
    #[error("results schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which registered nonlinear truth scenario 2 recovers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearTruth {
    Hump,
    Wiggle,
    /// Null control: no effect at all.
    Constant,
}

impl NonlinearTruth {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            NonlinearTruth::Hump => Transform::Hump.eval(x),
            NonlinearTruth::Wiggle => Transform::Wiggle.eval(x),
            NonlinearTruth::Constant => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NonlinearTruth::Hump => "hump",
            NonlinearTruth::Wiggle => "wiggle",
            NonlinearTruth::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    Dnn,
    Glm,
    Spline,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Dnn => "dnn",
            ModelTag::Glm => "glm",
            ModelTag::Spline => "spline",
        })
    }
}

/// Full configuration of one scenario run.
///
/// `arch.n_features` and `arch.embeddings` are templates: each scenario
/// overrides them with its own dimensionality and embedding wiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub n_repetitions: usize,
    pub n_strata: usize,
    pub n_controls: usize,
    /// True slopes visited by scenario 1.
    pub true_effect_grid: Vec<f64>,
    pub arch: ArchSpec,
    pub train: TrainConfig,
    pub bootstrap_b: usize,
    pub seed: u64,
    /// Scenario 2 truth.
    pub truth: NonlinearTruth,
    pub ale_bins: usize,
    /// Scenario 4 degenerate control: all groups share one coefficient vector.
    pub shared_group_betas: bool,
    /// Scenario 5 per-opponent-group distance coefficients.
    pub social_effects: Vec<f64>,
    pub kernel: MovementKernel,
    pub arena: Arena,
}

impl ScenarioConfig {
    /// Tuned defaults per scenario; sample sizes follow the shared defaults
    /// (2000 strata, 9 controls, 100 repetitions) and network shapes are
    /// sized to the scenario's dimensionality.
    pub fn defaults_for(scenario: u8) -> Result<Self, BenchError> {
        if !(1..=5).contains(&scenario) {
            return Err(BenchError::Config(format!("scenario must be 1..=5, got {scenario}")));
        }
        let mut cfg = ScenarioConfig {
            scenario,
            n_repetitions: 100,
            n_strata: 2000,
            n_controls: 9,
            true_effect_grid: vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
            arch: ArchSpec::mlp(1, vec![32, 32]),
            train: TrainConfig::default(),
            bootstrap_b: 20,
            seed: 0,
            truth: NonlinearTruth::Hump,
            ale_bins: 40,
            shared_group_betas: false,
            social_effects: vec![2.0, 0.0, -2.0],
            kernel: MovementKernel::new(2.0, 1.0, 0.0, 0.5).expect("valid default kernel"),
            arena: Arena { min_x: 0.0, min_y: 0.0, max_x: 60.0, max_y: 60.0 },
        };
        match scenario {
            1 => {
                // A slim network converges quickly on a single predictor and
                // keeps the 21-fits-per-repetition bootstrap affordable.
                cfg.arch.hidden = vec![8, 8];
                cfg.train.epochs = 100;
            }
            2 => {
                cfg.train.epochs = 150;
                cfg.n_repetitions = 5;
            }
            3 => {
                cfg.train.epochs = 150;
            }
            4 => {
                cfg.n_strata = 4000;
                cfg.train.epochs = 150;
                cfg.n_repetitions = 10;
            }
            5 => {
                cfg.arch.hidden = vec![16, 16];
                cfg.n_strata = 3000;
                cfg.train.epochs = 150;
                cfg.n_repetitions = 10;
            }
            _ => unreachable!(),
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(1..=5).contains(&self.scenario) {
            return Err(BenchError::Config(format!("scenario must be 1..=5, got {}", self.scenario)));
        }
        if self.n_repetitions < 1 {
            return Err(BenchError::Config("n_repetitions must be >= 1".into()));
        }
        if self.n_strata < 2 {
            return Err(BenchError::Config("n_strata must be >= 2".into()));
        }
        if self.n_controls < 1 {
            return Err(BenchError::Config("n_controls must be >= 1".into()));
        }
        if self.scenario == 1 && self.true_effect_grid.is_empty() {
            return Err(BenchError::Config("scenario 1 needs a non-empty true_effect_grid".into()));
        }
        if self.bootstrap_b < 2 {
            return Err(BenchError::Config("bootstrap_b must be >= 2".into()));
        }
        Ok(())
    }
}

/// Writes per-repetition artifacts under `root/scenario<k>/rep<i>/`.
pub struct ArtifactSink {
    pub root: PathBuf,
}

impl ArtifactSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactSink { root: root.into() }
    }

    fn rep_dir(&self, scenario: u8, rep: usize) -> std::io::Result<PathBuf> {
        let dir = self.root.join(format!("scenario{scenario}")).join(format!("rep{rep}"));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn write_rep(
        &self,
        scenario: u8,
        rep: usize,
        dataset: &StrataDataset,
        truth_json: &str,
        models: &[(&str, String)],
        metrics_csv: &str,
    ) -> std::io::Result<()> {
        let dir = self.rep_dir(scenario, rep)?;
        std::fs::write(dir.join("data.csv"), to_csv(dataset))?;
        std::fs::write(dir.join("truth.json"), truth_json)?;
        for (name, json) in models {
            std::fs::write(dir.join(format!("model_{name}.json")), json)?;
        }
        std::fs::write(dir.join("metrics.csv"), metrics_csv)?;
        Ok(())
    }
}

/// One long-format summary record; the common currency of `summarize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: u8,
    pub model: String,
    pub metric: String,
    pub key: String,
    pub value: f64,
}

pub fn summary_rows_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("scenario,model,metric,key,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.scenario, r.model, r.metric, r.key, r.value));
    }
    out
}

pub fn summary_rows_from_csv(text: &str) -> Result<Vec<SummaryRow>, BenchError> {
    let mut rows = Vec::new();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| BenchError::Schema("empty summary file".into()))?;
    if header != "scenario,model,metric,key,value" {
        return Err(BenchError::Schema(format!("unexpected summary header '{header}'")));
    }
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(BenchError::Schema(format!("summary line {} has {} fields", i + 2, parts.len())));
        }
        rows.push(SummaryRow {
            scenario: parts[0].parse().map_err(|_| BenchError::Schema(format!("bad scenario '{}'", parts[0])))?,
            model: parts[1].to_string(),
            metric: parts[2].to_string(),
            key: parts[3].to_string(),
            value: parts[4].parse().map_err(|_| BenchError::Schema(format!("bad value '{}'", parts[4])))?,
        });
    }
    Ok(rows)
}

// --- scenario 1: linear effect calibration -----------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCell {
    pub true_slope: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub coverage: f64,
    pub rejection: f64,
    pub mse: f64,
    pub variance: f64,
    pub n_completed: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub model: ModelTag,
    pub cells: Vec<SlopeCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Output {
    pub glm: CalibrationSummary,
    pub dnn: CalibrationSummary,
    pub failures: Vec<String>,
}

struct RepEstimate {
    estimate: f64,
    covered: bool,
    rejected: bool,
}

fn aggregate_cells(true_slope: f64, reps: &[Option<RepEstimate>]) -> SlopeCell {
    let done: Vec<&RepEstimate> = reps.iter().flatten().collect();
    let ests: Vec<f64> = done.iter().map(|r| r.estimate).collect();
    let mean_estimate = mean(&ests);
    let mse = if ests.is_empty() {
        0.0
    } else {
        ests.iter().map(|e| (e - true_slope) * (e - true_slope)).sum::<f64>() / ests.len() as f64
    };
    SlopeCell {
        true_slope,
        mean_estimate,
        bias: mean_estimate - true_slope,
        coverage: done.iter().filter(|r| r.covered).count() as f64 / done.len().max(1) as f64,
        rejection: done.iter().filter(|r| r.rejected).count() as f64 / done.len().max(1) as f64,
        mse,
        variance: population_variance(&ests),
        n_completed: done.len(),
        n_failed: reps.len() - done.len(),
    }
}

/// Builds the standard DNN fitter used by bootstrap inference.
fn dnn_fitter(
    arch: ArchSpec,
    train_cfg: TrainConfig,
) -> impl Fn(&StrataDataset, u64) -> Result<SsfNetwork, XaiError> + Sync {
    move |d: &StrataDataset, fit_seed: u64| {
        let net = build_network(&arch, fit_seed).map_err(|e| XaiError::FitFailed(e.to_string()))?;
        let cfg = TrainConfig { seed: fit_seed, ..train_cfg.clone() };
        train(&net, d, &cfg).map(|(trained, _)| trained).map_err(|e| XaiError::FitFailed(e.to_string()))
    }
}

pub fn run_scenario1(cfg: &ScenarioConfig, sink: Option<&ArtifactSink>) -> Result<Scenario1Output, BenchError> {
    cfg.validate()?;
    let arch = ArchSpec { n_features: 1, embeddings: None, ..cfg.arch.clone() };
    let mut glm_cells = Vec::new();
    let mut dnn_cells = Vec::new();
    let mut failures = Vec::new();

    for (slope_idx, &slope) in cfg.true_effect_grid.iter().enumerate() {
        let outcomes: Vec<(Option<RepEstimate>, Option<RepEstimate>, Option<String>)> = (0..cfg.n_repetitions)
            .into_par_iter()
            .map(|rep| {
                let sim_seed = derive_seed(cfg.seed, &[1, slope_idx as u64, rep as u64, 0]);
                let spec = SelectionSpec::linear(vec![slope], cfg.n_strata, cfg.n_controls);
                let d = match simulate_selection(&spec, sim_seed) {
                    Ok(d) => d,
                    Err(e) => return (None, None, Some(format!("slope {slope} rep {rep}: sim failed: {e}"))),
                };
                let mut fail_note = None;

                let glm = match fit_clogit_glm(&d, &FormulaSpec::mains(1)).and_then(|f| {
                    let wald = wald_inference(&f)?;
                    Ok((f, wald))
                }) {
                    Ok((_fit, wald)) => {
                        let w = &wald[0];
                        Some(RepEstimate {
                            estimate: w.estimate,
                            covered: w.ci_low <= slope && slope <= w.ci_high,
                            rejected: w.p_value < 0.05,
                        })
                    }
                    Err(e) => {
                        fail_note = Some(format!("slope {slope} rep {rep}: glm failed: {e}"));
                        None
                    }
                };

                let boot_seed = derive_seed(cfg.seed, &[1, slope_idx as u64, rep as u64, 1]);
                let fitter = dnn_fitter(arch.clone(), cfg.train.clone());
                let dnn = match bootstrap_inference(fitter, &d, &[0], cfg.bootstrap_b, boot_seed) {
                    Ok(reports) => {
                        let r = &reports[0];
                        Some(RepEstimate {
                            estimate: r.estimate,
                            covered: r.ci_low <= slope && slope <= r.ci_high,
                            rejected: r.p_value < 0.05,
                        })
                    }
                    Err(e) => {
                        fail_note = Some(format!("slope {slope} rep {rep}: dnn bootstrap failed: {e}"));
                        None
                    }
                };

                if let (Some(sink), Some(g), Some(dn)) = (sink, &glm, &dnn) {
                    let truth = serde_json::json!({
                        "scenario": 1, "true_slope": slope, "spec": spec,
                    });
                    let metrics = format!(
                        "model,estimate,covered,rejected\nglm,{},{},{}\ndnn,{},{},{}\n",
                        g.estimate, g.covered as u8, g.rejected as u8, dn.estimate, dn.covered as u8, dn.rejected as u8
                    );
                    let rep_index = slope_idx * cfg.n_repetitions + rep;
                    let _ = sink.write_rep(1, rep_index, &d, &serde_json::to_string_pretty(&truth).unwrap(), &[], &metrics);
                }
                (glm, dnn, fail_note)
            })
            .collect();

        let glm_reps: Vec<Option<RepEstimate>> = outcomes.iter().map(|(g, _, _)| g.as_ref().map(|r| RepEstimate { ..*r })).collect();
        let dnn_reps: Vec<Option<RepEstimate>> = outcomes.iter().map(|(_, d, _)| d.as_ref().map(|r| RepEstimate { ..*r })).collect();
        failures.extend(outcomes.iter().filter_map(|(_, _, f)| f.clone()));
        glm_cells.push(aggregate_cells(slope, &glm_reps));
        dnn_cells.push(aggregate_cells(slope, &dnn_reps));
    }

    Ok(Scenario1Output {
        glm: CalibrationSummary { model: ModelTag::Glm, cells: glm_cells },
        dnn: CalibrationSummary { model: ModelTag::Dnn, cells: dnn_cells },
        failures,
    })
}

impl Scenario1Output {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for summary in [&self.glm, &self.dnn] {
            for c in &summary.cells {
                let key = format!("slope={}", c.true_slope);
                for (metric, value) in [
                    ("mean_estimate", c.mean_estimate),
                    ("bias", c.bias),
                    ("coverage", c.coverage),
                    ("rejection", c.rejection),
                    ("mse", c.mse),
                    ("variance", c.variance),
                    ("n_completed", c.n_completed as f64),
                ] {
                    rows.push(SummaryRow {
                        scenario: 1,
                        model: summary.model.to_string(),
                        metric: metric.into(),
                        key: key.clone(),
                        value,
                    });
                }
            }
        }
        rows
    }
}

// --- scenario 2: nonlinear recovery ------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Output {
    pub truth: NonlinearTruth,
    pub dnn_mse: f64,
    pub spline_mse: f64,
    pub truth_variance: f64,
    /// (dnn_mse, spline_mse) per completed repetition.
    pub per_rep: Vec<(f64, f64)>,
    pub failures: Vec<String>,
}

fn percentile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn centered(values: &[f64]) -> Vec<f64> {
    let m = mean(values);
    values.iter().map(|v| v - m).collect()
}

fn mse_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn run_scenario2(cfg: &ScenarioConfig, sink: Option<&ArtifactSink>) -> Result<Scenario2Output, BenchError> {
    cfg.validate()?;
    let arch = ArchSpec { n_features: 1, embeddings: None, ..cfg.arch.clone() };
    let truth = cfg.truth;

    let outcomes: Vec<Result<(f64, f64), String>> = (0..cfg.n_repetitions)
        .into_par_iter()
        .map(|rep| {
            let sim_seed = derive_seed(cfg.seed, &[2, rep as u64, 0]);
            let spec = match truth {
                NonlinearTruth::Constant => SelectionSpec::linear(vec![0.0], cfg.n_strata, cfg.n_controls),
                NonlinearTruth::Hump => SelectionSpec {
                    nonlinear_transforms: vec![(0, Transform::Hump)],
                    ..SelectionSpec::linear(vec![1.0], cfg.n_strata, cfg.n_controls)
                },
                NonlinearTruth::Wiggle => SelectionSpec {
                    nonlinear_transforms: vec![(0, Transform::Wiggle)],
                    ..SelectionSpec::linear(vec![1.0], cfg.n_strata, cfg.n_controls)
                },
            };
            let d = simulate_selection(&spec, sim_seed).map_err(|e| format!("rep {rep}: sim: {e}"))?;

            // Comparison grid spans the central 90% of x.
            let mut xs = d.column(0);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = percentile_of_sorted(&xs, 0.05);
            let hi = percentile_of_sorted(&xs, 0.95);
            let grid: Vec<f64> = (0..100).map(|i| lo + (hi - lo) * i as f64 / 99.0).collect();
            let truth_curve = centered(&grid.iter().map(|&x| truth.eval(x)).collect::<Vec<_>>());

            let fit_seed = derive_seed(cfg.seed, &[2, rep as u64, 1]);
            let fitter = dnn_fitter(arch.clone(), cfg.train.clone());
            let net = fitter(&d, fit_seed).map_err(|e| format!("rep {rep}: dnn: {e}"))?;
            let ale = ale_curve(&net, &d, 0, cfg.ale_bins).map_err(|e| format!("rep {rep}: ale: {e}"))?;
            let dnn_curve = centered(&grid.iter().map(|&x| ale.interpolate(x)).collect::<Vec<_>>());
            let dnn_mse = mse_between(&dnn_curve, &truth_curve);

            let spline = crate::baselines::fit_clogit_spline(&d, 0, &SplineSettings::default())
                .map_err(|e| format!("rep {rep}: spline: {e}"))?;
            let spline_vals = crate::baselines::spline_curve(&spline, &grid).map_err(|e| format!("rep {rep}: curve: {e}"))?;
            let spline_curve_centered = centered(&spline_vals);
            let spline_mse = mse_between(&spline_curve_centered, &truth_curve);

            if let Some(sink) = sink {
                let truth_json = serde_json::json!({"scenario": 2, "truth": truth.name(), "spec": spec});
                let metrics = format!("model,curve_mse\ndnn,{dnn_mse}\nspline,{spline_mse}\n");
                let models = vec![
                    ("dnn", ModelDocument::Dnn { feature_names: d.feature_names.clone(), network: net.clone(), train: cfg.train.clone() }.to_json()),
                    ("spline", ModelDocument::Spline { feature_names: d.feature_names.clone(), fit: spline.clone(), settings: SplineSettings::default() }.to_json()),
                ];
                let _ = sink.write_rep(2, rep, &d, &serde_json::to_string_pretty(&truth_json).unwrap(), &[(models[0].0, models[0].1.clone()), (models[1].0, models[1].1.clone())], &metrics);
            }
            Ok((dnn_mse, spline_mse))
        })
        .collect();

    let mut per_rep = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(pair) => per_rep.push(pair),
            Err(e) => failures.push(e),
        }
    }
    // Truth variance over a canonical grid on the covariate's native range.
    let canon: Vec<f64> = (0..100).map(|i| -0.45 + 0.9 * i as f64 / 99.0).collect();
    let truth_variance = population_variance(&centered(&canon.iter().map(|&x| truth.eval(x)).collect::<Vec<_>>()));

    Ok(Scenario2Output {
        truth,
        dnn_mse: mean(&per_rep.iter().map(|p| p.0).collect::<Vec<_>>()),
        spline_mse: mean(&per_rep.iter().map(|p| p.1).collect::<Vec<_>>()),
        truth_variance,
        per_rep,
        failures,
    })
}

impl Scenario2Output {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let key = format!("truth={}", self.truth.name());
        vec![
            SummaryRow { scenario: 2, model: "dnn".into(), metric: "curve_mse".into(), key: key.clone(), value: self.dnn_mse },
            SummaryRow { scenario: 2, model: "spline".into(), metric: "curve_mse".into(), key: key.clone(), value: self.spline_mse },
            SummaryRow { scenario: 2, model: "truth".into(), metric: "variance".into(), key, value: self.truth_variance },
        ]
    }
}

// --- scenario 3: interaction matrix ------------------------------------------

/// Fixed scenario-3 ground truth: a signed ramp of main effects around the
/// null center x5, with three planted interactions.
pub fn scenario3_truth() -> SelectionSpec {
    SelectionSpec {
        n_features: 9,
        betas: vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
        interactions: vec![
            crate::sim::Interaction { p: 0, q: 7, gamma: 1.0 },
            crate::sim::Interaction { p: 2, q: 6, gamma: -1.0 },
            crate::sim::Interaction { p: 3, q: 5, gamma: 1.0 },
        ],
        nonlinear_transforms: Vec::new(),
        groups: None,
        n_controls: 9,
        n_strata: 2000,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCell {
    /// Diagonal cells (row == col) are main effects; off-diagonal cells with
    /// row < col are pairwise interactions.
    pub row: usize,
    pub col: usize,
    pub true_effect: f64,
    pub mean_estimate: f64,
    pub mse: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectMatrix {
    pub model: ModelTag,
    pub cells: Vec<EffectCell>,
    pub n_completed: usize,
    pub n_failed: usize,
}

impl EffectMatrix {
    pub fn cell(&self, row: usize, col: usize) -> Option<&EffectCell> {
        let (r, c) = (row.min(col), row.max(col));
        self.cells.iter().find(|cell| cell.row == r && cell.col == c)
    }

    pub fn average_mse(&self) -> f64 {
        mean(&self.cells.iter().map(|c| c.mse).collect::<Vec<_>>())
    }

    /// Average MSE over a cell class: mains, true interactions, or null interactions.
    pub fn class_mse(&self, class: CellClass) -> f64 {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| CellClass::of(c) == class)
            .map(|c| c.mse)
            .collect();
        mean(&vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Main,
    TrueInteraction,
    NullInteraction,
}

impl CellClass {
    fn of(cell: &EffectCell) -> CellClass {
        if cell.row == cell.col {
            CellClass::Main
        } else if cell.true_effect != 0.0 {
            CellClass::TrueInteraction
        } else {
            CellClass::NullInteraction
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario3Output {
    pub glm: EffectMatrix,
    pub dnn: EffectMatrix,
    pub failures: Vec<String>,
}

pub fn run_scenario3(cfg: &ScenarioConfig, sink: Option<&ArtifactSink>) -> Result<Scenario3Output, BenchError> {
    cfg.validate()?;
    let mut truth = scenario3_truth();
    truth.n_strata = cfg.n_strata;
    truth.n_controls = cfg.n_controls;
    let p = truth.n_features;
    let arch = ArchSpec { n_features: p, embeddings: None, ..cfg.arch.clone() };
    let formula = FormulaSpec::full_pairwise(p);

    // Cell order: diagonal mains first, then pairs in formula order.
    let mut cell_defs: Vec<(usize, usize, f64)> = (0..p).map(|j| (j, j, truth.betas[j])).collect();
    for &(a, b) in &formula.interactions {
        let gamma = truth
            .interactions
            .iter()
            .find(|it| (it.p == a && it.q == b) || (it.p == b && it.q == a))
            .map_or(0.0, |it| it.gamma);
        cell_defs.push((a, b, gamma));
    }
    let n_cells = cell_defs.len();

    let outcomes: Vec<Result<(Vec<f64>, Vec<f64>), String>> = (0..cfg.n_repetitions)
        .into_par_iter()
        .map(|rep| {
            let sim_seed = derive_seed(cfg.seed, &[3, rep as u64, 0]);
            let d = simulate_selection(&truth, sim_seed).map_err(|e| format!("rep {rep}: sim: {e}"))?;

            let glm_fit = fit_clogit_glm(&d, &formula).map_err(|e| format!("rep {rep}: glm: {e}"))?;
            let glm_est = glm_fit.coefficients.clone();

            let fit_seed = derive_seed(cfg.seed, &[3, rep as u64, 1]);
            let fitter = dnn_fitter(arch.clone(), cfg.train.clone());
            let net = fitter(&d, fit_seed).map_err(|e| format!("rep {rep}: dnn: {e}"))?;
            let eps: Vec<f64> = (0..p).map(|j| default_epsilon(&d, j)).collect();
            let mut dnn_est = Vec::with_capacity(n_cells);
            for j in 0..p {
                dnn_est.push(
                    average_conditional_effect(&net, &d, j, eps[j]).map_err(|e| format!("rep {rep}: ace: {e}"))?,
                );
            }
            for &(a, b) in &formula.interactions {
                dnn_est.push(
                    mean_cross_partial(&net, &d, a, b, eps[a], eps[b])
                        .map_err(|e| format!("rep {rep}: cross partial: {e}"))?,
                );
            }

            if let Some(sink) = sink {
                let truth_json = serde_json::json!({"scenario": 3, "spec": truth});
                let mut metrics = String::from("row,col,true,glm,dnn\n");
                for (ci, &(a, b, t)) in cell_defs.iter().enumerate() {
                    metrics.push_str(&format!("{},{},{},{},{}\n", a, b, t, glm_est[ci], dnn_est[ci]));
                }
                let models = [
                    ("dnn", ModelDocument::Dnn { feature_names: d.feature_names.clone(), network: net.clone(), train: cfg.train.clone() }.to_json()),
                    ("glm", ModelDocument::Glm { feature_names: d.feature_names.clone(), fit: glm_fit.clone() }.to_json()),
                ];
                let _ = sink.write_rep(3, rep, &d, &serde_json::to_string_pretty(&truth_json).unwrap(), &models.iter().map(|(n, j)| (*n, j.clone())).collect::<Vec<_>>(), &metrics);
            }
            Ok((glm_est, dnn_est))
        })
        .collect();

    let mut glm_reps: Vec<Vec<f64>> = Vec::new();
    let mut dnn_reps: Vec<Vec<f64>> = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((g, d)) => {
                glm_reps.push(g);
                dnn_reps.push(d);
            }
            Err(e) => failures.push(e),
        }
    }

    let build = |reps: &[Vec<f64>], model: ModelTag| -> EffectMatrix {
        let cells = cell_defs
            .iter()
            .enumerate()
            .map(|(ci, &(row, col, true_effect))| {
                let ests: Vec<f64> = reps.iter().map(|r| r[ci]).collect();
                let m = mean(&ests);
                let mse = if ests.is_empty() {
                    0.0
                } else {
                    ests.iter().map(|e| (e - true_effect) * (e - true_effect)).sum::<f64>() / ests.len() as f64
                };
                EffectCell { row, col, true_effect, mean_estimate: m, mse, variance: population_variance(&ests) }
            })
            .collect();
        EffectMatrix { model, cells, n_completed: reps.len(), n_failed: cfg.n_repetitions - reps.len() }
    };

    Ok(Scenario3Output {
        glm: build(&glm_reps, ModelTag::Glm),
        dnn: build(&dnn_reps, ModelTag::Dnn),
        failures,
    })
}

impl Scenario3Output {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for m in [&self.glm, &self.dnn] {
            for c in &m.cells {
                let key = format!("cell={}:{}", c.row + 1, c.col + 1);
                for (metric, value) in [
                    ("true_effect", c.true_effect),
                    ("mean_estimate", c.mean_estimate),
                    ("bias", c.mean_estimate - c.true_effect),
                    ("mse", c.mse),
                    ("variance", c.variance),
                ] {
                    rows.push(SummaryRow { scenario: 3, model: m.model.to_string(), metric: metric.into(), key: key.clone(), value });
                }
            }
            rows.push(SummaryRow { scenario: 3, model: m.model.to_string(), metric: "average_mse".into(), key: "all".into(), value: m.average_mse() });
        }
        rows
    }
}

// --- scenario 4: focal-individual embeddings ----------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub ari: f64,
    pub mean_silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario4Run {
    pub cluster: ClusterSummary,
    pub biplot: BiplotResult,
    pub group_of_individual: Vec<usize>,
    pub independent_features: Vec<usize>,
    pub correlated_features: Vec<usize>,
    pub null_features: Vec<usize>,
    pub ari_permutation_p: f64,
}

pub const S4_FEATURES: usize = 20;
pub const S4_INDIVIDUALS: usize = 20;
pub const S4_GROUPS: usize = 4;

/// Draws the scenario-4 group coefficient vectors: ten independent effects,
/// five correlated effects sharing one latent value per group (with N(0,0.2)
/// jitter), five null effects, everything inside (-3, 3).
pub fn scenario4_group_betas(seed: u64, shared: bool) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::Distribution;
    let mut rng = crate::rng::stream(seed, &[40]);
    let jitter = rand_distr::Normal::new(0.0, 0.2).expect("valid normal");
    let mut groups = Vec::with_capacity(S4_GROUPS);
    for _ in 0..S4_GROUPS {
        let mut betas = vec![0.0; S4_FEATURES];
        for b in betas.iter_mut().take(10) {
            *b = rng.gen_range(-3.0..3.0);
        }
        let latent: f64 = rng.gen_range(-3.0..3.0);
        for b in betas.iter_mut().take(15).skip(10) {
            *b = (latent + jitter.sample(&mut rng)).clamp(-3.0, 3.0);
        }
        groups.push(betas);
    }
    if shared {
        let first = groups[0].clone();
        for g in &mut groups {
            *g = first.clone();
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario4Output {
    pub runs: Vec<Scenario4Run>,
    pub failures: Vec<String>,
}

pub fn run_scenario4(cfg: &ScenarioConfig, sink: Option<&ArtifactSink>) -> Result<Scenario4Output, BenchError> {
    cfg.validate()?;
    let group_of_individual: Vec<usize> = (0..S4_INDIVIDUALS).map(|i| i / (S4_INDIVIDUALS / S4_GROUPS)).collect();

    let runs: Vec<Result<Scenario4Run, String>> = (0..cfg.n_repetitions)
        .into_par_iter()
        .map(|rep| {
            let beta_seed = derive_seed(cfg.seed, &[4, rep as u64, 0]);
            let group_betas = scenario4_group_betas(beta_seed, cfg.shared_group_betas);
            let spec = SelectionSpec {
                n_features: S4_FEATURES,
                betas: vec![0.0; S4_FEATURES],
                interactions: Vec::new(),
                nonlinear_transforms: Vec::new(),
                groups: Some(crate::sim::GroupStructure {
                    group_betas: group_betas.clone(),
                    individual_group: group_of_individual.clone(),
                }),
                n_controls: cfg.n_controls,
                n_strata: cfg.n_strata,
            };
            let sim_seed = derive_seed(cfg.seed, &[4, rep as u64, 1]);
            let d = simulate_selection(&spec, sim_seed).map_err(|e| format!("rep {rep}: sim: {e}"))?;

            let arch = ArchSpec {
                n_features: S4_FEATURES,
                embeddings: Some(EmbeddingSpec {
                    vocab_size: S4_INDIVIDUALS,
                    dim: 2,
                    target: EmbeddingTarget::Individual,
                    wiring: EmbeddingWiring::ConcatToInput,
                }),
                ..cfg.arch.clone()
            };
            let fit_seed = derive_seed(cfg.seed, &[4, rep as u64, 2]);
            let fitter = dnn_fitter(arch, cfg.train.clone());
            let net = fitter(&d, fit_seed).map_err(|e| format!("rep {rep}: dnn: {e}"))?;

            let eps = (0..S4_FEATURES).map(|j| default_epsilon(&d, j)).fold(f64::INFINITY, f64::min);
            let features: Vec<usize> = (0..S4_FEATURES).collect();
            let mut biplot = embedding_biplot(&net, &d, &features, eps).map_err(|e| format!("rep {rep}: biplot: {e}"))?;
            biplot.group_labels = Some((0..S4_INDIVIDUALS).map(|i| (i, group_of_individual[i])).collect());

            let points: Vec<Vec<f64>> = biplot.positions.iter().map(|(_, p)| p.clone()).collect();
            let labels: Vec<usize> = biplot.positions.iter().map(|(id, _)| group_of_individual[*id]).collect();
            let km = kmeans(&points, S4_GROUPS, 20, derive_seed(cfg.seed, &[4, rep as u64, 3]));
            let ari = adjusted_rand_index(&km.assignments, &labels);
            let sil = mean_silhouette(&points, &km.assignments);
            let perm_p = ari_permutation_p(&km.assignments, &labels, 199, derive_seed(cfg.seed, &[4, rep as u64, 4]));

            if let Some(sink) = sink {
                let truth_json = serde_json::json!({"scenario": 4, "spec": spec, "group_of_individual": group_of_individual});
                let metrics = format!("metric,value\nari,{ari}\nmean_silhouette,{sil}\nari_permutation_p,{perm_p}\n");
                let doc = ModelDocument::Dnn { feature_names: d.feature_names.clone(), network: net.clone(), train: cfg.train.clone() };
                let _ = sink.write_rep(4, rep, &d, &serde_json::to_string_pretty(&truth_json).unwrap(), &[("dnn", doc.to_json())], &metrics);
            }

            Ok(Scenario4Run {
                cluster: ClusterSummary { ari, mean_silhouette: sil },
                biplot,
                group_of_individual: group_of_individual.clone(),
                independent_features: (0..10).collect(),
                correlated_features: (10..15).collect(),
                null_features: (15..20).collect(),
                ari_permutation_p: perm_p,
            })
        })
        .collect();

    let mut out = Vec::new();
    let mut failures = Vec::new();
    for r in runs {
        match r {
            Ok(run) => out.push(run),
            Err(e) => failures.push(e),
        }
    }
    Ok(Scenario4Output { runs: out, failures })
}

pub fn scenario4_summary_rows(runs: &[Scenario4Run]) -> Vec<SummaryRow> {
    runs.iter()
        .enumerate()
        .flat_map(|(rep, r)| {
            let key = format!("rep={rep}");
            vec![
                SummaryRow { scenario: 4, model: "dnn".into(), metric: "ari".into(), key: key.clone(), value: r.cluster.ari },
                SummaryRow { scenario: 4, model: "dnn".into(), metric: "mean_silhouette".into(), key, value: r.cluster.mean_silhouette },
            ]
        })
        .collect()
}

// --- scenario 5: opponent embeddings -------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario5Run {
    pub cluster: ClusterSummary,
    pub biplot: BiplotResult,
    pub group_of_opponent: Vec<usize>,
    /// Mean projection of each group's embedding centroid onto the distance
    /// arrow, in group order (matching `social_effects`).
    pub centroid_projection: Vec<f64>,
    pub ari_permutation_p: f64,
}

pub const S5_INDIVIDUALS_PER_GROUP: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario5Output {
    pub runs: Vec<Scenario5Run>,
    pub failures: Vec<String>,
}

pub fn run_scenario5(cfg: &ScenarioConfig, sink: Option<&ArtifactSink>) -> Result<Scenario5Output, BenchError> {
    cfg.validate()?;
    let n_groups = cfg.social_effects.len();
    if n_groups < 2 {
        return Err(BenchError::Config("scenario 5 needs at least two opponent groups".into()));
    }
    let n_ind = n_groups * S5_INDIVIDUALS_PER_GROUP;
    let n_steps = (cfg.n_strata / n_ind).max(1);

    let runs: Vec<Result<Scenario5Run, String>> = (0..cfg.n_repetitions)
        .into_par_iter()
        .map(|rep| {
            let spec = SocialSpec {
                n_groups,
                individuals_per_group: S5_INDIVIDUALS_PER_GROUP,
                group_distance_effect: cfg.social_effects.clone(),
                arena: cfg.arena,
                kernel: cfg.kernel,
                n_steps,
                n_controls: cfg.n_controls,
            };
            let sim_seed = derive_seed(cfg.seed, &[5, rep as u64, 0]);
            let d = simulate_social(&spec, sim_seed).map_err(|e| format!("rep {rep}: sim: {e}"))?;
            let group_of_opponent: Vec<usize> = (0..n_ind).map(|i| spec.group_of(i)).collect();

            let arch = ArchSpec {
                n_features: 1,
                embeddings: Some(EmbeddingSpec {
                    vocab_size: n_ind,
                    dim: 2,
                    target: EmbeddingTarget::Opponent,
                    wiring: EmbeddingWiring::ConcatToInput,
                }),
                ..cfg.arch.clone()
            };
            let fit_seed = derive_seed(cfg.seed, &[5, rep as u64, 1]);
            let fitter = dnn_fitter(arch, cfg.train.clone());
            let net = fitter(&d, fit_seed).map_err(|e| format!("rep {rep}: dnn: {e}"))?;

            let eps = default_epsilon(&d, 0);
            let mut biplot = embedding_biplot(&net, &d, &[0], eps).map_err(|e| format!("rep {rep}: biplot: {e}"))?;
            biplot.group_labels = Some((0..n_ind).map(|i| (i, group_of_opponent[i])).collect());

            let points: Vec<Vec<f64>> = biplot.positions.iter().map(|(_, p)| p.clone()).collect();
            let labels: Vec<usize> = biplot.positions.iter().map(|(id, _)| group_of_opponent[*id]).collect();
            let km = kmeans(&points, n_groups, 20, derive_seed(cfg.seed, &[5, rep as u64, 2]));
            let ari = adjusted_rand_index(&km.assignments, &labels);
            let sil = mean_silhouette(&points, &km.assignments);
            let perm_p = ari_permutation_p(&km.assignments, &labels, 199, derive_seed(cfg.seed, &[5, rep as u64, 3]));

            // Centroid projections along the distance arrow.
            let arrow = &biplot.arrows[0].1;
            let mut centroid_projection = vec![0.0; n_groups];
            let mut counts = vec![0usize; n_groups];
            for ((_, pos), &g) in biplot.positions.iter().zip(&labels) {
                centroid_projection[g] += pos.iter().zip(arrow).map(|(p, a)| p * a).sum::<f64>();
                counts[g] += 1;
            }
            for (c, n) in centroid_projection.iter_mut().zip(&counts) {
                *c /= (*n).max(1) as f64;
            }

            if let Some(sink) = sink {
                let truth_json = serde_json::json!({"scenario": 5, "spec": spec, "group_of_opponent": group_of_opponent});
                let metrics = format!("metric,value\nari,{ari}\nmean_silhouette,{sil}\nari_permutation_p,{perm_p}\n");
                let doc = ModelDocument::Dnn { feature_names: d.feature_names.clone(), network: net.clone(), train: cfg.train.clone() };
                let _ = sink.write_rep(5, rep, &d, &serde_json::to_string_pretty(&truth_json).unwrap(), &[("dnn", doc.to_json())], &metrics);
            }

            Ok(Scenario5Run {
                cluster: ClusterSummary { ari, mean_silhouette: sil },
                biplot,
                group_of_opponent,
                centroid_projection,
                ari_permutation_p: perm_p,
            })
        })
        .collect();

    let mut out = Vec::new();
    let mut failures = Vec::new();
    for r in runs {
        match r {
            Ok(run) => out.push(run),
            Err(e) => failures.push(e),
        }
    }
    Ok(Scenario5Output { runs: out, failures })
}

pub fn scenario5_summary_rows(runs: &[Scenario5Run]) -> Vec<SummaryRow> {
    runs.iter()
        .enumerate()
        .flat_map(|(rep, r)| {
            let key = format!("rep={rep}");
            vec![
                SummaryRow { scenario: 5, model: "dnn".into(), metric: "ari".into(), key: key.clone(), value: r.cluster.ari },
                SummaryRow { scenario: 5, model: "dnn".into(), metric: "mean_silhouette".into(), key, value: r.cluster.mean_silhouette },
            ]
        })
        .collect()
}

// --- summarize -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    pub rows: Vec<SummaryRow>,
    pub identity_violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// Merges per-scenario summary files under `root` and verifies the
/// MSE = variance + bias^2 identity wherever all three metrics are present.
pub fn summarize(root: &Path) -> Result<SummaryReport, BenchError> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut found_any = false;
    for scenario in 1..=5u8 {
        let path = root.join(format!("scenario{scenario}")).join("summary.csv");
        if !path.exists() {
            continue;
        }
        found_any = true;
        let text = std::fs::read_to_string(&path)?;
        rows.extend(summary_rows_from_csv(&text)?);
    }
    if !found_any {
        warnings.push(format!("no scenario summaries found under {}", root.display()));
    }

    let mut identity_violations = Vec::new();
    // Group rows by (scenario, model, key) and check the identity.
    let mut groups: std::collections::BTreeMap<(u8, String, String), std::collections::BTreeMap<String, f64>> =
        std::collections::BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.scenario, r.model.clone(), r.key.clone()))
            .or_default()
            .insert(r.metric.clone(), r.value);
    }
    for ((scenario, model, key), metrics) in &groups {
        if let (Some(&mse), Some(&var), Some(&bias)) =
            (metrics.get("mse"), metrics.get("variance"), metrics.get("bias"))
        {
            let gap = (mse - (var + bias * bias)).abs();
            if gap > 1e-9 {
                identity_violations.push(format!(
                    "scenario {scenario} {model} {key}: |mse - (variance + bias^2)| = {gap:.3e}"
                ));
            }
        }
    }
    Ok(SummaryReport { rows, identity_violations, warnings })
}

/// Renders the report as an aligned, human-readable table.
pub fn human_table(report: &SummaryReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<9} {:<8} {:<16} {:<16} {:>14}\n", "scenario", "model", "metric", "key", "value"));
    for r in &report.rows {
        out.push_str(&format!(
            "{:<9} {:<8} {:<16} {:<16} {:>14.6}\n",
            r.scenario, r.model, r.metric, r.key, r.value
        ));
    }
    if !report.identity_violations.is_empty() {
        out.push_str("\nidentity violations:\n");
        for v in &report.identity_violations {
            out.push_str(&format!("  {v}\n"));
        }
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate() {
        for s in 1..=5 {
            let cfg = ScenarioConfig::defaults_for(s).unwrap();
            cfg.validate().unwrap();
        }
        assert!(ScenarioConfig::defaults_for(0).is_err());
        assert!(ScenarioConfig::defaults_for(6).is_err());
    }

    #[test]
    fn summary_rows_round_trip() {
        let rows = vec![
            SummaryRow { scenario: 1, model: "glm".into(), metric: "bias".into(), key: "slope=1".into(), value: 0.02 },
            SummaryRow { scenario: 3, model: "dnn".into(), metric: "mse".into(), key: "cell=1:8".into(), value: 0.27 },
        ];
        let text = summary_rows_to_csv(&rows);
        let back = summary_rows_from_csv(&text).unwrap();
        assert_eq!(rows, back);
        assert!(summary_rows_from_csv("bogus\n").is_err());
    }

    #[test]
    fn summarize_checks_the_mse_identity() {
        let dir = std::env::temp_dir().join(format!("stepsel_bench_test_{}", std::process::id()));
        let s1 = dir.join("scenario1");
        std::fs::create_dir_all(&s1).unwrap();
        // bias 0.1, variance 0.02 => mse must be 0.03.
        let good = vec![
            SummaryRow { scenario: 1, model: "glm".into(), metric: "bias".into(), key: "slope=0".into(), value: 0.1 },
            SummaryRow { scenario: 1, model: "glm".into(), metric: "variance".into(), key: "slope=0".into(), value: 0.02 },
            SummaryRow { scenario: 1, model: "glm".into(), metric: "mse".into(), key: "slope=0".into(), value: 0.03 },
            // A violating cell.
            SummaryRow { scenario: 1, model: "dnn".into(), metric: "bias".into(), key: "slope=0".into(), value: 0.1 },
            SummaryRow { scenario: 1, model: "dnn".into(), metric: "variance".into(), key: "slope=0".into(), value: 0.02 },
            SummaryRow { scenario: 1, model: "dnn".into(), metric: "mse".into(), key: "slope=0".into(), value: 0.05 },
        ];
        std::fs::write(s1.join("summary.csv"), summary_rows_to_csv(&good)).unwrap();
        let report = summarize(&dir).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.identity_violations.len(), 1);
        assert!(report.identity_violations[0].contains("dnn"));
        assert!(report.warnings.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn summarize_of_empty_directory_warns_but_succeeds() {
        let dir = std::env::temp_dir().join(format!("stepsel_bench_empty_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let report = summarize(&dir).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.warnings.len(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn scenario3_truth_matches_design() {
        let t = scenario3_truth();
        assert_eq!(t.betas, vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(t.interactions.len(), 3);
        t.validate().unwrap();
        // x5 (index 4) carries no effect.
        assert_eq!(t.betas[4], 0.0);
    }

    #[test]
    fn scenario4_group_betas_follow_the_block_design() {
        let groups = scenario4_group_betas(7, false);
        assert_eq!(groups.len(), 4);
        for g in &groups {
            assert_eq!(g.len(), 20);
            // Null block.
            assert!(g[15..20].iter().all(|&b| b == 0.0));
            // All inside (-3, 3).
            assert!(g.iter().all(|&b| (-3.0..=3.0).contains(&b)));
            // Correlated block sticks near its latent: spread well below the
            // independent block's typical spread.
            let corr = &g[10..15];
            let spread = crate::stats::sample_sd(corr);
            assert!(spread < 1.0, "correlated spread {spread}");
        }
        let shared = scenario4_group_betas(7, true);
        assert!(shared.iter().all(|g| *g == shared[0]));
        // Deterministic.
        assert_eq!(scenario4_group_betas(7, false), scenario4_group_betas(7, false));
    }

    #[test]
    fn mini_scenario1_runs_and_aggregates() {
        let mut cfg = ScenarioConfig::defaults_for(1).unwrap();
        cfg.n_repetitions = 2;
        cfg.n_strata = 120;
        cfg.true_effect_grid = vec![0.0, 1.0];
        cfg.bootstrap_b = 3;
        cfg.arch.hidden = vec![4];
        cfg.train.epochs = 8;
        let out = run_scenario1(&cfg, None).unwrap();
        assert_eq!(out.glm.cells.len(), 2);
        assert_eq!(out.dnn.cells.len(), 2);
        for c in out.glm.cells.iter().chain(&out.dnn.cells) {
            assert_eq!(c.n_completed, 2);
            assert!((c.mse - (c.variance + c.bias * c.bias)).abs() < 1e-9);
        }
        // Determinism end to end.
        let out2 = run_scenario1(&cfg, None).unwrap();
        assert_eq!(out, out2);
        let rows = out.summary_rows();
        assert!(rows.iter().any(|r| r.metric == "coverage"));
    }

    #[test]
    fn mini_scenario3_runs_and_keeps_identity() {
        let mut cfg = ScenarioConfig::defaults_for(3).unwrap();
        cfg.n_repetitions = 2;
        cfg.n_strata = 150;
        cfg.arch.hidden = vec![8];
        cfg.train.epochs = 10;
        let out = run_scenario3(&cfg, None).unwrap();
        assert_eq!(out.glm.cells.len(), 45);
        assert_eq!(out.dnn.cells.len(), 45);
        for c in out.glm.cells.iter().chain(&out.dnn.cells) {
            let bias = c.mean_estimate - c.true_effect;
            assert!((c.mse - (c.variance + bias * bias)).abs() < 1e-9);
        }
        assert!(out.glm.cell(7, 0).is_some());
        assert_eq!(out.glm.cell(0, 7).unwrap().true_effect, 1.0);
        assert_eq!(out.glm.cell(2, 6).unwrap().true_effect, -1.0);
        assert_eq!(out.glm.cell(4, 4).unwrap().true_effect, 0.0);
    }
}
