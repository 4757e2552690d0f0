//! Implementations of the CLI subcommands.

use std::path::Path;

use stepsel::baselines::{fit_clogit_glm, fit_clogit_spline, wald_inference, FitError, FormulaSpec, SplineSettings};
use stepsel::bench::{
    run_scenario1, run_scenario2, run_scenario3, run_scenario4, run_scenario5, scenario3_truth,
    scenario4_group_betas, scenario4_summary_rows, scenario5_summary_rows, summarize, summary_rows_to_csv,
    ArtifactSink, ScenarioConfig, SummaryRow,
};
use stepsel::data::{center_covariates, read_csv, validate_dataset, StrataDataset};
use stepsel::modelfile::ModelDocument;
use stepsel::net::{
    build_network, train, Activation, ArchSpec, EmbeddingSpec, EmbeddingTarget, EmbeddingWiring, NetError,
    OptimizerKind, TrainConfig,
};
use stepsel::rng::derive_seed;
use stepsel::sim::{simulate_selection, simulate_social, Arena, MovementKernel, SelectionSpec, SocialSpec, Transform};
use stepsel::xai::{
    ale_csv, ale_curve, arrows_csv, bootstrap_inference, effect_reports_csv, embedding_biplot, importance_csv,
    importance_table, interactions_csv, positions_csv, SsfModel, XaiError,
};

use crate::config::{load_config, RunConfig};
use crate::svg;
use crate::{BenchArgs, CliError, ConfigAction, ConfigArgs, ExplainAction, ExplainArgs, FitArgs, SimulateArgs, BUILD_ID};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<StrataDataset, CliError> {
    let d = read_csv(path).map_err(|e| CliError::config(format!("cannot load {}: {e}", path.display())))?;
    let report = validate_dataset(&d);
    if !report.ok {
        let mut msg = format!("dataset {} failed validation:\n", path.display());
        for v in &report.violations {
            msg.push_str(&format!("  stratum {}: [{}] {}\n", v.stratum_id, v.rule, v.message));
        }
        return Err(CliError::validation(msg));
    }
    Ok(d)
}

/// Fitters require centered covariates; CSV files carry no flag, so centering
/// is re-applied when the columns are visibly uncentered.
fn ensure_centered(d: StrataDataset) -> Result<StrataDataset, CliError> {
    if d.centered {
        return Ok(d);
    }
    eprintln!("note: covariates are not centered; centering before fitting");
    center_covariates(&d).map_err(|e| CliError::config(e.to_string()))
}

fn resolve_feature(d: &StrataDataset, spec: &str) -> Result<usize, CliError> {
    if let Some(idx) = d.feature_index(spec) {
        return Ok(idx);
    }
    if let Ok(idx) = spec.parse::<usize>() {
        if idx < d.n_features() {
            return Ok(idx);
        }
    }
    Err(CliError::config(format!(
        "unknown feature '{spec}'; available: {}",
        d.feature_names.join(", ")
    )))
}

// --- simulate -----------------------------------------------------------------

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let p = &cfg.simulate;
    let scenario = args.scenario.unwrap_or(p.scenario);
    let seed = args.seed.unwrap_or(cfg.seed);
    let strata = args.strata.unwrap_or(p.strata);
    let controls = args.controls.unwrap_or(p.controls);

    let sim_err = |e: stepsel::sim::SimError| CliError::config(e.to_string());
    let (dataset, truth_json) = match scenario {
        1 => {
            let beta = args.beta.unwrap_or(p.beta);
            let spec = SelectionSpec::linear(vec![beta], strata, controls);
            let d = simulate_selection(&spec, seed).map_err(sim_err)?;
            (d, serde_json::json!({"scenario": 1, "true_slope": beta, "spec": spec}))
        }
        2 => {
            let truth_name = args.truth.clone().unwrap_or_else(|| p.truth.clone());
            let spec = match truth_name.as_str() {
                "constant" => SelectionSpec::linear(vec![0.0], strata, controls),
                name => {
                    let t = Transform::by_name(name).ok_or_else(|| {
                        CliError::config(format!("unknown truth '{name}'; expected hump, wiggle, or constant"))
                    })?;
                    SelectionSpec {
                        nonlinear_transforms: vec![(0, t)],
                        ..SelectionSpec::linear(vec![1.0], strata, controls)
                    }
                }
            };
            let d = simulate_selection(&spec, seed).map_err(sim_err)?;
            (d, serde_json::json!({"scenario": 2, "truth": truth_name, "spec": spec}))
        }
        3 => {
            let mut spec = scenario3_truth();
            spec.n_strata = strata;
            spec.n_controls = controls;
            let d = simulate_selection(&spec, seed).map_err(sim_err)?;
            (d, serde_json::json!({"scenario": 3, "spec": spec}))
        }
        4 => {
            let group_betas = scenario4_group_betas(derive_seed(seed, &[4, 0]), false);
            let group_of_individual: Vec<usize> = (0..20).map(|i| i / 5).collect();
            let spec = SelectionSpec {
                n_features: 20,
                betas: vec![0.0; 20],
                interactions: Vec::new(),
                nonlinear_transforms: Vec::new(),
                groups: Some(stepsel::sim::GroupStructure {
                    group_betas,
                    individual_group: group_of_individual.clone(),
                }),
                n_controls: controls,
                n_strata: strata,
            };
            let d = simulate_selection(&spec, derive_seed(seed, &[4, 1])).map_err(sim_err)?;
            (d, serde_json::json!({"scenario": 4, "spec": spec, "group_of_individual": group_of_individual}))
        }
        5 => {
            let n_groups = args.groups.unwrap_or(p.groups).max(1);
            // Distance effects spread evenly from repel (+2) to attract (-2).
            let effects: Vec<f64> = (0..n_groups)
                .map(|g| if n_groups == 1 { 0.0 } else { 2.0 - 4.0 * g as f64 / (n_groups - 1) as f64 })
                .collect();
            let spec = SocialSpec {
                n_groups,
                individuals_per_group: 5,
                group_distance_effect: effects,
                arena: Arena { min_x: 0.0, min_y: 0.0, max_x: 60.0, max_y: 60.0 },
                kernel: MovementKernel::new(2.0, 1.0, 0.0, 0.5).expect("valid default kernel"),
                n_steps: (strata / (n_groups * 5)).max(1),
                n_controls: controls,
            };
            let group_of_opponent: Vec<usize> = (0..spec.n_individuals()).map(|i| spec.group_of(i)).collect();
            let d = simulate_social(&spec, seed).map_err(sim_err)?;
            (d, serde_json::json!({"scenario": 5, "spec": spec, "group_of_opponent": group_of_opponent}))
        }
        other => return Err(CliError::config(format!("scenario must be 1..=5, got {other}"))),
    };

    write_file(&args.out.join("data.csv"), &stepsel::data::to_csv(&dataset))?;
    write_file(
        &args.out.join("truth.json"),
        &format!("{}\n", serde_json::to_string_pretty(&truth_json).expect("serializable truth")),
    )?;
    println!("wrote {} strata to {}", dataset.n_strata(), args.out.display());
    Ok(())
}

// --- fit ------------------------------------------------------------------------

fn parse_formula(d: &StrataDataset, text: &str) -> Result<FormulaSpec, CliError> {
    let mut main_effects = Vec::new();
    let mut interactions = Vec::new();
    for term in text.split('+') {
        let term = term.trim();
        if term.is_empty() {
            continue;
        }
        if let Some((a, b)) = term.split_once(':') {
            interactions.push((resolve_feature(d, a.trim())?, resolve_feature(d, b.trim())?));
        } else {
            main_effects.push(resolve_feature(d, term)?);
        }
    }
    let f = FormulaSpec { main_effects, interactions };
    f.validate(d.n_features()).map_err(|e| CliError::config(e.to_string()))?;
    Ok(f)
}

fn parse_activation(s: &str) -> Result<Activation, CliError> {
    match s {
        "relu" => Ok(Activation::Relu),
        "selu" => Ok(Activation::Selu),
        "tanh" => Ok(Activation::Tanh),
        other => Err(CliError::config(format!("unknown activation '{other}'"))),
    }
}

fn parse_hidden(s: &str) -> Result<Vec<usize>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| CliError::config(format!("bad hidden width '{p}'"))))
        .collect()
}

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::InvalidFormula(_) | FitError::Data(_) | FitError::NotCentered => CliError::config(e.to_string()),
        _ => CliError::convergence(e.to_string()),
    }
}

fn net_error(e: NetError) -> CliError {
    match e {
        NetError::NonFiniteLoss { .. } => CliError::convergence(e.to_string()),
        NetError::IdOutOfVocab { .. } | NetError::MissingId(_) | NetError::NoEmbedding => {
            CliError::capability(e.to_string())
        }
        _ => CliError::config(e.to_string()),
    }
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let p = &cfg.fit;
    let d = ensure_centered(load_dataset(&args.data)?)?;
    let model_kind = if args.model.is_empty() { p.model.clone() } else { args.model.clone() };
    let seed = args.seed.unwrap_or(cfg.seed);

    match model_kind.as_str() {
        "glm" => {
            let formula = match args.formula.as_ref().or(p.formula.as_ref()) {
                Some(text) => parse_formula(&d, text)?,
                None => FormulaSpec::mains(d.n_features()),
            };
            let fit = fit_clogit_glm(&d, &formula).map_err(fit_error)?;
            let wald = wald_inference(&fit).map_err(fit_error)?;
            let mut wald_csv = String::from("term,estimate,se,z,p_value,ci_low,ci_high\n");
            for r in &wald {
                wald_csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.term, r.estimate, r.se, r.z, r.p_value, r.ci_low, r.ci_high
                ));
            }
            let doc = ModelDocument::Glm { feature_names: d.feature_names.clone(), fit };
            write_file(&args.out.join("model.json"), &doc.to_json())?;
            write_file(&args.out.join("wald.csv"), &wald_csv)?;
            println!("glm fit written to {}", args.out.display());
        }
        "dnn" => {
            let embeddings = match args.embed.as_ref().or(p.embed.as_ref()) {
                None => None,
                Some(spec) => {
                    let (target_s, dim_s) = spec
                        .split_once(':')
                        .ok_or_else(|| CliError::config(format!("--embed expects target:dim, got '{spec}'")))?;
                    let dim: usize =
                        dim_s.parse().map_err(|_| CliError::config(format!("bad embedding dim '{dim_s}'")))?;
                    let (target, vocab) = match target_s {
                        "individual" => (EmbeddingTarget::Individual, d.n_individuals),
                        "opponent" => (EmbeddingTarget::Opponent, d.n_opponents),
                        other => return Err(CliError::config(format!("embedding target must be individual or opponent, got '{other}'"))),
                    };
                    if vocab == 0 {
                        return Err(CliError::capability(format!(
                            "dataset has no {target_s} ids; cannot attach a {target_s} embedding"
                        )));
                    }
                    let wiring = match args.embed_wiring.as_deref().unwrap_or(p.embed_wiring.as_str()) {
                        "concat" => EmbeddingWiring::ConcatToInput,
                        "modulation" => EmbeddingWiring::PerFeatureModulation,
                        other => return Err(CliError::config(format!("embedding wiring must be concat or modulation, got '{other}'"))),
                    };
                    Some(EmbeddingSpec { vocab_size: vocab, dim, target, wiring })
                }
            };
            let arch = ArchSpec {
                n_features: d.n_features(),
                hidden: match args.hidden.as_ref() {
                    Some(h) => parse_hidden(h)?,
                    None => p.hidden.clone(),
                },
                activation: parse_activation(args.activation.as_deref().unwrap_or(&p.activation))?,
                embeddings,
                dropout_rate: args.dropout.unwrap_or(p.dropout),
                l2: args.l2.unwrap_or(p.l2),
                l1: args.l1.unwrap_or(p.l1),
            };
            let train_cfg = TrainConfig {
                epochs: args.epochs.unwrap_or(p.epochs),
                learning_rate: args.lr.unwrap_or(p.learning_rate),
                batch_strata: args.batch.unwrap_or(p.batch),
                optimizer: match args.optimizer.as_deref().unwrap_or(&p.optimizer) {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(CliError::config(format!("optimizer must be adam or sgd, got '{other}'"))),
                },
                seed,
                early_stop_patience: args.patience.or(p.early_stop_patience),
            };
            let net = build_network(&arch, seed).map_err(net_error)?;
            let (trained, trace) = train(&net, &d, &train_cfg).map_err(net_error)?;
            for w in &trace.warnings {
                eprintln!("warning: {w}");
            }
            let mut trace_csv = String::from(if trace.val_nll.is_some() {
                "epoch,train_nll,val_nll\n"
            } else {
                "epoch,train_nll\n"
            });
            for (i, v) in trace.train_nll.iter().enumerate() {
                match &trace.val_nll {
                    Some(val) => trace_csv.push_str(&format!("{},{},{}\n", i + 1, v, val[i])),
                    None => trace_csv.push_str(&format!("{},{}\n", i + 1, v)),
                }
            }
            let doc = ModelDocument::Dnn { feature_names: d.feature_names.clone(), network: trained, train: train_cfg };
            write_file(&args.out.join("model.json"), &doc.to_json())?;
            write_file(&args.out.join("trace.csv"), &trace_csv)?;
            println!("dnn fit written to {}", args.out.display());
        }
        "spline" => {
            let feature = match args.feature.as_ref().or(p.feature.as_ref()) {
                Some(f) => resolve_feature(&d, f)?,
                None => 0,
            };
            let settings = SplineSettings {
                n_interior_knots: args.knots.unwrap_or(p.knots),
                degree: args.degree.unwrap_or(p.degree),
                penalty_grid: match args.penalty.or(p.penalty) {
                    Some(lambda) => vec![lambda],
                    None => SplineSettings::default().penalty_grid,
                },
                cv_folds: args.cv_folds.unwrap_or(p.cv_folds),
                cv_seed: seed,
            };
            let fit = fit_clogit_spline(&d, feature, &settings).map_err(fit_error)?;
            let doc = ModelDocument::Spline { feature_names: d.feature_names.clone(), fit, settings };
            write_file(&args.out.join("model.json"), &doc.to_json())?;
            println!("spline fit written to {}", args.out.display());
        }
        other => return Err(CliError::config(format!("model must be glm, dnn, or spline, got '{other}'"))),
    }
    Ok(())
}

// --- explain ----------------------------------------------------------------------

fn load_model(path: &Path) -> Result<ModelDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    ModelDocument::from_json(&text).map_err(CliError::config)
}

fn check_compatibility(doc: &ModelDocument, d: &StrataDataset) -> Result<(), CliError> {
    if doc.feature_names() != d.feature_names {
        return Err(CliError::capability(format!(
            "model was fitted on features [{}] but the dataset has [{}]",
            doc.feature_names().join(", "),
            d.feature_names.join(", ")
        )));
    }
    Ok(())
}

fn xai_error(e: XaiError) -> CliError {
    match e {
        XaiError::NoEmbedding | XaiError::TooFewIds { .. } | XaiError::FeatureCount { .. } => {
            CliError::capability(e.to_string())
        }
        XaiError::FitFailed(_) => CliError::convergence(e.to_string()),
        _ => CliError::config(e.to_string()),
    }
}

/// Refits the model document's recipe on a dataset; used by bootstrap ace.
fn refitter(doc: &ModelDocument) -> impl Fn(&StrataDataset, u64) -> Result<Box<dyn SsfModel>, XaiError> + Sync + '_ {
    move |d: &StrataDataset, fit_seed: u64| -> Result<Box<dyn SsfModel>, XaiError> {
        match doc {
            ModelDocument::Dnn { network, train: tc, .. } => {
                let net = build_network(&network.arch, fit_seed).map_err(|e| XaiError::FitFailed(e.to_string()))?;
                let cfg = TrainConfig { seed: fit_seed, ..tc.clone() };
                let (trained, _) = train(&net, d, &cfg).map_err(|e| XaiError::FitFailed(e.to_string()))?;
                Ok(Box::new(trained))
            }
            ModelDocument::Glm { fit, .. } => fit_clogit_glm(d, &fit.formula)
                .map(|f| Box::new(f) as Box<dyn SsfModel>)
                .map_err(|e| XaiError::FitFailed(e.to_string())),
            ModelDocument::Spline { fit, settings, .. } => fit_clogit_spline(d, fit.feature, settings)
                .map(|f| Box::new(f) as Box<dyn SsfModel>)
                .map_err(|e| XaiError::FitFailed(e.to_string())),
        }
    }
}

pub fn explain(args: ExplainArgs) -> Result<(), CliError> {
    let common = match &args.action {
        ExplainAction::Ace(c)
        | ExplainAction::Importance(c)
        | ExplainAction::Interactions(c)
        | ExplainAction::Ale(c)
        | ExplainAction::Biplot(c) => c,
    };
    let cfg = load_config(common.config.as_deref())?;
    let p = &cfg.explain;
    let doc = load_model(&common.model)?;
    let d = ensure_centered(load_dataset(&common.data)?)?;
    check_compatibility(&doc, &d)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = &common.out;

    match &args.action {
        ExplainAction::Ace(c) => {
            let b = c.bootstrap.unwrap_or(p.bootstrap);
            let features: Vec<usize> = (0..d.n_features()).collect();
            let reports = bootstrap_inference(refitter(&doc), &d, &features, b, seed).map_err(xai_error)?;
            write_file(&out.join("ace.csv"), &effect_reports_csv(&reports))?;
            if c.svg {
                let labels: Vec<String> = reports.iter().map(|r| r.feature.clone()).collect();
                let est: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
                let lo: Vec<f64> = reports.iter().map(|r| r.ci_low).collect();
                let hi: Vec<f64> = reports.iter().map(|r| r.ci_high).collect();
                write_file(&out.join("ace.svg"), &svg::effect_plot(&labels, &est, &lo, &hi, "average conditional effects"))?;
            }
            println!("ace report written to {}", out.display());
        }
        ExplainAction::Importance(c) => {
            let n = c.permutations.unwrap_or(p.permutations);
            let table = importance_table(doc.as_model(), &d, n, seed, false).map_err(xai_error)?;
            write_file(&out.join("importance.csv"), &importance_csv(&table))?;
            if c.svg {
                let labels: Vec<String> = table.singles.iter().map(|s| s.feature.clone()).collect();
                let values: Vec<f64> = table.singles.iter().map(|s| s.importance).collect();
                write_file(&out.join("importance.svg"), &svg::bar_chart(&labels, &values, "permutation importance", "NLL increase"))?;
            }
            println!("importance written to {}", out.display());
        }
        ExplainAction::Interactions(c) => {
            let n = c.permutations.unwrap_or(p.permutations);
            let table = importance_table(doc.as_model(), &d, n, seed, true).map_err(xai_error)?;
            write_file(&out.join("interactions.csv"), &interactions_csv(&table))?;
            if c.svg {
                let labels: Vec<String> =
                    table.pairs.iter().map(|pr| format!("{}:{}", pr.feature_a, pr.feature_b)).collect();
                let values: Vec<f64> = table.pairs.iter().map(|pr| pr.importance).collect();
                write_file(&out.join("interactions.svg"), &svg::bar_chart(&labels, &values, "interaction importance", "NLL decomposition"))?;
            }
            println!("interaction importance written to {}", out.display());
        }
        ExplainAction::Ale(c) => {
            let feature = match c.feature.as_ref().or(p.feature.as_ref()) {
                Some(f) => resolve_feature(&d, f)?,
                None => 0,
            };
            let bins = c.bins.unwrap_or(p.bins);
            let curve = ale_curve(doc.as_model(), &d, feature, bins).map_err(xai_error)?;
            write_file(&out.join("ale.csv"), &ale_csv(&curve))?;
            if c.svg {
                let pts: Vec<(f64, f64)> =
                    curve.bin_mids().into_iter().zip(curve.centered_effect.iter().copied()).collect();
                write_file(
                    &out.join("ale.svg"),
                    &svg::line_plot(&pts, "accumulated local effects", &d.feature_names[feature], "effect"),
                )?;
            }
            println!("ale curve written to {}", out.display());
        }
        ExplainAction::Biplot(c) => {
            let net = match &doc {
                ModelDocument::Dnn { network, .. } if network.arch.embeddings.is_some() => network,
                ModelDocument::Dnn { .. } => {
                    return Err(CliError::capability(
                        String::from("model has no embedding layer; fit with --embed to use biplot"),
                    ))
                }
                other => {
                    return Err(CliError::capability(format!(
                        "biplot requires a dnn model with embeddings; this model is '{}'",
                        other.kind()
                    )))
                }
            };
            let features: Vec<usize> = (0..d.n_features()).collect();
            let eps = c.epsilon.or(p.epsilon).unwrap_or_else(|| {
                (0..d.n_features()).map(|f| stepsel::xai::default_epsilon(&d, f)).fold(f64::INFINITY, f64::min)
            });
            let biplot = embedding_biplot(net, &d, &features, eps).map_err(xai_error)?;
            write_file(&out.join("biplot.csv"), &positions_csv(&biplot))?;
            write_file(&out.join("arrows.csv"), &arrows_csv(&biplot))?;
            if c.svg {
                write_file(
                    &out.join("biplot.svg"),
                    &svg::biplot(&biplot.positions, biplot.group_labels.as_ref(), &biplot.arrows, "embedding biplot"),
                )?;
            }
            println!("biplot written to {}", out.display());
        }
    }
    Ok(())
}

// --- bench ---------------------------------------------------------------------

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let scenarios: Vec<u8> = if args.scenario == "all" {
        vec![1, 2, 3, 4, 5]
    } else {
        vec![args
            .scenario
            .parse::<u8>()
            .map_err(|_| CliError::config(format!("scenario must be 1..=5 or 'all', got '{}'", args.scenario)))?]
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let threads = args.threads.or(cfg.threads);

    let run_all = || -> Result<(), CliError> {
        let sink = ArtifactSink::new(&args.out);
        let mut attempted = 0usize;
        let mut completed = 0usize;
        let mut all_failures: Vec<String> = Vec::new();
        let mut configs = serde_json::Map::new();

        for &s in &scenarios {
            let mut sc = ScenarioConfig::defaults_for(s).map_err(|e| CliError::config(e.to_string()))?;
            sc.seed = seed;
            if let Some(r) = args.reps.or(cfg.bench.reps) {
                sc.n_repetitions = r;
            }
            if let Some(n) = args.strata.or(cfg.bench.strata) {
                sc.n_strata = n;
            }
            if let Some(n) = args.controls.or(cfg.bench.controls) {
                sc.n_controls = n;
            }
            if let Some(b) = args.bootstrap.or(cfg.bench.bootstrap) {
                sc.bootstrap_b = b;
            }
            sc.validate().map_err(|e| CliError::config(e.to_string()))?;
            configs.insert(format!("scenario{s}"), serde_json::to_value(&sc).expect("serializable config"));

            let rows: Vec<SummaryRow> = match s {
                1 => {
                    let out = run_scenario1(&sc, Some(&sink)).map_err(|e| CliError::config(e.to_string()))?;
                    for cell in out.glm.cells.iter().chain(&out.dnn.cells) {
                        attempted += sc.n_repetitions;
                        completed += cell.n_completed;
                    }
                    all_failures.extend(out.failures.clone());
                    out.summary_rows()
                }
                2 => {
                    let out = run_scenario2(&sc, Some(&sink)).map_err(|e| CliError::config(e.to_string()))?;
                    attempted += sc.n_repetitions;
                    completed += out.per_rep.len();
                    all_failures.extend(out.failures.clone());
                    out.summary_rows()
                }
                3 => {
                    let out = run_scenario3(&sc, Some(&sink)).map_err(|e| CliError::config(e.to_string()))?;
                    attempted += 2 * sc.n_repetitions;
                    completed += out.glm.n_completed + out.dnn.n_completed;
                    all_failures.extend(out.failures.clone());
                    out.summary_rows()
                }
                4 => {
                    let out = run_scenario4(&sc, Some(&sink)).map_err(|e| CliError::config(e.to_string()))?;
                    attempted += sc.n_repetitions;
                    completed += out.runs.len();
                    all_failures.extend(out.failures.clone());
                    scenario4_summary_rows(&out.runs)
                }
                5 => {
                    let out = run_scenario5(&sc, Some(&sink)).map_err(|e| CliError::config(e.to_string()))?;
                    attempted += sc.n_repetitions;
                    completed += out.runs.len();
                    all_failures.extend(out.failures.clone());
                    scenario5_summary_rows(&out.runs)
                }
                _ => unreachable!(),
            };
            write_file(&args.out.join(format!("scenario{s}")).join("summary.csv"), &summary_rows_to_csv(&rows))?;
        }

        let report = summarize(&args.out).map_err(|e| CliError::io(e.to_string()))?;
        write_file(&args.out.join("summary.csv"), &summary_rows_to_csv(&report.rows))?;
        write_file(&args.out.join("summary.txt"), &stepsel::bench::human_table(&report))?;
        for v in &report.identity_violations {
            eprintln!("warning: {v}");
        }

        let rate = if attempted == 0 { 1.0 } else { completed as f64 / attempted as f64 };
        let manifest = serde_json::json!({
            "version": BUILD_ID,
            "seed": seed,
            "threads": threads,
            "scenarios": scenarios,
            "configs": serde_json::Value::Object(configs),
            "completion": {"attempted": attempted, "completed": completed, "rate": rate},
            "failures": all_failures,
        });
        write_file(&args.out.join("manifest.json"), &format!("{}\n", serde_json::to_string_pretty(&manifest).expect("serializable manifest")))?;

        println!(
            "bench complete: {}/{} repetitions, results in {}",
            completed,
            attempted,
            args.out.display()
        );
        if rate < 0.9 {
            return Err(CliError::shortfall(format!(
                "only {completed} of {attempted} repetitions completed ({:.0}%)",
                rate * 100.0
            )));
        }
        Ok(())
    };

    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::config(format!("cannot build thread pool: {e}")))?;
            pool.install(run_all)
        }
        None => run_all(),
    }
}

// --- config ----------------------------------------------------------------------

pub fn config_cmd(args: ConfigArgs) -> Result<(), CliError> {
    match args.action {
        ConfigAction::ShowDefaults => {
            let defaults = RunConfig::default();
            println!("{}", serde_json::to_string_pretty(&defaults).expect("serializable defaults"));
            Ok(())
        }
    }
}
