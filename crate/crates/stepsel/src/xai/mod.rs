//! Post-hoc interpretation of fitted step-selection models.
//!
//! Everything operates through the [`SsfModel`] trait (a candidate-scoring
//! function), so the GLM, the spline, and the network are explained by the
//! same machinery: average conditional effects with stratum-bootstrap
//! inference, permutation and joint-permutation interaction importance,
//! first-order accumulated local effects, and the embedding bi-plot
//! back-projection.
//!
//! All operations are pure reads of the model and dataset; randomness comes
//! only from explicitly passed seeds, and parallel work is reduced in index
//! order so results do not depend on thread scheduling.

mod report;

pub use report::{ale_csv, arrows_csv, effect_reports_csv, importance_csv, interactions_csv, positions_csv};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{strata_views, StrataDataset, StratumView};
use crate::net::{EmbeddingTarget, SsfNetwork};
use crate::rng::stream;
use crate::stats::{log_sum_exp, normal_two_sided_p, sample_sd};

#[derive(Debug, Error)]
pub enum XaiError {
    #[error("epsilon {epsilon} outside (0, {max}] (half the feature SD)")]
    BadEpsilon { epsilon: f64, max: f64 },
    #[error("model error: {0}")]
    Model(String),
    #[error("dataset error: {0}")]
    Data(String),
    #[error("need at least 2 bootstrap replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("feature '{0}' is degenerate: {1}")]
    DegenerateFeature(String, String),
    #[error("model has no embedding layer")]
    NoEmbedding,
    #[error("need at least {min} distinct ids for a bi-plot, found {got}")]
    TooFewIds { min: usize, got: usize },
    #[error("embedding positions are collinear; arrow regression is rank deficient")]
    CollinearEmbedding,
    #[error("fit failed in bootstrap replicate: {0}")]
    FitFailed(String),
    #[error("features {got} do not match the model's {expected}")]
    FeatureCount { expected: usize, got: usize },
    #[error("interaction pair must name two different features")]
    SelfPair,
}

/// A fitted step-selection model reduced to its scoring function.
pub trait SsfModel: Sync {
    fn n_features(&self) -> usize;
    fn score(
        &self,
        covariates: &[f64],
        individual_id: Option<usize>,
        opponent_id: Option<usize>,
    ) -> Result<f64, XaiError>;
}

impl<M: SsfModel + ?Sized> SsfModel for Box<M> {
    fn n_features(&self) -> usize {
        self.as_ref().n_features()
    }
    fn score(
        &self,
        covariates: &[f64],
        individual_id: Option<usize>,
        opponent_id: Option<usize>,
    ) -> Result<f64, XaiError> {
        self.as_ref().score(covariates, individual_id, opponent_id)
    }
}

impl SsfModel for SsfNetwork {
    fn n_features(&self) -> usize {
        self.arch.n_features
    }

    fn score(
        &self,
        covariates: &[f64],
        individual_id: Option<usize>,
        opponent_id: Option<usize>,
    ) -> Result<f64, XaiError> {
        self.score_row(covariates, individual_id, opponent_id)
            .map_err(|e| XaiError::Model(e.to_string()))
    }
}

impl SsfModel for crate::baselines::ClogitFit {
    fn n_features(&self) -> usize {
        // The formula indexes the dataset's covariates directly.
        self.formula
            .main_effects
            .iter()
            .copied()
            .chain(self.formula.interactions.iter().flat_map(|&(p, q)| [p, q]))
            .max()
            .map_or(0, |m| m + 1)
    }

    fn score(&self, covariates: &[f64], _i: Option<usize>, _o: Option<usize>) -> Result<f64, XaiError> {
        Ok(self.formula.score(covariates, &self.coefficients))
    }
}

impl SsfModel for crate::baselines::SplineFit {
    fn n_features(&self) -> usize {
        self.feature + 1
    }

    fn score(&self, covariates: &[f64], _i: Option<usize>, _o: Option<usize>) -> Result<f64, XaiError> {
        // Clamped so that perturbed inputs just outside the data range stay scorable.
        Ok(self.eval_clamped(covariates[self.feature]))
    }
}

/// Per-feature effect with bootstrap uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub feature: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_bootstrap: usize,
    /// All replicates agreed exactly; the normal approximation is void and
    /// the p-value is reported as 1 by convention.
    pub degenerate_se: bool,
    pub n_failed: usize,
}

/// Permutation importances, clamped at zero for display with raw values kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub singles: Vec<SingleImportance>,
    pub pairs: Vec<PairImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleImportance {
    pub feature: String,
    pub importance: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairImportance {
    pub feature_a: String,
    pub feature_b: String,
    pub importance: f64,
    pub raw: f64,
}

impl ImportanceTable {
    /// Symmetric pair lookup.
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairImportance> {
        self.pairs.iter().find(|p| {
            (p.feature_a == a && p.feature_b == b) || (p.feature_a == b && p.feature_b == a)
        })
    }
}

/// First-order accumulated local effect curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    pub bin_edges: Vec<f64>,
    /// Effect at each bin midpoint, centered to count-weighted mean zero.
    pub centered_effect: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AleCurve {
    pub fn bin_mids(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Linear interpolation of the curve at `x`, clamped to the midpoint span.
    pub fn interpolate(&self, x: f64) -> f64 {
        let mids = self.bin_mids();
        if x <= mids[0] {
            return self.centered_effect[0];
        }
        if x >= mids[mids.len() - 1] {
            return self.centered_effect[mids.len() - 1];
        }
        let mut i = 0;
        while x > mids[i + 1] {
            i += 1;
        }
        let t = (x - mids[i]) / (mids[i + 1] - mids[i]);
        self.centered_effect[i] * (1.0 - t) + self.centered_effect[i + 1] * t
    }
}

/// Embedding positions and back-projected effect arrows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotResult {
    /// (id, embedding position) in ascending id order.
    pub positions: Vec<(usize, Vec<f64>)>,
    /// (feature name, arrow) per requested feature.
    pub arrows: Vec<(String, Vec<f64>)>,
    /// Optional id -> group labels, attached by callers that know the truth.
    pub group_labels: Option<Vec<(usize, usize)>>,
}

/// Default finite-difference step: a tenth of the feature's SD.
pub fn default_epsilon(d: &StrataDataset, feature: usize) -> f64 {
    0.1 * d.feature_sd(feature)
}

fn check_epsilon(d: &StrataDataset, feature: usize, epsilon: f64) -> Result<(), XaiError> {
    let max = 0.5 * d.feature_sd(feature);
    if !(epsilon > 0.0 && epsilon <= max) {
        return Err(XaiError::BadEpsilon { epsilon, max });
    }
    Ok(())
}

/// Mean central-difference slope of the model score along one feature,
/// averaged over every record with all other inputs held fixed.
pub fn average_conditional_effect(
    model: &dyn SsfModel,
    d: &StrataDataset,
    feature: usize,
    epsilon: f64,
) -> Result<f64, XaiError> {
    check_epsilon(d, feature, epsilon)?;
    ace_over_records(model, d, feature, epsilon, None)
}

fn ace_over_records(
    model: &dyn SsfModel,
    d: &StrataDataset,
    feature: usize,
    epsilon: f64,
    records: Option<&[usize]>,
) -> Result<f64, XaiError> {
    let idxs: Vec<usize> = match records {
        Some(r) => r.to_vec(),
        None => (0..d.records.len()).collect(),
    };
    if idxs.is_empty() {
        return Err(XaiError::Data("no records to evaluate".into()));
    }
    let mut total = 0.0;
    let mut x = Vec::new();
    for &ri in &idxs {
        let rec = &d.records[ri];
        x.clear();
        x.extend_from_slice(&rec.covariates);
        let orig = x[feature];
        x[feature] = orig + epsilon;
        let up = model.score(&x, rec.individual_id, rec.opponent_id)?;
        x[feature] = orig - epsilon;
        let down = model.score(&x, rec.individual_id, rec.opponent_id)?;
        total += (up - down) / (2.0 * epsilon);
    }
    Ok(total / idxs.len() as f64)
}

/// Mean four-point-stencil cross partial of the model score for a feature
/// pair: the second-order analogue of the average conditional effect. For a
/// bilinear score `gamma * x_i * x_j` this returns gamma exactly.
pub fn mean_cross_partial(
    model: &dyn SsfModel,
    d: &StrataDataset,
    i: usize,
    j: usize,
    eps_i: f64,
    eps_j: f64,
) -> Result<f64, XaiError> {
    if i == j {
        return Err(XaiError::SelfPair);
    }
    check_epsilon(d, i, eps_i)?;
    check_epsilon(d, j, eps_j)?;
    let mut total = 0.0;
    let mut x = Vec::new();
    for rec in &d.records {
        x.clear();
        x.extend_from_slice(&rec.covariates);
        let (oi, oj) = (x[i], x[j]);
        let mut stencil = 0.0;
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            x[i] = oi + si * eps_i;
            x[j] = oj + sj * eps_j;
            let s = model.score(&x, rec.individual_id, rec.opponent_id)?;
            stencil += si * sj * s;
        }
        x[i] = oi;
        x[j] = oj;
        total += stencil / (4.0 * eps_i * eps_j);
    }
    Ok(total / d.records.len() as f64)
}

/// Mean conditional NLL of the model on the dataset.
pub fn dataset_mean_nll(model: &dyn SsfModel, d: &StrataDataset) -> Result<f64, XaiError> {
    let views = strata_views(d).map_err(|e| XaiError::Data(e.to_string()))?;
    let cov: Vec<&[f64]> = d.records.iter().map(|r| r.covariates.as_slice()).collect();
    nll_with_columns(model, d, &views, &|ri| cov[ri])
}

fn nll_with_columns<'a>(
    model: &dyn SsfModel,
    d: &StrataDataset,
    views: &[StratumView],
    covariates_of: &(dyn Fn(usize) -> &'a [f64] + 'a),
) -> Result<f64, XaiError> {
    let mut total = 0.0;
    let mut scores = Vec::new();
    for v in views {
        scores.clear();
        for &ri in &v.record_idxs {
            let rec = &d.records[ri];
            scores.push(model.score(covariates_of(ri), rec.individual_id, rec.opponent_id)?);
        }
        total += log_sum_exp(&scores) - scores[v.case_pos];
    }
    Ok(total / views.len() as f64)
}

/// Builds a flat working copy of the covariate matrix.
fn covariate_matrix(d: &StrataDataset) -> Vec<f64> {
    let p = d.n_features();
    let mut m = Vec::with_capacity(d.records.len() * p);
    for r in &d.records {
        m.extend_from_slice(&r.covariates);
    }
    m
}

fn matrix_nll(model: &dyn SsfModel, d: &StrataDataset, views: &[StratumView], m: &[f64]) -> Result<f64, XaiError> {
    let p = d.n_features();
    nll_with_columns(model, d, views, &|ri| &m[ri * p..(ri + 1) * p])
}

/// Mean NLL increase when one feature column is shuffled across all records.
///
/// Returns the raw signed value; negative values are clamped only in
/// [`ImportanceTable`] displays.
pub fn permutation_importance(
    model: &dyn SsfModel,
    d: &StrataDataset,
    feature: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<f64, XaiError> {
    let views = strata_views(d).map_err(|e| XaiError::Data(e.to_string()))?;
    let p = d.n_features();
    let n = d.records.len();
    let mut m = covariate_matrix(d);
    let baseline = matrix_nll(model, d, &views, &m)?;
    let original: Vec<f64> = (0..n).map(|r| m[r * p + feature]).collect();
    let mut total = 0.0;
    let mut perm: Vec<usize> = (0..n).collect();
    for rep in 0..n_permutations {
        let mut rng = stream(seed, &[feature as u64, rep as u64]);
        perm_shuffle(&mut perm, &mut rng);
        for r in 0..n {
            m[r * p + feature] = original[perm[r]];
        }
        total += matrix_nll(model, d, &views, &m)? - baseline;
    }
    // Restore for clarity even though `m` is local.
    for r in 0..n {
        m[r * p + feature] = original[r];
    }
    Ok(total / n_permutations as f64)
}

fn perm_shuffle<R: Rng>(perm: &mut [usize], rng: &mut R) {
    for (i, v) in perm.iter_mut().enumerate() {
        *v = i;
    }
    perm.shuffle(rng);
}

/// Joint-permutation interaction importance for a feature pair.
///
/// For each draw, the same permutation is applied to column i alone, to
/// column j alone, and to both columns jointly. Permuting either column
/// alone already destroys the pair's interaction signal once, while the
/// joint permutation destroys it once total, so the combination
/// `NLL(i) + NLL(j) - NLL(joint) - NLL(baseline)` isolates the non-additive
/// contribution with a positive sign. It is exactly symmetric in (i, j) and
/// zero for additive models.
pub fn interaction_importance(
    model: &dyn SsfModel,
    d: &StrataDataset,
    pair: (usize, usize),
    n_permutations: usize,
    seed: u64,
) -> Result<f64, XaiError> {
    let (i, j) = pair;
    if i == j {
        return Err(XaiError::SelfPair);
    }
    let (lo, hi) = (i.min(j), i.max(j));
    let views = strata_views(d).map_err(|e| XaiError::Data(e.to_string()))?;
    let p = d.n_features();
    let n = d.records.len();
    let mut m = covariate_matrix(d);
    let baseline = matrix_nll(model, d, &views, &m)?;
    let col_i: Vec<f64> = (0..n).map(|r| m[r * p + lo]).collect();
    let col_j: Vec<f64> = (0..n).map(|r| m[r * p + hi]).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for rep in 0..n_permutations {
        let mut rng = stream(seed, &[lo as u64, hi as u64, rep as u64]);
        perm_shuffle(&mut perm, &mut rng);
        // i alone.
        for r in 0..n {
            m[r * p + lo] = col_i[perm[r]];
        }
        let nll_i = matrix_nll(model, d, &views, &m)?;
        // joint: j joins i under the same permutation.
        for r in 0..n {
            m[r * p + hi] = col_j[perm[r]];
        }
        let nll_joint = matrix_nll(model, d, &views, &m)?;
        // j alone.
        for r in 0..n {
            m[r * p + lo] = col_i[r];
        }
        let nll_j = matrix_nll(model, d, &views, &m)?;
        for r in 0..n {
            m[r * p + hi] = col_j[r];
        }
        total += nll_i + nll_j - nll_joint - baseline;
    }
    Ok(total / n_permutations as f64)
}

/// Computes the full importance table: all singles, optionally all pairs.
pub fn importance_table(
    model: &dyn SsfModel,
    d: &StrataDataset,
    n_permutations: usize,
    seed: u64,
    include_pairs: bool,
) -> Result<ImportanceTable, XaiError> {
    let p = d.n_features();
    let singles: Vec<SingleImportance> = (0..p)
        .into_par_iter()
        .map(|f| {
            permutation_importance(model, d, f, n_permutations, seed).map(|raw| SingleImportance {
                feature: d.feature_names[f].clone(),
                importance: raw.max(0.0),
                raw,
            })
        })
        .collect::<Result<_, _>>()?;
    let pairs: Vec<PairImportance> = if include_pairs {
        let mut idx = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                idx.push((a, b));
            }
        }
        idx.into_par_iter()
            .map(|(a, b)| {
                interaction_importance(model, d, (a, b), n_permutations, seed).map(|raw| {
                    PairImportance {
                        feature_a: d.feature_names[a].clone(),
                        feature_b: d.feature_names[b].clone(),
                        importance: raw.max(0.0),
                        raw,
                    }
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    Ok(ImportanceTable { singles, pairs })
}

/// First-order ALE over quantile bins, reported at bin midpoints and centered
/// to count-weighted mean zero.
pub fn ale_curve(
    model: &dyn SsfModel,
    d: &StrataDataset,
    feature: usize,
    n_bins: usize,
) -> Result<AleCurve, XaiError> {
    if n_bins < 2 {
        return Err(XaiError::Data(format!("n_bins must be >= 2, got {n_bins}")));
    }
    let name = d.feature_names[feature].clone();
    let mut values = d.column(feature);
    let mut distinct = values.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < n_bins {
        return Err(XaiError::DegenerateFeature(
            name,
            format!("{} distinct values cannot fill {n_bins} bins", distinct.len()),
        ));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = Vec::with_capacity(n_bins + 1);
    for k in 0..=n_bins {
        let q = k as f64 / n_bins as f64;
        let pos = q * (values.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let v = if i + 1 < values.len() { values[i] * (1.0 - frac) + values[i + 1] * frac } else { values[i] };
        edges.push(v);
    }
    edges.dedup();
    if edges.len() < 3 {
        return Err(XaiError::DegenerateFeature(name, "quantile bin edges collapsed".into()));
    }
    let k_bins = edges.len() - 1;

    // Per-bin mean local differences.
    let mut sums = vec![0.0; k_bins];
    let mut counts = vec![0usize; k_bins];
    let mut x = Vec::new();
    for rec in &d.records {
        let v = rec.covariates[feature];
        // First bin is closed on the left; the rest are (lo, hi].
        let mut b = match edges[1..].iter().position(|&e| v <= e) {
            Some(b) => b,
            None => k_bins - 1,
        };
        if v <= edges[0] {
            b = 0;
        }
        x.clear();
        x.extend_from_slice(&rec.covariates);
        x[feature] = edges[b + 1];
        let hi = model.score(&x, rec.individual_id, rec.opponent_id)?;
        x[feature] = edges[b];
        let lo = model.score(&x, rec.individual_id, rec.opponent_id)?;
        sums[b] += hi - lo;
        counts[b] += 1;
    }

    let mut effect = Vec::with_capacity(k_bins);
    let mut acc = 0.0;
    for b in 0..k_bins {
        let g = if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 };
        // Value at the bin midpoint: accumulated effect up to the left edge
        // plus half the local difference.
        effect.push(acc + 0.5 * g);
        acc += g;
    }
    let n_total: usize = counts.iter().sum();
    let weighted_mean: f64 = effect
        .iter()
        .zip(&counts)
        .map(|(e, &c)| e * c as f64)
        .sum::<f64>()
        / n_total as f64;
    for e in &mut effect {
        *e -= weighted_mean;
    }
    Ok(AleCurve { bin_edges: edges, centered_effect: effect, counts })
}

/// Resamples strata with replacement, renumbering strata consecutively.
pub fn resample_strata<R: Rng>(d: &StrataDataset, rng: &mut R) -> StrataDataset {
    let views = strata_views(d).expect("resample requires a valid dataset");
    let n = views.len();
    let mut records = Vec::with_capacity(d.records.len());
    for new_sid in 0..n {
        let pick = rng.gen_range(0..n);
        for &ri in &views[pick].record_idxs {
            let mut rec = d.records[ri].clone();
            rec.stratum_id = new_sid as u64;
            records.push(rec);
        }
    }
    let mut out = d.clone();
    out.records = records;
    out
}

/// Stratum-bootstrap inference for average conditional effects.
///
/// `fitter` refits on each resampled dataset (it receives a per-replicate
/// seed); the point estimate is the ACE of the full-data fit, the SE is the
/// replicate standard deviation, and the p-value is the two-sided normal tail
/// of estimate/SE. Replicates that fail to fit are retried with a fresh
/// resample up to 3 times, then excluded and counted.
pub fn bootstrap_inference<M, F>(
    fitter: F,
    d: &StrataDataset,
    features: &[usize],
    n_replicates: usize,
    seed: u64,
) -> Result<Vec<EffectReport>, XaiError>
where
    M: SsfModel,
    F: Fn(&StrataDataset, u64) -> Result<M, XaiError> + Sync,
{
    if n_replicates < 2 {
        return Err(XaiError::TooFewReplicates(n_replicates));
    }
    let full_model = fitter(d, crate::rng::derive_seed(seed, &[0]))?;
    let estimates: Vec<f64> = features
        .iter()
        .map(|&f| ace_over_records(&full_model, d, f, default_epsilon(d, f), None))
        .collect::<Result<_, _>>()?;

    // Each replicate: resample -> fit -> ACE per feature. Indexed results keep
    // the reduction order-independent of scheduling.
    let replicate_results: Vec<Option<Vec<f64>>> = (0..n_replicates)
        .into_par_iter()
        .map(|rep| {
            for attempt in 0..3u64 {
                let mut rng = stream(seed, &[1, rep as u64, attempt]);
                let sample = resample_strata(d, &mut rng);
                let fit_seed = crate::rng::derive_seed(seed, &[2, rep as u64, attempt]);
                if let Ok(model) = fitter(&sample, fit_seed) {
                    let aces: Result<Vec<f64>, XaiError> = features
                        .iter()
                        .map(|&f| {
                            let eps = default_epsilon(&sample, f);
                            ace_over_records(&model, &sample, f, eps, None)
                        })
                        .collect();
                    if let Ok(aces) = aces {
                        return Some(aces);
                    }
                }
            }
            None
        })
        .collect();

    let completed: Vec<&Vec<f64>> = replicate_results.iter().flatten().collect();
    let n_failed = n_replicates - completed.len();
    if completed.len() < 2 {
        return Err(XaiError::FitFailed(format!(
            "only {} of {n_replicates} bootstrap replicates completed",
            completed.len()
        )));
    }

    Ok(features
        .iter()
        .enumerate()
        .map(|(fi, &f)| {
            let reps: Vec<f64> = completed.iter().map(|r| r[fi]).collect();
            let estimate = estimates[fi];
            let se = sample_sd(&reps);
            let degenerate = se <= 0.0;
            let p_value = if degenerate { 1.0 } else { normal_two_sided_p(estimate / se) };
            EffectReport {
                feature: d.feature_names[f].clone(),
                estimate,
                se,
                ci_low: estimate - 1.96 * se,
                ci_high: estimate + 1.96 * se,
                p_value,
                n_bootstrap: completed.len(),
                degenerate_se: degenerate,
                n_failed,
            }
        })
        .collect())
}

/// Back-projects per-id effects onto the embedding space.
///
/// Positions are embedding rows for every id present in the dataset; each
/// feature's arrow is the least-squares regression of per-id ACEs (computed
/// on that id's records only) onto the embedding coordinates.
pub fn embedding_biplot(
    net: &SsfNetwork,
    d: &StrataDataset,
    features: &[usize],
    epsilon: f64,
) -> Result<BiplotResult, XaiError> {
    let emb = net.arch.embeddings.as_ref().ok_or(XaiError::NoEmbedding)?;
    for &f in features {
        check_epsilon(d, f, epsilon)?;
    }

    // Record indices per id, ascending id order.
    let mut by_id: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for (ri, rec) in d.records.iter().enumerate() {
        let id = match emb.target {
            EmbeddingTarget::Individual => rec.individual_id,
            EmbeddingTarget::Opponent => rec.opponent_id,
        };
        if let Some(id) = id {
            by_id.entry(id).or_default().push(ri);
        }
    }
    if by_id.len() < 3 {
        return Err(XaiError::TooFewIds { min: 3, got: by_id.len() });
    }

    let mut positions = Vec::with_capacity(by_id.len());
    for &id in by_id.keys() {
        let pos = net.embedding_lookup(id).map_err(|e| XaiError::Model(e.to_string()))?;
        positions.push((id, pos));
    }

    // Design: intercept + embedding coordinates.
    let dim = emb.dim;
    let cols = dim + 1;
    let n_ids = positions.len();
    let mut design = Vec::with_capacity(n_ids * cols);
    for (_, pos) in &positions {
        design.push(1.0);
        design.extend_from_slice(pos);
    }

    let mut arrows = Vec::with_capacity(features.len());
    for &f in features {
        let mut y = Vec::with_capacity(n_ids);
        for (_, idxs) in by_id.iter() {
            y.push(ace_over_records(net, d, f, epsilon, Some(idxs))?);
        }
        let beta = crate::linalg::least_squares(&design, &y, cols)
            .map_err(|_| XaiError::CollinearEmbedding)?;
        arrows.push((d.feature_names[f].clone(), beta[1..].to_vec()));
    }

    Ok(BiplotResult { positions, arrows, group_labels: None })
}
