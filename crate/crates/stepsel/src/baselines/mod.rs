//! Conditional-logistic GLM with Newton-Raphson MLE and Wald inference.
//!
//! The design matrix is built from a formula (main effects plus optional
//! pairwise products). The conditional likelihood is the per-stratum softmax
//! of linear scores; its gradient and observed information have closed forms,
//! so Newton iterations converge in a handful of steps from beta = 0. The
//! covariance of the estimates is the inverse observed information at the
//! optimum.

mod spline;

pub use spline::{fit_clogit_spline, spline_curve, SplineFit, SplineSettings};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{strata_views, StrataDataset};
use crate::linalg::{Cholesky, LinalgError, SymMatrix};
use crate::stats::normal_two_sided_p;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
    #[error("dataset error: {0}")]
    Data(String),
    #[error("dataset must be centered before fitting (run center_covariates)")]
    NotCentered,
    #[error("design matrix is rank deficient: column {column} ({name}) is linearly dependent on earlier columns")]
    RankDeficient { column: usize, name: String },
    #[error("separation detected: |beta| exceeded {limit} for column {column} during iteration")]
    Separation { column: usize, limit: f64 },
    #[error("Newton-Raphson did not converge within {max_iter} iterations (max |gradient| = {grad_norm:.3e})")]
    NotConverged { max_iter: usize, grad_norm: f64 },
    #[error("inference requires a converged fit")]
    NotConvergedFit,
    #[error("spline error: {0}")]
    Spline(String),
}

/// Which terms enter the linear predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaSpec {
    pub main_effects: Vec<usize>,
    #[serde(default)]
    pub interactions: Vec<(usize, usize)>,
}

impl FormulaSpec {
    /// All features as main effects, no interactions.
    pub fn mains(n_features: usize) -> Self {
        FormulaSpec { main_effects: (0..n_features).collect(), interactions: Vec::new() }
    }

    /// All features as main effects plus every pairwise interaction.
    pub fn full_pairwise(n_features: usize) -> Self {
        let mut interactions = Vec::new();
        for p in 0..n_features {
            for q in (p + 1)..n_features {
                interactions.push((p, q));
            }
        }
        FormulaSpec { main_effects: (0..n_features).collect(), interactions }
    }

    pub fn n_terms(&self) -> usize {
        self.main_effects.len() + self.interactions.len()
    }

    pub fn validate(&self, n_features: usize) -> Result<(), FitError> {
        if self.main_effects.is_empty() && self.interactions.is_empty() {
            return Err(FitError::InvalidFormula("formula has no terms".into()));
        }
        for &j in &self.main_effects {
            if j >= n_features {
                return Err(FitError::InvalidFormula(format!("main effect {j} out of range")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for &j in &self.main_effects {
            if !seen.insert(("m", j, 0)) {
                return Err(FitError::InvalidFormula(format!("duplicate main effect {j}")));
            }
        }
        for &(p, q) in &self.interactions {
            if p >= n_features || q >= n_features {
                return Err(FitError::InvalidFormula(format!("interaction ({p},{q}) out of range")));
            }
            if p == q {
                return Err(FitError::InvalidFormula(format!("interaction ({p},{q}) pairs a feature with itself")));
            }
            let key = ("i", p.min(q), p.max(q));
            if !seen.insert(key) {
                return Err(FitError::InvalidFormula(format!("duplicate interaction ({p},{q})")));
            }
        }
        Ok(())
    }

    /// Human-readable term names given the dataset's feature names.
    pub fn term_names(&self, feature_names: &[String]) -> Vec<String> {
        let mut names: Vec<String> =
            self.main_effects.iter().map(|&j| feature_names[j].clone()).collect();
        for &(p, q) in &self.interactions {
            names.push(format!("{}:{}", feature_names[p], feature_names[q]));
        }
        names
    }

    /// Expands one covariate row into the design row.
    pub fn design_row(&self, covariates: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for &j in &self.main_effects {
            out.push(covariates[j]);
        }
        for &(p, q) in &self.interactions {
            out.push(covariates[p] * covariates[q]);
        }
    }

    /// Linear score of one covariate row under coefficients `beta`.
    pub fn score(&self, covariates: &[f64], beta: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut t = 0;
        for &j in &self.main_effects {
            acc += beta[t] * covariates[j];
            t += 1;
        }
        for &(p, q) in &self.interactions {
            acc += beta[t] * covariates[p] * covariates[q];
            t += 1;
        }
        acc
    }
}

/// Converged conditional-logit estimates with their covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClogitFit {
    pub formula: FormulaSpec,
    pub term_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Row-major inverse observed information.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub n_iterations: usize,
    pub loglik: f64,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_GRAD_TOL: f64 = 1e-8;
/// exp(+-50) exhausts double precision in softmax contrasts.
const SEPARATION_LIMIT: f64 = 50.0;

/// Maximizes the conditional-logit likelihood by Newton-Raphson from beta = 0.
pub fn fit_clogit_glm(d: &StrataDataset, formula: &FormulaSpec) -> Result<ClogitFit, FitError> {
    formula.validate(d.n_features())?;
    if !d.centered {
        return Err(FitError::NotCentered);
    }
    let views = strata_views(d).map_err(|e| FitError::Data(e.to_string()))?;
    let p = formula.n_terms();
    let term_names = formula.term_names(&d.feature_names);

    // Precompute design rows per record index used.
    let mut design: Vec<f64> = Vec::with_capacity(d.records.len() * p);
    let mut row = Vec::with_capacity(p);
    for rec in &d.records {
        formula.design_row(&rec.covariates, &mut row);
        design.extend_from_slice(&row);
    }
    let design_row = |ri: usize| &design[ri * p..(ri + 1) * p];

    let mut beta = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut info = SymMatrix::zeros(p);

    for iter in 0..=NEWTON_MAX_ITER {
        // Gradient of the log-likelihood and the observed information.
        grad.fill(0.0);
        info.data.fill(0.0);
        let mut loglik = 0.0;
        let mut scores: Vec<f64> = Vec::new();
        let mut mean_x = vec![0.0; p];
        for v in &views {
            scores.clear();
            for &ri in &v.record_idxs {
                let x = design_row(ri);
                let mut s = 0.0;
                for t in 0..p {
                    s += beta[t] * x[t];
                }
                scores.push(s);
            }
            let lse = crate::stats::log_sum_exp(&scores);
            let case_ri = v.record_idxs[v.case_pos];
            loglik += scores[v.case_pos] - lse;

            mean_x.fill(0.0);
            for (i, &ri) in v.record_idxs.iter().enumerate() {
                let w = (scores[i] - lse).exp();
                let x = design_row(ri);
                for t in 0..p {
                    mean_x[t] += w * x[t];
                }
            }
            let xc = design_row(case_ri);
            for t in 0..p {
                grad[t] += xc[t] - mean_x[t];
            }
            // Observed information: per-stratum covariance of the design under
            // the softmax weights: sum_i w_i x x^T - mean mean^T.
            for (i, &ri) in v.record_idxs.iter().enumerate() {
                let w = (scores[i] - lse).exp();
                let x = design_row(ri);
                for a in 0..p {
                    let wxa = w * x[a];
                    let irow = &mut info.data[a * p..(a + 1) * p];
                    for b in a..p {
                        irow[b] += wxa * x[b];
                    }
                }
            }
            for a in 0..p {
                for b in a..p {
                    info.data[a * p + b] -= mean_x[a] * mean_x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info.data[a * p + b] = info.data[b * p + a];
            }
        }

        let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_norm < NEWTON_GRAD_TOL {
            let n_iterations = iter;
            // At a converged optimum a singular information matrix means some
            // direction carries no information (e.g. identical case/control
            // covariates); the estimates are still valid, so fall back to a
            // jittered inverse whose variances blow up along those directions.
            let chol = match Cholesky::factor(&info) {
                Ok(c) => c,
                Err(_) => {
                    let max_diag =
                        (0..p).map(|a| info.at(a, a)).fold(0.0_f64, f64::max);
                    let mut jittered = info.clone();
                    jittered.add_scaled_identity(1e-10 * (1.0 + max_diag));
                    factor_reporting_column(&jittered, &term_names)?
                }
            };
            let cov = chol.inverse();
            let covariance: Vec<Vec<f64>> =
                (0..p).map(|a| (0..p).map(|b| cov.at(a, b)).collect()).collect();
            return Ok(ClogitFit {
                formula: formula.clone(),
                term_names,
                coefficients: beta,
                covariance,
                converged: true,
                n_iterations,
                loglik,
            });
        }
        if iter == NEWTON_MAX_ITER {
            break;
        }

        let chol = factor_reporting_column(&info, &term_names)?;
        let step = chol.solve(&grad);
        for t in 0..p {
            beta[t] += step[t];
        }
        if let Some(col) = beta.iter().position(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(FitError::Separation { column: col, limit: SEPARATION_LIMIT });
        }
    }

    let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    Err(FitError::NotConverged { max_iter: NEWTON_MAX_ITER, grad_norm })
}

fn factor_reporting_column(info: &SymMatrix, names: &[String]) -> Result<Cholesky, FitError> {
    Cholesky::factor(info).map_err(|LinalgError::NotPositiveDefinite { pivot }| {
        FitError::RankDeficient { column: pivot, name: names.get(pivot).cloned().unwrap_or_default() }
    })
}

/// One row of the Wald table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wald statistics per coefficient: SE from the covariance diagonal,
/// two-sided normal p, and a 95% interval at +-1.96 SE.
pub fn wald_inference(fit: &ClogitFit) -> Result<Vec<WaldRow>, FitError> {
    if !fit.converged {
        return Err(FitError::NotConvergedFit);
    }
    Ok(fit
        .coefficients
        .iter()
        .enumerate()
        .map(|(t, &est)| {
            let se = fit.covariance[t][t].max(0.0).sqrt();
            let z = if se > 0.0 { est / se } else { 0.0 };
            let p_value = if se > 0.0 { normal_two_sided_p(z) } else { 1.0 };
            WaldRow {
                term: fit.term_names[t].clone(),
                estimate: est,
                se,
                z,
                p_value,
                ci_low: est - 1.96 * se,
                ci_high: est + 1.96 * se,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{StepRecord, StrataDataset};
    use crate::sim::{simulate_selection, SelectionSpec};

    #[test]
    fn null_dataset_fits_to_zero() {
        // Case covariate equals every control covariate within each stratum:
        // no information, so beta = 0 and loglik = -n log k.
        let mut records = Vec::new();
        for s in 0..20u64 {
            let x = s as f64 / 20.0 - 0.475;
            for c in 0..4 {
                records.push(StepRecord::new(s, c == 0, vec![x]));
            }
        }
        let mut d = StrataDataset::new(records, vec!["x1".into()]);
        d.centered = true;
        let fit = fit_clogit_glm(&d, &FormulaSpec::mains(1)).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.loglik - (-20.0 * 4.0_f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn recovers_simulated_slope_within_three_se() {
        let spec = SelectionSpec::linear(vec![1.0], 2000, 9);
        let d = simulate_selection(&spec, 41).unwrap();
        let fit = fit_clogit_glm(&d, &FormulaSpec::mains(1)).unwrap();
        let wald = wald_inference(&fit).unwrap();
        let est = wald[0].estimate;
        let se = wald[0].se;
        assert!((est - 1.0).abs() < 3.0 * se, "estimate {est} +- {se}");
        assert!(fit.n_iterations < 20);
    }

    #[test]
    fn gradient_at_optimum_is_tiny() {
        let spec = SelectionSpec::linear(vec![0.8, -0.4], 300, 5);
        let d = simulate_selection(&spec, 42).unwrap();
        let f = FormulaSpec::mains(2);
        let fit = fit_clogit_glm(&d, &f).unwrap();
        // Recompute the gradient by hand at the returned optimum.
        let views = crate::data::strata_views(&d).unwrap();
        let mut grad = vec![0.0; 2];
        for v in &views {
            let scores: Vec<f64> = v
                .record_idxs
                .iter()
                .map(|&ri| f.score(&d.records[ri].covariates, &fit.coefficients))
                .collect();
            let lse = crate::stats::log_sum_exp(&scores);
            for t in 0..2 {
                let mut mean = 0.0;
                for (i, &ri) in v.record_idxs.iter().enumerate() {
                    mean += (scores[i] - lse).exp() * d.records[ri].covariates[t];
                }
                grad[t] += d.records[v.record_idxs[v.case_pos]].covariates[t] - mean;
            }
        }
        assert!(grad.iter().all(|g| g.abs() < 1e-8), "gradient {grad:?}");
    }

    #[test]
    fn wald_rows_match_definitions() {
        let fit = ClogitFit {
            formula: FormulaSpec::mains(2),
            term_names: vec!["x1".into(), "x2".into()],
            coefficients: vec![0.0, 1.96],
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            converged: true,
            n_iterations: 3,
            loglik: -10.0,
        };
        let rows = wald_inference(&fit).unwrap();
        assert_eq!(rows[0].z, 0.0);
        assert_eq!(rows[0].p_value, 1.0);
        assert!((rows[1].p_value - 0.05).abs() < 1e-3);
        assert!((rows[1].ci_low - (1.96 - 1.96)).abs() < 1e-12);
        let bad = ClogitFit { converged: false, ..fit };
        assert!(matches!(wald_inference(&bad), Err(FitError::NotConvergedFit)));
    }

    #[test]
    fn duplicated_column_reports_rank_deficiency() {
        let spec = SelectionSpec::linear(vec![0.5], 100, 4);
        let base = simulate_selection(&spec, 43).unwrap();
        // Duplicate the single covariate into a second identical column.
        let records: Vec<StepRecord> = base
            .records
            .iter()
            .map(|r| {
                let mut r2 = r.clone();
                r2.covariates = vec![r.covariates[0], r.covariates[0]];
                r2
            })
            .collect();
        let mut d = StrataDataset::new(records, vec!["x1".into(), "x2".into()]);
        d.centered = true;
        match fit_clogit_glm(&d, &FormulaSpec::mains(2)) {
            Err(FitError::RankDeficient { column, name }) => {
                assert_eq!(column, 1);
                assert_eq!(name, "x2");
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn perfect_separation_is_detected() {
        // The case always has a slightly larger covariate than every control;
        // the tiny gap forces |beta| through the guard before the softmax can
        // saturate the gradient below tolerance.
        let mut records = Vec::new();
        for s in 0..40u64 {
            records.push(StepRecord::new(s, true, vec![0.01]));
            records.push(StepRecord::new(s, false, vec![-0.01]));
            records.push(StepRecord::new(s, false, vec![-0.0101]));
        }
        let mut d = StrataDataset::new(records, vec!["x1".into()]);
        let d = crate::data::center_covariates(&d).unwrap_or_else(|_| {
            d.centered = true;
            d
        });
        match fit_clogit_glm(&d, &FormulaSpec::mains(1)) {
            Err(FitError::Separation { .. }) => {}
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn estimates_invariant_to_record_and_stratum_reordering() {
        let spec = SelectionSpec::linear(vec![0.7, -0.3], 200, 5);
        let d = simulate_selection(&spec, 44).unwrap();
        let f = FormulaSpec::mains(2);
        let fit1 = fit_clogit_glm(&d, &f).unwrap();
        // Reverse records within strata and reverse stratum order.
        let views = crate::data::strata_views(&d).unwrap();
        let mut records = Vec::new();
        for v in views.iter().rev() {
            for &ri in v.record_idxs.iter().rev() {
                records.push(d.records[ri].clone());
            }
        }
        let mut d2 = StrataDataset::new(records, d.feature_names.clone());
        d2.centered = true;
        let fit2 = fit_clogit_glm(&d2, &f).unwrap();
        for t in 0..2 {
            assert!((fit1.coefficients[t] - fit2.coefficients[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn stratum_constant_shift_leaves_coefficients_unchanged() {
        let spec = SelectionSpec::linear(vec![1.1], 150, 4);
        let d = simulate_selection(&spec, 45).unwrap();
        let f = FormulaSpec::mains(1);
        let fit1 = fit_clogit_glm(&d, &f).unwrap();
        // Add a per-stratum constant to the covariate column.
        let mut d2 = d.clone();
        for r in &mut d2.records {
            r.covariates[0] += (r.stratum_id as f64 * 0.37).sin();
        }
        let fit2 = fit_clogit_glm(&d2, &f).unwrap();
        assert!((fit1.coefficients[0] - fit2.coefficients[0]).abs() < 1e-6);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let spec = SelectionSpec::linear(vec![0.5, 0.2, -0.4], 300, 5);
        let d = simulate_selection(&spec, 46).unwrap();
        let fit = fit_clogit_glm(&d, &FormulaSpec::full_pairwise(3)).unwrap();
        let p = fit.coefficients.len();
        let mut m = SymMatrix::zeros(p);
        for a in 0..p {
            for b in 0..p {
                *m.at_mut(a, b) = fit.covariance[a][b];
            }
        }
        // PSD check: Cholesky after a tiny jitter succeeds.
        m.add_scaled_identity(1e-12);
        assert!(Cholesky::factor(&m).is_ok());
        // Diagonal nonnegative.
        for a in 0..p {
            assert!(fit.covariance[a][a] >= 0.0);
        }
    }

    #[test]
    fn formula_validation_rejects_bad_specs() {
        assert!(FormulaSpec { main_effects: vec![0, 0], interactions: vec![] }.validate(2).is_err());
        assert!(FormulaSpec { main_effects: vec![2], interactions: vec![] }.validate(2).is_err());
        assert!(FormulaSpec { main_effects: vec![0], interactions: vec![(1, 1)] }.validate(2).is_err());
        assert!(FormulaSpec { main_effects: vec![0], interactions: vec![(0, 1), (1, 0)] }
            .validate(2)
            .is_err());
        assert!(FormulaSpec { main_effects: vec![], interactions: vec![] }.validate(2).is_err());
    }

    #[test]
    fn uncentered_data_is_refused() {
        let spec = SelectionSpec::linear(vec![0.5], 50, 3);
        let centered = simulate_selection(&spec, 47).unwrap();
        let d = crate::data::invert_centering(&centered).unwrap();
        assert!(matches!(fit_clogit_glm(&d, &FormulaSpec::mains(1)), Err(FitError::NotCentered)));
    }
}
