//! Penalized B-spline conditional logit for one nonlinear effect.
//!
//! The smoothed feature is expanded in a clamped cubic B-spline basis with
//! interior knots at quantiles. The conditional-logit likelihood is maximized
//! with a ridge penalty on second-order *divided* differences of the basis
//! coefficients (plain second differences generalized to the non-uniform
//! Greville abscissae), so the penalty's null space is exactly the functions
//! affine in x and the infinite-penalty limit is an affine fit. The penalty
//! weight is chosen by stratum-level K-fold cross-validation over a log grid.
//!
//! A conditional-logit score is only identified up to an additive constant
//! (the basis sums to one, so shifting all coefficients equally is invisible
//! to the likelihood); a tiny ridge pins that direction and fitted curves are
//! compared mean-centered.

use serde::{Deserialize, Serialize};

use super::FitError;
use crate::data::{strata_views, StrataDataset, StratumView};
use crate::linalg::{Cholesky, SymMatrix};
use crate::rng::stream;
use crate::stats::log_sum_exp;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineSettings {
    pub n_interior_knots: usize,
    pub degree: usize,
    /// Candidate ridge weights; a single entry skips cross-validation.
    pub penalty_grid: Vec<f64>,
    pub cv_folds: usize,
    pub cv_seed: u64,
}

impl Default for SplineSettings {
    fn default() -> Self {
        SplineSettings {
            n_interior_knots: 20,
            degree: 3,
            penalty_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            cv_folds: 5,
            cv_seed: 0,
        }
    }
}

/// Fitted basis expansion for one smoothed feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub feature: usize,
    pub feature_name: String,
    /// Full clamped knot vector (boundary knots repeated degree+1 times).
    pub knots: Vec<f64>,
    pub basis_degree: usize,
    pub coefficients: Vec<f64>,
    pub penalty: f64,
    pub loglik: f64,
}

// --- B-spline basis ---------------------------------------------------------

pub(crate) fn n_basis(knots: &[f64], degree: usize) -> usize {
    knots.len() - degree - 1
}

fn find_span(knots: &[f64], degree: usize, x: f64) -> usize {
    let n = n_basis(knots, degree) - 1; // last basis index
    if x >= knots[n + 1] {
        return n;
    }
    let mut lo = degree;
    let mut hi = n + 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Nonzero basis values at `x`: returns (first_active_index, values).
pub(crate) fn basis_at(knots: &[f64], degree: usize, x: f64) -> (usize, Vec<f64>) {
    let span = find_span(knots, degree, x);
    let mut vals = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    vals[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    (span - degree, vals)
}

/// Greville abscissae: the knot averages each coefficient acts at.
fn greville(knots: &[f64], degree: usize) -> Vec<f64> {
    (0..n_basis(knots, degree))
        .map(|j| knots[j + 1..j + 1 + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

/// Builds the clamped knot vector with interior knots at quantiles.
fn quantile_knots(values: &mut Vec<f64>, n_interior: usize, degree: usize) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = values[0];
    let hi = values[values.len() - 1];
    let mut knots = vec![lo; degree + 1];
    for k in 1..=n_interior {
        let q = k as f64 / (n_interior + 1) as f64;
        let pos = q * (values.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let v = if i + 1 < values.len() { values[i] * (1.0 - frac) + values[i + 1] * frac } else { values[i] };
        knots.push(v);
    }
    knots.extend(std::iter::repeat(hi).take(degree + 1));
    knots
}

/// Second-order divided-difference penalty D^T D over Greville abscissae.
fn divided_difference_penalty(grev: &[f64]) -> SymMatrix {
    let p = grev.len();
    let mut dtd = SymMatrix::zeros(p);
    for j in 0..p.saturating_sub(2) {
        let h1 = grev[j + 1] - grev[j];
        let h2 = grev[j + 2] - grev[j + 1];
        // Row of D: d_j = (c_{j+2}-c_{j+1})/h2 - (c_{j+1}-c_j)/h1.
        let w = [1.0 / h1, -(1.0 / h1 + 1.0 / h2), 1.0 / h2];
        for a in 0..3 {
            for b in 0..3 {
                *dtd.at_mut(j + a, j + b) += w[a] * w[b];
            }
        }
    }
    dtd
}

// --- penalized Newton --------------------------------------------------------

/// Ridge pinning the likelihood's unidentified constant direction.
const CONSTANT_PIN: f64 = 1e-8;
const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;

struct SplineProblem {
    /// Dense design, row-major: records x n_basis.
    design: Vec<f64>,
    p: usize,
}

impl SplineProblem {
    fn row(&self, ri: usize) -> &[f64] {
        &self.design[ri * self.p..(ri + 1) * self.p]
    }
}

fn penalized_objective(
    prob: &SplineProblem,
    views: &[&StratumView],
    penalty: &SymMatrix,
    coef: &[f64],
) -> (f64, f64) {
    // Returns (loglik, penalized objective = -loglik + c^T P c).
    let p = prob.p;
    let mut loglik = 0.0;
    let mut scores = Vec::new();
    for v in views {
        scores.clear();
        for &ri in &v.record_idxs {
            let x = prob.row(ri);
            let mut s = 0.0;
            for t in 0..p {
                s += coef[t] * x[t];
            }
            scores.push(s);
        }
        loglik += scores[v.case_pos] - log_sum_exp(&scores);
    }
    let mut quad = 0.0;
    for a in 0..p {
        for b in 0..p {
            quad += coef[a] * penalty.at(a, b) * coef[b];
        }
    }
    (loglik, -loglik + quad)
}

fn fit_penalized(
    prob: &SplineProblem,
    views: &[&StratumView],
    penalty: &SymMatrix,
) -> Result<(Vec<f64>, f64), FitError> {
    let p = prob.p;
    let mut coef = vec![0.0; p];
    let (_, mut obj) = penalized_objective(prob, views, penalty, &coef);
    let mut grad = vec![0.0; p];
    let mut hess = SymMatrix::zeros(p);
    let mut scores: Vec<f64> = Vec::new();
    let mut mean_x = vec![0.0; p];

    for _ in 0..MAX_ITER {
        grad.fill(0.0);
        hess.data.fill(0.0);
        for v in views {
            scores.clear();
            for &ri in &v.record_idxs {
                let x = prob.row(ri);
                let mut s = 0.0;
                for t in 0..p {
                    s += coef[t] * x[t];
                }
                scores.push(s);
            }
            let lse = log_sum_exp(&scores);
            mean_x.fill(0.0);
            for (i, &ri) in v.record_idxs.iter().enumerate() {
                let w = (scores[i] - lse).exp();
                let x = prob.row(ri);
                for t in 0..p {
                    mean_x[t] += w * x[t];
                }
            }
            let xc = prob.row(v.record_idxs[v.case_pos]);
            for t in 0..p {
                grad[t] += xc[t] - mean_x[t];
            }
            for (i, &ri) in v.record_idxs.iter().enumerate() {
                let w = (scores[i] - lse).exp();
                let x = prob.row(ri);
                for a in 0..p {
                    let wxa = w * x[a];
                    if wxa == 0.0 {
                        continue;
                    }
                    let hrow = &mut hess.data[a * p..(a + 1) * p];
                    for b in a..p {
                        hrow[b] += wxa * x[b];
                    }
                }
            }
            for a in 0..p {
                for b in a..p {
                    hess.data[a * p + b] -= mean_x[a] * mean_x[b];
                }
            }
        }
        // Penalized gradient (descent direction on -loglik + quad) and Hessian.
        for a in 0..p {
            for b in 0..p {
                grad[a] -= 2.0 * penalty.at(a, b) * coef[b];
            }
        }
        for a in 0..p {
            for b in a..p {
                hess.data[a * p + b] += 2.0 * penalty.at(a, b);
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess.data[a * p + b] = hess.data[b * p + a];
            }
        }

        let gnorm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gnorm < GRAD_TOL {
            break;
        }
        let chol = Cholesky::factor(&hess)
            .map_err(|e| FitError::Spline(format!("penalized Hessian not positive definite: {e}")))?;
        let step = chol.solve(&grad);
        // Step halving keeps the objective decreasing.
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c + t * s).collect();
            let (_, trial_obj) = penalized_objective(prob, views, penalty, &trial);
            if trial_obj.is_finite() && trial_obj <= obj + 1e-12 {
                coef = trial;
                obj = trial_obj;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (loglik, _) = penalized_objective(prob, views, penalty, &coef);
    Ok((coef, loglik))
}

fn held_out_nll(prob: &SplineProblem, views: &[&StratumView], coef: &[f64]) -> f64 {
    let p = prob.p;
    let mut total = 0.0;
    let mut scores = Vec::new();
    for v in views {
        scores.clear();
        for &ri in &v.record_idxs {
            let x = prob.row(ri);
            let mut s = 0.0;
            for t in 0..p {
                s += coef[t] * x[t];
            }
            scores.push(s);
        }
        total += log_sum_exp(&scores) - scores[v.case_pos];
    }
    total / views.len().max(1) as f64
}

/// Fits the smoothed conditional logit for one feature.
pub fn fit_clogit_spline(
    d: &StrataDataset,
    feature: usize,
    settings: &SplineSettings,
) -> Result<SplineFit, FitError> {
    if feature >= d.n_features() {
        return Err(FitError::Spline(format!("feature index {feature} out of range")));
    }
    if settings.degree < 1 {
        return Err(FitError::Spline("degree must be >= 1".into()));
    }
    if settings.penalty_grid.is_empty() || settings.penalty_grid.iter().any(|&l| !(l >= 0.0)) {
        return Err(FitError::Spline("penalty grid must be non-empty and nonnegative".into()));
    }
    let views = strata_views(d).map_err(|e| FitError::Data(e.to_string()))?;

    let mut values = d.column(feature);
    let mut distinct = values.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < settings.n_interior_knots + 2 {
        return Err(FitError::Spline(format!(
            "feature has {} distinct values; need at least {} for {} interior knots",
            distinct.len(),
            settings.n_interior_knots + 2,
            settings.n_interior_knots
        )));
    }
    let knots = quantile_knots(&mut values, settings.n_interior_knots, settings.degree);
    let p = n_basis(&knots, settings.degree);

    // Dense design of basis values.
    let mut design = vec![0.0; d.records.len() * p];
    for (ri, rec) in d.records.iter().enumerate() {
        let (first, vals) = basis_at(&knots, settings.degree, rec.covariates[feature]);
        for (o, v) in vals.iter().enumerate() {
            design[ri * p + first + o] = *v;
        }
    }
    let prob = SplineProblem { design, p };

    let grev = greville(&knots, settings.degree);
    let dtd = divided_difference_penalty(&grev);
    let penalty_matrix = |lambda: f64| -> SymMatrix {
        let mut m = SymMatrix::zeros(p);
        for a in 0..p {
            for b in 0..p {
                *m.at_mut(a, b) = lambda * dtd.at(a, b);
            }
        }
        m.add_scaled_identity(CONSTANT_PIN);
        m
    };

    let all_views: Vec<&StratumView> = views.iter().collect();
    let best_lambda = if settings.penalty_grid.len() == 1 {
        settings.penalty_grid[0]
    } else {
        if settings.cv_folds < 2 {
            return Err(FitError::Spline("cross-validation needs at least 2 folds".into()));
        }
        // Stratum-level folds from a seeded shuffle.
        let mut order: Vec<usize> = (0..views.len()).collect();
        order.shuffle(&mut stream(settings.cv_seed, &[0x51]));
        let folds = settings.cv_folds.min(views.len());
        let mut best = (f64::INFINITY, settings.penalty_grid[0]);
        for &lambda in &settings.penalty_grid {
            let pen = penalty_matrix(lambda);
            let mut cv_nll = 0.0;
            for fold in 0..folds {
                let train: Vec<&StratumView> = order
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % folds != fold)
                    .map(|(_, &vi)| &views[vi])
                    .collect();
                let held: Vec<&StratumView> = order
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % folds == fold)
                    .map(|(_, &vi)| &views[vi])
                    .collect();
                let (coef, _) = fit_penalized(&prob, &train, &pen)?;
                cv_nll += held_out_nll(&prob, &held, &coef) * held.len() as f64;
            }
            if cv_nll < best.0 {
                best = (cv_nll, lambda);
            }
        }
        best.1
    };

    let pen = penalty_matrix(best_lambda);
    let (coef, loglik) = fit_penalized(&prob, &all_views, &pen)?;
    Ok(SplineFit {
        feature,
        feature_name: d.feature_names[feature].clone(),
        knots,
        basis_degree: settings.degree,
        coefficients: coef,
        penalty: best_lambda,
        loglik,
    })
}

impl SplineFit {
    /// Raw (uncentered) basis expansion at one point; errors outside the knot range.
    pub fn eval(&self, x: f64) -> Result<f64, FitError> {
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        if x < lo || x > hi {
            return Err(FitError::Spline(format!("x = {x} outside the fitted range [{lo}, {hi}]")));
        }
        let (first, vals) = basis_at(&self.knots, self.basis_degree, x);
        Ok(vals.iter().enumerate().map(|(o, v)| v * self.coefficients[first + o]).sum())
    }

    /// Expansion clamped to the knot range; used where perturbed inputs may
    /// step slightly outside the data (effect extraction, never plotting).
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let xc = x.clamp(lo, hi);
        let (first, vals) = basis_at(&self.knots, self.basis_degree, xc);
        vals.iter().enumerate().map(|(o, v)| v * self.coefficients[first + o]).sum()
    }
}

/// Evaluates the fitted curve on a grid, mean-centered over the grid
/// (conditional-logit curves are identified only up to a constant).
pub fn spline_curve(fit: &SplineFit, grid: &[f64]) -> Result<Vec<f64>, FitError> {
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        out.push(fit.eval(x)?);
    }
    let mean = crate::stats::mean(&out);
    for v in &mut out {
        *v -= mean;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_selection, SelectionSpec, Transform};

    fn grid_between(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn percentile(sorted: &[f64], q: f64) -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < sorted.len() { sorted[i] * (1.0 - frac) + sorted[i + 1] * frac } else { sorted[i] }
    }

    #[test]
    fn basis_partitions_unity_and_reproduces_linear() {
        let mut vals: Vec<f64> = (0..200).map(|i| (i as f64 * 0.731).sin() * 0.5).collect();
        let knots = quantile_knots(&mut vals, 10, 3);
        let grev = greville(&knots, 3);
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        for x in grid_between(lo, hi, 57) {
            let (first, b) = basis_at(&knots, 3, x);
            let sum: f64 = b.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "partition of unity at {x}: {sum}");
            // Linear reproduction through Greville abscissae.
            let lin: f64 = b.iter().enumerate().map(|(o, v)| v * grev[first + o]).sum();
            assert!((lin - x).abs() < 1e-10, "linear reproduction at {x}: {lin}");
        }
    }

    #[test]
    fn linear_truth_is_recovered_as_a_line() {
        let spec = SelectionSpec::linear(vec![1.0], 1500, 9);
        let d = simulate_selection(&spec, 51).unwrap();
        let fit = fit_clogit_spline(&d, 0, &SplineSettings::default()).unwrap();
        let mut xs = d.column(0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid = grid_between(percentile(&xs, 0.05), percentile(&xs, 0.95), 100);
        let curve = spline_curve(&fit, &grid).unwrap();
        // Oracle: the centered line x - mean(grid).
        let gmean = crate::stats::mean(&grid);
        for (x, y) in grid.iter().zip(&curve) {
            assert!((y - (x - gmean)).abs() < 0.15, "at {x}: {y} vs {}", x - gmean);
        }
    }

    #[test]
    fn hump_truth_mse_is_small_relative_to_truth_variance() {
        let spec = SelectionSpec {
            nonlinear_transforms: vec![(0, Transform::Hump)],
            ..SelectionSpec::linear(vec![1.0], 2000, 9)
        };
        let d = simulate_selection(&spec, 52).unwrap();
        let fit = fit_clogit_spline(&d, 0, &SplineSettings::default()).unwrap();
        let mut xs = d.column(0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid = grid_between(percentile(&xs, 0.05), percentile(&xs, 0.95), 100);
        let curve = spline_curve(&fit, &grid).unwrap();
        let truth_raw: Vec<f64> = grid.iter().map(|&x| Transform::Hump.eval(x)).collect();
        let tmean = crate::stats::mean(&truth_raw);
        let truth: Vec<f64> = truth_raw.iter().map(|t| t - tmean).collect();
        let mse = crate::stats::mean(
            &curve.iter().zip(&truth).map(|(c, t)| (c - t) * (c - t)).collect::<Vec<_>>(),
        );
        let tvar = crate::stats::population_variance(&truth);
        assert!(mse < 0.25 * tvar, "mse {mse} vs truth variance {tvar}");
    }

    #[test]
    fn infinite_penalty_limit_is_affine() {
        let spec = SelectionSpec {
            nonlinear_transforms: vec![(0, Transform::Hump)],
            ..SelectionSpec::linear(vec![1.0], 500, 6)
        };
        let d = simulate_selection(&spec, 53).unwrap();
        let settings = SplineSettings { penalty_grid: vec![1e9], ..SplineSettings::default() };
        let fit = fit_clogit_spline(&d, 0, &settings).unwrap();
        let mut xs = d.column(0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid = grid_between(xs[0], xs[xs.len() - 1], 50);
        let curve = spline_curve(&fit, &grid).unwrap();
        // Affine curve: vanishing second differences on a uniform grid.
        for w in curve.windows(3) {
            let dd = w[2] - 2.0 * w[1] + w[0];
            assert!(dd.abs() < 1e-4, "second difference {dd}");
        }
    }

    #[test]
    fn single_entry_grid_matches_direct_penalty_fit() {
        let spec = SelectionSpec::linear(vec![0.7], 300, 5);
        let d = simulate_selection(&spec, 54).unwrap();
        let s1 = SplineSettings { penalty_grid: vec![0.1], ..SplineSettings::default() };
        let a = fit_clogit_spline(&d, 0, &s1).unwrap();
        let s2 = SplineSettings { penalty_grid: vec![0.1], cv_folds: 3, cv_seed: 99, ..SplineSettings::default() };
        let b = fit_clogit_spline(&d, 0, &s2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_coefficients_give_zero_curve() {
        let spec = SelectionSpec::linear(vec![0.5], 200, 4);
        let d = simulate_selection(&spec, 55).unwrap();
        let mut fit = fit_clogit_spline(&d, 0, &SplineSettings::default()).unwrap();
        for c in &mut fit.coefficients {
            *c = 0.0;
        }
        let grid = grid_between(fit.knots[0], *fit.knots.last().unwrap(), 20);
        let curve = spline_curve(&fit, &grid).unwrap();
        assert!(curve.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn constructed_parabola_coefficients_reproduce_centered_parabola() {
        // Cubic splines reproduce quadratics exactly; build the coefficients
        // by least squares against x^2 (an interpolation oracle) and check the
        // curve equals the centered parabola.
        let spec = SelectionSpec::linear(vec![0.5], 300, 4);
        let d = simulate_selection(&spec, 56).unwrap();
        let mut fit = fit_clogit_spline(&d, 0, &SplineSettings::default()).unwrap();
        let p = fit.coefficients.len();
        let lo = fit.knots[0];
        let hi = *fit.knots.last().unwrap();
        let pts = grid_between(lo, hi, 400);
        let mut design = vec![0.0; pts.len() * p];
        let mut target = vec![0.0; pts.len()];
        for (r, &x) in pts.iter().enumerate() {
            let (first, vals) = basis_at(&fit.knots, fit.basis_degree, x);
            for (o, v) in vals.iter().enumerate() {
                design[r * p + first + o] = *v;
            }
            target[r] = x * x;
        }
        fit.coefficients = crate::linalg::least_squares(&design, &target, p).unwrap();
        let grid = grid_between(lo, hi, 41);
        let curve = spline_curve(&fit, &grid).unwrap();
        let want_raw: Vec<f64> = grid.iter().map(|x| x * x).collect();
        let wmean = crate::stats::mean(&want_raw);
        for (got, want) in curve.iter().zip(want_raw.iter().map(|w| w - wmean)) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn extrapolation_is_rejected() {
        let spec = SelectionSpec::linear(vec![0.5], 200, 4);
        let d = simulate_selection(&spec, 57).unwrap();
        let fit = fit_clogit_spline(&d, 0, &SplineSettings::default()).unwrap();
        let beyond = *fit.knots.last().unwrap() + 1.0;
        assert!(spline_curve(&fit, &[beyond]).is_err());
        // Clamped evaluation stays finite for the same point.
        assert!(fit.eval_clamped(beyond).is_finite());
    }

    #[test]
    fn too_few_distinct_values_is_rejected() {
        // Five distinct covariate values cannot support 20 interior knots.
        let mut records = Vec::new();
        for s in 0..50u64 {
            for c in 0..4 {
                let v = ((s as usize + c) % 5) as f64 / 5.0 - 0.4;
                records.push(crate::data::StepRecord::new(s, c == 0, vec![v]));
            }
        }
        let mut d = crate::data::StrataDataset::new(records, vec!["x1".into()]);
        d.centered = true;
        assert!(matches!(
            fit_clogit_spline(&d, 0, &SplineSettings::default()),
            Err(FitError::Spline(_))
        ));
    }
}
