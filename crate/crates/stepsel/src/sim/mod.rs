//! Synthetic strata generation under an exponential selection function.
//!
//! Candidates receive a selection score that is linear in (optionally
//! transformed) covariates plus pairwise interaction terms; the observed step
//! is drawn from the softmax of those scores. Covariates are uniform on (0,1)
//! and pooled-centered before they enter the selection score, and the emitted
//! dataset keeps that centered scale.

mod kernel;
mod social;

pub use kernel::{fit_movement_kernel, sample_candidate_steps, sample_von_mises, MovementKernel};
pub use social::{simulate_social, Arena, SocialSpec};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{StepRecord, StrataDataset};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("selection score is not finite for candidate {candidate}")]
    NonFiniteScore { candidate: usize },
    #[error("need at least {min} observations, got {got}")]
    TooFewObservations { min: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("candidate rejection rate {rate:.4} exceeds 0.99; the arena is too small for the movement kernel")]
    ArenaTooSmall { rate: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Named univariate transforms applied to a covariate before it enters the
/// selection score. These double as registered ground truths for nonlinear
/// recovery experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Bell-shaped preference centered on zero: 2 * exp(-(x / 0.35)^2).
    Hump,
    /// Oscillation with drift: sin(6x) + 0.5x.
    Wiggle,
    /// Pure quadratic, handy for symmetry tests: x^2.
    Square,
}

impl Transform {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Transform::Hump => 2.0 * (-(x / 0.35) * (x / 0.35)).exp(),
            Transform::Wiggle => (6.0 * x).sin() + 0.5 * x,
            Transform::Square => x * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Hump => "hump",
            Transform::Wiggle => "wiggle",
            Transform::Square => "square",
        }
    }

    pub fn by_name(name: &str) -> Option<Transform> {
        match name {
            "hump" => Some(Transform::Hump),
            "wiggle" => Some(Transform::Wiggle),
            "square" => Some(Transform::Square),
            _ => None,
        }
    }
}

/// One pairwise interaction term gamma * x[p] * x[q].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub p: usize,
    pub q: usize,
    pub gamma: f64,
}

/// Per-group coefficient vectors plus the individual-to-group assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupStructure {
    /// One coefficient vector per group.
    pub group_betas: Vec<Vec<f64>>,
    /// Group index for each individual.
    pub individual_group: Vec<usize>,
}

impl GroupStructure {
    pub fn n_groups(&self) -> usize {
        self.group_betas.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.individual_group.len()
    }
}

/// Ground-truth generative model for covariate-only scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSpec {
    pub n_features: usize,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub nonlinear_transforms: Vec<(usize, Transform)>,
    #[serde(default)]
    pub groups: Option<GroupStructure>,
    pub n_controls: usize,
    pub n_strata: usize,
}

impl SelectionSpec {
    /// Plain linear spec with shared coefficients.
    pub fn linear(betas: Vec<f64>, n_strata: usize, n_controls: usize) -> Self {
        SelectionSpec {
            n_features: betas.len(),
            betas,
            interactions: Vec::new(),
            nonlinear_transforms: Vec::new(),
            groups: None,
            n_controls,
            n_strata,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_features == 0 {
            return Err(SimError::InvalidSpec("n_features must be >= 1".into()));
        }
        if self.betas.len() != self.n_features {
            return Err(SimError::InvalidSpec(format!(
                "betas has length {}, expected n_features {}",
                self.betas.len(),
                self.n_features
            )));
        }
        if self.n_controls < 1 {
            return Err(SimError::InvalidSpec("n_controls must be >= 1".into()));
        }
        if self.n_strata < 1 {
            return Err(SimError::InvalidSpec("n_strata must be >= 1".into()));
        }
        for it in &self.interactions {
            if it.p == it.q || it.p >= self.n_features || it.q >= self.n_features {
                return Err(SimError::InvalidSpec(format!(
                    "interaction ({}, {}) out of range or self-paired",
                    it.p, it.q
                )));
            }
        }
        for (j, _) in &self.nonlinear_transforms {
            if *j >= self.n_features {
                return Err(SimError::InvalidSpec(format!("transform feature {j} out of range")));
            }
        }
        if let Some(g) = &self.groups {
            if g.group_betas.is_empty() || g.individual_group.is_empty() {
                return Err(SimError::InvalidSpec("group structure must be non-empty".into()));
            }
            for (gi, b) in g.group_betas.iter().enumerate() {
                if b.len() != self.n_features {
                    return Err(SimError::InvalidSpec(format!(
                        "group {gi} betas has length {}, expected {}",
                        b.len(),
                        self.n_features
                    )));
                }
            }
            if let Some(bad) = g.individual_group.iter().find(|&&grp| grp >= g.group_betas.len()) {
                return Err(SimError::InvalidSpec(format!("individual assigned to unknown group {bad}")));
            }
        }
        Ok(())
    }

    /// Selection score for one candidate row under a given coefficient vector.
    fn score_with(&self, betas: &[f64], covariates: &[f64]) -> f64 {
        let mut transformed: Vec<f64> = covariates.to_vec();
        for (j, t) in &self.nonlinear_transforms {
            transformed[*j] = t.eval(transformed[*j]);
        }
        let mut score = 0.0;
        for (b, x) in betas.iter().zip(&transformed) {
            score += b * x;
        }
        for it in &self.interactions {
            score += it.gamma * transformed[it.p] * transformed[it.q];
        }
        score
    }
}

/// Softmax of per-candidate selection scores, stabilized by max subtraction.
///
/// `candidates` holds one covariate row per candidate (the case slot plus
/// controls), already on the centered scale the spec expects.
pub fn selection_probabilities(
    spec: &SelectionSpec,
    candidates: &[Vec<f64>],
) -> Result<Vec<f64>, SimError> {
    spec.validate()?;
    if candidates.len() != spec.n_controls + 1 {
        return Err(SimError::InvalidSpec(format!(
            "expected {} candidate rows, got {}",
            spec.n_controls + 1,
            candidates.len()
        )));
    }
    let scores: Vec<f64> = candidates.iter().map(|row| spec.score_with(&spec.betas, row)).collect();
    softmax_checked(&scores)
}

fn softmax_checked(scores: &[f64]) -> Result<Vec<f64>, SimError> {
    if let Some(candidate) = scores.iter().position(|s| !s.is_finite()) {
        return Err(SimError::NonFiniteScore { candidate });
    }
    Ok(crate::stats::softmax(scores))
}

/// Inverse-CDF draw from a probability vector; ties are measure-zero and go
/// to the first index reaching the threshold.
pub(crate) fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Generates a full strata dataset from a selection spec.
///
/// Covariates are drawn uniform on (0,1) for every candidate, pooled-centered,
/// scored, and the case is drawn from the per-stratum softmax. With a group
/// structure present, each stratum belongs to one individual (round-robin)
/// and is scored with that individual's group coefficients.
pub fn simulate_selection(spec: &SelectionSpec, rng_seed: u64) -> Result<StrataDataset, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let k = spec.n_controls + 1;
    let total = spec.n_strata * k;

    let mut covariates: Vec<Vec<f64>> = Vec::with_capacity(total);
    for _ in 0..total {
        covariates.push((0..spec.n_features).map(|_| rng.gen_range(0.0..1.0)).collect());
    }
    // Pooled centering before the covariates enter the selection score.
    let mut means = vec![0.0; spec.n_features];
    for row in &covariates {
        for (j, v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for m in &mut means {
        *m /= total as f64;
    }
    for row in &mut covariates {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= means[j];
        }
    }

    let mut records = Vec::with_capacity(total);
    for s in 0..spec.n_strata {
        let individual = spec.groups.as_ref().map(|g| s % g.n_individuals());
        let betas: &[f64] = match (&spec.groups, individual) {
            (Some(g), Some(ind)) => &g.group_betas[g.individual_group[ind]],
            _ => &spec.betas,
        };
        let rows = &covariates[s * k..(s + 1) * k];
        let scores: Vec<f64> = rows.iter().map(|row| spec.score_with(betas, row)).collect();
        let probs = softmax_checked(&scores)?;
        let case = draw_index(&probs, rng.gen_range(0.0..1.0));
        for (i, row) in rows.iter().enumerate() {
            let mut rec = StepRecord::new(s as u64, i == case, row.clone());
            rec.individual_id = individual;
            records.push(rec);
        }
    }

    let names = (1..=spec.n_features).map(|j| format!("x{j}")).collect();
    let mut d = StrataDataset::new(records, names);
    d.centered = true;
    d.center_offsets = Some(means);
    if let Some(g) = &spec.groups {
        d.n_individuals = g.n_individuals();
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_dataset;

    #[test]
    fn zero_betas_give_uniform_probabilities() {
        let spec = SelectionSpec::linear(vec![0.0, 0.0], 1, 3);
        let rows = vec![vec![0.3, -0.1], vec![0.9, 0.2], vec![-0.5, 0.0], vec![0.1, 0.1]];
        let p = selection_probabilities(&spec, &rows).unwrap();
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn single_beta_matches_hand_softmax() {
        let spec = SelectionSpec::linear(vec![1.0], 1, 1);
        let p = selection_probabilities(&spec, &[vec![0.5], vec![-0.5]]).unwrap();
        // e^{0.5} / (e^{0.5} + e^{-0.5})
        assert!((p[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((p[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn interaction_term_matches_hand_softmax() {
        let spec = SelectionSpec {
            n_features: 2,
            betas: vec![0.0, 0.0],
            interactions: vec![Interaction { p: 0, q: 1, gamma: 1.0 }],
            nonlinear_transforms: Vec::new(),
            groups: None,
            n_controls: 1,
            n_strata: 1,
        };
        let p = selection_probabilities(&spec, &[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let e = std::f64::consts::E;
        let want0 = e / (e + 1.0 / e);
        assert!((p[0] - want0).abs() < 1e-12, "{} vs {}", p[0], want0);
        assert!((p[0] - 0.8808).abs() < 1e-4);
        assert!((p[1] - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn probabilities_sum_to_one_and_stay_positive_under_extreme_scores() {
        // Score gap of 200 overflows a naive exp; max subtraction keeps every
        // probability strictly positive and the total at one.
        let spec = SelectionSpec::linear(vec![100.0], 1, 2);
        let p = selection_probabilities(&spec, &[vec![1.0], vec![0.0], vec![-1.0]]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn non_finite_covariate_is_signalled() {
        let spec = SelectionSpec::linear(vec![1.0], 1, 1);
        let err = selection_probabilities(&spec, &[vec![f64::NAN], vec![0.0]]).unwrap_err();
        assert!(matches!(err, SimError::NonFiniteScore { candidate: 0 }));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let spec = SelectionSpec::linear(vec![1.3], 1, 2);
        let base = selection_probabilities(&spec, &[vec![0.2], vec![-0.4], vec![0.1]]).unwrap();
        // Adding a constant to every candidate's score must not move probabilities;
        // with one feature, shifting the covariate by c shifts each score by beta*c.
        let shifted = selection_probabilities(&spec, &[vec![5.2], vec![4.6], vec![5.1]]).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_betas_preserves_argmax() {
        let rows = vec![vec![0.4, -0.2], vec![-0.1, 0.3], vec![0.2, 0.2]];
        let spec1 = SelectionSpec::linear(vec![1.0, 0.7], 1, 2);
        let spec3 = SelectionSpec::linear(vec![3.0, 2.1], 1, 2);
        let p1 = selection_probabilities(&spec1, &rows).unwrap();
        let p3 = selection_probabilities(&spec3, &rows).unwrap();
        let argmax = |p: &[f64]| {
            p.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        assert_eq!(argmax(&p1), argmax(&p3));
    }

    #[test]
    fn zero_effect_case_position_is_uniform() {
        let spec = SelectionSpec::linear(vec![0.0], 2000, 9);
        let d = simulate_selection(&spec, 7).unwrap();
        let views = crate::data::strata_views(&d).unwrap();
        let frac_first =
            views.iter().filter(|v| v.case_pos == 0).count() as f64 / views.len() as f64;
        assert!((frac_first - 0.1).abs() < 0.02, "fraction at first candidate {frac_first}");
    }

    #[test]
    fn positive_beta_selects_larger_covariates() {
        let spec = SelectionSpec::linear(vec![2.0], 1000, 9);
        let d = simulate_selection(&spec, 11).unwrap();
        let (mut case_sum, mut case_n, mut ctrl_sum, mut ctrl_n) = (0.0, 0usize, 0.0, 0usize);
        for r in &d.records {
            if r.is_case {
                case_sum += r.covariates[0];
                case_n += 1;
            } else {
                ctrl_sum += r.covariates[0];
                ctrl_n += 1;
            }
        }
        assert!(case_sum / case_n as f64 > ctrl_sum / ctrl_n as f64);
    }

    #[test]
    fn simulation_is_bit_reproducible_and_valid() {
        let spec = SelectionSpec::linear(vec![1.0, -0.5], 50, 4);
        let a = simulate_selection(&spec, 99).unwrap();
        let b = simulate_selection(&spec, 99).unwrap();
        assert_eq!(a, b);
        assert!(validate_dataset(&a).ok);
        assert!(a.centered);
        // Pooled column means are zero after centering.
        for j in 0..2 {
            let col = a.column(j);
            assert!(crate::stats::mean(&col).abs() < 1e-12);
        }
    }

    #[test]
    fn grouped_spec_stamps_individuals() {
        let spec = SelectionSpec {
            n_features: 1,
            betas: vec![0.0],
            interactions: Vec::new(),
            nonlinear_transforms: Vec::new(),
            groups: Some(GroupStructure {
                group_betas: vec![vec![2.0], vec![-2.0]],
                individual_group: vec![0, 0, 1, 1],
            }),
            n_controls: 3,
            n_strata: 40,
        };
        let d = simulate_selection(&spec, 5).unwrap();
        assert_eq!(d.n_individuals, 4);
        for (s, view) in crate::data::strata_views(&d).unwrap().iter().enumerate() {
            for &ri in &view.record_idxs {
                assert_eq!(d.records[ri].individual_id, Some(s % 4));
            }
        }
    }

    #[test]
    fn empirical_frequencies_converge_to_probabilities() {
        // Replay a fixed stratum many times; empirical case frequencies must
        // approach the computed probabilities.
        let spec = SelectionSpec::linear(vec![1.5], 1, 3);
        let rows = vec![vec![0.4], vec![-0.2], vec![0.0], vec![0.3]];
        let p = selection_probabilities(&spec, &rows).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[draw_index(&p, rng.gen_range(0.0..1.0))] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let emp = *c as f64 / n as f64;
            assert!((emp - p[i]).abs() < 0.01, "candidate {i}: {emp} vs {}", p[i]);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SelectionSpec::linear(vec![1.0], 10, 3);
        spec.interactions.push(Interaction { p: 0, q: 0, gamma: 1.0 });
        assert!(matches!(spec.validate(), Err(SimError::InvalidSpec(_))));
        let spec = SelectionSpec::linear(vec![1.0], 0, 3);
        assert!(spec.validate().is_err());
        let mut spec = SelectionSpec::linear(vec![1.0], 10, 3);
        spec.betas = vec![1.0, 2.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn transform_shapes_are_as_registered() {
        assert!((Transform::Hump.eval(0.0) - 2.0).abs() < 1e-15);
        assert!(Transform::Hump.eval(0.5) < Transform::Hump.eval(0.1));
        assert!((Transform::Wiggle.eval(0.0)).abs() < 1e-15);
        assert_eq!(Transform::by_name("hump"), Some(Transform::Hump));
        assert_eq!(Transform::by_name("nope"), None);
    }
}
