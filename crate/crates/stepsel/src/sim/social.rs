//! Trajectory simulation with opponent-dependent selection.
//!
//! All individuals move stepwise in a shared arena. At each focal decision the
//! nearest other individual is the opponent; candidate positions come from the
//! movement kernel and the single covariate is the distance from the candidate
//! to that opponent. The selection coefficient on distance is determined by
//! the opponent's group (attract < 0, neutral = 0, repel > 0).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{sample_step, wrap_angle, MovementKernel};
use super::{draw_index, SimError};
use crate::data::{StepRecord, StrataDataset};

/// Axis-aligned bounding box individuals must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Arena {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.min_x && p.0 <= self.max_x && p.1 >= self.min_y && p.1 <= self.max_y
    }
}

/// Ground-truth generative model for the opponent scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocialSpec {
    pub n_groups: usize,
    pub individuals_per_group: usize,
    /// One distance coefficient per opponent group.
    pub group_distance_effect: Vec<f64>,
    pub arena: Arena,
    pub kernel: MovementKernel,
    /// Decisions simulated per individual.
    pub n_steps: usize,
    pub n_controls: usize,
}

impl SocialSpec {
    pub fn n_individuals(&self) -> usize {
        self.n_groups * self.individuals_per_group
    }

    /// Group of an individual: individuals are numbered group-major.
    pub fn group_of(&self, individual: usize) -> usize {
        individual / self.individuals_per_group
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_groups < 1 || self.individuals_per_group < 1 {
            return Err(SimError::InvalidSpec("need at least one group and one individual per group".into()));
        }
        if self.n_individuals() < 2 {
            return Err(SimError::InvalidSpec("need at least two individuals so an opponent exists".into()));
        }
        if self.group_distance_effect.len() != self.n_groups {
            return Err(SimError::InvalidSpec(format!(
                "group_distance_effect has length {}, expected {}",
                self.group_distance_effect.len(),
                self.n_groups
            )));
        }
        if !(self.arena.max_x > self.arena.min_x && self.arena.max_y > self.arena.min_y) {
            return Err(SimError::InvalidSpec("arena has non-positive extent".into()));
        }
        self.kernel.validate()?;
        if self.n_steps < 1 {
            return Err(SimError::InvalidSpec("n_steps must be >= 1".into()));
        }
        if self.n_controls < 1 {
            return Err(SimError::InvalidSpec("n_controls must be >= 1".into()));
        }
        Ok(())
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

const MAX_DRAW_ATTEMPTS: usize = 1000;

/// Simulates every individual stepwise and emits the pooled strata dataset.
///
/// The covariate column `dist_opp` is pooled-centered after generation;
/// selection itself sees raw distances, which is equivalent because centering
/// shifts every candidate in a stratum by the same amount.
pub fn simulate_social(spec: &SocialSpec, rng_seed: u64) -> Result<StrataDataset, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n_ind = spec.n_individuals();
    let k = spec.n_controls + 1;

    let mut positions: Vec<(f64, f64)> = (0..n_ind)
        .map(|_| {
            (
                rng.gen_range(spec.arena.min_x..spec.arena.max_x),
                rng.gen_range(spec.arena.min_y..spec.arena.max_y),
            )
        })
        .collect();
    let mut headings: Vec<f64> = (0..n_ind)
        .map(|_| wrap_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) + f64::EPSILON))
        .collect();

    let mut records = Vec::with_capacity(n_ind * spec.n_steps * k);
    let mut stratum: u64 = 0;
    let mut attempts_total: u64 = 0;
    let mut accepted_total: u64 = 0;

    for _ in 0..spec.n_steps {
        for focal in 0..n_ind {
            // Nearest other individual acts as the opponent.
            let mut opponent = usize::MAX;
            let mut best = f64::INFINITY;
            for j in 0..n_ind {
                if j == focal {
                    continue;
                }
                let d = dist(positions[focal], positions[j]);
                if d < best {
                    best = d;
                    opponent = j;
                }
            }
            let beta = spec.group_distance_effect[spec.group_of(opponent)];

            // Candidate positions: kernel draws rejection-sampled into the arena.
            let mut cand_pos = Vec::with_capacity(k);
            let mut cand_len = Vec::with_capacity(k);
            let mut cand_turn = Vec::with_capacity(k);
            let mut cand_bearing = Vec::with_capacity(k);
            for _ in 0..k {
                let mut placed = false;
                for _ in 0..MAX_DRAW_ATTEMPTS {
                    attempts_total += 1;
                    let (len, turn) = sample_step(&mut rng, &spec.kernel);
                    let bearing = headings[focal] + turn;
                    let p = (
                        positions[focal].0 + len * bearing.cos(),
                        positions[focal].1 + len * bearing.sin(),
                    );
                    if spec.arena.contains(p) {
                        accepted_total += 1;
                        cand_pos.push(p);
                        cand_len.push(len);
                        cand_turn.push(turn);
                        cand_bearing.push(bearing);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    let rate = 1.0 - accepted_total as f64 / attempts_total.max(1) as f64;
                    return Err(SimError::ArenaTooSmall { rate });
                }
            }

            let distances: Vec<f64> = cand_pos.iter().map(|&p| dist(p, positions[opponent])).collect();
            let scores: Vec<f64> = distances.iter().map(|d| beta * d).collect();
            if let Some(candidate) = scores.iter().position(|s| !s.is_finite()) {
                return Err(SimError::NonFiniteScore { candidate });
            }
            let probs = crate::stats::softmax(&scores);
            let case = draw_index(&probs, rng.gen_range(0.0..1.0));

            for i in 0..k {
                let mut rec = StepRecord::new(stratum, i == case, vec![distances[i]]);
                rec.individual_id = Some(focal);
                rec.opponent_id = Some(opponent);
                rec.step_length = Some(cand_len[i]);
                rec.turning_angle = Some(wrap_angle(cand_turn[i]));
                records.push(rec);
            }
            positions[focal] = cand_pos[case];
            headings[focal] = wrap_angle(cand_bearing[case]);
            stratum += 1;
        }
    }

    // Pooled centering of the distance covariate.
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.covariates[0]).sum::<f64>() / n;
    for r in &mut records {
        r.covariates[0] -= mean;
    }

    let mut d = StrataDataset::new(records, vec!["dist_opp".to_string()]);
    d.centered = true;
    d.center_offsets = Some(vec![mean]);
    d.n_individuals = n_ind;
    d.n_opponents = n_ind;
    Ok(d)
}
