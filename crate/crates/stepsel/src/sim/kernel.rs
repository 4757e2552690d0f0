//! Movement kernel: gamma step lengths and von Mises turning angles.
//!
//! Fitting uses maximum likelihood for the gamma pair (Newton on the shape
//! with digamma/trigamma, closed-form rate) and the circular mean plus the
//! usual A-inverse approximation for the von Mises concentration.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::stats::{digamma, trigamma};

/// Selection-independent movement distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementKernel {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub vm_mu: f64,
    pub vm_kappa: f64,
}

impl MovementKernel {
    pub fn new(gamma_shape: f64, gamma_rate: f64, vm_mu: f64, vm_kappa: f64) -> Result<Self, SimError> {
        let k = MovementKernel { gamma_shape, gamma_rate, vm_mu, vm_kappa };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.gamma_shape > 0.0) || !self.gamma_shape.is_finite() {
            return Err(SimError::InvalidSpec(format!("gamma_shape must be > 0, got {}", self.gamma_shape)));
        }
        if !(self.gamma_rate > 0.0) || !self.gamma_rate.is_finite() {
            return Err(SimError::InvalidSpec(format!("gamma_rate must be > 0, got {}", self.gamma_rate)));
        }
        if !(self.vm_mu > -std::f64::consts::PI && self.vm_mu <= std::f64::consts::PI) {
            return Err(SimError::InvalidSpec(format!("vm_mu must lie in (-pi, pi], got {}", self.vm_mu)));
        }
        if !(self.vm_kappa >= 0.0) || !self.vm_kappa.is_finite() {
            return Err(SimError::InvalidSpec(format!("vm_kappa must be >= 0, got {}", self.vm_kappa)));
        }
        Ok(())
    }
}

/// Wraps an angle into (-pi, pi].
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    // rem_euclid(0.0) of negative multiples lands exactly on 0; map the
    // boundary -pi (never produced above) and keep pi.
    if r == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        r
    }
}

/// Fits gamma step-length and von Mises turning-angle parameters.
pub fn fit_movement_kernel(steps: &[(f64, f64)]) -> Result<MovementKernel, SimError> {
    const MIN_OBS: usize = 30;
    if steps.len() < MIN_OBS {
        return Err(SimError::TooFewObservations { min: MIN_OBS, got: steps.len() });
    }
    if let Some((sl, _)) = steps.iter().find(|(sl, _)| !(*sl > 0.0)) {
        return Err(SimError::InvalidArgument(format!("step lengths must be > 0, got {sl}")));
    }

    let n = steps.len() as f64;
    let mean: f64 = steps.iter().map(|(sl, _)| sl).sum::<f64>() / n;
    let mean_log: f64 = steps.iter().map(|(sl, _)| sl.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    if s <= 1e-12 {
        return Err(SimError::DegenerateInput("step lengths have no spread; gamma shape diverges".into()));
    }
    // Standard starting point, then Newton on ln(k) - digamma(k) = s.
    let mut shape = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = shape.ln() - digamma(shape) - s;
        let fp = 1.0 / shape - trigamma(shape);
        let step = f / fp;
        shape -= step;
        if shape <= 0.0 {
            shape = 1e-8;
        }
        if step.abs() < 1e-12 * shape.max(1.0) {
            break;
        }
    }
    let rate = shape / mean;

    let sum_cos: f64 = steps.iter().map(|(_, ta)| ta.cos()).sum();
    let sum_sin: f64 = steps.iter().map(|(_, ta)| ta.sin()).sum();
    let r_bar = (sum_cos * sum_cos + sum_sin * sum_sin).sqrt() / n;
    if r_bar > 1.0 - 1e-10 {
        return Err(SimError::DegenerateInput("turning angles have no spread; kappa diverges".into()));
    }
    let mu = wrap_angle(sum_sin.atan2(sum_cos));
    // A-inverse approximation (Fisher 1993).
    let kappa = if r_bar < 0.53 {
        2.0 * r_bar + r_bar.powi(3) + 5.0 * r_bar.powi(5) / 6.0
    } else if r_bar < 0.85 {
        -0.4 + 1.39 * r_bar + 0.43 / (1.0 - r_bar)
    } else {
        1.0 / (r_bar.powi(3) - 4.0 * r_bar.powi(2) + 3.0 * r_bar)
    };

    MovementKernel::new(shape, rate, mu, kappa.max(0.0))
}

/// Draws one von Mises angle (Best & Fisher rejection sampler).
pub fn sample_von_mises<R: Rng>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return wrap_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) + f64::EPSILON);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (std::f64::consts::PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen_range(0.0..1.0);
            let angle = if u3 > 0.5 { mu + f.acos() } else { mu - f.acos() };
            return wrap_angle(angle);
        }
    }
}

/// Draws one (step_length, turning_angle) pair from the kernel.
pub(crate) fn sample_step<R: Rng>(rng: &mut R, kernel: &MovementKernel) -> (f64, f64) {
    let gamma = Gamma::new(kernel.gamma_shape, 1.0 / kernel.gamma_rate)
        .expect("kernel validated: shape and rate positive");
    let len = gamma.sample(rng);
    let turn = sample_von_mises(rng, kernel.vm_mu, kernel.vm_kappa);
    (len, turn)
}

/// Displaces `origin` by `n` kernel draws relative to `heading`.
pub fn sample_candidate_steps(
    origin: (f64, f64),
    heading: f64,
    kernel: &MovementKernel,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<(f64, f64)>, SimError> {
    if n < 1 {
        return Err(SimError::InvalidArgument("need at least one candidate step".into()));
    }
    kernel.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (len, turn) = sample_step(&mut rng, kernel);
        let bearing = heading + turn;
        out.push((origin.0 + len * bearing.cos(), origin.1 + len * bearing.sin()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw_kernel_sample(kernel: &MovementKernel, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_step(&mut rng, kernel)).collect()
    }

    #[test]
    fn gamma_mle_recovers_generator_parameters() {
        let truth = MovementKernel::new(2.0, 1.0, 0.0, 5.0).unwrap();
        let steps = draw_kernel_sample(&truth, 50_000, 21);
        let fit = fit_movement_kernel(&steps).unwrap();
        assert!(fit.gamma_shape > 1.95 && fit.gamma_shape < 2.05, "shape {}", fit.gamma_shape);
        assert!(fit.gamma_rate > 0.97 && fit.gamma_rate < 1.03, "rate {}", fit.gamma_rate);
    }

    #[test]
    fn von_mises_mle_recovers_generator_parameters() {
        let truth = MovementKernel::new(2.0, 1.0, 0.0, 5.0).unwrap();
        let steps = draw_kernel_sample(&truth, 50_000, 22);
        let fit = fit_movement_kernel(&steps).unwrap();
        assert!(fit.vm_mu.abs() < 0.03, "mu {}", fit.vm_mu);
        assert!(fit.vm_kappa > 4.7 && fit.vm_kappa < 5.3, "kappa {}", fit.vm_kappa);
    }

    #[test]
    fn uniform_angles_fit_to_near_zero_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let steps: Vec<(f64, f64)> = (0..50_000)
            .map(|_| {
                (
                    rng.gen_range(0.1..2.0),
                    wrap_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
                )
            })
            .collect();
        let fit = fit_movement_kernel(&steps).unwrap();
        assert!(fit.vm_kappa < 0.05, "kappa {}", fit.vm_kappa);
    }

    #[test]
    fn degenerate_inputs_are_signalled() {
        let constant: Vec<(f64, f64)> = (0..50).map(|i| (1.0, (i as f64 * 0.1).sin())).collect();
        assert!(matches!(fit_movement_kernel(&constant), Err(SimError::DegenerateInput(_))));
        let same_angle: Vec<(f64, f64)> = (0..50).map(|i| (1.0 + i as f64 * 0.01, 0.5)).collect();
        assert!(matches!(fit_movement_kernel(&same_angle), Err(SimError::DegenerateInput(_))));
        let few = vec![(1.0, 0.0); 10];
        assert!(matches!(fit_movement_kernel(&few), Err(SimError::TooFewObservations { .. })));
    }

    #[test]
    fn concentrated_kernel_keeps_bearings_on_heading() {
        let kernel = MovementKernel::new(2.0, 1.0, 0.0, 1e6).unwrap();
        let heading = 0.7;
        let pts = sample_candidate_steps((1.0, -2.0), heading, &kernel, 500, 3).unwrap();
        for (x, y) in pts {
            let bearing = (y - -2.0).atan2(x - 1.0);
            assert!((bearing - heading).abs() < 0.01, "bearing {bearing}");
        }
    }

    #[test]
    fn sampled_step_lengths_match_gamma_mean() {
        let kernel = MovementKernel::new(2.0, 1.0, 0.0, 0.5).unwrap();
        let pts = sample_candidate_steps((0.0, 0.0), 0.0, &kernel, 10_000, 4).unwrap();
        let mean_len: f64 =
            pts.iter().map(|(x, y)| (x * x + y * y).sqrt()).sum::<f64>() / pts.len() as f64;
        assert!(mean_len > 1.94 && mean_len < 2.06, "mean length {mean_len}");
    }

    #[test]
    fn zero_candidates_rejected() {
        let kernel = MovementKernel::new(2.0, 1.0, 0.0, 0.5).unwrap();
        assert!(matches!(
            sample_candidate_steps((0.0, 0.0), 0.0, &kernel, 0, 1),
            Err(SimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn von_mises_sampler_is_unbiased_for_shifted_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = 1.2;
        let n = 20_000;
        let (mut sc, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            let a = sample_von_mises(&mut rng, mu, 3.0);
            sc += a.cos();
            ss += a.sin();
        }
        let mean_angle = ss.atan2(sc);
        assert!((mean_angle - mu).abs() < 0.02, "circular mean {mean_angle}");
    }

    #[test]
    fn wrap_angle_stays_in_half_open_interval() {
        for a in [-10.0, -std::f64::consts::PI, 0.0, 3.0, 7.5, 100.0] {
            let w = wrap_angle(a);
            assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI, "{a} -> {w}");
        }
        assert_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
    }

    #[test]
    fn kernel_domain_is_enforced() {
        assert!(MovementKernel::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(MovementKernel::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(MovementKernel::new(1.0, 1.0, 4.0, 1.0).is_err());
        assert!(MovementKernel::new(1.0, 1.0, 0.0, -0.1).is_err());
    }
}
