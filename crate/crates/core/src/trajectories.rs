//! Quantum-trajectory Monte Carlo for the measured, reset, noisy walk.
//!
//! Each step of a trajectory: with probability `p` jump back to `|Ψ₀⟩`,
//! otherwise apply `U`; with probability `q` flip every coin; then detect
//! with probability `‖Pψ‖²`, or continue with `Wψ/‖Wψ‖`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::walk::{initial_state, ChainGeometry, CoinSpec, WalkOperators};

/// Largest tolerated fraction of censored samples.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub reset_p: f64,
    pub noise_q: f64,
    pub execution: Execution,
}

impl TrajectoryConfig {
    pub fn new(n_trajectories: usize, seed: u64, max_steps: usize, reset_p: f64, noise_q: f64) -> Result<Self> {
        let config = Self {
            n_trajectories,
            seed,
            max_steps,
            reset_p,
            noise_q,
            execution: Execution::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("at least one trajectory is required".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.reset_p) {
            return Err(Error::InvalidArgument(format!(
                "reset probability must lie in [0, 1), got {}",
                self.reset_p
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_q) {
            return Err(Error::InvalidArgument(format!(
                "noise probability must lie in [0, 1], got {}",
                self.noise_q
            )));
        }
        Ok(())
    }
}

/// Sample mean of detection times with censoring bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhtEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_detected: usize,
    pub n_censored: usize,
}

impl MhtEstimate {
    /// Aggregates detection times (`None` = censored). Sums are exact
    /// integers, so the result does not depend on sample order.
    pub fn from_times(times: &[Option<u64>], max_steps: usize) -> Result<Self> {
        let total = times.len();
        let (mut n, mut sum, mut sum_sq) = (0u128, 0u128, 0u128);
        for t in times.iter().flatten() {
            let t = *t as u128;
            n += 1;
            sum += t;
            sum_sq += t * t;
        }
        let n_detected = n as usize;
        let n_censored = total - n_detected;
        if total == 0 || n_censored as f64 > MAX_CENSORED_FRACTION * total as f64 || n_detected == 0 {
            return Err(Error::CensoringTooHigh {
                censored: n_censored,
                total,
                max_steps,
            });
        }
        let mean = sum as f64 / n as f64;
        let standard_error = if n > 1 {
            // n·Σt² − (Σt)² is exact in integers.
            let spread = (n * sum_sq - sum * sum) as f64;
            (spread / (n as f64 * (n - 1) as f64) / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            standard_error,
            n_detected,
            n_censored,
        })
    }

    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / (self.n_detected + self.n_censored) as f64
    }

    /// `|mean − reference| ≤ k·SE`.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.standard_error
    }
}

/// Independent random stream for sample `index` under `seed`.
pub fn substream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Detection time of every trajectory, `None` when it exceeds `max_steps`.
pub fn detection_times(
    config: &TrajectoryConfig,
    geometry: &ChainGeometry,
    coin: &CoinSpec,
) -> Result<Vec<Option<u64>>> {
    config.validate()?;
    let operators = WalkOperators::new(geometry);
    let psi0 = initial_state(geometry, coin)?.into_amplitudes();
    Ok(map_indexed(config.execution, config.n_trajectories, |i| {
        let mut rng = substream(config.seed, i);
        single_trajectory(&operators, &psi0, config, &mut rng)
    }))
}

fn single_trajectory(
    operators: &WalkOperators,
    psi0: &[crate::numerics::C64],
    config: &TrajectoryConfig,
    rng: &mut ChaCha8Rng,
) -> Option<u64> {
    let mut psi = psi0.to_vec();
    for t in 1..=config.max_steps {
        let (reset_draw, flip_draw, detect_draw): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        psi = if reset_draw < config.reset_p {
            psi0.to_vec()
        } else {
            operators.apply_unitary(&psi)
        };
        if flip_draw < config.noise_q {
            WalkOperators::flip_coins(&mut psi);
        }
        let detected = operators.remove_detected(&mut psi);
        if detect_draw < detected {
            return Some(t as u64);
        }
        let scale = 1.0 / (1.0 - detected).sqrt();
        for z in &mut psi {
            *z *= scale;
        }
    }
    None
}

pub fn run_trajectories(config: &TrajectoryConfig, geometry: &ChainGeometry, coin: &CoinSpec) -> Result<MhtEstimate> {
    let times = detection_times(config, geometry, coin)?;
    MhtEstimate::from_times(&times, config.max_steps)
}
