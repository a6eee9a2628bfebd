//! Unmeasured spreading on an open lattice: position distributions and mean
//! squared displacement for classical and quantum walks, from localized or
//! Gaussian initial states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{C64, ZERO};
use crate::walk::{default_coin, CoinSpec, WalkState};

/// Amplitude (or probability) at the lattice edge that counts as boundary contact.
pub const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadModel {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadConfig {
    pub model: SpreadModel,
    pub steps: usize,
    pub sigma: f64,
    pub coin: CoinSpec,
    pub lattice_halfwidth: usize,
    /// Times at which full distributions are recorded.
    pub snapshot_times: Vec<usize>,
}

impl SpreadConfig {
    /// Config with the smallest lattice that keeps the walk off the edges.
    pub fn new(model: SpreadModel, steps: usize, sigma: f64, coin: CoinSpec) -> Self {
        Self {
            model,
            steps,
            sigma,
            coin,
            lattice_halfwidth: required_halfwidth(steps, sigma),
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, times: Vec<usize>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        let required = required_halfwidth(self.steps, self.sigma);
        if self.lattice_halfwidth < required {
            return Err(Error::LatticeTooSmall {
                halfwidth: self.lattice_halfwidth,
                required,
            });
        }
        if let Some(&t) = self.snapshot_times.iter().find(|&&t| t > self.steps) {
            return Err(Error::InvalidArgument(format!(
                "snapshot time {t} exceeds {} steps",
                self.steps
            )));
        }
        Ok(())
    }
}

/// `steps + ⌈6σ⌉ + 2`.
pub fn required_halfwidth(steps: usize, sigma: f64) -> usize {
    steps + (6.0 * sigma).ceil() as usize + 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    /// Position of the first entry of `probabilities`.
    pub first_position: i64,
    pub probabilities: Vec<f64>,
}

impl Snapshot {
    pub fn positions(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.probabilities.len()).map(move |k| self.first_position + k as i64)
    }

    pub fn at(&self, x: i64) -> f64 {
        usize::try_from(x - self.first_position)
            .ok()
            .and_then(|k| self.probabilities.get(k).copied())
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadResult {
    /// MSD at `t = 0..=steps`.
    pub msd_series: Vec<f64>,
    pub distributions: Vec<Snapshot>,
    /// Slope of `log MSD` against `log t` over `fit_window`, when defined.
    pub fitted_exponent: Option<f64>,
    pub fit_window: (usize, usize),
}

/// Gaussian amplitudes `∝ exp(−(x/2σ)²)` on `[−halfwidth, halfwidth]`,
/// truncated at `|x| > 6σ`, times the coin; `σ = 0` is the localized state.
pub fn gaussian_initial_state(sigma: f64, coin: &CoinSpec, halfwidth: usize) -> Result<WalkState> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let cutoff = 6.0 * sigma;
    if (halfwidth as f64) < cutoff.ceil() {
        return Err(Error::LatticeTooSmall {
            halfwidth,
            required: cutoff.ceil() as usize,
        });
    }
    let [a, b] = coin.amplitudes()?;
    let profile = gaussian_profile(sigma, halfwidth);
    let norm = profile.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut amplitudes = Vec::with_capacity(2 * profile.len());
    for v in profile {
        amplitudes.push(a * (v / norm));
        amplitudes.push(b * (v / norm));
    }
    Ok(WalkState::from_amplitudes(amplitudes))
}

fn gaussian_profile(sigma: f64, halfwidth: usize) -> Vec<f64> {
    let h = halfwidth as i64;
    (-h..=h)
        .map(|x| {
            let x = x as f64;
            if sigma == 0.0 {
                if x == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else if x.abs() > 6.0 * sigma {
                0.0
            } else {
                (-(x / (2.0 * sigma)).powi(2)).exp()
            }
        })
        .collect()
}

/// `Σx²P − (ΣxP)²` for a distribution starting at `first_position`.
pub fn msd(probabilities: &[f64], first_position: i64) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, &p) in probabilities.iter().enumerate() {
        let x = (first_position + k as i64) as f64;
        m1 += x * p;
        m2 += x * x * p;
    }
    (m2 - m1 * m1).max(0.0)
}

/// Least-squares slope of `ln MSD` against `ln t` for `t ∈ [lo, hi]`.
pub fn fit_exponent(msd_series: &[f64], lo: usize, hi: usize) -> Option<f64> {
    let points: Vec<(f64, f64)> = (lo.max(1)..=hi.min(msd_series.len().saturating_sub(1)))
        .filter(|&t| msd_series[t] > 0.0)
        .map(|t| ((t as f64).ln(), msd_series[t].ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn evolve_distribution(config: &SpreadConfig) -> Result<SpreadResult> {
    config.validate()?;
    let hw = config.lattice_halfwidth;
    let first = -(hw as i64);
    let mut msd_series = Vec::with_capacity(config.steps + 1);
    let mut distributions = Vec::new();
    let mut record = |t: usize, probs: &[f64], msd_series: &mut Vec<f64>| {
        msd_series.push(msd(probs, first));
        if config.snapshot_times.contains(&t) {
            distributions.push(Snapshot {
                t,
                first_position: first,
                probabilities: probs.to_vec(),
            });
        }
    };

    match config.model {
        SpreadModel::Classical => {
            let profile = gaussian_profile(config.sigma, hw);
            let total: f64 = profile.iter().map(|v| v * v).sum();
            let mut probs: Vec<f64> = profile.iter().map(|v| v * v / total).collect();
            record(0, &probs, &mut msd_series);
            for t in 1..=config.steps {
                if probs[0] > EDGE_TOLERANCE || probs[probs.len() - 1] > EDGE_TOLERANCE {
                    return Err(lattice_error(config));
                }
                let mut next = vec![0.0; probs.len()];
                for k in 1..probs.len() - 1 {
                    next[k] = 0.5 * (probs[k - 1] + probs[k + 1]);
                }
                probs = next;
                record(t, &probs, &mut msd_series);
            }
        }
        SpreadModel::Quantum => {
            let coin = default_coin();
            let mut psi = gaussian_initial_state(config.sigma, &config.coin, hw)?.into_amplitudes();
            record(0, &site_probabilities(&psi), &mut msd_series);
            for t in 1..=config.steps {
                psi = open_step(&psi, &coin).ok_or_else(|| lattice_error(config))?;
                record(t, &site_probabilities(&psi), &mut msd_series);
            }
        }
    }

    let window = (config.steps / 2, config.steps);
    Ok(SpreadResult {
        fitted_exponent: fit_exponent(&msd_series, window.0, window.1),
        msd_series,
        distributions,
        fit_window: window,
    })
}

fn lattice_error(config: &SpreadConfig) -> Error {
    Error::LatticeTooSmall {
        halfwidth: config.lattice_halfwidth,
        required: required_halfwidth(config.steps, config.sigma),
    }
}

fn site_probabilities(psi: &[C64]) -> Vec<f64> {
    psi.chunks(2).map(|c| c[0].norm_sqr() + c[1].norm_sqr()).collect()
}

/// Coin then shift on an open lattice; `None` if amplitude would leave it.
fn open_step(psi: &[C64], coin: &[[C64; 2]; 2]) -> Option<Vec<C64>> {
    let sites = psi.len() / 2;
    let mut out = vec![ZERO; psi.len()];
    for k in 0..sites {
        let (a, b) = (psi[2 * k], psi[2 * k + 1]);
        let up = coin[0][0] * a + coin[0][1] * b;
        let down = coin[1][0] * a + coin[1][1] * b;
        match (k + 1 < sites, k > 0) {
            (true, true) => {
                out[2 * (k + 1)] = up;
                out[2 * (k - 1) + 1] = down;
            }
            (right_ok, left_ok) => {
                if (!right_ok && up.norm() > EDGE_TOLERANCE) || (!left_ok && down.norm() > EDGE_TOLERANCE) {
                    return None;
                }
                if right_ok {
                    out[2 * (k + 1)] = up;
                }
                if left_ok {
                    out[2 * (k - 1) + 1] = down;
                }
            }
        }
    }
    Some(out)
}
