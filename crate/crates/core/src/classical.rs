//! Classical random-walk baselines: closed form, absorbing-chain solver with
//! stochastic reset, and Monte Carlo.
//!
//! A reset tick replaces the move: the walker spends that tick at `x₀`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::trajectories::{substream, MhtEstimate};
use crate::walk::ChainGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalWalkSpec {
    pub geometry: ChainGeometry,
    pub reset_p: f64,
}

impl ClassicalWalkSpec {
    pub fn new(geometry: ChainGeometry, reset_p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&reset_p) {
            return Err(Error::InvalidArgument(format!(
                "reset probability must lie in [0, 1), got {reset_p}"
            )));
        }
        Ok(Self { geometry, reset_p })
    }
}

/// Expected absorption time from every interior site.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingVector {
    first_site: i64,
    h: Vec<f64>,
}

impl HittingVector {
    pub fn values(&self) -> &[f64] {
        &self.h
    }

    /// `None` for detector sites and positions off the chain.
    pub fn at(&self, x: i64) -> Option<f64> {
        let k = x.checked_sub(self.first_site)?;
        usize::try_from(k).ok().and_then(|k| self.h.get(k).copied())
    }
}

/// `|(x_right − x₀)(x_left − x₀)|`.
pub fn mht_closed_form(geometry: &ChainGeometry) -> f64 {
    ((geometry.x_right() - geometry.x_start()) * (geometry.x_start() - geometry.x_left())) as f64
}

/// Solves `h(x) = 1 + p·h(x₀) + (1−p)·½[h(x−1) + h(x+1)]` with `h = 0` on the
/// detectors, by renewal at each reset. With `τ` the mean time until reset or
/// detection and `a` the probability that detection comes first,
/// `h₀ = τ(x₀)/a(x₀)` and `h = τ + (1 − a)·h₀`. Both are solutions of
/// diagonally dominant tridiagonal systems with nonnegative data, so nothing
/// cancels even when `h` is astronomically large.
pub fn hitting_vector(spec: &ClassicalWalkSpec) -> Result<HittingVector> {
    let g = &spec.geometry;
    let n = g.site_count() - 2;
    let first = g.x_left() + 1;
    let start = (g.x_start() - first) as usize;
    let hop = 0.5 * (1.0 - spec.reset_p);

    let tau = killed_walk_solve(hop, &vec![1.0; n]);
    let mut edge = vec![0.0; n];
    edge[0] += hop;
    edge[n - 1] += hop;
    let absorbed = killed_walk_solve(hop, &edge);
    if !(absorbed[start] > 0.0) {
        return Err(Error::InfiniteMht(
            "detection probability before reset underflows".into(),
        ));
    }
    let h0 = tau[start] / absorbed[start];
    if !h0.is_finite() {
        return Err(Error::InfiniteMht(format!(
            "classical MHT overflows at p = {}",
            spec.reset_p
        )));
    }
    Ok(HittingVector {
        first_site: first,
        h: tau.iter().zip(&absorbed).map(|(t, a)| t + (1.0 - a) * h0).collect(),
    })
}

/// Thomas algorithm for `y_i − hop·(y_{i−1} + y_{i+1}) = rhs_i`, zero outside.
fn killed_walk_solve(hop: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut diag = vec![0.0; n];
    let mut y = vec![0.0; n];
    diag[0] = 1.0;
    y[0] = rhs[0];
    for i in 1..n {
        let m = -hop / diag[i - 1];
        diag[i] = 1.0 + m * hop;
        y[i] = rhs[i] - m * y[i - 1];
    }
    y[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = (y[i] + hop * y[i + 1]) / diag[i];
    }
    y
}

pub fn mht_with_reset(spec: &ClassicalWalkSpec) -> Result<f64> {
    let hv = hitting_vector(spec)?;
    Ok(hv.at(spec.geometry.x_start()).expect("start is interior"))
}

pub fn classical_monte_carlo(spec: &ClassicalWalkSpec, n: usize, seed: u64, max_steps: usize) -> Result<MhtEstimate> {
    classical_monte_carlo_with(spec, n, seed, max_steps, Execution::default())
}

pub fn classical_monte_carlo_with(
    spec: &ClassicalWalkSpec,
    n: usize,
    seed: u64,
    max_steps: usize,
    execution: Execution,
) -> Result<MhtEstimate> {
    if n == 0 || max_steps == 0 {
        return Err(Error::InvalidArgument("need at least one walker and one step".into()));
    }
    let g = spec.geometry;
    let times = map_indexed(execution, n, |i| {
        let mut rng = substream(seed, i);
        let mut x = g.x_start();
        for t in 1..=max_steps {
            let (reset_draw, step_draw): (f64, f64) = (rng.gen(), rng.gen());
            x = if reset_draw < spec.reset_p {
                g.x_start()
            } else if step_draw < 0.5 {
                x + 1
            } else {
                x - 1
            };
            if g.is_target(x) {
                return Some(t as u64);
            }
        }
        None
    });
    MhtEstimate::from_times(&times, max_steps)
}
