//! Reset-probability optimization: coarse scan, then golden-section
//! refinement on the best bracket. Unimodality is never assumed; the full
//! scan is kept in the report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitting::quantum_mht;
use crate::par::{map_indexed, Execution};
use crate::walk::{ChainGeometry, CoinSpec};

/// Upper end of the reset-probability scan.
pub const SCAN_UPPER: f64 = 0.99;
pub const DEFAULT_GRID_RESOLUTION: usize = 99;
pub const REFINE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub p_star: f64,
    pub mht_star: f64,
    pub evaluations: usize,
    pub scan: Vec<(f64, f64)>,
    pub refinement: Vec<(f64, f64)>,
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tol`. Returns every evaluated point in order.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut history = Vec::new();
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    history.push((c, fc));
    history.push((d, fd));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
            history.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
            history.push((d, fd));
        }
    }
    Ok(history)
}

/// Smallest value among evaluated points; ties go to the earliest.
pub(crate) fn best_point(points: impl IntoIterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    points
        .into_iter()
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        })
}

/// Grid point indices bracketing `k` on a grid of `len` points.
pub(crate) fn bracket(k: usize, len: usize) -> (usize, usize) {
    (k.saturating_sub(1), (k + 1).min(len - 1))
}

/// Minimizes the resolvent MHT over the reset probability `p ∈ [0, 0.99]`.
pub fn minimize_mht(
    geometry: &ChainGeometry,
    coin: &CoinSpec,
    q: f64,
    grid_resolution: usize,
    execution: Execution,
) -> Result<OptimizationReport> {
    if grid_resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {grid_resolution}"
        )));
    }
    let grid: Vec<f64> = (0..=grid_resolution)
        .map(|k| SCAN_UPPER * k as f64 / grid_resolution as f64)
        .collect();
    let values = map_indexed(execution, grid.len(), |k| {
        quantum_mht(geometry, coin, grid[k], q).map(|r| r.mht)
    });
    let scan = grid
        .iter()
        .zip(values)
        .map(|(&p, v)| v.map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;

    let best_k = (0..scan.len())
        .min_by(|&i, &j| scan[i].1.total_cmp(&scan[j].1))
        .expect("non-empty scan");
    let (lo, hi) = bracket(best_k, scan.len());
    let refinement = golden_section(
        |p| quantum_mht(geometry, coin, p, q).map(|r| r.mht),
        scan[lo].0,
        scan[hi].0,
        REFINE_TOLERANCE,
    )?;
    let (p_star, mht_star) = best_point(scan.iter().chain(&refinement).copied()).expect("non-empty");
    Ok(OptimizationReport {
        p_star,
        mht_star,
        evaluations: scan.len() + refinement.len(),
        scan,
        refinement,
    })
}
