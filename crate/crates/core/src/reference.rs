//! Closed-form MHT(p) for the reset walk with detectors at ±5, start 0,
//! coin |+1⟩, stored as exact integer polynomial coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{best_point, bracket, golden_section};

const NUMERATOR: [i64; 32] = [
    25,
    680,
    3182,
    -16076,
    41900,
    188272,
    -2365266,
    13199288,
    -52780841,
    168369748,
    -448139860,
    1019082020,
    -2007144828,
    3450802448,
    -5199757900,
    6877143700,
    -7981402521,
    8115959704,
    -7212800234,
    5583320608,
    -3748159536,
    2170309920,
    -1076624642,
    453683956,
    -160649327,
    47130156,
    -11239984,
    2122056,
    -304968,
    31328,
    -2048,
    64,
];

const DENOMINATOR: [i64; 30] = [
    1, 35, 122, -1918, 5444, 19864, -277774, 1586138, -6286809, 19419993, -49059564, 103784468, -186111868, 284770388,
    -373154260, 419592924, -405209569, 336023109, -238989182, 145441050, -75450536, 33180052, -12269534, 3771338,
    -947615, 189911, -29232, 3248, -232, 8,
];

/// Relative threshold on `|Q(p)|` below which evaluation reports a pole.
pub const POLE_TOLERANCE: f64 = 1e-12;
pub const ARGMIN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalMht {
    pub numerator_coeffs: Vec<i64>,
    pub denominator_coeffs: Vec<i64>,
}

impl RationalMht {
    pub fn appendix() -> Self {
        Self {
            numerator_coeffs: NUMERATOR.to_vec(),
            denominator_coeffs: DENOMINATOR.to_vec(),
        }
    }

    pub fn evaluate(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p must lie in [0, 1), got {p}")));
        }
        self.ratio(p)
    }

    fn ratio(&self, p: f64) -> Result<f64> {
        // Q = (1 − p)^k·R with R(1) ≠ 0; the pole test looks at R so the
        // root at p = 1 does not mask the whole neighbourhood of 1.
        let (k, reduced) = deflate_unit_root(&self.denominator_coeffs);
        let num = compensated_horner(&self.numerator_coeffs, p);
        let r = compensated_horner(&reduced, p);
        let scale = reduced.iter().map(|b| b.unsigned_abs()).max().unwrap_or(0) as f64;
        let gap = (1.0 - p).powi(k as i32);
        if r.abs() < POLE_TOLERANCE * scale || gap == 0.0 {
            return Err(Error::PoleEncountered { p });
        }
        Ok(num / r / gap)
    }

    /// Grid scan with `resolution + 1` points on `[0, 0.99]`, then
    /// golden-section refinement of the best bracket.
    pub fn argmin_on_grid(&self, resolution: usize) -> Result<(f64, f64)> {
        if resolution < 100 {
            return Err(Error::InvalidArgument(format!(
                "resolution must be at least 100, got {resolution}"
            )));
        }
        let upper = crate::optimizer::SCAN_UPPER;
        let scan = (0..=resolution)
            .map(|k| {
                let p = upper * k as f64 / resolution as f64;
                self.evaluate(p).map(|v| (p, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = (0..scan.len())
            .min_by(|&i, &j| scan[i].1.total_cmp(&scan[j].1))
            .expect("non-empty");
        let (lo, hi) = bracket(k, scan.len());
        let refinement = golden_section(|p| self.evaluate(p), scan[lo].0, scan[hi].0, ARGMIN_TOLERANCE)?;
        Ok(best_point(scan.into_iter().chain(refinement)).expect("non-empty"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("integer arrays serialize")
    }
}

/// Divides out `(1 − p)` while the coefficients sum to zero; exact in
/// integers. Returns the multiplicity and the quotient.
fn deflate_unit_root(coeffs: &[i64]) -> (usize, Vec<i64>) {
    let mut c: Vec<i128> = coeffs.iter().map(|&a| a as i128).collect();
    let mut k = 0;
    while c.len() > 1 && c.iter().sum::<i128>() == 0 {
        // c(p) = (1 − p)·d(p): d_i = Σ_{j ≤ i} c_j.
        let mut acc = 0;
        c = c[..c.len() - 1]
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        k += 1;
    }
    (
        k,
        c.into_iter()
            .map(|x| i64::try_from(x).expect("quotient fits in i64"))
            .collect(),
    )
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Horner with error-free transformations (Graillat–Langlois–Louvet);
/// accurate to about twice working precision. All coefficients here are
/// below 2⁵³ and convert exactly.
fn compensated_horner(coeffs: &[i64], x: f64) -> f64 {
    let mut iter = coeffs.iter().rev();
    let mut s = *iter.next().expect("non-empty polynomial") as f64;
    let mut c = 0.0;
    for &a in iter {
        let (prod, pi) = two_prod(s, x);
        let (sum, sigma) = two_sum(prod, a as f64);
        s = sum;
        c = c * x + (pi + sigma);
    }
    s + c
}
