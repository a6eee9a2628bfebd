//! Chain geometry, basis indexing and the coined walk operators.
//!
//! Basis ordering is `|x⟩ ⊗ |c⟩` with flat index `2·(x − x_left) + c`, where
//! `c = 0` for coin `+1` and `c = 1` for coin `−1`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64, ONE, ZERO};

/// Tolerance for accepting user-supplied coins and coin states.
pub const COIN_TOLERANCE: f64 = 1e-10;

/// Finite chain between two detector sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainGeometry {
    x_start: i64,
    x_left: i64,
    x_right: i64,
}

impl ChainGeometry {
    /// Requires `x_left < x_start < x_right`.
    pub fn new(x_start: i64, x_left: i64, x_right: i64) -> Result<Self> {
        if !(x_left < x_start && x_start < x_right) {
            return Err(Error::InvalidGeometry(format!(
                "need left target < start < right target, got {x_left} < {x_start} < {x_right}"
            )));
        }
        Ok(Self {
            x_start,
            x_left,
            x_right,
        })
    }

    /// Detectors at `−d` and `+d`, walker starting at the origin.
    pub fn symmetric(half_distance: i64) -> Result<Self> {
        Self::new(0, -half_distance, half_distance)
    }

    pub fn x_start(&self) -> i64 {
        self.x_start
    }

    pub fn x_left(&self) -> i64 {
        self.x_left
    }

    pub fn x_right(&self) -> i64 {
        self.x_right
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.x_left..=self.x_right
    }

    /// Number of lattice sites, detectors included.
    pub fn site_count(&self) -> usize {
        (self.x_right - self.x_left + 1) as usize
    }

    /// Hilbert-space dimension (position ⊗ coin).
    pub fn dim(&self) -> usize {
        2 * self.site_count()
    }

    pub fn is_symmetric(&self) -> bool {
        self.x_right - self.x_start == self.x_start - self.x_left
    }

    pub fn contains(&self, x: i64) -> bool {
        (self.x_left..=self.x_right).contains(&x)
    }

    pub fn is_target(&self, x: i64) -> bool {
        x == self.x_left || x == self.x_right
    }

    pub fn index(&self, basis: BasisIndex) -> Result<usize> {
        if !self.contains(basis.position) {
            return Err(Error::InvalidGeometry(format!(
                "position {} outside [{}, {}]",
                basis.position, self.x_left, self.x_right
            )));
        }
        Ok(2 * (basis.position - self.x_left) as usize + basis.coin.offset())
    }

    pub fn basis(&self, index: usize) -> Result<BasisIndex> {
        if index >= self.dim() {
            return Err(Error::InvalidGeometry(format!(
                "flat index {index} out of range {}",
                self.dim()
            )));
        }
        Ok(BasisIndex {
            position: self.x_left + (index / 2) as i64,
            coin: if index.is_multiple_of(2) {
                Coin::Plus
            } else {
                Coin::Minus
            },
        })
    }
}

/// Coin basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coin {
    Plus,
    Minus,
}

impl Coin {
    pub fn offset(self) -> usize {
        match self {
            Coin::Plus => 0,
            Coin::Minus => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub position: i64,
    pub coin: Coin,
}

impl BasisIndex {
    pub fn new(position: i64, coin: Coin) -> Self {
        Self { position, coin }
    }
}

/// Initial coin state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoinSpec {
    /// `|+1⟩`.
    Plus,
    /// `(|+1⟩ + i|−1⟩)/√2`.
    Symmetric,
    /// Arbitrary unit vector `(a, b)` in the `(+1, −1)` basis.
    Explicit([C64; 2]),
}

impl CoinSpec {
    pub fn amplitudes(&self) -> Result<[C64; 2]> {
        match *self {
            CoinSpec::Plus => Ok([ONE, ZERO]),
            CoinSpec::Symmetric => Ok([C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)]),
            CoinSpec::Explicit(v) => {
                let norm = v[0].norm_sqr() + v[1].norm_sqr();
                if !norm.is_finite() || (norm - 1.0).abs() > COIN_TOLERANCE {
                    return Err(Error::InvalidCoin(format!("coin state has squared norm {norm}")));
                }
                Ok(v)
            }
        }
    }
}

/// Pure state over position ⊗ coin.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    amplitudes: Vec<C64>,
}

impl WalkState {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Probability per site, summed over the coin.
    pub fn site_probabilities(&self) -> Vec<f64> {
        self.amplitudes
            .chunks(2)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn outer(&self) -> ComplexMatrix {
        let a = &self.amplitudes;
        ComplexMatrix::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj())
    }
}

/// Density matrix over position ⊗ coin (Hermitian, PSD, trace ≤ 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Wraps a square Hermitian matrix; positivity is not checked.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let scale = matrix.norm_max().max(1.0);
        if matrix.hermiticity_residual() > 1e-10 * scale {
            return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
        }
        Ok(Self(matrix))
    }

    pub fn from_pure(state: &WalkState) -> Self {
        Self(state.outer())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// State localized at the start site with the requested coin.
pub fn initial_state(geometry: &ChainGeometry, coin: &CoinSpec) -> Result<WalkState> {
    let [a, b] = coin.amplitudes()?;
    let mut amplitudes = vec![ZERO; geometry.dim()];
    let base = geometry.index(BasisIndex::new(geometry.x_start(), Coin::Plus))?;
    amplitudes[base] = a;
    amplitudes[base + 1] = b;
    Ok(WalkState { amplitudes })
}

/// The standard coin `(1/√2)[[1, −1], [1, 1]]`, i.e. `exp(−iπσ_y/4)`.
pub fn default_coin() -> [[C64; 2]; 2] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [[h, -h], [h, h]]
}

/// Step, coin, unitary and detector operators for one geometry.
#[derive(Debug, Clone)]
pub struct WalkOperators {
    geometry: ChainGeometry,
    coin_block: [[C64; 2]; 2],
    pub step: ComplexMatrix,
    pub coin: ComplexMatrix,
    pub unitary: ComplexMatrix,
    pub projector: ComplexMatrix,
    pub survivor: ComplexMatrix,
}

impl WalkOperators {
    pub fn new(geometry: &ChainGeometry) -> Self {
        Self::assemble(geometry, default_coin())
    }

    /// Operators with an arbitrary 2×2 unitary coin.
    pub fn with_coin(geometry: &ChainGeometry, coin: [[C64; 2]; 2]) -> Result<Self> {
        let m = ComplexMatrix::from_rows(&[coin[0].to_vec(), coin[1].to_vec()])
            .map_err(|e| Error::InvalidCoin(e.to_string()))?;
        let residual = m.unitarity_residual();
        if !(residual <= COIN_TOLERANCE) {
            return Err(Error::InvalidCoin(format!(
                "coin is not unitary (residual {residual:e})"
            )));
        }
        Ok(Self::assemble(geometry, coin))
    }

    fn assemble(geometry: &ChainGeometry, coin_block: [[C64; 2]; 2]) -> Self {
        let n = geometry.dim();
        let sites = geometry.site_count();

        // S|x, ±1⟩ = |x ± 1, ±1⟩ with periodic wrap; the wrapped branch only
        // ever sees detector amplitude, which W removes beforehand.
        let mut step = ComplexMatrix::zeros(n, n);
        for k in 0..sites {
            let right = (k + 1) % sites;
            let left = (k + sites - 1) % sites;
            step[(2 * right, 2 * k)] = ONE;
            step[(2 * left + 1, 2 * k + 1)] = ONE;
        }

        let mut coin = ComplexMatrix::zeros(n, n);
        for k in 0..sites {
            for (r, row) in coin_block.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    coin[(2 * k + r, 2 * k + c)] = v;
                }
            }
        }

        let unitary = step.matmul(&coin).expect("square operators of equal size");

        let mut detector_diag = vec![0.0; n];
        for s in [0, sites - 1] {
            detector_diag[2 * s] = 1.0;
            detector_diag[2 * s + 1] = 1.0;
        }
        let survivor_diag: Vec<f64> = detector_diag.iter().map(|d| 1.0 - d).collect();

        Self {
            geometry: *geometry,
            coin_block,
            step,
            coin,
            unitary,
            projector: ComplexMatrix::diagonal(&detector_diag),
            survivor: ComplexMatrix::diagonal(&survivor_diag),
        }
    }

    pub fn geometry(&self) -> &ChainGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn coin_block(&self) -> [[C64; 2]; 2] {
        self.coin_block
    }

    /// `U|ψ⟩` in O(N) using the block structure of `S·C`.
    pub fn apply_unitary(&self, psi: &[C64]) -> Vec<C64> {
        let sites = self.geometry.site_count();
        debug_assert_eq!(psi.len(), 2 * sites);
        let cb = &self.coin_block;
        let mut out = vec![ZERO; psi.len()];
        for k in 0..sites {
            let (a, b) = (psi[2 * k], psi[2 * k + 1]);
            let up = cb[0][0] * a + cb[0][1] * b;
            let down = cb[1][0] * a + cb[1][1] * b;
            out[2 * ((k + 1) % sites)] = up;
            out[2 * ((k + sites - 1) % sites) + 1] = down;
        }
        out
    }

    /// Amplitude that `S` would carry around the periodic seam.
    fn wrap_amplitude(&self, psi: &[C64]) -> f64 {
        let sites = self.geometry.site_count();
        let cb = &self.coin_block;
        let (ra, rb) = (psi[2 * (sites - 1)], psi[2 * (sites - 1) + 1]);
        let (la, lb) = (psi[0], psi[1]);
        (cb[0][0] * ra + cb[0][1] * rb)
            .norm()
            .max((cb[1][0] * la + cb[1][1] * lb).norm())
    }

    /// Zeroes the detector sites in place (`W`), returning the removed weight (`‖Pψ‖²`).
    pub fn remove_detected(&self, psi: &mut [C64]) -> f64 {
        let last = psi.len() - 2;
        let mut detected = 0.0;
        for i in [0, 1, last, last + 1] {
            detected += psi[i].norm_sqr();
            psi[i] = ZERO;
        }
        detected
    }

    /// Applies `σ_x` to the coin at every site.
    pub fn flip_coins(psi: &mut [C64]) {
        for pair in psi.chunks_mut(2) {
            pair.swap(0, 1);
        }
    }
}

/// One measured step: returns `WU|ψ⟩` (unnormalized) and `‖PU|ψ⟩‖²`.
///
/// The state must carry no amplitude on the detector sites, which holds for
/// every state produced by the measured dynamics.
pub fn conditioned_step(state: &WalkState, operators: &WalkOperators) -> Result<(WalkState, f64)> {
    if state.dim() != operators.dim() {
        return Err(crate::error::mismatch(
            format!("state of dimension {}", operators.dim()),
            format!("dimension {}", state.dim()),
        ));
    }
    debug_assert!(
        operators.wrap_amplitude(&state.amplitudes) < 1e-14,
        "amplitude reached the periodic seam of S"
    );
    let mut next = operators.apply_unitary(&state.amplitudes);
    let detected = operators.remove_detected(&mut next);
    Ok((WalkState { amplitudes: next }, detected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn geometry_examples() {
        let g = ChainGeometry::new(0, -5, 5).unwrap();
        assert_eq!((g.site_count(), g.dim(), g.is_symmetric()), (11, 22, true));
        let g = ChainGeometry::new(0, -1, 1).unwrap();
        assert_eq!((g.site_count(), g.dim(), g.is_symmetric()), (3, 6, true));
        assert!(!ChainGeometry::new(2, -5, 5).unwrap().is_symmetric());
    }

    #[test]
    fn geometry_rejects_bad_ordering() {
        for (s, l, r) in [(0, 0, 5), (5, -5, 5), (0, 3, -3), (-7, -5, 5)] {
            assert!(matches!(ChainGeometry::new(s, l, r), Err(Error::InvalidGeometry(_))));
        }
    }

    #[test]
    fn basis_index_is_bijective() {
        let g = ChainGeometry::new(1, -3, 4).unwrap();
        for i in 0..g.dim() {
            assert_eq!(g.index(g.basis(i).unwrap()).unwrap(), i);
        }
        assert_eq!(g.index(BasisIndex::new(-3, Coin::Minus)).unwrap(), 1);
        assert!(g.basis(g.dim()).is_err());
        assert!(g.index(BasisIndex::new(5, Coin::Plus)).is_err());
    }

    #[test]
    fn unitarity_up_to_41_sites() {
        for half in 1..=20 {
            let ops = WalkOperators::new(&ChainGeometry::symmetric(half).unwrap());
            assert!(ops.unitary.unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn step_moves_plus_coin_right() {
        let g = ChainGeometry::symmetric(1).unwrap();
        let ops = WalkOperators::new(&g);
        let from = g.index(BasisIndex::new(0, Coin::Plus)).unwrap();
        let to = g.index(BasisIndex::new(1, Coin::Plus)).unwrap();
        let mut e = vec![ZERO; g.dim()];
        e[from] = ONE;
        let moved = ops.step.matvec(&e).unwrap();
        assert_eq!(moved[to], ONE);
        assert!((moved.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coin_on_plus_state() {
        let g = ChainGeometry::symmetric(1).unwrap();
        let ops = WalkOperators::new(&g);
        let i = g.index(BasisIndex::new(0, Coin::Plus)).unwrap();
        let mut e = vec![ZERO; g.dim()];
        e[i] = ONE;
        let out = ops.coin.matvec(&e).unwrap();
        assert!((out[i] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out[i + 1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn projector_algebra() {
        let ops = WalkOperators::new(&ChainGeometry::new(1, -4, 6).unwrap());
        let p = &ops.projector;
        let w = &ops.survivor;
        assert_eq!(p.matmul(p).unwrap(), *p);
        assert_eq!(p.adjoint(), *p);
        assert_eq!(w.matmul(w).unwrap(), *w);
        assert_eq!(p.matmul(w).unwrap().norm_max(), 0.0);
        assert_eq!(p.trace().re, 4.0);
    }

    #[test]
    fn structured_unitary_matches_dense() {
        let g = ChainGeometry::new(-1, -4, 3).unwrap();
        let ops = WalkOperators::new(&g);
        let psi: Vec<C64> = (0..g.dim()).map(|i| c(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let dense = ops.unitary.matvec(&psi).unwrap();
        let fast = ops.apply_unitary(&psi);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn initial_states() {
        let g = ChainGeometry::symmetric(5).unwrap();
        let i = g.index(BasisIndex::new(0, Coin::Plus)).unwrap();
        let s = initial_state(&g, &CoinSpec::Plus).unwrap();
        assert_eq!(s.amplitudes()[i], ONE);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        let s = initial_state(&g, &CoinSpec::Symmetric).unwrap();
        assert!((s.amplitudes()[i] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[i + 1] - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        let s = initial_state(&g, &CoinSpec::Explicit([ZERO, ONE])).unwrap();
        assert_eq!(s.amplitudes()[i + 1], ONE);
        assert!(matches!(
            initial_state(&g, &CoinSpec::Explicit([ONE, ONE])),
            Err(Error::InvalidCoin(_))
        ));
    }

    #[test]
    fn custom_coin_validation() {
        let g = ChainGeometry::symmetric(2).unwrap();
        let hadamard = [
            [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        ];
        assert!(WalkOperators::with_coin(&g, hadamard).is_ok());
        let bad = [[ONE, ONE], [ZERO, ONE]];
        assert!(matches!(WalkOperators::with_coin(&g, bad), Err(Error::InvalidCoin(_))));
    }

    #[test]
    fn nearest_neighbour_targets_absorb_in_one_step() {
        let g = ChainGeometry::symmetric(1).unwrap();
        let ops = WalkOperators::new(&g);
        let psi = initial_state(&g, &CoinSpec::Plus).unwrap();
        let (surv, det) = conditioned_step(&psi, &ops).unwrap();
        assert!((det - 1.0).abs() < 1e-15);
        assert!(surv.norm_sqr() < 1e-30);
    }

    #[test]
    fn distant_targets_see_nothing_at_first_step() {
        let g = ChainGeometry::symmetric(5).unwrap();
        let ops = WalkOperators::new(&g);
        let psi = initial_state(&g, &CoinSpec::Plus).unwrap();
        let (surv, det) = conditioned_step(&psi, &ops).unwrap();
        assert_eq!(det, 0.0);
        assert!((surv.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn probability_is_conserved_and_seam_stays_dark() {
        let g = ChainGeometry::new(1, -6, 7).unwrap();
        let ops = WalkOperators::new(&g);
        let mut psi = initial_state(&g, &CoinSpec::Symmetric).unwrap();
        let mut detected = 0.0;
        for _ in 0..100 {
            assert!(ops.wrap_amplitude(psi.amplitudes()) < 1e-14);
            let before = psi.norm_sqr();
            let (next, det) = conditioned_step(&psi, &ops).unwrap();
            assert!((next.norm_sqr() + det - before).abs() < 1e-14);
            assert!((0.0..=1.0).contains(&det));
            detected += det;
            psi = next;
        }
        assert!((detected + psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_coin_gives_mirror_symmetric_distribution() {
        let g = ChainGeometry::symmetric(8).unwrap();
        let ops = WalkOperators::new(&g);
        let mut psi = initial_state(&g, &CoinSpec::Symmetric).unwrap();
        for _ in 0..100 {
            psi = conditioned_step(&psi, &ops).unwrap().0;
            let probs = psi.site_probabilities();
            let n = probs.len();
            for k in 0..n {
                assert!((probs[k] - probs[n - 1 - k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_rejects_wrong_dimension() {
        let ops = WalkOperators::new(&ChainGeometry::symmetric(2).unwrap());
        let psi = WalkState::from_amplitudes(vec![ONE; 4]);
        assert!(matches!(
            conditioned_step(&psi, &ops),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
