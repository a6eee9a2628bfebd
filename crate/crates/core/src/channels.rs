//! Kraus channels: unitary walk, stochastic reset, coin bit-flip, coin
//! amplitude damping, and their composition.
//!
//! Every operator carries a renewal flag. Flagged operators are the reset
//! branch: together they map any `ρ` to `r·Tr(ρ)·σ` for a fixed state `σ`,
//! while the unflagged ones scale the trace by `1 − r`. Composition keeps
//! both properties, which lets the hitting engine treat reset as a rank-one
//! term instead of folding it into a nearly singular resolvent.

use crate::error::{mismatch, Error, Result};
use crate::numerics::{ComplexMatrix, C64, ONE, ZERO};
use crate::walk::{ChainGeometry, WalkOperators, WalkState};

/// Tolerance on `‖Σ K†K − I‖` for accepting a channel.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    renewal: Vec<bool>,
    label: String,
}

impl KrausChannel {
    /// Channel from explicit Kraus operators; none are treated as renewal.
    pub fn new(operators: Vec<ComplexMatrix>, label: impl Into<String>) -> Result<Self> {
        let renewal = vec![false; operators.len()];
        Self::with_renewal(operators, renewal, label)
    }

    fn with_renewal(operators: Vec<ComplexMatrix>, renewal: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let Some(first) = operators.first() else {
            return Err(Error::InvalidChannel(
                "a channel needs at least one Kraus operator".into(),
            ));
        };
        let n = first.rows();
        if let Some(bad) = operators.iter().find(|k| k.rows() != n || k.cols() != n) {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators must all be {n}x{n}, found {}x{}",
                bad.rows(),
                bad.cols()
            )));
        }
        let channel = Self {
            operators,
            renewal,
            label,
        };
        let residual = channel.completeness_residual();
        if !(residual < COMPLETENESS_TOLERANCE) {
            return Err(Error::InvalidChannel(format!(
                "completeness residual {residual:e} for channel '{}'",
                channel.label
            )));
        }
        Ok(channel)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![ComplexMatrix::identity(dim)],
            renewal: vec![false],
            label: "identity".into(),
        }
    }

    /// Single-operator channel `{U}`.
    pub fn from_unitary(u: &ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let residual = u.unitarity_residual();
        if !(residual < 1e-12) {
            return Err(Error::InvalidChannel(format!(
                "operator is not unitary (residual {residual:e})"
            )));
        }
        Self::new(vec![u.clone()], label)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// Renewal flag per operator, aligned with [`Self::operators`].
    pub fn renewal_mask(&self) -> &[bool] {
        &self.renewal
    }

    pub fn has_renewal(&self) -> bool {
        self.renewal.iter().any(|&r| r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }

    /// `max |Σ K†K − I|`.
    pub fn completeness_residual(&self) -> f64 {
        let n = self.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        for k in &self.operators {
            let kk = k.adjoint().matmul(k).expect("square operators");
            sum.add_assign(&kk).expect("equal sizes");
        }
        sum.max_abs_diff(&ComplexMatrix::identity(n)).expect("equal sizes")
    }

    /// `Σ K ρ K†`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim();
        if rho.rows() != n || rho.cols() != n {
            return Err(mismatch(
                format!("{n}x{n} density matrix"),
                format!("{}x{}", rho.rows(), rho.cols()),
            ));
        }
        let mut out = ComplexMatrix::zeros(n, n);
        for k in &self.operators {
            let term = k.matmul(rho)?.matmul(&k.adjoint())?;
            out.add_assign(&term)?;
        }
        Ok(out)
    }
}

/// Stochastic reset parameters.
#[derive(Debug, Clone)]
pub struct ResetParams {
    p: f64,
    reset_state: WalkState,
}

impl ResetParams {
    /// Requires `0 ≤ p < 1` and a normalized reset state.
    pub fn new(p: f64, reset_state: WalkState) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidChannel(format!(
                "reset probability must lie in [0, 1), got {p}"
            )));
        }
        let norm = reset_state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidChannel(format!("reset state has squared norm {norm}")));
        }
        Ok(Self { p, reset_state })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn reset_state(&self) -> &WalkState {
        &self.reset_state
    }
}

/// Coin bit-flip probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    q: f64,
}

impl NoiseParams {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidChannel(format!(
                "noise probability must lie in [0, 1], got {q}"
            )));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

pub fn unitary_channel(operators: &WalkOperators) -> Result<KrausChannel> {
    KrausChannel::from_unitary(&operators.unitary, "unitary")
}

/// `{√(1−p)·U} ∪ {√p·|Ψ₀⟩⟨j| : j = 0..N}`.
pub fn reset_channel(operators: &WalkOperators, reset: &ResetParams) -> Result<KrausChannel> {
    let n = operators.dim();
    let psi = reset.reset_state().amplitudes();
    if psi.len() != n {
        return Err(Error::InvalidChannel(format!(
            "reset state has dimension {}, walk has {n}",
            psi.len()
        )));
    }
    let p = reset.p();
    let mut ops = Vec::with_capacity(n + 1);
    let mut renewal = Vec::with_capacity(n + 1);
    ops.push(operators.unitary.scale_real((1.0 - p).sqrt()));
    renewal.push(false);
    let amp = p.sqrt();
    for j in 0..n {
        let mut k = ComplexMatrix::zeros(n, n);
        for (i, &a) in psi.iter().enumerate() {
            k[(i, j)] = a * amp;
        }
        ops.push(k);
        renewal.push(true);
    }
    KrausChannel::with_renewal(ops, renewal, format!("reset(p={p})"))
}

/// `{√(1−q)·I, √q·(I_x ⊗ σ_x)}`.
pub fn bitflip_channel(noise: NoiseParams, geometry: &ChainGeometry) -> Result<KrausChannel> {
    let n = geometry.dim();
    let q = noise.q();
    let mut flip = ComplexMatrix::zeros(n, n);
    for s in 0..n / 2 {
        flip[(2 * s, 2 * s + 1)] = ONE;
        flip[(2 * s + 1, 2 * s)] = ONE;
    }
    let ops = vec![
        ComplexMatrix::identity(n).scale_real((1.0 - q).sqrt()),
        flip.scale_real(q.sqrt()),
    ];
    KrausChannel::new(ops, format!("bitflip(q={q})"))
}

/// Coin amplitude damping at every site: `|−1⟩ → |+1⟩` with probability `gamma`.
pub fn amplitude_damping_channel(gamma: f64, geometry: &ChainGeometry) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidChannel(format!(
            "damping probability must lie in [0, 1], got {gamma}"
        )));
    }
    let n = geometry.dim();
    let keep = C64::new((1.0 - gamma).sqrt(), 0.0);
    let decay = C64::new(gamma.sqrt(), 0.0);
    let mut k0 = ComplexMatrix::zeros(n, n);
    let mut k1 = ComplexMatrix::zeros(n, n);
    for s in 0..n / 2 {
        k0[(2 * s, 2 * s)] = ONE;
        k0[(2 * s + 1, 2 * s + 1)] = keep;
        k1[(2 * s, 2 * s + 1)] = decay;
    }
    KrausChannel::new(vec![k0, k1], format!("amplitude_damping(gamma={gamma})"))
}

/// `second ∘ first`: operators `{K̄_j·K_i}`, with `i` running fastest.
pub fn compose(first: &KrausChannel, second: &KrausChannel) -> Result<KrausChannel> {
    if first.dim() != second.dim() {
        return Err(Error::InvalidChannel(format!(
            "cannot compose channels of dimension {} and {}",
            first.dim(),
            second.dim()
        )));
    }
    let mut ops = Vec::with_capacity(first.len() * second.len());
    let mut renewal = Vec::with_capacity(first.len() * second.len());
    for (kb, &rb) in second.operators.iter().zip(&second.renewal) {
        for (k, &r) in first.operators.iter().zip(&first.renewal) {
            ops.push(kb.matmul(k)?);
            renewal.push(r || rb);
        }
    }
    KrausChannel::with_renewal(ops, renewal, format!("{} then {}", first.label, second.label))
}

/// Channel-level split used by the hitting engine: the non-renewal Kraus
/// operators plus the state the renewal branch lands in.
#[derive(Debug, Clone)]
pub(crate) struct RenewalSplit<'a> {
    pub core: Vec<&'a ComplexMatrix>,
    /// `Σ_renewal K ρ K†` for any unit-trace `ρ`, i.e. `r·σ`.
    pub landing: ComplexMatrix,
    pub rate: f64,
}

impl KrausChannel {
    /// Splits off the renewal branch, or `None` when the channel has none (or
    /// its renewal operators do not have the rank-one landing structure).
    pub(crate) fn renewal_split(&self) -> Option<RenewalSplit<'_>> {
        if !self.has_renewal() {
            return None;
        }
        let n = self.dim();
        let flagged: Vec<&ComplexMatrix> = self
            .operators
            .iter()
            .zip(&self.renewal)
            .filter_map(|(k, &r)| r.then_some(k))
            .collect();
        let landing_from = |col: usize| {
            let mut out = ComplexMatrix::zeros(n, n);
            for k in &flagged {
                let v = k.column(col);
                for j in 0..n {
                    if v[j] == ZERO {
                        continue;
                    }
                    for i in 0..n {
                        out[(i, j)] += v[i] * v[j].conj();
                    }
                }
            }
            out
        };
        let landing = landing_from(0);
        let rate = landing.trace().re;
        if !(rate > 0.0) {
            return None;
        }
        // The branch must land in the same state from every input and scale
        // trace uniformly; otherwise the rank-one treatment does not apply.
        let mut effect = ComplexMatrix::zeros(n, n);
        for k in &flagged {
            effect.add_assign(&k.adjoint().matmul(k).ok()?).ok()?;
        }
        let uniform = effect.max_abs_diff(&ComplexMatrix::identity(n).scale_real(rate)).ok()? < 1e-12;
        let same_landing = n < 2 || landing_from(n - 1).max_abs_diff(&landing).ok()? < 1e-12;
        if !(uniform && same_landing) {
            return None;
        }
        let core = self
            .operators
            .iter()
            .zip(&self.renewal)
            .filter_map(|(k, &r)| (!r).then_some(k))
            .collect();
        Some(RenewalSplit { core, landing, rate })
    }
}
