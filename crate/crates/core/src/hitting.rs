//! Mean hitting times of measured walks.
//!
//! With detection superoperator `B` and survival superoperator `M`, the
//! detection probability at step `t` is `Tr(B M^(t−1) ρ₀)` and the mean
//! hitting time is `Tr(B (I − M)⁻² ρ₀)`. [`mht_resolvent`] evaluates the
//! closed form with LU solves; [`mht_series`] sums the series directly.
//!
//! Reset channels make `I − M` nearly singular at high reset rates (the
//! walker is rarely detected), so when the channel has a renewal branch `M`
//! is split as `M_core + w·vec(I)ᵀ` and the resolvent is applied with the
//! Sherman–Morrison formula. The scalar it divides by is computed as a sum
//! of detection probabilities, never as `1 − (something close to 1)`.

use serde::{Deserialize, Serialize};

use crate::channels::{bitflip_channel, compose, reset_channel, KrausChannel, NoiseParams, ResetParams};
use crate::classical::{mht_with_reset, ClassicalWalkSpec};
use crate::error::{mismatch, Error, Result};
use crate::numerics::{vec_trace, vectorize, ComplexMatrix, LuFactorization, C64, ZERO};
use crate::par::{map_slice, Execution};
use crate::walk::{initial_state, ChainGeometry, CoinSpec, DensityMatrix, WalkOperators};

/// Default survival threshold for [`mht_series`].
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-10;
/// Step cap for [`mht_series`].
pub const SERIES_HORIZON_CAP: usize = 10_000_000;
/// Relative bound on the imaginary part of a computed hitting time.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;
/// Condition estimates beyond this are reported as a divergent hitting time.
const DIVERGENT_CONDITION: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Resolvent,
    Series,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Resolvent => "resolvent",
            Method::Series => "series",
            Method::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imaginary_residue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censored_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingResult {
    pub mht: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Rank-one renewal part of the superoperators.
#[derive(Debug, Clone)]
struct RenewalTerm {
    b_core: ComplexMatrix,
    m_core: ComplexMatrix,
    /// `vec(P·landing·P)`.
    detected: Vec<C64>,
    /// `vec(W·landing·W)`.
    survivor: Vec<C64>,
    rate: f64,
}

/// `B` and `M` acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct HittingSuperoperators {
    dim: usize,
    pub b_matrix: ComplexMatrix,
    pub m_matrix: ComplexMatrix,
    renewal: Option<RenewalTerm>,
}

impl HittingSuperoperators {
    /// Dimension of the underlying Hilbert space (not of the superoperators).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_renewal(&self) -> bool {
        self.renewal.is_some()
    }

    /// `(B vec ρ, M vec ρ)`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let v = vectorize(rho)?;
        if v.len() != self.dim * self.dim {
            return Err(mismatch(
                format!("{0}x{0} density matrix", self.dim),
                format!("{}x{}", rho.rows(), rho.cols()),
            ));
        }
        let b = self.b_matrix.matvec(&v)?;
        let m = self.m_matrix.matvec(&v)?;
        Ok((
            ComplexMatrix::new(self.dim, self.dim, b)?,
            ComplexMatrix::new(self.dim, self.dim, m)?,
        ))
    }
}

/// `B = Σ conj(P K) ⊗ P K`, `M = Σ conj(W K) ⊗ W K`.
pub fn build_superoperators(channel: &KrausChannel, operators: &WalkOperators) -> Result<HittingSuperoperators> {
    let n = operators.dim();
    if channel.dim() != n {
        return Err(mismatch(
            format!("channel of dimension {n}"),
            format!("dimension {}", channel.dim()),
        ));
    }
    let nn = n * n;
    let p = &operators.projector;
    let w = &operators.survivor;

    let mut b_matrix = ComplexMatrix::zeros(nn, nn);
    let mut m_matrix = ComplexMatrix::zeros(nn, nn);
    let split = channel.renewal_split();
    let mut core = split
        .as_ref()
        .map(|_| (ComplexMatrix::zeros(nn, nn), ComplexMatrix::zeros(nn, nn)));

    for (k, &is_renewal) in channel.operators().iter().zip(channel.renewal_mask()) {
        let pk = p.matmul(k)?;
        let wk = w.matmul(k)?;
        let (pkc, wkc) = (pk.conj(), wk.conj());
        pkc.kron_accumulate(&pk, &mut b_matrix);
        wkc.kron_accumulate(&wk, &mut m_matrix);
        if let (Some((b_core, m_core)), false) = (core.as_mut(), is_renewal) {
            pkc.kron_accumulate(&pk, b_core);
            wkc.kron_accumulate(&wk, m_core);
        }
    }

    let renewal = match (split, core) {
        (Some(split), Some((b_core, m_core))) => {
            let detected = p.matmul(&split.landing)?.matmul(p)?;
            let survivor = w.matmul(&split.landing)?.matmul(w)?;
            Some(RenewalTerm {
                b_core,
                m_core,
                detected: vectorize(&detected)?,
                survivor: vectorize(&survivor)?,
                rate: split.rate,
            })
        }
        _ => None,
    };

    Ok(HittingSuperoperators {
        dim: n,
        b_matrix,
        m_matrix,
        renewal,
    })
}

fn identity_minus(m: &ComplexMatrix) -> ComplexMatrix {
    let mut a = m.scale_real(-1.0);
    for i in 0..a.rows() {
        a[(i, i)] += 1.0;
    }
    a
}

fn factor_resolvent(a: &ComplexMatrix) -> Result<LuFactorization> {
    let lu = LuFactorization::factor(a).map_err(|e| match e {
        Error::SingularMatrix { column, pivot } => Error::InfiniteMht(format!(
            "I - M is singular (pivot {pivot:e} at column {column}); the detectors are unreachable"
        )),
        other => other,
    })?;
    if !(lu.condition_estimate() < DIVERGENT_CONDITION) {
        return Err(Error::InfiniteMht(format!(
            "I - M has condition estimate {:e}; the detectors are effectively unreachable",
            lu.condition_estimate()
        )));
    }
    Ok(lu)
}

/// `Tr(B (I − M)⁻² ρ₀)` by LU solves against a single factorization.
pub fn mht_resolvent(supers: &HittingSuperoperators, rho0: &DensityMatrix) -> Result<HittingResult> {
    let n = supers.dim;
    if rho0.dim() != n {
        return Err(mismatch(
            format!("{n}x{n} initial state"),
            format!("{0}x{0}", rho0.dim()),
        ));
    }
    let r0 = vectorize(rho0.matrix())?;

    let (value, condition) = match &supers.renewal {
        Some(renewal) => {
            let lu = factor_resolvent(&identity_minus(&renewal.m_core))?;
            let aw = lu.solve(&renewal.survivor)?;
            // 1 − vᵀA⁻¹w rewritten via trace conservation as
            // (Tr(detected) + vᵀ B_core A⁻¹ w) / r; every term is a probability.
            let detect_before_renewal =
                vec_trace(&renewal.detected, n).re + vec_trace(&renewal.b_core.matvec(&aw)?, n).re;
            let denominator = detect_before_renewal / renewal.rate;
            if !(denominator > 0.0) || !denominator.is_finite() {
                return Err(Error::InfiniteMht(format!(
                    "walker is never detected between resets (detection weight {detect_before_renewal:e})"
                )));
            }
            let resolve = |x: &[C64]| -> Result<Vec<C64>> {
                let mut y = lu.solve(x)?;
                let coeff = vec_trace(&y, n) / denominator;
                for (yi, wi) in y.iter_mut().zip(&aw) {
                    *yi += wi * coeff;
                }
                Ok(y)
            };
            let z = resolve(&resolve(&r0)?)?;
            (vec_trace(&supers.b_matrix.matvec(&z)?, n), lu.condition_estimate())
        }
        None => {
            let lu = factor_resolvent(&identity_minus(&supers.m_matrix))?;
            let z = lu.solve(&lu.solve(&r0)?)?;
            (vec_trace(&supers.b_matrix.matvec(&z)?, n), lu.condition_estimate())
        }
    };

    finish_real(value, Method::Resolvent).map(|mut r| {
        r.diagnostics.condition_estimate = Some(condition);
        r
    })
}

fn finish_real(value: C64, method: Method) -> Result<HittingResult> {
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::InfiniteMht(format!("hitting time evaluated to {value}")));
    }
    if value.im.abs() > IMAGINARY_TOLERANCE * value.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue {
            real: value.re,
            imaginary: value.im,
        });
    }
    if !(value.re > 0.0) {
        return Err(Error::InfiniteMht(format!("non-positive hitting time {}", value.re)));
    }
    Ok(HittingResult {
        mht: value.re,
        method,
        diagnostics: Diagnostics {
            imaginary_residue: Some(value.im.abs()),
            ..Diagnostics::default()
        },
    })
}

/// Nonzero entries of a dense operator, for repeated sandwiching.
#[derive(Debug, Clone)]
struct Nonzeros(Vec<(usize, usize, C64)>);

impl Nonzeros {
    fn of(m: &ComplexMatrix) -> Self {
        let mut out = Vec::new();
        for j in 0..m.cols() {
            for (i, &v) in m.column(j).iter().enumerate() {
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        Self(out)
    }

    /// `out += K ρ K†`.
    fn sandwich_into(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        for &(i, a, ka) in &self.0 {
            for &(j, b, kb) in &self.0 {
                let r = rho[(a, b)];
                if r != ZERO {
                    out[(i, j)] += ka * r * kb.conj();
                }
            }
        }
    }

    /// `Tr(K ρ K†)`.
    fn sandwich_trace(&self, rho: &ComplexMatrix) -> f64 {
        let mut acc = ZERO;
        for &(i, a, ka) in &self.0 {
            for &(j, b, kb) in &self.0 {
                if i == j {
                    acc += ka * rho[(a, b)] * kb.conj();
                }
            }
        }
        acc.re
    }
}

/// Step-by-step measured evolution `ρ ← Mρ`, reporting `Tr(Bρ)` per step.
#[derive(Debug, Clone)]
pub struct MeasuredEvolution {
    survive: Vec<Nonzeros>,
    detect: Vec<Nonzeros>,
    /// `W·landing·W` and `Tr(P·landing·P)` for the renewal branch.
    landing: Option<(ComplexMatrix, f64)>,
    rho: ComplexMatrix,
    t: usize,
}

impl MeasuredEvolution {
    pub fn new(channel: &KrausChannel, operators: &WalkOperators, rho0: &DensityMatrix) -> Result<Self> {
        let n = operators.dim();
        if channel.dim() != n {
            return Err(mismatch(
                format!("channel of dimension {n}"),
                format!("dimension {}", channel.dim()),
            ));
        }
        if rho0.dim() != n {
            return Err(mismatch(
                format!("{n}x{n} initial state"),
                format!("{0}x{0}", rho0.dim()),
            ));
        }
        let p = &operators.projector;
        let w = &operators.survivor;
        let split = channel.renewal_split();
        let core: Vec<&ComplexMatrix> = match &split {
            Some(s) => s.core.clone(),
            None => channel.operators().iter().collect(),
        };
        let mut survive = Vec::with_capacity(core.len());
        let mut detect = Vec::with_capacity(core.len());
        for k in core {
            survive.push(Nonzeros::of(&w.matmul(k)?));
            detect.push(Nonzeros::of(&p.matmul(k)?));
        }
        let landing = match split {
            Some(s) => Some((
                w.matmul(&s.landing)?.matmul(w)?,
                p.matmul(&s.landing)?.matmul(p)?.trace().re,
            )),
            None => None,
        };
        Ok(Self {
            survive,
            detect,
            landing,
            rho: rho0.matrix().clone(),
            t: 0,
        })
    }

    /// Advances one step; returns the detection probability at that step.
    pub fn step(&mut self) -> f64 {
        let n = self.rho.rows();
        let mut next = ComplexMatrix::zeros(n, n);
        let mut detected = 0.0;
        for (s, d) in self.survive.iter().zip(&self.detect) {
            s.sandwich_into(&self.rho, &mut next);
            detected += d.sandwich_trace(&self.rho);
        }
        if let Some((landing_w, landing_p)) = &self.landing {
            let tr = self.rho.trace().re;
            next.add_assign(&landing_w.scale_real(tr)).expect("equal sizes");
            detected += tr * landing_p;
        }
        self.rho = next;
        self.t += 1;
        detected
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Trace of the unnormalized surviving state.
    pub fn survival(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn state(&self) -> &ComplexMatrix {
        &self.rho
    }
}

/// Detection probabilities `p(1), …, p(horizon)`.
pub fn detection_distribution(
    channel: &KrausChannel,
    operators: &WalkOperators,
    rho0: &DensityMatrix,
    horizon: usize,
) -> Result<Vec<f64>> {
    let mut evo = MeasuredEvolution::new(channel, operators, rho0)?;
    Ok((0..horizon).map(|_| evo.step()).collect())
}

/// `Σ t·p(t)` until survival drops below `tail_epsilon`, plus a geometric tail.
pub fn mht_series(
    channel: &KrausChannel,
    operators: &WalkOperators,
    rho0: &DensityMatrix,
    tail_epsilon: f64,
) -> Result<HittingResult> {
    mht_series_capped(channel, operators, rho0, tail_epsilon, SERIES_HORIZON_CAP)
}

/// As [`mht_series`], giving up with `NonConvergent` after `horizon_cap` steps.
pub fn mht_series_capped(
    channel: &KrausChannel,
    operators: &WalkOperators,
    rho0: &DensityMatrix,
    tail_epsilon: f64,
    horizon_cap: usize,
) -> Result<HittingResult> {
    if !(tail_epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tail epsilon must be positive, got {tail_epsilon}"
        )));
    }
    let mut evo = MeasuredEvolution::new(channel, operators, rho0)?;
    let mut previous = evo.survival();
    let mut acc = 0.0;
    // Kahan compensation; the sum runs for up to millions of steps.
    let mut carry = 0.0;
    loop {
        let detected = evo.step();
        let t = evo.time();
        let term = t as f64 * detected - carry;
        let sum = acc + term;
        carry = (sum - acc) - term;
        acc = sum;
        let survival = evo.survival();
        if survival < tail_epsilon {
            let ratio = if previous > 0.0 { survival / previous } else { 0.0 };
            let tail = if survival > 0.0 && ratio < 1.0 {
                survival * ((t + 1) as f64 + ratio / (1.0 - ratio))
            } else {
                0.0
            };
            let mut result = finish_real(C64::new(acc + tail, 0.0), Method::Series)?;
            result.diagnostics.horizon = Some(t);
            result.diagnostics.imaginary_residue = None;
            return Ok(result);
        }
        if t >= horizon_cap {
            return Err(Error::NonConvergent { horizon: t, survival });
        }
        previous = survival;
    }
}

/// Walk channel with reset probability `p` followed by coin bit-flip noise `q`.
pub fn walk_channel(operators: &WalkOperators, coin: &CoinSpec, p: f64, q: f64) -> Result<KrausChannel> {
    let geometry = operators.geometry();
    let psi0 = initial_state(geometry, coin)?;
    let noise = NoiseParams::new(q)?;
    let reset = reset_channel(operators, &ResetParams::new(p, psi0)?)?;
    if noise.q() == 0.0 {
        return Ok(reset);
    }
    compose(&reset, &bitflip_channel(noise, geometry)?)
}

/// Fully specified hitting-time problem.
#[derive(Debug, Clone)]
pub struct MhtProblem {
    pub operators: WalkOperators,
    pub channel: KrausChannel,
    pub rho0: DensityMatrix,
}

impl MhtProblem {
    pub fn new(geometry: &ChainGeometry, coin: &CoinSpec, p: f64, q: f64) -> Result<Self> {
        let operators = WalkOperators::new(geometry);
        let channel = walk_channel(&operators, coin, p, q)?;
        let rho0 = DensityMatrix::from_pure(&initial_state(geometry, coin)?);
        Ok(Self {
            operators,
            channel,
            rho0,
        })
    }

    pub fn resolvent(&self) -> Result<HittingResult> {
        mht_resolvent(&build_superoperators(&self.channel, &self.operators)?, &self.rho0)
    }

    pub fn series(&self, tail_epsilon: f64) -> Result<HittingResult> {
        mht_series(&self.channel, &self.operators, &self.rho0, tail_epsilon)
    }

    pub fn series_capped(&self, tail_epsilon: f64, horizon_cap: usize) -> Result<HittingResult> {
        mht_series_capped(&self.channel, &self.operators, &self.rho0, tail_epsilon, horizon_cap)
    }
}

/// Resolvent MHT for a walk started at `x_start` with the given coin, reset `p` and noise `q`.
pub fn quantum_mht(geometry: &ChainGeometry, coin: &CoinSpec, p: f64, q: f64) -> Result<HittingResult> {
    MhtProblem::new(geometry, coin, p, q)?.resolvent()
}

/// Resolvent MHT over a list of `(p, q)` points, in input order.
pub fn mht_grid(
    geometry: &ChainGeometry,
    coin: &CoinSpec,
    points: &[(f64, f64)],
    execution: Execution,
) -> Vec<Result<HittingResult>> {
    map_slice(execution, points, |&(p, q)| quantum_mht(geometry, coin, p, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingComparison {
    pub quantum: f64,
    pub classical: f64,
    pub difference: f64,
}

/// Quantum MHT under reset `p` and noise `q` (coin `|+1⟩`) next to the
/// classical walk with the same reset.
pub fn classical_embedding_check(q: f64, p: f64, geometry: &ChainGeometry) -> Result<EmbeddingComparison> {
    if !geometry.is_symmetric() {
        return Err(Error::InvalidGeometry(
            "the embedding comparison needs a symmetric start".into(),
        ));
    }
    let quantum = quantum_mht(geometry, &CoinSpec::Plus, p, q)?.mht;
    let classical = mht_with_reset(&ClassicalWalkSpec::new(*geometry, p)?)?;
    Ok(EmbeddingComparison {
        quantum,
        classical,
        difference: (quantum - classical).abs(),
    })
}
