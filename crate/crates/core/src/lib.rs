//! Mean hitting times and spreading of classical and quantum walks on
//! finite chains with detectors, stochastic reset and noise.

// `!(x < tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod classical;
pub mod error;
pub mod hitting;
pub mod numerics;
pub mod optimizer;
pub mod par;
pub mod reference;
pub mod spread;
pub mod trajectories;
pub mod walk;

pub use error::{Error, Result};
pub use hitting::{quantum_mht, HittingResult, Method, MhtProblem};
pub use par::Execution;
pub use walk::{ChainGeometry, CoinSpec};
