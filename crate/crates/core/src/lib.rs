//! Discrete-time quantum trajectories under imperfect measurement.
//!
//! The crate simulates trajectories driven by a quantum instrument, runs the
//! mismatched filter from a wrong initial estimate, certifies the structural
//! hypotheses that make the filter stable (irreducibility, primitivity,
//! contractivity, non-darkness) and measures convergence of the trajectory
//! law towards its invariant measure.
//!
//! Module map:
//! - [`linalg`]: norms, PSD square roots, fidelity, density matrices.
//! - [`instrument`]: instruments, detector bias, superoperators, word maps.
//! - [`channel`]: invariant state, irreducibility, period, primitivity.
//! - [`contractivity`]: rank-one word maps and the non-darkness falsifier.
//! - [`trajectory`]: sampling, filtering, exact path-space quantities.
//! - [`ergodic`]: empirical invariant measures, exact pushforward, W1.
//! - [`io`]: instrument file format.

pub mod channel;
pub mod contractivity;
pub mod ergodic;
pub mod error;
pub mod fixtures;
pub mod instrument;
pub mod io;
pub mod linalg;
pub mod random;
pub mod stats;
pub mod tol;
pub mod trajectory;

pub use error::{Error, Result};
pub use instrument::{BiasMatrix, Instrument, OutcomeMap, SuperOpMatrix};
pub use linalg::{fidelity, CMatrix, DensityMatrix, C64};
pub use tol::{set_tolerances, tolerances, Tolerances};
