//! Finite-dimensional quantum measurement toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: dense complex linear algebra, density and unitary operators,
//!   finite outcome spaces, measures and projection-valued measures.
//! - [`instrument`]: instruments in Kraus form, POV measures, outcome
//!   statistics and posterior states.
//! - [`realization`]: measuring processes `{K, S, P, U}`, their canonical
//!   form, operator/scalar families and unitary invariants, plus the
//!   dilation, von Neumann and indirect constructors.
//! - [`stochrep`]: stochastic realizations, their gauge transforms and
//!   invariants, and factorization into quantum stochastic representations.
//! - [`qsa`]: channel-resolved outcome laws, posterior pure states,
//!   single-shot sampling and discrete-time trajectories.
//!
//! All values are immutable after construction and every operation is a
//! pure function of its inputs.

pub mod error;
pub mod fixtures;
pub mod instrument;
pub mod qcore;
pub mod qsa;
pub mod realization;
pub mod stochrep;
mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;
