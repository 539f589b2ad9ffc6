//! Simulation library for a constrained spin-1/2 chain under two-rate and
//! dipolar square-pulse drives: blockaded Fock basis, dense exact
//! diagonalization, cycle unitaries, drive sequences, observables, and the
//! perturbative cross-checks that go with them.

pub use num_complex::Complex64 as C64;

pub mod effective;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod operators;
pub mod propagator;
pub mod protocols;
pub mod seqstats;

pub use error::{Error, Result};
