//! Exact analysis of nonlinear finite state systems over prime fields.
//!
//! A finite state system (FSS) is an update map `F: F_p^n -> F_p^n` given by
//! polynomials, optionally with polynomial outputs `g: F_p^n -> F_p^m`. Every
//! such system becomes *linear* when lifted to the space of functions on the
//! state space: the lift of a function `psi` is `psi . F`. This crate builds
//! the smallest invariant subspace containing the coordinate functions (and
//! the outputs), represents the lifted dynamics there as a matrix `K1` over
//! `F_p`, and reads off solution structure, observability, initial-state
//! recovery, and deadbeat observers from finite-field linear algebra on `K1`.
//! Everything is exact; a brute-force oracle cross-checks the claims on
//! enumerable state spaces.

pub mod dynamics;
pub mod estimation;
pub mod field;
pub mod grid;
mod intfactor;
pub mod koopman;
pub mod matrix;
pub mod oracle;
pub mod poly;
pub mod sysdef;
pub mod unipoly;

pub use field::{FieldElem, FieldError, FieldSpec};
pub use koopman::KoopmanReduction;
pub use matrix::MatrixFp;
pub use poly::PolyFunc;
pub use sysdef::FssSystem;
pub use unipoly::UniPoly;
