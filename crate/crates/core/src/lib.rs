//! Hamiltonian dynamics on almost-symplectic phase spaces `A x T^n`.
//!
//! The crate works in fixed action-angle coordinates `(a, alpha)` where the
//! two-form reads `sum da_i ^ dalpha_i + 1/2 sum A_ij(a) da_i ^ da_j`. It
//! provides exact polynomial/Fourier algebra ([`poly`], [`fourier`]), the
//! structure tensor and its kernels ([`structure`]), Hamiltonian vector
//! fields, the strong-Hamiltonian classifier and an adaptive integrator
//! ([`dynamics`]), integer lattice tools for torus reduction ([`lattice`]),
//! a single Lie-method normalization step ([`normalform`]) and the action
//! drift experiment engine ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fourier;
pub mod harness;
pub mod lattice;
pub mod normalform;
pub mod poly;
pub mod structure;

pub use error::{Error, Result};
pub use fourier::{FourierSeries, MultiIndex, Variable};
pub use poly::{ActionPolynomial, Rational};
pub use structure::{CTensorField, StructureMatrixField};
