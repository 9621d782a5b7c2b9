//! Rearrangement-invariant quasi-norms of independent random variables.
//!
//! Random variables are carried by their laws ([`DiscreteDistribution`]):
//! finitely many `(value, mass)` atoms on either the unit interval or the
//! half line. On top of that carrier the crate provides
//!
//! * [`measure`]: distribution functions, decreasing rearrangements, disjoint
//!   sums, dilations and exact laws of independent sums and maxima;
//! * [`spaces`]: quasi-norms and modulars of the concrete sequence spaces
//!   (`ℓ_q`, `ℓ_∞`, weak `ℓ_1`) and function spaces (`L_p`, `L_p + L_q`,
//!   `L_p ∩ L_q`, Orlicz, Marcinkiewicz), plus the mixed quantity
//!   `‖ ‖(f_k)‖_E ‖_X` evaluated by exact product enumeration;
//! * [`kruglov`]: the Kruglov (compound Poisson) transform, exactly and by
//!   sampling, and the Marcinkiewicz profile `ψ` it induces;
//! * [`combinatorics`]: doubly stochastic level matrices, the Junge
//!   statistic and the order-statistic event probability;
//! * [`harness`]: seeded experiment runner and the exact-constant suite.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod error;
pub mod harness;
pub mod kruglov;
pub mod measure;
pub mod spaces;

pub use error::{Error, Result};
pub use measure::{Ambient, Atom, DiscreteDistribution, Domination, NonnegSequence};
pub use spaces::{OrliczFunction, OrliczKind, PsiTable, SeqSpaceSpec, SpaceSpec};

/// Values closer than this (relative to `max(1, |v|)`) are merged into one atom.
pub const TAU_VAL: f64 = 1e-12;

/// Tolerance for mass conservation and stochasticity identities.
pub const TAU_MASS: f64 = 1e-9;

/// Largest number of product atoms any exact enumeration may visit.
pub const ENUMERATION_CAP: u64 = 10_000_000;
