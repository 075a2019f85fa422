//! Symbolic engine for the double reduction of conserved PDE systems.
//!
//! The crate is `no_std` (it needs `alloc`). It provides:
//!
//! - [`expr`]: immutable expression trees with exact rational coefficients,
//!   a parser/printer pair, total and partial differentiation, substitution
//!   and a canonical normal form.
//! - [`symmetry`]: Lie point symmetry generators, characteristics and
//!   prolongation.
//! - [`conservation`]: PDE systems, conserved vectors, divergence checks and
//!   the association bracket.
//! - [`coordinates`]: canonical coordinates, coordinate changes with their
//!   Jacobian matrices, and the transformation of conserved vectors and
//!   generators.
//! - [`pipeline`]: the iterated reduction driver that ends in a first
//!   integral.
//! - [`oracle`]: randomized numeric verification of symbolic identities.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conservation;
pub mod context;
pub mod coordinates;
mod error;
pub mod expr;
pub mod matrix;
pub mod oracle;
pub mod pipeline;
pub mod symmetry;

pub use conservation::{Association, ConservedVector, Equation, PdeSystem};
pub use context::VariableContext;
pub use coordinates::{CanonicalOptions, CanonicalResult, CoordinateChange};
pub use error::{Error, Result};
pub use expr::{DerivAtom, Expr, Rational, SymbolKind};
pub use matrix::Matrix;
pub use oracle::ZeroTest;
pub use pipeline::{
    ChangeSpec, FirstIntegral, PipelineOptions, ReductionStep, ReductionTrace, SelectionStrategy, StagePlan,
};
pub use symmetry::Generator;
