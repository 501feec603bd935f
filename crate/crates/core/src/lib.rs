//! Symbolic calculus of variations on jet spaces.
//!
//! Expressions are exact polynomials over rational numbers in jet
//! coordinates, parameters, arbitrary functions and `exp`/`sin`/`cos`.
//! On top of that kernel the crate decides whether a system of differential
//! equations is variational, reconstructs a Lagrangian when it is, and sets
//! up and solves determining systems for multipliers and nonlinear
//! transformations that make a system variational.

pub mod dsl;
pub mod error;
pub mod expr;
pub mod forms;
pub mod homotopy;
pub mod ibp;
pub mod identity;
pub mod inverse;
pub mod jet;
pub mod quadrature;
pub mod scalar;
pub mod variationality;

pub use error::{Error, Result};
pub use expr::{Atom, Expr, FnApp, JetVar, Monomial, MultiIndex, Names, Style, Var};
pub use jet::{JetSpace, LinDiffOp, LinDiffOpMatrix};
pub use scalar::Scalar;

/// Exact coefficient field used by every symbolic computation.
pub type Rational = num_rational::BigRational;
/// Scalar used when evaluating expressions exactly.
pub type ExactScalar = Rational;
/// Scalar used for numerical corroboration and quadrature.
pub type FloatScalar = f64;
