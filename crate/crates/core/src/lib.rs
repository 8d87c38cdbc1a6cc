//! Numerical toolkit for von Neumann-type inequalities of noncommutative
//! *-polynomials: polynomial algebra, constrained matrix classes, norm
//! evaluation, multi-start maximization and explicit dilation constructions.

pub mod cli;
pub mod constructions;
pub mod error;
pub mod linalg;
pub mod linops;
pub mod matclasses;
pub mod ncpoly;
pub mod optimize;

pub use error::{Error, Result};
pub use matclasses::{ConstraintClass, MatrixTuple};
pub use ncpoly::{parse, NCPolynomial};
