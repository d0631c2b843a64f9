//! Deterministic discrepancy minimization via multiplicative-weight-update
//! walks.
//!
//! Three solvers share one template: walk a point through `[-1,1]^n` along
//! unit directions drawn from the intersection of constraint subspaces,
//! chosen so that an exponential potential cannot increase, until at least
//! half the coordinates freeze at +-1. The solvers are:
//!
//! * [`partial`]: partial coloring against arbitrary unit constraint
//!   vectors with per-constraint slack parameters,
//! * [`setcol`]: full +-1 coloring of a set system by phased partial
//!   coloring (Spencer-type bounds),
//! * [`matrix`]: balancing of block-diagonal symmetric matrix families
//!   under a `Tr[exp(.)]` potential,
//! * [`column`]: sign selection for matrices with bounded column norms
//!   (`||Ax||_inf = O(sqrt(log n))`).
//!
//! [`instances`] provides deterministic generators and file formats,
//! [`verify`] independent result checking plus brute-force oracles for
//! small instances.
//!
//! All numerics are generic over the [`scalar::Scalar`] float type; the
//! [`Real`] alias fixes the default precision used by the CLI and tests.

pub mod column;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod matrix;
pub mod partial;
pub mod scalar;
pub mod setcol;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

/// Default scalar type used by the command-line tools and tests.
pub type Real = f64;

/// Partial-coloring instance at default precision.
pub type PartialColoringInstance = partial::Instance<Real>;

/// Block-diagonal matrix family at default precision.
pub type BlockMatrixFamily = matrix::BlockMatrixFamily<Real>;

/// Bounded-column-norm instance at default precision.
pub type ColumnInstance = column::ColumnInstance<Real>;
