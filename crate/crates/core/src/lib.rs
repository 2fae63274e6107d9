//! Symmetric, unisolvent interpolation nodes for finite elements.
//!
//! Node sets are built as unions of symmetry orbits of the reference
//! element and optimized for interpolation quality by minimizing the
//! integrated square of the Lagrange basis.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::too_many_arguments)]

pub mod baselines;
pub mod basis;
pub mod cli;
pub mod compatibility;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nodefile;
pub mod optimizer;
pub mod parallel;
pub mod qp;
pub mod quadrature;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::{reference_element, ElementKind, ReferenceElement};
