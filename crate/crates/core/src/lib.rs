//! RBF-FD (radial basis function generated finite differences) solution of
//! Poisson's equation on scattered nodes in the unit disk.
//!
//! The pipeline is: [`geometry`] generates nodes, [`neighborhoods`] selects
//! supports, [`rbf_weights`] computes Laplacian stencils from `r³`
//! polyharmonic splines with monomial augmentation, and [`solver`] marches
//! the explicit pseudo-time iteration to steady state. [`perf_model`] holds
//! the working-set memory model and timing harness.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod kdtree;
pub mod lu;
pub mod neighborhoods;
pub mod perf_model;
pub mod rbf_weights;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{NodeKind, NodeSet, Point2};
pub use neighborhoods::StencilSet;
pub use rbf_weights::ShapeStore;
pub use solver::{Mode, Resolution, ScalarField, SolveConfig, SolveReport};
