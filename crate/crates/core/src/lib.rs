//! Proximal stochastic dual coordinate ascent for regularized loss minimization.
//!
//! The crate solves `min_w (1/n) sum_i phi_i(X_i^T w) + lambda g(w)` by ascending
//! the dual one example at a time, and certifies every answer with a duality gap.
//!
//! - [`model`]: datasets, problems, primal/dual objectives and gaps
//! - [`losses`], [`regularizers`]: closed-form conjugates
//! - [`solver`]: the generic coordinate ascent engine and its update rules
//! - [`structured`]: multiclass/structured training without an explicit dual matrix
//! - [`l1`]: l1-regularized problems solved through a strongly convex surrogate
//! - [`reference`]: slow batch solvers and brute-force checks
//! - [`io`]: svmlight data, model files, and traces

pub mod error;
pub mod io;
pub mod l1;
pub mod losses;
pub mod model;
pub mod norms;
pub mod reference;
pub mod regularizers;
pub mod solver;
pub mod sparse;
pub mod structured;

pub use error::{Error, Result};
pub use losses::{CostMatrix, Loss};
pub use model::{Dataset, DualMatrix, GapReport, Problem};
pub use norms::{Norm, NormPair};
pub use regularizers::Regularizer;
pub use solver::{OutputMode, RunOutput, SolverConfig, UpdateOption};
pub use sparse::{ExampleBlock, SparseVec};
