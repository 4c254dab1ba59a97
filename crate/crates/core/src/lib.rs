//! Iterative jumping thresholding (IJT) for sparse recovery with
//! non-convex separable penalties `phi(|x_i|)`, together with the
//! diagnostics that check its convergence conditions on concrete runs and
//! the baselines and instance generators used to compare it.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod penalty;
pub mod probgen;
pub mod prox;
pub mod solver;
pub mod testkit;

pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::Matrix;
pub use loss::{LossKind, Problem, SmoothLoss};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use prox::{prox_scalar, prox_vector, thresholds, JumpThreshold, ThresholdPair};
pub use solver::{ijt_solve, Init, SolveResult, SolverConfig, Status, StepSize, Thresholding};
