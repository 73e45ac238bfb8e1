//! Minimal-lifting resolvent splitting for sums of maximally monotone
//! operators, with a decentralised cycle protocol, multi-block ADMM, and a
//! matrix calculus for checking frugal splitting schemes.

pub mod admm;
pub mod error;
pub mod linalg;
pub mod network;
pub mod operators;
pub mod problems;
pub mod scheme;
pub mod splitting;
mod textio;
pub mod trace;

pub use admm::{AdmmForm, KktResidual, SepProblem};
pub use error::{Error, Result};
pub use linalg::{Blocks, Mat, SvdResult};
pub use operators::{MonotoneOp, PartialMatrix};
pub use scheme::SchemeMatrices;
pub use splitting::{SolveReport, SplitState};
pub use trace::ResidualTrace;
