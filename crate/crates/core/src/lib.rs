//! Compressive principal component pursuit.
//!
//! Recovers a low-rank `L0` and a sparse `S0` from `P_Q (L0 + S0)`, where `Q`
//! is a known subspace of `m x n` matrices, by solving
//!
//! ```text
//! minimize ||L||_* + lambda ||S||_1   subject to   P_Q D = P_Q (L + S)
//! ```
//!
//! `Q` is always handled through an orthonormal basis of its complement
//! `Q^perp`, so `P_Q X = X - P_{Q^perp} X`. An empty basis is plain PCP.

pub mod certificate;
pub mod error;
pub mod instance;
pub mod json;
pub mod linalg;
pub mod rng;
pub mod solver;
pub mod subspaces;

pub use error::{Error, Result};
pub use instance::{assemble, GenParams, ProblemInstance, QModel};
pub use linalg::DenseMatrix;
pub use rng::SeededRng;
pub use solver::{solve_cpcp, solve_pcp, SolverOptions, SolverResult, SolverStatus};
pub use subspaces::{SpanBasis, Subspace, SupportSet, TangentSpace};
