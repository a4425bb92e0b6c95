//! Evaluation of y(t) = v + t·φ(−tA)(g − Av), the solution of the linear IVP
//! y′ = −Ay + g, y(0) = v, by restarted Krylov iteration with residual-based
//! stopping, plus two-grid / multigrid coarse-grid-correction (CGC) acceleration
//! for discretized diffusion operators.
//!
//! Module map:
//! - [`operators`]: CSR / matrix-free linear operators with exact matvec accounting
//! - [`smallmat`]: dense kernels — `expm`, scalar φ, and the projected action u(t) = tφ(−tH)βe₁
//! - [`krylov`]: Arnoldi/Lanczos, the exponential residual, RT and residual restarting
//! - [`transfer`]: grid transfer operators (linear / cubic spline) and vector splitting
//! - [`cgc`]: two-grid and multigrid coarse-grid-correction drivers
//! - [`problems`]: 1D periodic and 3D Dirichlet heat test problems
//! - [`oracle`]: dense references and the tight-tolerance reference solution

pub mod cgc;
pub mod error;
pub mod krylov;
pub mod operators;
pub mod oracle;
pub mod problems;
pub mod smallmat;
pub mod threads;
pub mod transfer;
pub(crate) mod vecops;

pub use error::{Error, Result};
pub use operators::{LinearOperator, OperatorKind, SparseMatrixCsr};
pub use smallmat::DenseMatrix;
