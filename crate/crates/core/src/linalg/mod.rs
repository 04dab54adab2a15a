//! Dense linear algebra over `f32`/`f64`: complex matrices, the Hermitian
//! kernel, and the real symmetric routines behind the SDP solver.

pub mod cmatrix;
pub mod hermitian;
pub mod rmatrix;

pub use cmatrix::{inner, norm, CMatrix};
pub use hermitian::{
    herm_eig, orthonormalize_against, partial_trace, purify, schmidt, schmidt_with_tol, HermEig,
    HermitianMatrix, LinalgError, PureState, Schmidt, System, DEFAULT_RANK_TOL,
};
pub use rmatrix::{cholesky_solve, NotPositiveDefinite, RMatrix};
