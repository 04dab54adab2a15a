//! Block-structured semidefinite programs over Hermitian PSD blocks.

pub mod dump;
pub mod embed;
pub mod problem;
pub mod solver;

pub use dump::{parse_dump, write_dump};
pub use embed::{embed_matrix, real_embed, unembed, RealBlockProblem, SymEntry};
pub use problem::{
    residuals, BlockSdpProblem, BlockSdpSolution, Constraint, HermEntry, Residuals, SdpError, SolveStatus,
};
pub use solver::{solve, SolverOptions, DEPENDENT_ROW_TOL};
