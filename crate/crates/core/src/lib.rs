//! Optimal clock interrogation protocols via semidefinite programming.
//!
//! The linear algebra and SDP layers are generic over [`num::Real`]; the clock
//! model and everything built on it work in `f64`.

// `!(x > 0.0)` style guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod num;
pub mod program;
pub mod quadrature;
pub mod refine;
pub mod reconstruct;
pub mod rng;
pub mod sdp;

pub use num::Real;

pub type Hermitian64 = linalg::HermitianMatrix<f64>;
pub type Hermitian32 = linalg::HermitianMatrix<f32>;
pub type PureState64 = linalg::PureState<f64>;
pub type PureState32 = linalg::PureState<f32>;
pub type SdpProblem64 = sdp::BlockSdpProblem<f64>;
pub type SdpProblem32 = sdp::BlockSdpProblem<f32>;
pub type SdpSolution64 = sdp::BlockSdpSolution<f64>;
pub type SdpSolution32 = sdp::BlockSdpSolution<f32>;

pub use bounds::{bounds_report, lower_bound, BoundsReport};
pub use model::{ClockScenario, CostModel, DiscretizedPrior, PriorSpec};
pub use program::{solve_interrogation, InterrogationSolution};
pub use reconstruct::{reconstruct, verify_protocol, ReconstructedProtocol, VerifyReport};
pub use refine::{classical_chain, refine_estimates, refine_on_midpoint};
