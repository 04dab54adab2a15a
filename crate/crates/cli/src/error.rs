use chronos_core::bounds::BoundsError;
use chronos_core::experiments::ExperimentError;
use chronos_core::model::ModelError;
use chronos_core::program::ProgramError;
use chronos_core::reconstruct::ReconstructError;
use chronos_core::refine::RefineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("verification failure: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Verify(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<ProgramError> for CliError {
    fn from(e: ProgramError) -> Self {
        match e {
            ProgramError::Model(m) => m.into(),
            ProgramError::DimensionMismatch(_) => Self::Config(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        Self::Verify(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Model(m) => m.into(),
            BoundsError::Program(p) => p.into(),
            BoundsError::Reconstruct(r) => r.into(),
            BoundsError::Quadrature(_) | BoundsError::NoSamples(_) => Self::Solver(e.to_string()),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::Model(m) => m.into(),
            RefineError::Program(p) => p.into(),
            RefineError::NonDecreasingCost { .. } => Self::Solver(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Program(p) => p.into(),
            ExperimentError::Reconstruct(r) => r.into(),
            ExperimentError::Bounds(b) => b.into(),
            ExperimentError::Refine(r) => r.into(),
        }
    }
}
