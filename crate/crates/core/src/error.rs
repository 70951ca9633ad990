use thiserror::Error;

use crate::chaos::{MapKind, OrbitError, ParamError};
use crate::data::{DataError, VectorViolation};
use crate::model_io::ModelFileError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] ParamError),

    #[error("{kind} parameters {params:?} are infeasible: reservoir entry {index} is not finite")]
    Infeasible { kind: MapKind, params: Vec<f64>, index: usize },

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss); try a lower learning rate")]
    TrainingDiverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("feature vector rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidVector(Vec<VectorViolation>),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    ModelFile(#[from] ModelFileError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<OrbitError> for Error {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Diverged { kind, index, .. } => {
                Error::Infeasible { kind, params: Vec::new(), index }
            }
            OrbitError::NoScalarOrbit(kind) => {
                Error::Config(format!("{kind} has no scalar orbit"))
            }
            OrbitError::Params(p) => Error::Params(p),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { what, expected, got })
    }
}
