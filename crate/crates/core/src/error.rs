use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qudit dimension must be at least 2, got {0}")]
    Dimension(usize),

    #[error("operation is only defined for a qutrit (d = 3), got d = {0}")]
    QutritOnly(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (max deviation of U·U† from identity: {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every grid point has zero posterior weight after an update: the
    /// observed outcome is impossible under the model.
    #[error("outcome {outcome} is impossible under the current distribution (zero posterior)")]
    ZeroPosterior { outcome: usize },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error("experiment {index}: {source}")]
    InExperiment { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }

    pub(crate) fn in_experiment(self, index: usize) -> Self {
        Error::InExperiment { index, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
