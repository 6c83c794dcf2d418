use thiserror::Error;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kinematics out of domain: {0}")]
    Domain(String),
    #[error("lepton propagator product vanishes at phi = {phi_deg} deg")]
    Singularity { phi_deg: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("exponent overflow in generator: {0}")]
    Overflow(String),
    #[error("least-squares fit did not converge after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("no truth available for set {0}")]
    MissingTruth(u32),
    #[error("need at least {needed} included replicas, have {have}")]
    InsufficientReplicas { needed: usize, have: usize },
    #[error("zero uncertainty in {0}")]
    ZeroSigma(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or missing input data rather
    /// than by numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::MissingTruth(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
