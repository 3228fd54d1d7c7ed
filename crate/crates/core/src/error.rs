use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown model `{0}`")]
    NotFound(String),

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid theta: {0}")]
    InvalidTheta(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation diverged at step {step} (state {value})")]
    SimulationDiverged { step: usize, value: f64 },

    #[error("diffusion coefficient degenerate at x = {x} (sigma = {sigma})")]
    DegenerateDiffusion { x: f64, sigma: f64 },

    #[error("subject {subject}: {source}")]
    Subject {
        subject: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("random effect unavailable: path was not produced by the simulator")]
    MissingPhi,

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("every subject has V = 0; the likelihood does not identify theta")]
    AllDegenerate,

    #[error("objective is not finite ({0})")]
    NonFiniteObjective(String),

    #[error("true theta must lie in the interior of the parameter space: {0}")]
    ThetaNotInterior(String),

    #[error("experiment has no replicates")]
    EmptyExperiment,

    #[error("experiment failed: {failed} of {total} replicates failed (first: {first})")]
    ExperimentFailed {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn for_subject(self, subject: usize) -> Error {
        Error::Subject {
            subject,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
