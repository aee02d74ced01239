use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("negative weight {0} at atom {1}")]
    NegativeWeight(f64, usize),
    #[error("atom {0} lies outside the parameter space")]
    AtomOutOfDomain(usize),
    #[error("total weight {0} is not positive")]
    ZeroMass(f64),
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("atoms and weights have different lengths ({atoms} vs {weights})")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("non-finite ground cost between atoms {0} and {1}")]
    CostOverflow(usize, usize),
    #[error("degenerate transport input: {0}")]
    DegenerateInput(String),
    #[error("transport solver exceeded {0} pivots")]
    SolverStall(usize),
    #[error("divergence {divergence} is not supported for the {family} family")]
    UnsupportedDivergence {
        divergence: &'static str,
        family: &'static str,
    },
    #[error("KL integrand overflowed: densities do not overlap")]
    NonOverlappingSupport,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("degenerate ratio: {0}")]
    DegenerateRatio(String),
    #[error("rejection sampling of the neighbourhood failed after {0} attempts")]
    SamplingExhausted(usize),
    #[error("rejection sampling exhausted: {0}")]
    RejectionExhausted(String),
    #[error("non-finite likelihood encountered")]
    NonFiniteLikelihood,
    #[error("packing of the parameter space is degenerate (D = {0})")]
    PackingDegenerate(usize),
    #[error("insufficient points for fit: need {needed}, have {have}")]
    InsufficientPoints { needed: usize, have: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoFailure(e.to_string())
    }
}
