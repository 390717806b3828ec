use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("missing parameter `{param}` for family `{family}`")]
    MissingParameter { family: String, param: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("a chain needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("block size {block} does not divide {n_sites} sites into at least two blocks")]
    BadBlock { block: usize, n_sites: usize },
    #[error("term {index} is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { index: usize, deviation: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Hilbert space dimension {dim} exceeds budget {budget}")]
    BudgetExceeded { dim: usize, budget: usize },
    #[error("degenerate ground state: gap {gap:.3e} below tolerance {tol:.3e}")]
    DegenerateGroundState { gap: f64, tol: f64 },
    #[error("iterative eigensolver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("eigendecomposition failed")]
    EigenFailure,
    #[error("operation needs the full spectrum, only {have} of {dim} levels available")]
    PartialSpectrum { have: usize, dim: usize },
    #[error("interval [{a},{b}] is outside a chain of {n} sites")]
    IntervalOutOfRange { a: usize, b: usize, n: usize },
    #[error("cut {j} is outside 1..{max}")]
    CutOutOfRange { j: usize, max: usize },
    #[error("trace deviates from one by {0:.3e}")]
    TraceNotOne(f64),
    #[error("negative eigenvalue {0:.3e} beyond clipping tolerance")]
    NegativeEigenvalue(f64),
    #[error("Renyi index must be positive and different from one, got {0}")]
    BadRenyiIndex(f64),
    #[error("measurement operator has eigenvalue {0:.3e} outside [0,1]")]
    BadMeasurement(f64),
    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),
    #[error("supports overlap: {0}")]
    OverlappingSupports(String),
    #[error("locality fit failed: {0}")]
    FitFailed(String),
    #[error("window for cut {j} and half-width {l} does not fit a chain of {n} sites")]
    WindowOutOfRange { j: usize, l: usize, n: usize },
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("operator norm {0:.9} exceeds one beyond rescaling tolerance")]
    NormTooLarge(f64),
    #[error("Q is not a projector (deviation {0:.3e})")]
    NotProjector(f64),
    #[error("integrator tolerance not met: {0}")]
    IntegratorFailure(String),
    #[error("expander: {0}")]
    Expander(String),
    #[error("correlation probe needs {entries} matrix entries, budget is {budget}")]
    ProbeTooLarge { entries: usize, budget: usize },
    #[error("support of A intersects the excluded window")]
    SupportIntersectsWindow,
    #[error("invalid bound parameters: {0}")]
    BadBoundParameters(String),
    #[error("input outside [0,1]: {0}")]
    OutOfUnitInterval(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
