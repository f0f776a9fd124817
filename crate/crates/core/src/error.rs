use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The point is within the singularity guard of the singular set.
    #[error("point {x} lies within the singularity guard")]
    SingularInput { x: f64 },

    #[error("point {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    /// An orbit entered the singularity guard at iterate `index`.
    #[error("orbit entered the singularity guard at iterate {index}")]
    HitSingularity { index: usize },

    #[error("{aborted} of {total} orbits hit the singularity guard")]
    TooManyAborted { aborted: usize, total: usize },

    #[error("estimated roof mean {mean} is below r0/2 = {half_r0}")]
    DegenerateRoof { mean: f64, half_r0: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("no return to the section within {max_time} time units")]
    NoReturn { max_time: f64 },

    #[error("orbit left the trap box at t = {t}")]
    LeftTrap { t: f64 },

    #[error("stable-manifold trace not found: {0}")]
    TraceNotFound(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier, used in the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularInput { .. } => "SingularInput",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::HitSingularity { .. } => "HitSingularity",
            Error::TooManyAborted { .. } => "TooManyAborted",
            Error::DegenerateRoof { .. } => "DegenerateRoof",
            Error::InsufficientData(_) => "InsufficientData",
            Error::NonFinite { .. } => "NonFinite",
            Error::NoReturn { .. } => "NoReturn",
            Error::LeftTrap { .. } => "LeftTrap",
            Error::TraceNotFound(_) => "TraceNotFound",
            Error::Precondition(_) => "Precondition",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
