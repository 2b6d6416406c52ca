use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cutoff {0}: at least two Fock levels are required")]
    InvalidCutoff(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid mode pair ({0}, {1}): two-mode gates need distinct modes")]
    InvalidModes(usize, usize),

    #[error("degenerate state: squared norm is zero")]
    DegenerateState,

    #[error("{what} = {value} is outside [{min}, {max}]")]
    Range {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("a_max calibration failed at cutoff {cutoff}: no candidate keeps the squared norm above {norm_floor}")]
    CalibrationFailed { cutoff: usize, norm_floor: f64 },

    #[error("non-finite value: {context}{}", .parameter.map(|p| format!(" (parameter {p})")).unwrap_or_default())]
    Numerical {
        context: String,
        parameter: Option<usize>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
