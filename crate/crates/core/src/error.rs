use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {what} (value {value}, allowed [{lower}, {upper}])")]
    Domain {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("alignment error: time {time} is not a node of a grid with {steps_per_unit} steps per unit")]
    Alignment { time: f64, steps_per_unit: usize },

    #[error("model evaluation error at t = {time}: {what} returned a non-finite value")]
    ModelEvaluation { time: f64, what: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
