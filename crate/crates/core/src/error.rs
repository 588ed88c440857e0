use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An event farther than the snapping tolerance from every edge.
    #[error("event {index} is {distance} from the nearest edge (tolerance {tolerance})")]
    Snap {
        index: usize,
        distance: f64,
        tolerance: f64,
    },

    /// A precondition on the input data was violated.
    #[error("usage error: {0}")]
    Usage(String),

    /// An invalid sampler, scenario or hyperparameter configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by a bug or the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
