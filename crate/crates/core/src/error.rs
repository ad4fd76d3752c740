use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time: {0}")]
    Time(String),

    #[error("schema error in {table}: missing required column `{column}`")]
    MissingColumn { table: &'static str, column: String },

    #[error("schema error in {table}: {message}")]
    Schema { table: &'static str, message: String },

    #[error("hour index: {0}")]
    HourIndex(String),

    #[error("weather: {0}")]
    Weather(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("feature: {0}")]
    Feature(String),

    #[error("model: {0}")]
    Model(String),

    #[error("column mismatch: model expects {expected:?}, got {actual:?}")]
    ColumnMismatch { expected: Vec<String>, actual: Vec<String> },

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("synthetic generator: {0}")]
    Synth(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
