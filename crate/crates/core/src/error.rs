use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label {label:?} on line {line} is outside the declared {m} classes")]
    LabelRange { line: usize, label: String, m: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("metric {0} has no closed-form gradient; use the unknown-metric path")]
    UnsupportedGradient(String),
    #[error("metric value for probe {probe} is not finite ({value})")]
    NonFiniteMetric { probe: usize, value: f64 },
    #[error("singular elicitation system (condition number {condition:e}); set reg > 0, use fewer basis functions or check for empty basis cells")]
    Singular { condition: f64 },
    #[error("probe constraints infeasible: {0}")]
    Infeasible(String),
    #[error("rule cannot be materialized here: {0}")]
    Materialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
