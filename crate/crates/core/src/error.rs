use thiserror::Error;

use crate::data::Timestamp;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no interaction has a timestamp <= {time}")]
    EmptySnapshot { time: Timestamp },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("item `{item}` is not in the profile{}", user.as_ref().map(|u| format!(" of user `{u}`")).unwrap_or_default())]
    ItemNotInProfile { user: Option<String>, item: String },

    #[error("target support items have zero current probability: {}", items.join(", "))]
    SupportMismatch { items: Vec<String> },

    #[error("invalid probability model: {0}")]
    InvalidModel(String),

    #[error("invalid weight {weight} for item `{item}` (weights must be finite and > 0)")]
    InvalidWeight { item: String, weight: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("optimizer could not find a decreasing step from the starting point")]
    NoProgress,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
