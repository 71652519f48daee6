use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] pes::error::Error),

    #[error("input {0:?} lies outside the unit domain")]
    OutOfDomain(Vec<f64>),

    #[error("configuration: {0}")]
    Config(String),

    #[error("certification of `{name}` failed: found {found}, declared {declared}")]
    Certification { name: String, found: f64, declared: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
