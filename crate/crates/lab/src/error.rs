use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] atlas_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("config: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(
        "truncation: analysis reaches {position:.3} but the rightmost initial particle sits at {rightmost:.3} (buffer {buffer:.3})"
    )]
    Truncation { position: f64, rightmost: f64, buffer: f64 },
    #[error("window of ranks {lo}..{hi} exceeds the {n} simulated particles")]
    Window { lo: usize, hi: usize, n: usize },
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        LabError::Format {
            what,
            detail: detail.into(),
        }
    }
}
