use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} at index {index} is outside [0, {class_count})")]
    LabelRange {
        index: usize,
        label: i64,
        class_count: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("feature {feature} is constant on the training split; min-max scaling is undefined")]
    ConstantFeature { feature: String },

    #[error("partition for target class {target_class} is empty: {side}")]
    EmptyPartition {
        target_class: usize,
        side: &'static str,
    },

    #[error("non-finite {component} loss at epoch {epoch}, step {step}")]
    NonFinite {
        component: String,
        epoch: usize,
        step: usize,
    },

    #[error("non-finite {0} loss component")]
    NonFiniteComponent(&'static str),

    #[error("saliency evaluation undefined: {0}")]
    Saliency(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown approach `{0}`")]
    UnknownApproach(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("image encoding failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::result::Result<T, std::io::Error> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}

pub(crate) fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}
