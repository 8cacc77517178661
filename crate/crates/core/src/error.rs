use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("duplicate node {0} in node set")]
    DuplicateNode(usize),

    #[error("feature matrix has {rows} rows, expected {expected}")]
    FeatureRows { rows: usize, expected: usize },

    #[error("ragged feature matrix: row {row} has {len} columns, expected {expected}")]
    RaggedFeatures { row: usize, len: usize, expected: usize },

    #[error("label {label} at node {node} is not < num_classes = {num_classes}")]
    LabelOutOfRange { node: usize, label: usize, num_classes: usize },

    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },

    #[error("empty graph")]
    EmptyGraph,

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no training targets: {0}")]
    EmptyTargets(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
