use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("degree sum {0} is odd; no perfect stub matching exists")]
    OddStubCount(u64),

    #[error("cannot rematch {requested} edges, graph only has {available}")]
    NotEnoughEdges { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("edge at t={timestamp} lies outside window {index} [{start}, {end}]")]
    OutsideWindow {
        index: u64,
        start: f64,
        end: f64,
        timestamp: f64,
    },

    #[error("window {0} is already closed")]
    WindowClosed(u64),

    #[error("correlation value {0} outside [0, 1]")]
    CorrelationOutOfRange(f64),

    #[error("no correlation state for stream pair ({0}, {1})")]
    MissingPair(String, String),

    #[error("matrix is not symmetric at ({0}, {1})")]
    AsymmetricMatrix(usize, usize),

    #[error("matrix has {rows} rows but {labels} labels")]
    MatrixShape { rows: usize, labels: usize },

    #[error("unknown leaf {0:?}")]
    UnknownLeaf(String),

    #[error("invalid newick: {0}")]
    Newick(String),

    #[error("search time must be positive, got {0}")]
    InvalidTime(f64),

    #[error("stream {stream:?}: timestamp {timestamp} precedes last stored {last}")]
    OutOfOrder {
        stream: String,
        timestamp: f64,
        last: f64,
    },

    #[error("corrupt record in {path}: {reason}")]
    CorruptRecord { path: PathBuf, reason: String },

    #[error("cannot read source {path}: {source}")]
    Source {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}
