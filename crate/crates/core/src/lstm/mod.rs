//! From-scratch LSTM regressor: cell and BPTT, windowed datasets, training
//! and a versioned parameter file.

mod cell;
mod data;
mod io;
mod train;

pub use cell::{
    bptt_gradients, cell_forward, forward_sequence, GateParams, LstmParams, LstmState, StepCache,
    GATE_NAMES,
};
pub use data::{
    build_windows, split_7_3, Standardizer, WindowSample, WindowedDataset, LSTM_FACTORS,
    MIN_SPLIT_SAMPLES,
};
pub use io::{read_model, write_model, FORMAT_TAG};
pub use train::{evaluate, train, LstmModel, Optimizer, TrainConfig, TrainHistory};

use crate::ingest::IngestError;
use crate::regression::RegressionError;

#[derive(Debug, thiserror::Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input window")]
    EmptyWindow,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty test set")]
    EmptyTest,
    #[error("training diverged (non-finite loss){}", epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    NonFiniteLoss { epoch: Option<usize> },
    #[error("{found} windowed samples, need at least {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Data(#[from] IngestError),
    #[error(transparent)]
    Metrics(#[from] RegressionError),
}
