//! Factor-model regressions and an LSTM forecaster for monthly sector returns.

pub mod factor_models;
pub mod ingest;
pub mod lstm;
pub mod preprocess;
pub mod regression;
pub mod report;
