use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LstmError;
use crate::ingest::{AlignedDataset, IngestError, YearMonth};

/// Factors fed to the LSTM on every window row, followed by the sector's
/// excess return lagged one month.
pub const LSTM_FACTORS: [&str; 5] = ["Mkt-RF", "SMB", "HML", "RMW", "CMA"];

/// Minimum sample count accepted by [`split_7_3`].
pub const MIN_SPLIT_SAMPLES: usize = 10;

/// One input window (row-major `window × features`, oldest row first) and
/// the excess return it is trained to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub inputs: Vec<f64>,
    pub target: f64,
    pub target_date: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub window: usize,
    pub feature_names: Vec<String>,
    pub samples: Vec<WindowSample>,
}

impl WindowedDataset {
    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    fn with_samples(&self, samples: Vec<WindowSample>) -> Self {
        Self {
            window: self.window,
            feature_names: self.feature_names.clone(),
            samples,
        }
    }
}

/// Windows over `data` for one sector.
///
/// The sample for month t has rows t−L+1..=t; row j holds the factors of
/// month j and the sector excess return of month j−1. The target is the
/// excess return of month t, so the target value never appears among its own
/// inputs. Windows whose months (including the lag month t−L) are not
/// consecutive are skipped.
pub fn build_windows(
    data: &AlignedDataset,
    sector: &str,
    factors: &[&str],
    window: usize,
) -> Result<WindowedDataset, LstmError> {
    if window == 0 {
        return Err(LstmError::Config("window length must be positive".into()));
    }
    let excess = data.excess_return(sector)?;
    let columns: Vec<&[f64]> = factors
        .iter()
        .map(|&f| {
            // SMB for the LSTM follows the five-factor construction when present.
            let col = if f == "SMB" {
                data.factor("SMB5").or_else(|| data.factor("SMB"))
            } else {
                data.factor(f)
            };
            col.ok_or_else(|| IngestError::MissingFactor(f.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let dates = data.dates();
    let d = factors.len() + 1;

    let mut samples = Vec::new();
    for t in window..dates.len() {
        let first_lag = t - window;
        let contiguous = dates[first_lag..=t]
            .windows(2)
            .all(|w| w[1].ordinal() == w[0].ordinal() + 1);
        if !contiguous {
            continue;
        }
        let mut inputs = Vec::with_capacity(window * d);
        for j in t + 1 - window..=t {
            inputs.extend(columns.iter().map(|c| c[j]));
            inputs.push(excess[j - 1]);
        }
        samples.push(WindowSample {
            inputs,
            target: excess[t],
            target_date: dates[t],
        });
    }
    let mut feature_names: Vec<String> = factors.iter().map(|s| s.to_string()).collect();
    feature_names.push("excess_lag1".to_string());
    Ok(WindowedDataset {
        window,
        feature_names,
        samples,
    })
}

/// Chronological split: the first ⌊0.7·N⌋ samples train, the rest test.
pub fn split_7_3(data: &WindowedDataset) -> Result<(WindowedDataset, WindowedDataset), LstmError> {
    let n = data.len();
    if n < MIN_SPLIT_SAMPLES {
        return Err(LstmError::TooFewSamples {
            found: n,
            needed: MIN_SPLIT_SAMPLES,
        });
    }
    let n_train = 7 * n / 10;
    Ok((
        data.with_samples(data.samples[..n_train].to_vec()),
        data.with_samples(data.samples[n_train..].to_vec()),
    ))
}

/// Per-feature affine standardization. Statistics come from the distinct
/// months covered by the windows it is fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(features: usize) -> Self {
        Self {
            mean: vec![0.0; features],
            std: vec![1.0; features],
        }
    }

    pub fn fit(data: &WindowedDataset) -> Self {
        let d = data.features();
        let l = data.window;
        let mut rows: BTreeMap<u32, &[f64]> = BTreeMap::new();
        for s in &data.samples {
            let last = s.target_date.ordinal();
            for (r, row) in s.inputs.chunks(d).enumerate() {
                rows.entry(last + 1 + r as u32 - l as u32).or_insert(row);
            }
        }
        if rows.is_empty() {
            return Self::identity(d);
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows.values() {
            for k in 0..d {
                mean[k] += row[k] / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in rows.values() {
            for k in 0..d {
                var[k] += (row[k] - mean[k]).powi(2) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, data: &WindowedDataset) -> WindowedDataset {
        let d = self.mean.len();
        data.with_samples(
            data.samples
                .iter()
                .map(|s| WindowSample {
                    inputs: s
                        .inputs
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d])
                        .collect(),
                    ..s.clone()
                })
                .collect(),
        )
    }
}
