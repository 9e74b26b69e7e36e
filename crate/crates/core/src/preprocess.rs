//! Gap filling by local Lagrange interpolation and robust outlier removal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MonthlyPanel, YearMonth};

/// Default robust z-score cutoff.
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 5.0;
/// Converts a MAD into a standard-deviation estimate under normality.
pub const MAD_TO_SIGMA: f64 = 1.4826;
/// Interpolation neighbourhood size (polynomial degree ≤ 3).
pub const FILL_NEIGHBOURS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("no observed values to interpolate from")]
    NothingToInterpolate,
    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("outlier detection needs a non-empty series")]
    EmptySeries,
    #[error("outlier threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("column {0:?} has no usable observations after outlier removal")]
    EmptyColumn(String),
    #[error("panel has no rows")]
    EmptyPanel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    /// Cells that were vacant in the source panel and have been interpolated.
    pub filled: Vec<(String, YearMonth)>,
    /// Cells flagged as outliers, with their original value. These are
    /// interpolated too but not repeated in `filled`.
    pub outliers_removed: Vec<(String, YearMonth, f64)>,
}

impl CleanReport {
    pub fn is_empty(&self) -> bool {
        self.filled.is_empty() && self.outliers_removed.is_empty()
    }
}

/// Positions of the interpolation nodes for `index`: the nearest observed
/// points, two per side when available, topped up from the other side near
/// the series boundaries.
fn fill_nodes(missing: &[bool], index: usize, count: usize) -> Vec<usize> {
    let left: Vec<usize> = (0..index).rev().filter(|&j| !missing[j]).collect();
    let right: Vec<usize> = (index + 1..missing.len()).filter(|&j| !missing[j]).collect();
    let k = count.min(left.len() + right.len());
    let half = count / 2;
    let mut from_left = left.len().min(half);
    let mut from_right = right.len().min(half);
    while from_left + from_right < k {
        if from_left < left.len() {
            from_left += 1;
        } else {
            from_right += 1;
        }
    }
    let mut nodes: Vec<usize> = left[..from_left]
        .iter()
        .chain(&right[..from_right])
        .copied()
        .collect();
    nodes.sort_unstable();
    nodes
}

/// Interpolating polynomial through `(xs, ys)` evaluated at `x`, in Newton
/// divided-difference form. Constant data stays exactly constant.
fn newton_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut coef = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in (level..n).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    let mut acc = coef[n - 1];
    for i in (0..n - 1).rev() {
        acc = acc * (x - xs[i]) + coef[i];
    }
    acc
}

/// Value at `index` of the Lagrange polynomial through the (up to four)
/// nearest observed points. Positions are the abscissae, so equally spaced
/// months are equally spaced nodes.
pub fn lagrange_fill_point(
    values: &[f64],
    missing: &[bool],
    index: usize,
) -> Result<f64, PreprocessError> {
    fill_with_nodes(values, missing, index, FILL_NEIGHBOURS)
}

fn fill_with_nodes(
    values: &[f64],
    missing: &[bool],
    index: usize,
    count: usize,
) -> Result<f64, PreprocessError> {
    if index >= values.len() || missing.len() != values.len() {
        return Err(PreprocessError::IndexOutOfRange {
            index,
            len: values.len(),
        });
    }
    let nodes = fill_nodes(missing, index, count);
    if nodes.is_empty() {
        return Err(PreprocessError::NothingToInterpolate);
    }
    let xs: Vec<f64> = nodes.iter().map(|&j| j as f64).collect();
    let ys: Vec<f64> = nodes.iter().map(|&j| values[j]).collect();
    Ok(newton_eval(&xs, &ys, index as f64))
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Indices whose distance from the median exceeds `threshold` robust standard
/// deviations (1.4826 × MAD).
///
/// When the MAD is zero (more than half the values tie at the median) the
/// scale for each point is the sample standard deviation of the *other*
/// points, so a lone spike in an otherwise flat series is still caught.
pub fn flag_outliers(series: &[f64], threshold: f64) -> Result<BTreeSet<usize>, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(PreprocessError::BadThreshold(threshold));
    }
    let med = median(series);
    let deviations: Vec<f64> = series.iter().map(|x| (x - med).abs()).collect();
    let mad = median(&deviations);

    let flagged = if mad > 0.0 {
        let cutoff = threshold * MAD_TO_SIGMA * mad;
        deviations
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > cutoff)
            .map(|(i, _)| i)
            .collect()
    } else {
        (0..series.len())
            .filter(|&i| {
                let others = series
                    .iter()
                    .enumerate()
                    .filter(move |&(j, _)| j != i)
                    .map(|(_, &v)| v);
                deviations[i] > threshold * sample_std(others)
            })
            .collect()
    };
    Ok(flagged)
}

/// Upper bound on detect-and-refill rounds per column.
const MAX_CLEAN_ROUNDS: usize = 32;

/// Flag outliers in every column, mark them missing, then interpolate every
/// missing cell.
///
/// Detection first runs over the observed values, then is repeated over the
/// completed column until nothing is flagged. A filled cell that is flagged
/// again is refilled from one node fewer each time, down to its nearest
/// neighbour, so boundary extrapolation cannot leave a new outlier behind.
/// The output is therefore a fixed point: cleaning it again changes nothing.
pub fn clean_panel(
    panel: &MonthlyPanel,
    threshold: f64,
) -> Result<(MonthlyPanel, CleanReport), PreprocessError> {
    if panel.is_empty() {
        return Err(PreprocessError::EmptyPanel);
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(PreprocessError::BadThreshold(threshold));
    }
    let dates = panel.dates().to_vec();
    let mut out = panel.clone();
    let mut report = CleanReport::default();

    for col in out.columns_mut() {
        let n = col.values.len();
        let vacant: Vec<usize> = (0..n).filter(|&i| col.missing[i]).collect();
        if vacant.len() == n {
            return Err(PreprocessError::EmptyColumn(col.name.clone()));
        }
        let mut replaced = col.missing.clone();
        let mut nodes = vec![FILL_NEIGHBOURS; n];
        let mut mask = col.missing.clone();

        for round in 0..MAX_CLEAN_ROUNDS {
            let observed: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
            let observed_values: Vec<f64> = observed.iter().map(|&i| col.values[i]).collect();
            let flagged: Vec<usize> = flag_outliers(&observed_values, threshold)?
                .into_iter()
                .map(|k| observed[k])
                .collect();
            if round > 0 && flagged.is_empty() {
                break;
            }
            for &i in &flagged {
                if replaced[i] {
                    nodes[i] = (nodes[i] - 1).max(1);
                } else {
                    report
                        .outliers_removed
                        .push((col.name.clone(), dates[i], col.values[i]));
                    replaced[i] = true;
                }
                mask[i] = true;
            }
            if mask.iter().all(|&m| m) {
                return Err(PreprocessError::EmptyColumn(col.name.clone()));
            }
            let fills: Vec<(usize, f64)> = (0..n)
                .filter(|&i| mask[i])
                .map(|i| fill_with_nodes(&col.values, &mask, i, nodes[i]).map(|v| (i, v)))
                .collect::<Result<_, _>>()?;
            for (i, v) in fills {
                col.values[i] = v;
                mask[i] = false;
            }
        }
        col.missing.iter_mut().for_each(|m| *m = false);
        report
            .filled
            .extend(vacant.into_iter().map(|i| (col.name.clone(), dates[i])));
    }
    Ok((out, report))
}
