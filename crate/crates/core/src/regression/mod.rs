//! Ordinary least squares with classical inference.

mod distributions;
mod metrics;
mod qr;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use distributions::{f_sf, regularized_incomplete_beta, student_t_cdf, student_t_two_sided};
pub use metrics::{prediction_metrics, PredictionMetrics};

use qr::HouseholderQr;

/// Relative size of a diagonal entry of R, against its column's norm, below
/// which the column is treated as a linear combination of earlier ones.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("design is rank deficient: {} depend linearly on earlier columns", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("need more observations than parameters: n = {n}, parameters = {params}")]
    TooFewObservations { n: usize, params: usize },
    #[error("column {column:?} has {found} rows, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in column {column:?} at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("duplicate regressor name {0:?}")]
    DuplicateName(String),
    #[error("regressors {found:?} do not match the fitted regressors {expected:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("degrees of freedom must be positive and finite, got {0}")]
    BadDegreesOfFreedom(f64),
    #[error("statistic must be non-negative, got {0}")]
    NegativeStatistic(f64),
    #[error("inputs must be non-empty and of equal length ({0} vs {1})")]
    MetricInput(usize, usize),
}

/// Response vector plus named regressor columns. The intercept is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    response: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(
        response: Vec<f64>,
        regressors: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, RegressionError> {
        let n = response.len();
        check_finite("response", &response)?;
        let mut names: Vec<String> = Vec::with_capacity(regressors.len());
        let mut columns = Vec::with_capacity(regressors.len());
        for (name, col) in regressors {
            if names.contains(&name) {
                return Err(RegressionError::DuplicateName(name));
            }
            if col.len() != n {
                return Err(RegressionError::LengthMismatch {
                    column: name,
                    expected: n,
                    found: col.len(),
                });
            }
            check_finite(&name, &col)?;
            names.push(name);
            columns.push(col);
        }
        Ok(Self {
            names,
            columns,
            response,
        })
    }

    /// Regressor names, excluding the intercept.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.names.len()
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), RegressionError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(RegressionError::NonFinite {
            column: name.to_string(),
            row,
        }),
        None => Ok(()),
    }
}

/// Probability, clamped so that anything below 1e-300 is stored as 0 and
/// shown as `<1e-300`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PValue(f64);

impl PValue {
    pub const FLOOR: f64 = 1e-300;

    pub fn new(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self(if p < Self::FLOOR { 0.0 } else { p })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_below_floor(self) -> bool {
        self.0 < Self::FLOOR
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_below_floor() {
            f.write_str("<1e-300")
        } else if self.0 < 1e-3 {
            write!(f, "{:.2e}", self.0)
        } else {
            write!(f, "{:.3}", self.0)
        }
    }
}

impl Serialize for PValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_below_floor() {
            s.serialize_str("<1e-300")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for PValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(PValue::new(p)),
            Raw::Text(t) if t.replace(' ', "") == "<1e-300" => Ok(PValue(0.0)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad p-value {t:?}"))),
        }
    }
}

/// Significance marker: `***` p < 0.001, `**` p < 0.01, `*` p < 0.05.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "***")]
    Three,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "")]
    None,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::Three => "***",
            Stars::Two => "**",
            Stars::One => "*",
            Stars::None => "",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of [`ols_fit`]. Coefficient vectors are intercept first, then the
/// regressors in design order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub regressors: Vec<String>,
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<PValue>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p_value: PValue,
    pub residuals: Vec<f64>,
    pub dof: usize,
}

impl RegressionFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    /// Slope, standard error, t and p for a named regressor.
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64, f64, PValue)> {
        let j = self.regressors.iter().position(|r| r == name)? + 1;
        Some((self.beta[j], self.stderr[j], self.t_stats[j], self.p_values[j]))
    }

    pub fn stars(&self) -> Vec<Stars> {
        self.p_values.iter().map(|p| Stars::from_p(p.value())).collect()
    }
}

/// Least-squares fit of `response ~ 1 + regressors` via Householder QR.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionFit, RegressionError> {
    let n = design.n_obs();
    let m = design.n_regressors();
    let p = m + 1;
    if n <= p {
        return Err(RegressionError::TooFewObservations { n, params: p });
    }
    let y = design.response();
    let dof = n - p;

    let mut columns = Vec::with_capacity(p);
    columns.push(vec![1.0; n]);
    columns.extend(design.columns.iter().cloned());

    let qr = HouseholderQr::factor(&columns, n);
    let dependent: Vec<String> = qr
        .r_diag()
        .iter()
        .zip(&columns)
        .enumerate()
        .filter(|(_, (r, col))| {
            let norm = col.iter().fold(0.0f64, |a, v| a.hypot(*v));
            r.abs() <= RANK_TOLERANCE * norm || norm == 0.0
        })
        .map(|(j, _)| {
            if j == 0 {
                "(intercept)".to_string()
            } else {
                design.names[j - 1].clone()
            }
        })
        .collect();
    if !dependent.is_empty() {
        return Err(RegressionError::RankDeficient { columns: dependent });
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();

    // A constant response is fitted exactly by the intercept; solving it
    // through QR would leave round-off slopes with meaningless t-statistics.
    let beta = if sst == 0.0 {
        let mut b = vec![0.0; p];
        b[0] = y_mean;
        b
    } else {
        qr.solve(y)
    };

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = sse / dof as f64;

    let stderr: Vec<f64> = qr
        .xtx_inverse_diag()
        .iter()
        .map(|d| (sigma2 * d).sqrt())
        .collect();
    let t_stats: Vec<f64> = beta
        .iter()
        .zip(&stderr)
        .map(|(&b, &se)| {
            if se > 0.0 {
                b / se
            } else if b == 0.0 {
                0.0
            } else {
                b.signum() * f64::INFINITY
            }
        })
        .collect();
    let p_values = t_stats
        .iter()
        .map(|&t| student_t_two_sided(t, dof as f64).map(PValue::new))
        .collect::<Result<Vec<_>, _>>()?;

    let (r_squared, f_stat) = if sst == 0.0 {
        (0.0, 0.0)
    } else {
        let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
        let ssr = (sst - sse).max(0.0);
        let f = if sse > 0.0 {
            (ssr / m as f64) / sigma2
        } else {
            f64::INFINITY
        };
        (r2, f)
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / dof as f64;
    let f_p_value = if m == 0 {
        PValue::new(1.0)
    } else {
        PValue::new(f_sf(f_stat, m as f64, dof as f64)?)
    };

    Ok(RegressionFit {
        regressors: design.names.clone(),
        beta,
        stderr,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        f_stat,
        f_p_value,
        residuals,
        dof,
    })
}

/// Fitted values Xβ for a design whose regressors match the fit by name and order.
pub fn predict(fit: &RegressionFit, design: &DesignMatrix) -> Result<Vec<f64>, RegressionError> {
    if fit.regressors != design.names {
        return Err(RegressionError::ColumnMismatch {
            expected: fit.regressors.clone(),
            found: design.names.clone(),
        });
    }
    Ok((0..design.n_obs())
        .map(|i| {
            fit.beta[0]
                + design
                    .columns
                    .iter()
                    .zip(&fit.beta[1..])
                    .map(|(c, b)| c[i] * b)
                    .sum::<f64>()
        })
        .collect())
}
