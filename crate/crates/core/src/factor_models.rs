//! Fama-French three-factor, Carhart four-factor and Fama-French five-factor
//! regressions of sector excess returns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AlignedDataset, IngestError};
use crate::regression::{
    ols_fit, predict, prediction_metrics, DesignMatrix, PValue, RegressionError, RegressionFit,
    Stars,
};

/// Display precision for printed coefficients.
pub const COEFFICIENT_DECIMALS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorModelError {
    #[error(transparent)]
    Data(#[from] IngestError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("unknown model {0:?} (expected ff3, carhart4 or ff5)")]
    UnknownModel(String),
    #[error("no models requested")]
    NoModels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "F-F3")]
    Ff3,
    #[serde(rename = "Carhart4")]
    Carhart4,
    #[serde(rename = "F-F5")]
    Ff5,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ff3, ModelKind::Carhart4, ModelKind::Ff5];

    /// Regressors in canonical order.
    pub fn factors(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ff3 => &["Mkt-RF", "SMB", "HML"],
            ModelKind::Carhart4 => &["Mkt-RF", "SMB", "HML", "MOM"],
            ModelKind::Ff5 => &["Mkt-RF", "SMB", "HML", "RMW", "CMA"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ff3 => "F-F3",
            ModelKind::Carhart4 => "Carhart4",
            ModelKind::Ff5 => "F-F5",
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            ModelKind::Ff3 => "ff3",
            ModelKind::Carhart4 => "carhart4",
            ModelKind::Ff5 => "ff5",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = FactorModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "ff3" => Ok(ModelKind::Ff3),
            "carhart4" | "car4" | "c4" => Ok(ModelKind::Carhart4),
            "ff5" => Ok(ModelKind::Ff5),
            _ => Err(FactorModelError::UnknownModel(s.to_string())),
        }
    }
}

/// A model and the regressors it uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub factors: Vec<String>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            factors: kind.factors().iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Data column backing a regressor. The five-factor model takes its size
    /// factor from `SMB5` when the dataset carries one.
    fn source_column<'a>(&self, data: &'a AlignedDataset, factor: &str) -> Option<&'a [f64]> {
        if self.kind == ModelKind::Ff5 && factor == "SMB" {
            if let Some(col) = data.factor("SMB5") {
                return Some(col);
            }
        }
        data.factor(factor)
    }
}

impl From<ModelKind> for ModelSpec {
    fn from(kind: ModelKind) -> Self {
        Self::new(kind)
    }
}

/// Excess sector return regressed on the model's factors, intercept implied.
pub fn build_design(
    data: &AlignedDataset,
    spec: &ModelSpec,
    sector: &str,
) -> Result<DesignMatrix, FactorModelError> {
    let response = data.excess_return(sector)?;
    let regressors = spec
        .factors
        .iter()
        .map(|f| {
            spec.source_column(data, f)
                .map(|col| (f.clone(), col.to_vec()))
                .ok_or_else(|| IngestError::MissingFactor(f.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DesignMatrix::new(response, regressors)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRegression {
    pub sector: String,
    pub spec: ModelSpec,
    pub fit: RegressionFit,
    pub stars: Vec<Stars>,
    pub equation: String,
}

pub fn fit_factor_model(
    data: &AlignedDataset,
    spec: &ModelSpec,
    sector: &str,
) -> Result<FactorRegression, FactorModelError> {
    let design = build_design(data, spec, sector)?;
    fit_design(&design, spec, sector)
}

fn fit_design(
    design: &DesignMatrix,
    spec: &ModelSpec,
    sector: &str,
) -> Result<FactorRegression, FactorModelError> {
    let fit = ols_fit(design)?;
    let mut reg = FactorRegression {
        sector: sector.to_string(),
        spec: spec.clone(),
        stars: fit.stars(),
        fit,
        equation: String::new(),
    };
    reg.equation = format_equation(&reg, COEFFICIENT_DECIMALS);
    Ok(reg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: ModelKind,
    pub r_squared: f64,
    pub f_p_value: PValue,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub sector: String,
    pub rows: Vec<ComparisonRow>,
}

/// In-sample goodness of fit of one regression.
pub fn comparison_row(
    reg: &FactorRegression,
    design: &DesignMatrix,
) -> Result<ComparisonRow, FactorModelError> {
    let fitted = predict(&reg.fit, design)?;
    let m = prediction_metrics(design.response(), &fitted)?;
    Ok(ComparisonRow {
        model: reg.spec.kind,
        r_squared: reg.fit.r_squared,
        f_p_value: reg.fit.f_p_value,
        rmse: m.rmse,
        mae: m.mae,
    })
}

/// Fit every spec on one sector and tabulate R², overall F p-value, RMSE and
/// MAE of the in-sample fitted values, in input order.
pub fn compare_models(
    data: &AlignedDataset,
    specs: &[ModelSpec],
    sector: &str,
) -> Result<ComparisonTable, FactorModelError> {
    Ok(fit_and_compare(data, specs, sector)?.1)
}

/// Like [`compare_models`] but also returns the regressions behind each row.
pub fn fit_and_compare(
    data: &AlignedDataset,
    specs: &[ModelSpec],
    sector: &str,
) -> Result<(Vec<FactorRegression>, ComparisonTable), FactorModelError> {
    if specs.is_empty() {
        return Err(FactorModelError::NoModels);
    }
    let mut regs = Vec::with_capacity(specs.len());
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let design = build_design(data, spec, sector)?;
        let reg = fit_design(&design, spec, sector)?;
        rows.push(comparison_row(&reg, &design)?);
        regs.push(reg);
    }
    Ok((
        regs,
        ComparisonTable {
            sector: sector.to_string(),
            rows,
        },
    ))
}

fn factor_term(name: &str) -> String {
    match name {
        "Mkt-RF" => "(Rmkt - Rf)".to_string(),
        other => other.to_string(),
    }
}

/// `Ri - Rf = alpha + b1(Rmkt - Rf) + b2SMB ...` with every term kept and
/// signs taken from the rounded value.
pub fn format_equation(reg: &FactorRegression, decimals: usize) -> String {
    let round = |v: f64| {
        let s = format!("{:.*}", decimals, v.abs());
        let zero = s.bytes().all(|b| b == b'0' || b == b'.');
        (v < 0.0 && !zero, s)
    };
    let (neg, alpha) = round(reg.fit.beta[0]);
    let mut out = format!("Ri - Rf = {}{}", if neg { "-" } else { "" }, alpha);
    for (name, &b) in reg.fit.regressors.iter().zip(&reg.fit.beta[1..]) {
        let (neg, mag) = round(b);
        out.push_str(if neg { " - " } else { " + " });
        out.push_str(&mag);
        out.push_str(&factor_term(name));
    }
    out
}
