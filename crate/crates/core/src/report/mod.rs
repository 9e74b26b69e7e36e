//! End-to-end pipeline (read, clean, align, fit, compare, LSTM) and the
//! report it produces, in JSON or Markdown.

mod markdown;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::factor_models::{fit_and_compare, ComparisonTable, FactorModelError, ModelKind, ModelSpec};
use crate::ingest::{align_panels, parse_panel_csv, IngestError, MonthlyPanel, YearMonth};
use crate::lstm::{build_windows, train, LstmError, TrainConfig, LSTM_FACTORS};
use crate::preprocess::{clean_panel, DEFAULT_OUTLIER_THRESHOLD};
use crate::regression::{PValue, RegressionError, Stars};

pub use markdown::{render_markdown, STAR_FOOTNOTE};

/// Display precision for prediction metrics.
pub const METRIC_DECIMALS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(PipelineError::input(
                Stage::Emit,
                format!("unknown output format {s:?} (expected json or markdown)"),
            )),
        }
    }
}

/// Which parts of the report to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub coefficients: bool,
    pub comparison: bool,
    pub lstm: bool,
}

impl Sections {
    pub const ALL: Sections = Sections {
        coefficients: true,
        comparison: true,
        lstm: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// One or more factor files, merged on common months.
    pub factors: Vec<PathBuf>,
    pub portfolios: PathBuf,
    pub from: YearMonth,
    pub to: YearMonth,
    pub sectors: Vec<String>,
    pub models: Vec<ModelKind>,
    pub outlier_threshold: f64,
    pub lstm: TrainConfig,
    pub sections: Sections,
}

impl RunConfig {
    pub fn new(factors: Vec<PathBuf>, portfolios: PathBuf, from: YearMonth, to: YearMonth) -> Self {
        Self {
            factors,
            portfolios,
            from,
            to,
            sectors: vec!["Manuf".into(), "Hitec".into(), "Other".into()],
            models: ModelKind::ALL.to_vec(),
            outlier_threshold: DEFAULT_OUTLIER_THRESHOLD,
            lstm: TrainConfig::default(),
            sections: Sections::ALL,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::input(Stage::Config, m));
        if self.factors.is_empty() || self.factors.iter().any(|p| p.as_os_str().is_empty()) {
            return fail("factor file paths must be non-empty".into());
        }
        if self.portfolios.as_os_str().is_empty() {
            return fail("portfolio file path must be non-empty".into());
        }
        if self.from >= self.to {
            return fail(format!("from ({}) must precede to ({})", self.from, self.to));
        }
        if let Some(s) = self.sectors.iter().find(|s| s.trim().is_empty()) {
            return fail(format!("invalid sector name {s:?}"));
        }
        if (self.sections.coefficients || self.sections.comparison) && self.models.is_empty() {
            return fail("no models requested".into());
        }
        if self.outlier_threshold.is_nan() || self.outlier_threshold <= 0.0 {
            return fail(format!("outlier threshold must be positive, got {}", self.outlier_threshold));
        }
        if self.sections.lstm {
            self.lstm
                .validate()
                .map_err(|e| PipelineError::input(Stage::Config, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Read,
    Parse,
    Clean,
    Align,
    Fit,
    Lstm,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Read => "read",
            Stage::Parse => "parse",
            Stage::Clean => "clean",
            Stage::Align => "align",
            Stage::Fit => "fit",
            Stage::Lstm => "lstm",
            Stage::Emit => "emit",
        })
    }
}

/// Input problems map to exit code 1, numerical failures to 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Input,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {cause}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub cause: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn new(stage: Stage, kind: FailureKind, cause: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self {
            stage,
            kind,
            cause: cause.into(),
        }
    }

    pub fn input(stage: Stage, cause: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self::new(stage, FailureKind::Input, cause)
    }

    pub fn numeric(stage: Stage, cause: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self::new(stage, FailureKind::Numeric, cause)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Input => 1,
            FailureKind::Numeric => 2,
        }
    }
}

fn model_error(e: FactorModelError) -> PipelineError {
    match e {
        FactorModelError::Regression(
            RegressionError::RankDeficient { .. }
            | RegressionError::NonFinite { .. }
            | RegressionError::BadDegreesOfFreedom(_)
            | RegressionError::NegativeStatistic(_),
        ) => PipelineError::numeric(Stage::Fit, e),
        other => PipelineError::input(Stage::Fit, other),
    }
}

fn lstm_error(e: LstmError) -> PipelineError {
    match e {
        LstmError::NonFiniteLoss { .. } | LstmError::Metrics(_) => PipelineError::numeric(Stage::Lstm, e),
        other => PipelineError::input(Stage::Lstm, other),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub column: String,
    pub date: YearMonth,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub months: usize,
    pub first_month: YearMonth,
    pub last_month: YearMonth,
    pub cells_filled: usize,
    pub outliers_removed: Vec<OutlierRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: PValue,
    pub stars: Stars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub model: ModelKind,
    pub equation: String,
    pub n_obs: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p_value: PValue,
    pub rows: Vec<CoefficientRow>,
}

/// Out-of-sample LSTM scores on the chronological test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmRow {
    pub split: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub first_test_month: YearMonth,
    pub r_squared: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub final_train_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector: String,
    pub coefficients: Vec<CoefficientTable>,
    pub comparison: Option<ComparisonTable>,
    pub lstm: Option<LstmRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub sectors: Vec<SectorReport>,
}

fn read_input(role: &str, path: &PathBuf) -> Result<(String, InputDigest), PipelineError> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::input(Stage::Read, format!("{}: {e}", path.display())))?;
    let digest = InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        bytes: bytes.len(),
        sha256: hex::encode(Sha256::digest(&bytes).as_slice()),
    };
    let text = String::from_utf8(bytes)
        .map_err(|e| PipelineError::input(Stage::Read, format!("{}: {e}", path.display())))?;
    Ok((text, digest))
}

fn parse(text: &str, path: &Path) -> Result<MonthlyPanel, PipelineError> {
    parse_panel_csv(text, None)
        .map_err(|e| PipelineError::input(Stage::Parse, format!("{}: {e}", path.display())))
}

fn coefficient_table(reg: &crate::factor_models::FactorRegression) -> CoefficientTable {
    let fit = &reg.fit;
    let terms = std::iter::once("const".to_string()).chain(fit.regressors.iter().cloned());
    CoefficientTable {
        model: reg.spec.kind,
        equation: reg.equation.clone(),
        n_obs: fit.n_obs(),
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        f_stat: fit.f_stat,
        f_p_value: fit.f_p_value,
        rows: terms
            .enumerate()
            .map(|(j, term)| CoefficientRow {
                term,
                estimate: fit.beta[j],
                std_error: fit.stderr[j],
                t_stat: fit.t_stats[j],
                p_value: fit.p_values[j],
                stars: reg.stars[j],
            })
            .collect(),
    }
}

/// Runs every requested stage. Identical configuration and input bytes give
/// an identical report.
pub fn run_pipeline(config: &RunConfig) -> Result<Report, PipelineError> {
    config.validate()?;

    let mut inputs = Vec::new();
    let mut factor_panel: Option<MonthlyPanel> = None;
    for path in &config.factors {
        let (text, digest) = read_input("factors", path)?;
        inputs.push(digest);
        let panel = parse(&text, path)?;
        factor_panel = Some(match factor_panel {
            None => panel,
            Some(acc) => acc.merge(&panel),
        });
    }
    let factor_panel = factor_panel.expect("validated non-empty").slice(config.from, config.to);
    let (text, digest) = read_input("portfolios", &config.portfolios)?;
    inputs.push(digest);
    let portfolio_panel = parse(&text, &config.portfolios)?.slice(config.from, config.to);

    let clean = |p: &MonthlyPanel, role: &str| {
        if p.is_empty() {
            return Err(PipelineError::input(
                Stage::Align,
                IngestError::EmptyRange {
                    from: config.from,
                    to: config.to,
                },
            ));
        }
        clean_panel(p, config.outlier_threshold)
            .map_err(|e| PipelineError::input(Stage::Clean, format!("{role}: {e}")))
    };
    let (factor_clean, factor_log) = clean(&factor_panel, "factors")?;
    let (portfolio_clean, portfolio_log) = clean(&portfolio_panel, "portfolios")?;
    let data = align_panels(&factor_clean, &portfolio_clean, config.from, config.to)
        .map_err(|e| PipelineError::input(Stage::Align, e))?;

    let specs: Vec<ModelSpec> = config.models.iter().map(|&k| ModelSpec::new(k)).collect();
    let mut sectors = Vec::with_capacity(config.sectors.len());
    for sector in &config.sectors {
        if data.sector(sector).is_none() {
            return Err(PipelineError::input(
                Stage::Align,
                IngestError::UnknownSector(sector.clone()),
            ));
        }
        let mut out = SectorReport {
            sector: sector.clone(),
            coefficients: Vec::new(),
            comparison: None,
            lstm: None,
        };
        if config.sections.coefficients || config.sections.comparison {
            let (regs, table) = fit_and_compare(&data, &specs, sector).map_err(model_error)?;
            if config.sections.coefficients {
                out.coefficients = regs.iter().map(coefficient_table).collect();
            }
            if config.sections.comparison {
                out.comparison = Some(table);
            }
        }
        if config.sections.lstm {
            let windows =
                build_windows(&data, sector, &LSTM_FACTORS, config.lstm.window).map_err(lstm_error)?;
            let (_, history) = train(&windows, &config.lstm).map_err(lstm_error)?;
            let n_train = history.train_samples;
            out.lstm = Some(LstmRow {
                split: "test".to_string(),
                train_samples: n_train,
                test_samples: history.test_samples,
                first_test_month: windows.samples[n_train].target_date,
                r_squared: history.test_metrics.r_squared,
                rmse: history.test_metrics.rmse,
                mae: history.test_metrics.mae,
                final_train_loss: history.losses.last().copied(),
            });
        }
        sectors.push(out);
    }

    let outliers_removed = factor_log
        .outliers_removed
        .iter()
        .chain(&portfolio_log.outliers_removed)
        .map(|(column, date, value)| OutlierRecord {
            column: column.clone(),
            date: *date,
            value: *value,
        })
        .collect();
    let dates = data.dates();
    Ok(Report {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            config: config.clone(),
            seed: config.sections.lstm.then_some(config.lstm.seed),
            months: dates.len(),
            first_month: dates[0],
            last_month: dates[dates.len() - 1],
            cells_filled: factor_log.filled.len() + portfolio_log.filled.len(),
            outliers_removed,
        },
        sectors,
    })
}

pub fn emit_report(report: &Report, format: OutputFormat) -> Result<Vec<u8>, PipelineError> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)
                .map_err(|e| PipelineError::numeric(Stage::Emit, e))?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Markdown => Ok(render_markdown(report).into_bytes()),
    }
}

/// Inverse of JSON [`emit_report`].
pub fn parse_report_json(bytes: &[u8]) -> Result<Report, PipelineError> {
    serde_json::from_slice(bytes).map_err(|e| PipelineError::input(Stage::Parse, e))
}
