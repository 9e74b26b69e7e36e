use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use factorcast::factor_models::ModelKind;
use factorcast::ingest::YearMonth;
use factorcast::lstm::{Optimizer, TrainConfig};
use factorcast::preprocess::DEFAULT_OUTLIER_THRESHOLD;
use factorcast::report::{emit_report, run_pipeline, OutputFormat, PipelineError, RunConfig, Sections, Stage};

#[derive(Parser)]
#[command(name = "factorcast", version, about = "Factor-model regressions and LSTM forecasts for monthly sector returns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient tables with significance stars.
    Fit(CommonArgs),
    /// R², F-test p-value, RMSE and MAE per model.
    Compare(CommonArgs),
    /// Train the LSTM and score it on the test split.
    Lstm {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        lstm: LstmArgs,
    },
    /// Everything: coefficients, comparison and LSTM.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        lstm: LstmArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Factor CSV; repeat to merge several files.
    #[arg(long = "factors", required = true)]
    factors: Vec<PathBuf>,
    /// Industry-portfolio CSV.
    #[arg(long)]
    portfolios: PathBuf,
    /// First month, YYYYMM.
    #[arg(long)]
    from: YearMonth,
    /// Last month, YYYYMM.
    #[arg(long)]
    to: YearMonth,
    #[arg(long, value_delimiter = ',', default_value = "Manuf,Hitec,Other")]
    sectors: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "ff3,carhart4,ff5")]
    models: Vec<ModelKind>,
    /// json or markdown.
    #[arg(long, default_value = "json")]
    format: OutputFormat,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Robust z-score above which a value is replaced by interpolation ("inf" disables).
    #[arg(long, default_value_t = DEFAULT_OUTLIER_THRESHOLD)]
    outlier_threshold: f64,
}

#[derive(Args)]
struct LstmArgs {
    /// key = value file with training settings; flags below override it.
    #[arg(long)]
    lstm_config: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    optimizer: Option<String>,
}

impl LstmArgs {
    fn resolve(&self) -> Result<TrainConfig, PipelineError> {
        let mut cfg = match &self.lstm_config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| PipelineError::input(Stage::Config, format!("{}: {e}", path.display())))?;
                TrainConfig::from_kv(&text).map_err(|e| PipelineError::input(Stage::Config, e))?
            }
            None => TrainConfig::default(),
        };
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(o) = &self.optimizer {
            cfg.optimizer = match o.to_ascii_lowercase().as_str() {
                "adam" => Optimizer::Adam,
                "sgd" => Optimizer::Sgd,
                _ => return Err(PipelineError::input(Stage::Config, format!("unknown optimizer {o:?}"))),
            };
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let (common, lstm, sections) = match cli.command {
        Command::Fit(c) => (
            c,
            None,
            Sections {
                coefficients: true,
                comparison: false,
                lstm: false,
            },
        ),
        Command::Compare(c) => (
            c,
            None,
            Sections {
                coefficients: false,
                comparison: true,
                lstm: false,
            },
        ),
        Command::Lstm { common, lstm } => (
            common,
            Some(lstm),
            Sections {
                coefficients: false,
                comparison: false,
                lstm: true,
            },
        ),
        Command::Report { common, lstm } => (common, Some(lstm), Sections::ALL),
    };
    let mut config = RunConfig::new(common.factors, common.portfolios, common.from, common.to);
    config.sectors = common.sectors;
    config.models = common.models;
    config.outlier_threshold = common.outlier_threshold;
    config.sections = sections;
    if let Some(l) = lstm {
        config.lstm = l.resolve()?;
    }

    let report = run_pipeline(&config)?;
    let bytes = emit_report(&report, common.format)?;
    match common.out {
        Some(path) => std::fs::write(&path, &bytes)
            .map_err(|e| PipelineError::input(Stage::Emit, format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| PipelineError::input(Stage::Emit, e)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
