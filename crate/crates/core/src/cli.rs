//! Command-line interface: `synth`, `train`, `evaluate`, `predict`, `inspect`.
//!
//! Exit codes: 0 success, 1 domain error (bad data, bad config, degenerate
//! labels), 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, PipelineConfig};
use crate::dataset::{
    generate_synthetic, load_table, split_rows, write_table, Dataset, SyntheticConfig,
    TableFormat, TARGETS,
};
use crate::ensemble::{
    compare_models, hierarchy_consistency, load_model, predict_products, save_model,
    score_predictions, train_ensemble, PredictionRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{cross_target_average, emit_comparison, format_table, MetricsReport};

pub const THREADS_ENV: &str = "PRODCAT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "prodcat", version, about = "Product categorisation: train, evaluate and apply per-target classifiers")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic long-tail product catalog.
    Synth(SynthArgs),
    /// Train the per-target ensemble and write a model file.
    Train(TrainArgs),
    /// Score a model, or compare all model kinds, on labelled data.
    Evaluate(EvaluateArgs),
    /// Predict all three targets for every row.
    Predict(PredictArgs),
    /// Print model metadata.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub rows: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, default_value_t = 5)]
    pub bottoms_per_top: usize,
    #[arg(long, default_value_t = 10)]
    pub colors: usize,
    #[arg(long, default_value_t = 1.5)]
    pub zipf: f64,
    #[arg(long, default_value_t = 0.1)]
    pub missing: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input table (CSV, or Parquet when built with the `parquet` feature).
    #[arg(long)]
    pub data: PathBuf,
    /// Table format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let format = match &self.format {
            Some(f) => f.parse()?,
            None => TableFormat::from_path(&self.data),
        };
        load_table(&self.data, format)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model to score. Not used with --holdout or --compare, which train their own.
    #[arg(long, conflicts_with_all = ["holdout", "compare", "config"])]
    pub model: Option<PathBuf>,
    /// TOML config for models trained by --holdout or --compare.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hold out this fraction of rows, train on the rest, score the held-out rows.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Seed of the holdout split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Train and score every model kind on every target.
    #[arg(long)]
    pub compare: bool,
    /// Comparison CSV (target, model, precision, recall, f1).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // A pool may already exist when run() is called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Synth(a) => synth(a)?,
        Command::Train(a) => train(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Predict(a) => predict(a)?,
        Command::Inspect(a) => inspect(a)?,
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n_rows: a.rows,
        n_top: a.top,
        bottoms_per_top: a.bottoms_per_top,
        n_colors: a.colors,
        zipf_exponent: a.zipf,
        missing_rate: a.missing,
        noise_rate: a.noise,
        seed: a.seed,
    };
    let data = generate_synthetic(&cfg)?;
    write_table(&data, &a.out, TableFormat::Csv)?;
    eprintln!("wrote {} rows to {}", data.row_count(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let data = a.data.load()?;
    let model = train_ensemble(&data, &config)?;
    save_model(&model, &a.out)?;
    eprint!("{}", model.describe());
    eprintln!("wrote model to {}", a.out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> std::result::Result<(), Failure> {
    if a.model.is_none() && a.holdout.is_none() && !a.compare {
        return Err(Failure::Usage(
            "evaluate needs --model, --holdout or --compare".into(),
        ));
    }
    let data = a.data.load()?;
    let (train_rows, eval_rows, mode) = match a.holdout {
        Some(f) => {
            let (held, rest) = split_rows(&data, f, a.split_seed)?;
            (rest, held, format!("holdout (fraction {f}, split seed {})", a.split_seed))
        }
        None => (data.clone(), data, "training-set".to_string()),
    };

    let reports: Vec<MetricsReport>;
    let mut out = std::io::stdout().lock();
    if a.compare {
        let config = load_config(a.config.as_deref())?;
        reports = compare_models(&train_rows, &eval_rows, &config)?;
        let _ = writeln!(out, "mode: {mode}, {} evaluated rows", eval_rows.row_count());
        let _ = write!(out, "{}", format_table(&reports));
    } else {
        let model = match &a.model {
            Some(p) => load_model(p)?,
            None => train_ensemble(&train_rows, &load_config(a.config.as_deref())?)?,
        };
        let records = predict_products(&model, &eval_rows)?;
        reports = score_predictions(&model, &records, &eval_rows)?;
        let _ = writeln!(out, "mode: {mode}, {} evaluated rows", eval_rows.row_count());
        let _ = write!(out, "{}", format_table(&reports));
        let f1s = [0, 1, 2].map(|i| reports[i].macro_avg.f1);
        let _ = writeln!(out, "cross-target average macro F1: {:.2}", cross_target_average(f1s));
        if let Some(rate) = hierarchy_consistency(&records, &train_rows)? {
            let _ = writeln!(out, "hierarchy consistency: {rate:.4}");
        }
    }
    if let Some(path) = &a.report {
        emit_comparison(&reports, path)?;
    }
    Ok(())
}

pub fn write_predictions<W: Write>(records: &[PredictionRecord], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["row", TARGETS[0], TARGETS[1], TARGETS[2]])?;
    for r in records {
        w.write_record([
            r.row.to_string().as_str(),
            &r.top_category,
            &r.bottom_category,
            &r.color,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = a.data.load()?;
    let records = predict_products(&model, &data)?;
    match &a.out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            write_predictions(&records, std::io::BufWriter::new(f))?;
            eprintln!("wrote {} predictions to {}", records.len(), p.display());
        }
        None => write_predictions(&records, std::io::stdout().lock())?,
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    print!("{}", model.describe());
    println!("config:\n{}", model.config.to_toml_string());
    Ok(())
}
