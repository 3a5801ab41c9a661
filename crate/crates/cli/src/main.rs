//! `nfbench`: train, evaluate and benchmark neuro-fuzzy models from CSV files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use neurofuzzy::bench::{benchmark_suite, run_benchmark, BenchmarkConfig, SuiteEntry};
use neurofuzzy::data::{load_csv, Schema};
use neurofuzzy::fuzzy::MfKind;
use neurofuzzy::model::{train, FitConfig, Metrics, MfCounts, Mode, TrainedModel};
use neurofuzzy::reduction::FitnessData;

const DATA_DIR_ENV: &str = "NEUROFUZZY_DATA_DIR";

#[derive(Parser)]
#[command(name = "nfbench", version, about = "Grid ANFIS with PCA/BPSO rule reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model on a CSV file and write it as JSON.
    Train(TrainArgs),
    /// Score a saved model on a CSV file.
    Eval(EvalArgs),
    /// Cross-validate every suite dataset and write report files.
    Benchmark(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MfTypeArg {
    Gbell,
    Gaussian,
}

impl From<MfTypeArg> for MfKind {
    fn from(m: MfTypeArg) -> Self {
        match m {
            MfTypeArg::Gbell => MfKind::GBell,
            MfTypeArg::Gaussian => MfKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FitnessArg {
    /// Score masks on the training fold.
    Training,
    /// Score masks on a held-out 20% of the training fold.
    Validation,
}

impl From<FitnessArg> for FitnessData {
    fn from(f: FitnessArg) -> Self {
        match f {
            FitnessArg::Training => FitnessData::Training,
            FitnessArg::Validation => FitnessData::ValidationSplit,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Membership functions per input: one count, or one per feature ("3,2,2").
    #[arg(long)]
    mf_count: Option<MfCounts>,
    #[arg(long, value_enum, default_value = "gbell")]
    mf_type: MfTypeArg,
    /// Hybrid-learning epochs for the baseline.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// BPSO iterations.
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 0.95)]
    variance_threshold: f64,
    #[arg(long, default_value_t = 50)]
    swarm_cap: usize,
    /// Premise gradient step size.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, value_enum, default_value = "training")]
    fitness: FitnessArg,
}

impl FitArgs {
    fn config(&self, mode: Mode, seed: u64, default_mf: usize) -> FitConfig {
        FitConfig {
            mode,
            mf_counts: self.mf_count.clone().unwrap_or(MfCounts::Uniform(default_mf)),
            mf_type: self.mf_type.into(),
            epochs: self.epochs,
            iterations: self.iterations,
            variance_threshold: self.variance_threshold,
            swarm_cap: self.swarm_cap,
            lr: self.lr,
            seed,
            fitness_data: self.fitness.into(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// CSV file; a bare name is also looked up in $NEUROFUZZY_DATA_DIR.
    #[arg(long)]
    data: PathBuf,
    /// Schema TOML file or inline "target=NAME,task=classification".
    /// Defaults to the suite entry whose file name matches --data.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value = "pca-bpso")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model output path.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Schema for --data; defaults to the model's target and task.
    #[arg(long)]
    schema: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding the suite CSV files.
    #[arg(long, env = DATA_DIR_ENV)]
    data: PathBuf,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Modes to run, comma separated; the first is the comparison baseline.
    #[arg(long, value_delimiter = ',', default_value = "baseline-anfis,pca-only,bpso-only,pca-bpso")]
    mode: Vec<Mode>,
    /// Suite abbreviations to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    fit: FitArgs,
}

fn suite_entry_for(path: &Path) -> Option<SuiteEntry> {
    let name = path.file_name()?.to_str()?;
    benchmark_suite().into_iter().find(|e| e.file == name)
}

fn resolve_data(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if Path::new(&dir).join(path).exists() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn print_metrics(m: &Metrics) {
    match m {
        Metrics::Classification(c) => {
            println!("accuracy: {:.6}", c.accuracy);
            println!("precision: {:.6}", c.precision);
            println!("recall: {:.6}", c.recall);
            println!("f1: {:.6}", c.f1);
            if !c.undefined_classes.is_empty() {
                println!("undefined classes (scored 0): {:?}", c.undefined_classes);
            }
        }
        Metrics::Regression(r) => {
            println!("mse: {:.6}", r.mse);
            println!("mae: {:.6}", r.mae);
            println!("rmse: {:.6}", r.rmse);
            match r.cosine_distance {
                Some(d) => println!("cosine_distance: {d:.6}"),
                None => println!("cosine_distance: undefined"),
            }
        }
    }
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let data = resolve_data(&args.data);
    let entry = suite_entry_for(&data);
    let schema = match (&args.schema, &entry) {
        (Some(s), _) => Schema::resolve(s)?,
        (None, Some(e)) => e.schema(),
        (None, None) => bail!("--schema is required for {}", data.display()),
    };
    let ds = load_csv(&data, &schema)?;
    let config = args.fit.config(args.mode, args.seed, entry.map_or(2, |e| e.mf_count));
    let outcome = train(&ds, &config)?;
    outcome.model.save(&args.out)?;
    let s = &outcome.model.summary;
    println!("grid rules: {}", s.grid_rules);
    println!("final rules: {}", s.rule_count);
    if let Some(k) = s.components {
        println!("principal components: {k}");
    }
    println!("fit seconds: {:.3}", outcome.fit_time.as_secs_f64());
    match &s.training_metrics {
        Metrics::Classification(c) => println!("training error: {:.6}", 1.0 - c.accuracy),
        Metrics::Regression(r) => println!("training rmse: {:.6}", r.rmse),
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let schema = match &args.schema {
        Some(s) => Schema::resolve(s)?,
        None => Schema::new(model.target_name.clone(), model.task),
    };
    let data = resolve_data(&args.data);
    let ds = load_csv(&data, &schema)?;
    let metrics = model.evaluate(&ds)?;
    print_metrics(&metrics);
    Ok(())
}

/// Returns false when any dataset failed.
fn cmd_benchmark(args: &BenchArgs) -> anyhow::Result<bool> {
    let mut suite = benchmark_suite();
    if !args.datasets.is_empty() {
        if let Some(unknown) = args.datasets.iter().find(|d| !suite.iter().any(|e| &e.abbrev == *d)) {
            bail!("unknown dataset abbreviation {unknown}");
        }
        suite.retain(|e| args.datasets.contains(&e.abbrev));
    }
    let cfg = BenchmarkConfig {
        data_dir: args.data.clone(),
        out_dir: args.out.clone(),
        modes: args.mode.clone(),
        fit: args.fit.config(Mode::PcaBpso, args.seed, 2),
        mf_counts: args.fit.mf_count.clone(),
        folds: args.folds,
    };
    let outcome = run_benchmark(&suite, &cfg).context("benchmark aborted")?;
    for d in &outcome.datasets {
        match &d.result {
            Ok(_) => info!("{} done", d.entry.abbrev),
            Err(msg) => eprintln!("{} failed: {msg}", d.entry.abbrev),
        }
    }
    println!("reports written to {}", args.out.display());
    Ok(outcome.failed().is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
