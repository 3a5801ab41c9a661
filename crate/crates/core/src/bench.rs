//! Cross-validation runs and the benchmark suite with its report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{kfold, load_csv, Dataset, Schema, TaskKind};
use crate::error::{Error, Result};
use crate::model::{train, FitConfig, MfCounts, Metrics, Mode};

/// One benchmark dataset with its default grid and expected grid size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub abbrev: String,
    pub title: String,
    pub file: String,
    pub target: String,
    pub task: TaskKind,
    pub features: usize,
    pub mf_count: usize,
    pub expected_rules: usize,
}

impl SuiteEntry {
    #[allow(clippy::too_many_arguments)]
    fn new(
        abbrev: &str,
        title: &str,
        file: &str,
        target: &str,
        task: TaskKind,
        features: usize,
        mf_count: usize,
        expected_rules: usize,
    ) -> Self {
        SuiteEntry {
            abbrev: abbrev.into(),
            title: title.into(),
            file: file.into(),
            target: target.into(),
            task,
            features,
            mf_count,
            expected_rules,
        }
    }

    pub fn schema(&self) -> Schema {
        Schema::new(self.target.clone(), self.task)
    }

    /// Grid size implied by `features` inputs with `mf_count` each.
    pub fn grid_rules(&self) -> usize {
        self.mf_count.pow(self.features as u32)
    }

    pub fn path(&self, data_dir: &Path) -> PathBuf {
        data_dir.join(&self.file)
    }
}

/// The twelve benchmark datasets. Airfoil is listed with five inputs, the
/// count that matches its 32-rule grid.
pub fn benchmark_suite() -> Vec<SuiteEntry> {
    use TaskKind::{Classification as C, Regression as R};
    vec![
        SuiteEntry::new("IRS", "Iris", "iris.csv", "class", C, 4, 3, 81),
        SuiteEntry::new("TAE", "Teaching Assistant Evaluation", "tae.csv", "class", C, 5, 2, 32),
        SuiteEntry::new("PHO", "Phoneme", "phoneme.csv", "class", C, 5, 2, 32),
        SuiteEntry::new("BAN", "Banana", "banana.csv", "class", C, 2, 3, 9),
        SuiteEntry::new("HAB", "Haberman", "haberman.csv", "survival", C, 3, 3, 27),
        SuiteEntry::new("THY", "NewThyroid", "newthyroid.csv", "class", C, 5, 2, 32),
        SuiteEntry::new("BAL", "Balance", "balance.csv", "class", C, 4, 2, 16),
        SuiteEntry::new("MOK", "Monk2", "monk2.csv", "class", C, 6, 2, 64),
        SuiteEntry::new("SER", "Servo", "servo.csv", "class", R, 4, 2, 16),
        SuiteEntry::new("AIR", "Airfoil Noise", "airfoil.csv", "sound_pressure", R, 5, 2, 32),
        SuiteEntry::new("IST", "Istanbul Stock Exchange", "istanbul.csv", "ISE", R, 8, 2, 256),
        SuiteEntry::new("TEC", "Tecator", "tecator.csv", "fat", R, 4, 2, 16),
    ]
}

/// Dataset, schema and fitting settings for one cross-validated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: Schema,
    pub fit: FitConfig,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub grid_rules: usize,
    pub rule_count: usize,
    pub components: Option<usize>,
    pub fit_seconds: f64,
}

/// Mean and population standard deviation over folds; `None` if any fold
/// left the metric undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[Option<f64>]) -> Summary {
        let defined: Option<Vec<f64>> = values.iter().copied().collect();
        match defined {
            Some(v) if !v.is_empty() => {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                Summary {
                    mean: Some(mean),
                    std: Some(var.sqrt()),
                }
            }
            _ => Summary { mean: None, std: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub mode: Mode,
    pub task: TaskKind,
    pub folds: Vec<FoldResult>,
}

/// Metric columns, in report order.
pub fn metric_names(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Classification => &["accuracy", "precision", "recall", "f1"],
        TaskKind::Regression => &["mse", "mae", "rmse", "cosine_distance"],
    }
}

fn metric_value(m: &Metrics, name: &str) -> Option<f64> {
    match m {
        Metrics::Classification(c) => match name {
            "accuracy" => Some(c.accuracy),
            "precision" => Some(c.precision),
            "recall" => Some(c.recall),
            "f1" => Some(c.f1),
            _ => None,
        },
        Metrics::Regression(r) => match name {
            "mse" => Some(r.mse),
            "mae" => Some(r.mae),
            "rmse" => Some(r.rmse),
            "cosine_distance" => r.cosine_distance,
            _ => None,
        },
    }
}

impl EvalReport {
    /// Per-fold values of a metric column, `rules`, `components` or
    /// `fit_seconds`.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        self.folds
            .iter()
            .map(|f| match name {
                "rules" => Some(f.rule_count as f64),
                "grid_rules" => Some(f.grid_rules as f64),
                "components" => f.components.map(|c| c as f64),
                "fit_seconds" => Some(f.fit_seconds),
                m => metric_value(&f.metrics, m),
            })
            .collect()
    }

    pub fn summary(&self, name: &str) -> Summary {
        Summary::of(&self.column(name))
    }

    /// Columns written to report files. Timing is excluded so that seeded
    /// reports are reproducible byte for byte.
    pub fn report_columns(&self) -> Vec<&'static str> {
        let mut cols = metric_names(self.task).to_vec();
        cols.extend(["grid_rules", "rules"]);
        if self.mode != Mode::BaselineAnfis {
            cols.push("components");
        }
        cols
    }

    /// Machine-readable report: one row per fold, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let cols = self.report_columns();
        let mut out = format!("fold,{}\n", cols.join(","));
        let full = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:?}"));
        for (i, f) in self.folds.iter().enumerate() {
            let cells: Vec<String> = cols.iter().map(|c| full(self.column(c)[i])).collect();
            let _ = writeln!(out, "{},{}", f.fold, cells.join(","));
        }
        for (label, pick) in [("mean", true), ("std", false)] {
            let cells: Vec<String> = cols
                .iter()
                .map(|c| {
                    let s = self.summary(c);
                    full(if pick { s.mean } else { s.std })
                })
                .collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }

    /// Human-readable table with four decimals and a `mean (±std)` row.
    pub fn to_table(&self) -> String {
        let cols = self.report_columns();
        let width = 18;
        let mut out = format!("{} / {} ({} folds)\n", self.dataset, self.mode, self.folds.len());
        let _ = write!(out, "{:<8}", "fold");
        for c in &cols {
            let _ = write!(out, "{c:>width$}");
        }
        out.push('\n');
        let short = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
        for (i, f) in self.folds.iter().enumerate() {
            let _ = write!(out, "{:<8}", f.fold);
            for c in &cols {
                let _ = write!(out, "{:>width$}", short(self.column(c)[i]));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<8}", "mean");
        for c in &cols {
            let _ = write!(out, "{:>width$}", format_mean_std(self.summary(c)));
        }
        out.push('\n');
        out
    }
}

pub fn format_mean_std(s: Summary) -> String {
    match (s.mean, s.std) {
        (Some(m), Some(d)) => format!("{m:.4} (±{d:.4})"),
        _ => "undefined".to_string(),
    }
}

/// Seeded k-fold cross-validation; folds are stratified for classification.
pub fn cross_validate(ds: &Dataset, name: &str, fit: &FitConfig, folds: usize) -> Result<EvalReport> {
    let labels = ds.labels();
    let plan = kfold(ds.n_samples(), folds, fit.seed, labels.as_deref())?;
    let mut results = Vec::with_capacity(folds);
    for f in 0..plan.k() {
        let train_ds = ds.subset(&plan.train_indices(f));
        let test_ds = ds.subset(plan.test_indices(f));
        let out = train(&train_ds, fit)?;
        let metrics = out.model.evaluate(&test_ds)?;
        info!(
            "{name} {} fold {f}: {} rules, {:.3}s",
            fit.mode,
            out.model.summary.rule_count,
            out.fit_time.as_secs_f64()
        );
        results.push(FoldResult {
            fold: f,
            metrics,
            grid_rules: out.model.summary.grid_rules,
            rule_count: out.model.summary.rule_count,
            components: out.model.summary.components,
            fit_seconds: out.fit_time.as_secs_f64(),
        });
    }
    Ok(EvalReport {
        dataset: name.to_string(),
        mode: fit.mode,
        task: ds.task,
        folds: results,
    })
}

/// Benchmark-wide settings; per-dataset grids come from the suite unless
/// `mf_counts` overrides them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Modes run for every dataset; the first is the comparison baseline.
    pub modes: Vec<Mode>,
    pub fit: FitConfig,
    pub mf_counts: Option<MfCounts>,
    pub folds: usize,
}

#[derive(Debug, Clone)]
pub struct DatasetOutcome {
    pub entry: SuiteEntry,
    pub result: std::result::Result<Vec<EvalReport>, String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub datasets: Vec<DatasetOutcome>,
}

impl BenchmarkOutcome {
    pub fn failed(&self) -> Vec<&DatasetOutcome> {
        self.datasets.iter().filter(|d| d.result.is_err()).collect()
    }
}

fn run_dataset(entry: &SuiteEntry, cfg: &BenchmarkConfig) -> Result<Vec<EvalReport>> {
    let ds = load_csv(entry.path(&cfg.data_dir), &entry.schema())?;
    if ds.n_features() != entry.features {
        warn!(
            "{}: file has {} features, suite lists {}",
            entry.abbrev,
            ds.n_features(),
            entry.features
        );
    }
    cfg.modes
        .iter()
        .map(|&mode| {
            let fit = FitConfig {
                mode,
                mf_counts: cfg.mf_counts.clone().unwrap_or(MfCounts::Uniform(entry.mf_count)),
                ..cfg.fit.clone()
            };
            cross_validate(&ds, &entry.abbrev, &fit, cfg.folds)
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every suite entry, isolating failures, and writes per-dataset
/// reports, the comparison files and a separate timing file.
pub fn run_benchmark(suite: &[SuiteEntry], cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome> {
    if cfg.modes.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one mode".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = suite.iter().find(|e| !seen.insert(&e.abbrev)) {
        return Err(Error::InvalidConfig(format!("duplicate dataset abbreviation {}", dup.abbrev)));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let mut datasets = Vec::with_capacity(suite.len());
    for entry in suite {
        let result = run_dataset(entry, cfg).map_err(|e| e.to_string());
        match &result {
            Ok(reports) => {
                for r in reports {
                    let stem = format!("{}_{}", entry.abbrev, r.mode);
                    write_file(&cfg.out_dir.join(format!("{stem}.csv")), &r.to_csv())?;
                    write_file(&cfg.out_dir.join(format!("{stem}.txt")), &r.to_table())?;
                }
            }
            Err(msg) => warn!("{} failed: {msg}", entry.abbrev),
        }
        datasets.push(DatasetOutcome {
            entry: entry.clone(),
            result,
        });
    }
    let outcome = BenchmarkOutcome { datasets };
    write_file(&cfg.out_dir.join("comparison.csv"), &comparison_csv(&outcome))?;
    write_file(&cfg.out_dir.join("comparison.txt"), &comparison_table(&outcome))?;
    write_file(&cfg.out_dir.join("timings.csv"), &timings_csv(&outcome))?;
    Ok(outcome)
}

fn headline(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Classification => "accuracy",
        TaskKind::Regression => "rmse",
    }
}

/// One row per dataset and mode: status, headline metric and rule counts.
pub fn comparison_csv(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::from("dataset,mode,status,metric,mean,std,grid_rules,rules_mean,rules_std\n");
    let full = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:?}"));
    for d in &outcome.datasets {
        match &d.result {
            Ok(reports) => {
                for r in reports {
                    let m = headline(r.task);
                    let s = r.summary(m);
                    let rules = r.summary("rules");
                    let _ = writeln!(
                        out,
                        "{},{},ok,{m},{},{},{},{},{}",
                        d.entry.abbrev,
                        r.mode,
                        full(s.mean),
                        full(s.std),
                        full(r.summary("grid_rules").mean),
                        full(rules.mean),
                        full(rules.std)
                    );
                }
            }
            Err(msg) => {
                let _ = writeln!(out, "{},,failed: {},,,,,,", d.entry.abbrev, msg.replace([',', '\n'], ";"));
            }
        }
    }
    out
}

/// Side-by-side table of every mode per dataset.
pub fn comparison_table(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::new();
    for d in &outcome.datasets {
        let _ = writeln!(out, "{} ({})", d.entry.abbrev, d.entry.title);
        match &d.result {
            Ok(reports) => {
                let _ = write!(out, "  {:<22}", "");
                for r in reports {
                    let _ = write!(out, "{:>24}", r.mode.name());
                }
                out.push('\n');
                let task = reports.first().map_or(TaskKind::Classification, |r| r.task);
                let mut rows: Vec<&str> = metric_names(task).to_vec();
                rows.push("rules");
                for row in rows {
                    let _ = write!(out, "  {row:<22}");
                    for r in reports {
                        let _ = write!(out, "{:>24}", format_mean_std(r.summary(row)));
                    }
                    out.push('\n');
                }
            }
            Err(msg) => {
                let _ = writeln!(out, "  FAILED: {msg}");
            }
        }
        out.push('\n');
    }
    out
}

/// Per-fold fit wall-clock seconds, kept apart from the reproducible reports.
pub fn timings_csv(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::from("dataset,mode,fold,fit_seconds\n");
    for d in &outcome.datasets {
        if let Ok(reports) = &d.result {
            for r in reports {
                for f in &r.folds {
                    let _ = writeln!(out, "{},{},{},{:?}", d.entry.abbrev, r.mode, f.fold, f.fit_seconds);
                }
            }
        }
    }
    out
}
