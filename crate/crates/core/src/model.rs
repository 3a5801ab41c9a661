//! End-to-end fitting on a dataset, trained-model files and evaluation.

use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::consequent::{AnfisModel, DEFAULT_LEARNING_RATE};
use crate::data::{Dataset, MinMaxScaler, TaskKind};
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyFrontEnd, InputSpec, MfKind, TNorm};
use crate::metrics::{classification_metrics, decode_all, regression_metrics, ClassificationMetrics, RegressionMetrics};
use crate::pca::DEFAULT_VARIANCE_THRESHOLD;
use crate::reduction::{self, FitnessData, ReducedModel, ReductionConfig, ReductionMode};

/// Format tag written into every model file.
pub const MODEL_FORMAT: &str = "neurofuzzy-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    BaselineAnfis,
    PcaOnly,
    BpsoOnly,
    PcaBpso,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::BaselineAnfis, Mode::PcaOnly, Mode::BpsoOnly, Mode::PcaBpso];

    pub fn name(self) -> &'static str {
        match self {
            Mode::BaselineAnfis => "baseline-anfis",
            Mode::PcaOnly => "pca-only",
            Mode::BpsoOnly => "bpso-only",
            Mode::PcaBpso => "pca-bpso",
        }
    }

    fn reduction(self) -> Option<ReductionMode> {
        match self {
            Mode::BaselineAnfis => None,
            Mode::PcaOnly => Some(ReductionMode::PcaOnly),
            Mode::BpsoOnly => Some(ReductionMode::BpsoOnly),
            Mode::PcaBpso => Some(ReductionMode::PcaBpso),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown mode '{s}' (expected baseline-anfis, pca-only, bpso-only or pca-bpso)"
                ))
            })
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Membership functions per input: one count for all, or one per input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MfCounts {
    Uniform(usize),
    PerFeature(Vec<usize>),
}

impl MfCounts {
    pub fn resolve(&self, inputs: usize) -> Result<Vec<usize>> {
        let counts = match self {
            MfCounts::Uniform(m) => vec![*m; inputs],
            MfCounts::PerFeature(v) if v.len() == inputs => v.clone(),
            MfCounts::PerFeature(v) => {
                return Err(Error::InvalidConfig(format!(
                    "mf_count lists {} values for {inputs} inputs",
                    v.len()
                )))
            }
        };
        if counts.contains(&0) {
            return Err(Error::InvalidConfig("mf_count must be >= 1".into()));
        }
        Ok(counts)
    }

    /// Grid size for the given number of inputs.
    pub fn rule_count(&self, inputs: usize) -> Result<usize> {
        Ok(self.resolve(inputs)?.iter().product())
    }
}

impl FromStr for MfCounts {
    type Err = Error;

    /// `3` or `3,2,2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("mf_count '{s}' is not a count or list of counts")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(match parts.as_slice() {
            [m] => MfCounts::Uniform(*m),
            _ => MfCounts::PerFeature(parts),
        })
    }
}

impl std::fmt::Display for MfCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MfCounts::Uniform(m) => write!(f, "{m}"),
            MfCounts::PerFeature(v) => {
                let s: Vec<String> = v.iter().map(|m| m.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: Mode,
    pub mf_counts: MfCounts,
    pub mf_type: MfKind,
    /// Hybrid-learning epochs (baseline only).
    pub epochs: usize,
    /// Swarm iterations.
    pub iterations: usize,
    pub variance_threshold: f64,
    pub swarm_cap: usize,
    pub lr: f64,
    pub seed: u64,
    pub fitness_data: FitnessData,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: Mode::PcaBpso,
            mf_counts: MfCounts::Uniform(2),
            mf_type: MfKind::GBell,
            epochs: 100,
            iterations: 100,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            swarm_cap: 50,
            lr: DEFAULT_LEARNING_RATE,
            seed: 0,
            fitness_data: FitnessData::Training,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be a finite value >= 0, got {}", self.lr)));
        }
        self.reduction_config().validate()
    }

    fn reduction_config(&self) -> ReductionConfig {
        ReductionConfig {
            mode: self.mode.reduction().unwrap_or(ReductionMode::PcaBpso),
            variance_threshold: self.variance_threshold,
            iterations: self.iterations,
            swarm_cap: self.swarm_cap,
            fitness_data: self.fitness_data,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Network {
    Anfis(AnfisModel),
    Reduced(ReducedModel),
}

impl Network {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            Network::Anfis(m) => m.predict(x),
            Network::Reduced(m) => m.predict(x),
        }
    }

    pub fn grid_rule_count(&self) -> usize {
        match self {
            Network::Anfis(m) => m.rule_count(),
            Network::Reduced(m) => m.grid_rule_count(),
        }
    }

    /// Rules in the final model.
    pub fn rule_count(&self) -> usize {
        match self {
            Network::Anfis(m) => m.rule_count(),
            Network::Reduced(m) => m.rule_count(),
        }
    }

    pub fn component_count(&self) -> Option<usize> {
        match self {
            Network::Anfis(_) => None,
            Network::Reduced(m) => Some(m.component_count()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Metrics {
    Classification(ClassificationMetrics),
    Regression(RegressionMetrics),
}

impl Metrics {
    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Metrics::Classification(m) => Some(m.accuracy),
            Metrics::Regression(_) => None,
        }
    }

    pub fn rmse(&self) -> Option<f64> {
        match self {
            Metrics::Classification(_) => None,
            Metrics::Regression(m) => Some(m.rmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub grid_rules: usize,
    pub rule_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    pub training_metrics: Metrics,
}

/// Everything needed to score raw feature rows: scalers, label table,
/// fitted network and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub task: TaskKind,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub classes: Vec<String>,
    pub feature_scaler: MinMaxScaler,
    /// Regression targets are modeled on the training range mapped to [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scaler: Option<MinMaxScaler>,
    pub config: FitConfig,
    pub network: Network,
    pub summary: TrainingSummary,
}

/// Result of [`train`]: the model plus its fit wall-clock time, which is kept
/// out of the model file so that seeded runs serialize identically.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub fit_time: Duration,
}

fn modeled_targets(ds: &Dataset, target_scaler: Option<&MinMaxScaler>) -> Result<Array1<f64>> {
    match target_scaler {
        Some(s) => s.transform_vector(ds.targets.view()),
        None => Ok(ds.targets.clone()),
    }
}

/// Scales the training fold, builds the grid and fits the configured mode.
/// The returned fit time covers model fitting only, not scaling.
pub fn train(ds: &Dataset, config: &FitConfig) -> Result<FitOutcome> {
    config.validate()?;
    if ds.task == TaskKind::Classification && ds.class_count() < 2 {
        return Err(Error::InsufficientData(format!(
            "classification needs at least 2 classes, training data has {}",
            ds.class_count()
        )));
    }
    let feature_scaler = MinMaxScaler::fit(ds.features.view())?;
    let x = feature_scaler.transform(ds.features.view())?;
    let target_scaler = match ds.task {
        TaskKind::Regression => Some(MinMaxScaler::fit_vector(ds.targets.view())?),
        TaskKind::Classification => None,
    };
    let y = modeled_targets(ds, target_scaler.as_ref())?;
    let specs = config
        .mf_counts
        .resolve(ds.n_features())?
        .into_iter()
        .map(|m| InputSpec::new(0.0, 1.0, m))
        .collect::<Result<Vec<_>>>()?;
    let front = FuzzyFrontEnd::new(&specs, config.mf_type, TNorm::Product)?;

    let start = Instant::now();
    let network = match config.mode.reduction() {
        None => {
            let mut m = AnfisModel::new(front);
            m.train(x.view(), y.view(), config.epochs, config.lr)?;
            Network::Anfis(m)
        }
        Some(mode) => {
            let rc = ReductionConfig {
                mode,
                ..config.reduction_config()
            };
            Network::Reduced(reduction::fit(front, x.view(), y.view(), &rc)?.model)
        }
    };
    let fit_time = start.elapsed();

    let raw = network.predict(x.view())?;
    let training_metrics = task_metrics(ds.task, ds.class_count(), y.view(), raw.view())?;
    let model = TrainedModel {
        format: MODEL_FORMAT.to_string(),
        task: ds.task,
        feature_names: ds.feature_names.clone(),
        target_name: ds.target_name.clone(),
        classes: ds.classes.clone(),
        feature_scaler,
        target_scaler,
        config: config.clone(),
        summary: TrainingSummary {
            grid_rules: network.grid_rule_count(),
            rule_count: network.rule_count(),
            components: network.component_count(),
            training_metrics,
        },
        network,
    };
    Ok(FitOutcome { model, fit_time })
}

/// Metrics of raw outputs against modeled targets (class ids, or normalized
/// regression targets).
fn task_metrics(task: TaskKind, classes: usize, y: ArrayView1<f64>, raw: ArrayView1<f64>) -> Result<Metrics> {
    let raw = raw.to_vec();
    match task {
        TaskKind::Classification => {
            let truth: Vec<usize> = y.iter().map(|&t| t as usize).collect();
            let pred = decode_all(&raw, classes)?;
            Ok(Metrics::Classification(classification_metrics(&truth, &pred, classes)?))
        }
        TaskKind::Regression => Ok(Metrics::Regression(regression_metrics(&y.to_vec(), &raw)?)),
    }
}

impl TrainedModel {
    /// Raw network outputs for unscaled feature rows. Regression outputs are
    /// on the normalized target scale.
    pub fn predict_raw(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        let x = self.feature_scaler.transform(features)?;
        self.network.predict(x.view())
    }

    pub fn predict_labels(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        if self.task != TaskKind::Classification {
            return Err(Error::Schema("regression model has no class labels".into()));
        }
        decode_all(&self.predict_raw(features)?.to_vec(), self.classes.len())
    }

    fn check_schema(&self, ds: &Dataset) -> Result<()> {
        if ds.task != self.task {
            return Err(Error::Schema(format!(
                "{} model cannot score {} data",
                self.task, ds.task
            )));
        }
        if ds.feature_names != self.feature_names {
            return Err(Error::Schema(format!(
                "features {:?} do not match the model's {:?}",
                ds.feature_names, self.feature_names
            )));
        }
        Ok(())
    }

    /// Task metrics on `ds`. Class labels are matched by name, so `ds` may
    /// number its classes differently; regression metrics are on the
    /// normalized target scale.
    pub fn evaluate(&self, ds: &Dataset) -> Result<Metrics> {
        self.check_schema(ds)?;
        let raw = self.predict_raw(ds.features.view())?;
        let y = match self.task {
            TaskKind::Classification => {
                let truth = ds
                    .targets
                    .iter()
                    .map(|&t| {
                        let name = ds
                            .classes
                            .get(t as usize)
                            .ok_or_else(|| Error::UnknownLabel(t.to_string()))?;
                        self.classes
                            .iter()
                            .position(|c| c == name)
                            .ok_or_else(|| Error::UnknownLabel(name.clone()))
                    })
                    .map(|r| r.map(|c| c as f64))
                    .collect::<Result<Array1<f64>>>()?;
                truth
            }
            TaskKind::Regression => modeled_targets(ds, self.target_scaler.as_ref())?,
        };
        task_metrics(self.task, self.classes.len(), y.view(), raw.view())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Schema(format!(
                "unsupported model format '{}' (expected {MODEL_FORMAT})",
                model.format
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
