//! Dataset loading, min-max scaling and fold plans.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classification" | "class" | "c" => Ok(TaskKind::Classification),
            "regression" | "reg" | "r" => Ok(TaskKind::Regression),
            other => Err(Error::InvalidConfig(format!(
                "unknown task kind '{other}' (expected classification or regression)"
            ))),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        })
    }
}

/// Column binding for a CSV file. Without an explicit feature list every
/// non-target column is a feature, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
}

impl Schema {
    pub fn new(target: impl Into<String>, task: TaskKind) -> Self {
        Schema {
            target: target.into(),
            task,
            features: None,
        }
    }

    /// Parses `target=NAME,task=KIND[,features=A;B;C]`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let mut target = None;
        let mut task = None;
        let mut features = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("schema entry '{part}' is not key=value")))?;
            match key.trim() {
                "target" => target = Some(value.trim().to_string()),
                "task" => task = Some(value.parse()?),
                "features" => {
                    features = Some(value.split(';').map(|f| f.trim().to_string()).collect())
                }
                other => return Err(Error::InvalidConfig(format!("unknown schema key '{other}'"))),
            }
        }
        Ok(Schema {
            target: target.ok_or_else(|| Error::InvalidConfig("schema is missing 'target'".into()))?,
            task: task.ok_or_else(|| Error::InvalidConfig("schema is missing 'task'".into()))?,
            features,
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(format!("schema file: {e}")))
    }

    /// Reads a TOML schema file if `spec` names one, else parses it inline.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Self::from_toml_str(&text)
        } else {
            Self::parse_inline(spec)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Array2<f64>,
    /// Regression targets, or class indices stored as floats.
    pub targets: Array1<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub task: TaskKind,
    /// Original class labels, indexed by class id.
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Class ids (classification only).
    pub fn labels(&self) -> Option<Vec<usize>> {
        (self.task == TaskKind::Classification).then(|| self.targets.iter().map(|&t| t as usize).collect())
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            task: self.task,
            classes: self.classes.clone(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "NaN" | "nan")
}

/// Loads a headed CSV file. Class labels are numbered in order of first
/// appearance.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: no column named '{name}'", path.display())))
    };
    let target_col = column(&schema.target)?;
    let feature_names: Vec<String> = match &schema.features {
        Some(f) => f.clone(),
        None => headers
            .iter()
            .filter(|h| **h != schema.target)
            .cloned()
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(Error::Schema(format!("{}: no feature columns", path.display())));
    }
    let feature_cols = feature_names
        .iter()
        .map(|n| column(n))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut targets = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let parse_error = |line: usize, col: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        column: headers[col].clone(),
        message,
    };
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |col: usize| -> Result<&str> {
            let v = record.get(col).ok_or_else(|| parse_error(line, col, "row is too short".into()))?;
            if is_missing(v) {
                return Err(Error::MissingValue {
                    path: PathBuf::from(path),
                    line,
                    column: headers[col].clone(),
                });
            }
            Ok(v)
        };
        for &col in &feature_cols {
            let raw = cell(col)?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_error(line, col, format!("'{raw}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(line, col, format!("'{raw}' is not finite")));
            }
            values.push(v);
        }
        let raw = cell(target_col)?;
        let t = match schema.task {
            TaskKind::Regression => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, target_col, format!("'{raw}' is not a number")))?,
            TaskKind::Classification => {
                let next = classes.len();
                let id = *class_ids.entry(raw.to_string()).or_insert_with(|| {
                    classes.push(raw.to_string());
                    next
                });
                id as f64
            }
        };
        targets.push(t);
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!("{}: no data rows", path.display())));
    }
    let features = Array2::from_shape_vec((n, feature_cols.len()), values)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok(Dataset {
        features,
        targets: Array1::from(targets),
        feature_names,
        target_name: schema.target.clone(),
        task: schema.task,
        classes,
    })
}

/// Per-column affine map of the fitted range onto `[0, 1]`. Values outside
/// the fitted range map outside `[0, 1]`; constant columns map to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InsufficientData("cannot scale an empty matrix".into()));
        }
        let mut lo = Vec::with_capacity(x.ncols());
        let mut hi = Vec::with_capacity(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let l = col.iter().copied().fold(f64::INFINITY, f64::min);
            let h = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if l == h {
                warn!("feature {j} is constant ({l}); scaling it to 0.5");
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(MinMaxScaler { lo, hi })
    }

    pub fn fit_vector(v: ArrayView1<f64>) -> Result<Self> {
        Self::fit(v.insert_axis(Axis(1)))
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let span = self.hi[j] - self.lo[j];
        if span > 0.0 {
            (v - self.lo[j]) / span
        } else {
            0.5
        }
    }

    fn unscale(&self, j: usize, v: f64) -> f64 {
        let span = self.hi[j] - self.lo[j];
        if span > 0.0 {
            self.lo[j] + v * span
        } else {
            self.lo[j]
        }
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{cols} columns, scaler fitted on {}",
                self.dims()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        Ok(Array2::from_shape_fn(x.dim(), |(i, j)| self.scale(j, x[[i, j]])))
    }

    pub fn inverse(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        Ok(Array2::from_shape_fn(x.dim(), |(i, j)| self.unscale(j, x[[i, j]])))
    }

    pub fn transform_vector(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check(1)?;
        Ok(v.mapv(|t| self.scale(0, t)))
    }

    pub fn inverse_vector(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check(1)?;
        Ok(v.mapv(|t| self.unscale(0, t)))
    }
}

/// Fits on the features of `ds` and returns the scaled copy with its scaler.
pub fn minmax_normalize(ds: &Dataset) -> Result<(Dataset, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(ds.features.view())?;
    let mut out = ds.clone();
    out.features = scaler.transform(ds.features.view())?;
    Ok((out, scaler))
}

/// Disjoint test folds covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    stratified: bool,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn is_stratified(&self) -> bool {
        self.stratified
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Seeded k-fold plan. With `labels`, folds are stratified by dealing each
/// shuffled class in turn round-robin; if any class has fewer than `k`
/// members the plan falls back to a plain shuffle.
pub fn kfold(n: usize, k: usize, seed: u64, labels: Option<&[usize]>) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} samples for {k} folds")));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch(format!("{} labels for {n} samples", l.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stratified = false;
    let order: Vec<usize> = match labels {
        Some(l) => {
            let classes = l.iter().max().map_or(0, |m| m + 1);
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for (i, &c) in l.iter().enumerate() {
                groups[c].push(i);
            }
            groups.retain(|g| !g.is_empty());
            if groups.iter().any(|g| g.len() < k) {
                warn!("a class has fewer than {k} members; folds are not stratified");
                None
            } else {
                stratified = true;
                for g in &mut groups {
                    g.shuffle(&mut rng);
                }
                Some(groups.concat())
            }
        }
        None => None,
    }
    .unwrap_or_else(|| {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    });
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, stratified })
}
