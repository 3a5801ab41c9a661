//! Rule reduction between the firing layer and the consequent layer.
//!
//! The normalized firing strengths of a freshly initialized grid are projected
//! onto their leading principal components; a binary swarm then picks which
//! components feed the consequent layer. Only consequent parameters are ever
//! fitted here, the membership functions stay at their grid initialization.
//!
//! Component scores are centered, so the mean firing vector no longer reaches
//! the consequents through them. Its contribution is linear in the inputs and
//! is carried by one extra consequent row with constant weight 1 (the offset
//! row). It is not counted as a rule.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use log::{debug, info};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bpso::{self, Objective, SwarmConfig, SwarmRng};
use crate::consequent::{assemble_design, lse_fit, predict, ConsequentParams};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyFrontEnd;
use crate::linalg::CompressedLstsq;
use crate::pca::{PcaBasis, DEFAULT_VARIANCE_THRESHOLD};

/// Component selection switch; at least one bit is always set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<bool>", into = "Vec<bool>")]
pub struct KeysMask {
    bits: Vec<bool>,
}

impl KeysMask {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if !bits.iter().any(|b| *b) {
            return Err(Error::InvalidConfig("mask must select at least one component".into()));
        }
        Ok(KeysMask { bits })
    }

    pub fn all_ones(k: usize) -> Result<Self> {
        Self::new(vec![true; k])
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Indices of the set bits, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }
}

impl TryFrom<Vec<bool>> for KeysMask {
    type Error = Error;

    fn try_from(bits: Vec<bool>) -> Result<Self> {
        KeysMask::new(bits)
    }
}

impl From<KeysMask> for Vec<bool> {
    fn from(m: KeysMask) -> Self {
        m.bits
    }
}

/// Prepends the constant offset weight column.
pub fn with_offset(weights: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::ones((weights.nrows(), weights.ncols() + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(&weights);
    out
}

/// Keeps the score columns whose mask bit is set.
pub fn mask_apply(scores: ArrayView2<f64>, mask: &KeysMask) -> Result<Array2<f64>> {
    if scores.ncols() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} score columns but a {}-bit mask",
            scores.ncols(),
            mask.len()
        )));
    }
    Ok(scores.select(Axis(1), &mask.selected()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMode {
    /// Swarm search over principal-component masks.
    PcaBpso,
    /// All components above the variance threshold, no search.
    PcaOnly,
    /// Swarm search directly over the raw normalized rules.
    BpsoOnly,
}

/// Which samples score a candidate mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessData {
    /// Fit and score on the whole training fold.
    Training,
    /// Fit on a seeded 80% of the training fold, score on the other 20%.
    ValidationSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub mode: ReductionMode,
    pub variance_threshold: f64,
    pub iterations: usize,
    /// Upper bound on the swarm size, which otherwise equals the rule count.
    pub swarm_cap: usize,
    pub fitness_data: FitnessData,
    pub seed: u64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            mode: ReductionMode::PcaBpso,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            iterations: 100,
            swarm_cap: 50,
            fitness_data: FitnessData::Training,
            seed: 0,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "variance_threshold must be in (0, 1], got {}",
                self.variance_threshold
            )));
        }
        if self.swarm_cap == 0 {
            return Err(Error::InvalidConfig("swarm_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Map from normalized firing strengths to the weights fed to the consequents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ComponentTransform {
    Pca(PcaBasis),
    Identity { dims: usize },
}

impl ComponentTransform {
    pub fn input_dim(&self) -> usize {
        match self {
            ComponentTransform::Pca(b) => b.input_dim(),
            ComponentTransform::Identity { dims } => *dims,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ComponentTransform::Pca(b) => b.n_components(),
            ComponentTransform::Identity { dims } => *dims,
        }
    }

    pub fn apply(&self, firing: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            ComponentTransform::Pca(b) => b.project(firing),
            ComponentTransform::Identity { dims } => {
                if firing.ncols() != *dims {
                    return Err(Error::DimensionMismatch(format!(
                        "{} firing columns, transform expects {dims}",
                        firing.ncols()
                    )));
                }
                Ok(firing.to_owned())
            }
        }
    }
}

fn rmse_of(pred: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    (pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n).sqrt()
}

/// Training RMSE of a consequent-only least-squares fit on the offset row plus
/// the selected score columns. A failed solve scores `+inf`.
pub fn fitness(
    mask: &KeysMask,
    scores: ArrayView2<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<f64> {
    if scores.nrows() != x.nrows() || x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} score rows, {} samples, {} targets",
            scores.nrows(),
            x.nrows(),
            y.len()
        )));
    }
    let weights = with_offset(mask_apply(scores, mask)?.view());
    let design = assemble_design(x, weights.view())?;
    let params = match lse_fit(&design, y) {
        Ok(p) => p,
        Err(e) => {
            debug!("mask rejected: {e}");
            return Ok(f64::INFINITY);
        }
    };
    let pred = predict(x, weights.view(), &params)?;
    let r = rmse_of(pred.view(), y);
    Ok(if r.is_finite() { r } else { f64::INFINITY })
}

/// Memoized mask fitness. The full design is QR-factored once, so each new
/// mask costs a solve on the small triangular factor only.
pub struct MaskFitness {
    solver: CompressedLstsq,
    block: usize,
    validation: Option<(Array2<f64>, Array1<f64>)>,
    cache: HashMap<Vec<bool>, f64>,
}

impl MaskFitness {
    /// Scores masks on the training fit itself.
    pub fn training(scores: ArrayView2<f64>, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        let design = assemble_design(x, with_offset(scores).view())?;
        Ok(MaskFitness {
            solver: CompressedLstsq::new(design.values().view(), y)?,
            block: x.ncols() + 1,
            validation: None,
            cache: HashMap::new(),
        })
    }

    /// Fits on a seeded 80% of the rows and scores on the held-out 20%.
    pub fn validation_split(
        scores: ArrayView2<f64>,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = x.nrows();
        if n < 5 {
            return Err(Error::InsufficientData(format!(
                "validation split needs at least 5 samples, got {n}"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (n * 4) / 5;
        let (fit_idx, val_idx) = idx.split_at(cut);
        let design = assemble_design(x, with_offset(scores).view())?;
        let fit_design = design.values().select(Axis(0), fit_idx);
        let fit_y = y.select(Axis(0), fit_idx);
        let val_design = design.values().select(Axis(0), val_idx);
        let val_y = y.select(Axis(0), val_idx);
        Ok(MaskFitness {
            solver: CompressedLstsq::new(fit_design.view(), fit_y.view())?,
            block: x.ncols() + 1,
            validation: Some((val_design, val_y)),
            cache: HashMap::new(),
        })
    }

    /// Distinct masks evaluated so far.
    pub fn distinct_evaluations(&self) -> usize {
        self.cache.len()
    }

    /// Design columns of the offset block and the selected component blocks.
    fn columns(&self, bits: &[bool]) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..self.block).collect();
        for (j, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            cols.extend((j + 1) * self.block..(j + 2) * self.block);
        }
        cols
    }

    fn compute(&self, bits: &[bool]) -> Result<f64> {
        if (bits.len() + 1) * self.block != self.solver.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{}-bit mask for {} components",
                bits.len(),
                self.solver.cols() / self.block - 1
            )));
        }
        if !bits.iter().any(|b| *b) {
            return Ok(f64::INFINITY);
        }
        let cols = self.columns(bits);
        let (sol, rss) = match self.solver.solve_columns(&cols) {
            Ok(r) => r,
            Err(Error::DimensionMismatch(m)) => return Err(Error::DimensionMismatch(m)),
            Err(e) => {
                debug!("mask rejected: {e}");
                return Ok(f64::INFINITY);
            }
        };
        let r = match &self.validation {
            None => (rss / self.solver.rows() as f64).sqrt(),
            Some((design, y)) => {
                let sub = design.select(Axis(1), &cols);
                let pred = sub.dot(&ArrayView1::from(&sol.coeffs[..]));
                rmse_of(pred.view(), y.view())
            }
        };
        Ok(if r.is_finite() { r } else { f64::INFINITY })
    }

    pub fn fitness(&mut self, bits: &[bool]) -> Result<f64> {
        if let Some(&f) = self.cache.get(bits) {
            return Ok(f);
        }
        let f = self.compute(bits)?;
        self.cache.insert(bits.to_vec(), f);
        Ok(f)
    }
}

impl Objective for MaskFitness {
    fn evaluate(&mut self, bits: &[bool]) -> Result<f64> {
        self.fitness(bits)
    }

    /// An empty selection gets one uniformly chosen bit switched on.
    fn repair(&mut self, bits: &mut [bool], rng: &mut SwarmRng) {
        if !bits.is_empty() && !bits.iter().any(|b| *b) {
            let i = rng.random_range(0..bits.len());
            bits[i] = true;
        }
    }
}

/// Finalized reduced network: frozen grid, frozen transform, mask and the
/// consequents (offset row first, then one row per selected component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    front: FuzzyFrontEnd,
    transform: ComponentTransform,
    mask: KeysMask,
    consequents: ConsequentParams,
}

impl ReducedModel {
    pub fn from_parts(
        front: FuzzyFrontEnd,
        transform: ComponentTransform,
        mask: KeysMask,
        consequents: ConsequentParams,
    ) -> Result<Self> {
        if transform.input_dim() != front.rule_count() {
            return Err(Error::DimensionMismatch(format!(
                "transform expects {} rules, grid has {}",
                transform.input_dim(),
                front.rule_count()
            )));
        }
        if mask.len() != transform.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}-bit mask over {} components",
                mask.len(),
                transform.output_dim()
            )));
        }
        if consequents.rule_count() != mask.popcount() + 1 || consequents.input_count() != front.input_count() {
            return Err(Error::DimensionMismatch(format!(
                "consequents are {}x{}, expected {}x{}",
                consequents.rule_count(),
                consequents.input_count() + 1,
                mask.popcount() + 1,
                front.input_count() + 1
            )));
        }
        Ok(ReducedModel {
            front,
            transform,
            mask,
            consequents,
        })
    }

    pub fn front(&self) -> &FuzzyFrontEnd {
        &self.front
    }

    pub fn transform(&self) -> &ComponentTransform {
        &self.transform
    }

    pub fn mask(&self) -> &KeysMask {
        &self.mask
    }

    pub fn consequents(&self) -> &ConsequentParams {
        &self.consequents
    }

    /// Rules of the underlying grid before reduction.
    pub fn grid_rule_count(&self) -> usize {
        self.front.rule_count()
    }

    /// Components available to the mask.
    pub fn component_count(&self) -> usize {
        self.mask.len()
    }

    /// Rules after reduction: the number of selected components.
    pub fn rule_count(&self) -> usize {
        self.mask.popcount()
    }

    /// Consequent weights for `x`: the offset column, then the selected scores.
    pub fn weights(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let firing = self.front.normalized_firing(x)?;
        let scores = self.transform.apply(firing.values.view())?;
        Ok(with_offset(mask_apply(scores.view(), &self.mask)?.view()))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let w = self.weights(x)?;
        predict(x, w.view(), &self.consequents)
    }
}

pub fn predict_reduced(model: &ReducedModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    model.predict(x)
}

/// Wall-clock time per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub firing: Duration,
    pub transform: Duration,
    pub search: Duration,
    pub refit: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.firing + self.transform + self.search + self.refit
    }
}

#[derive(Debug, Clone)]
pub struct ReductionFit {
    pub model: ReducedModel,
    /// Fitness of the chosen mask under the configured fitness data.
    pub gbest_fitness: f64,
    /// Global-best fitness per swarm iteration (empty without a search).
    pub history: Vec<f64>,
    pub distinct_evaluations: usize,
    pub timings: StageTimings,
}

/// Builds the reduced model for a training fold. `front` is the
/// grid-initialized fuzzy front end; its parameters are left untouched.
pub fn fit(
    front: FuzzyFrontEnd,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &ReductionConfig,
) -> Result<ReductionFit> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let firing = front.normalized_firing(x)?;
    timings.firing = t0.elapsed();

    let t0 = Instant::now();
    let transform = match config.mode {
        ReductionMode::BpsoOnly => ComponentTransform::Identity {
            dims: front.rule_count(),
        },
        ReductionMode::PcaBpso | ReductionMode::PcaOnly => {
            ComponentTransform::Pca(PcaBasis::fit(firing.values.view(), config.variance_threshold)?)
        }
    };
    let scores = transform.apply(firing.values.view())?;
    timings.transform = t0.elapsed();
    let k = transform.output_dim();
    info!(
        "{} grid rules, {} candidate components",
        front.rule_count(),
        k
    );

    let t0 = Instant::now();
    let mut objective = match config.fitness_data {
        FitnessData::Training => MaskFitness::training(scores.view(), x, y)?,
        FitnessData::ValidationSplit => {
            MaskFitness::validation_split(scores.view(), x, y, config.seed ^ 0x9e37_79b9_7f4a_7c15)?
        }
    };
    let (mask, gbest_fitness, history) = match config.mode {
        ReductionMode::PcaOnly => {
            let bits = vec![true; k];
            let f = objective.fitness(&bits)?;
            (KeysMask::new(bits)?, f, Vec::new())
        }
        ReductionMode::PcaBpso | ReductionMode::BpsoOnly => {
            let swarm = SwarmConfig::new(
                front.rule_count().min(config.swarm_cap),
                k,
                config.iterations,
                config.seed,
            );
            let res = bpso::run(&swarm, &mut objective)?;
            (KeysMask::new(res.gbest_position)?, res.gbest_fitness, res.history)
        }
    };
    timings.search = t0.elapsed();

    let t0 = Instant::now();
    let weights = with_offset(mask_apply(scores.view(), &mask)?.view());
    let consequents = lse_fit(&assemble_design(x, weights.view())?, y)?;
    timings.refit = t0.elapsed();
    info!(
        "selected {}/{} components, fitness {:.6}",
        mask.popcount(),
        k,
        gbest_fitness
    );

    Ok(ReductionFit {
        model: ReducedModel::from_parts(front, transform, mask, consequents)?,
        gbest_fitness,
        history,
        distinct_evaluations: objective.distinct_evaluations(),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consequent::AnfisModel;
    use crate::fuzzy::{InputSpec, MfKind, TNorm};
    use ndarray::{array, Array};
    use rand::Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
        Array::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0))
    }

    /// Targets that are an exact TSK output of the chosen score columns.
    fn exact_toy(seed: u64, k: usize, keep: &[usize]) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let scores = random_matrix(&mut rng, n, k);
        let x = random_matrix(&mut rng, n, 2);
        let mut y = Array1::zeros(n);
        for &j in keep {
            let (p0, p1, r): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            for i in 0..n {
                y[i] += scores[[i, j]] * (p0 * x[[i, 0]] + p1 * x[[i, 1]] + r);
            }
        }
        (scores, x, y)
    }

    #[test]
    fn mask_apply_selects_columns() {
        let s = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let all = KeysMask::all_ones(3).unwrap();
        assert_eq!(mask_apply(s.view(), &all).unwrap(), s);
        let m = KeysMask::new(vec![true, false, true]).unwrap();
        assert_eq!(mask_apply(s.view(), &m).unwrap(), array![[1.0, 3.0], [4.0, 6.0]]);
        assert!(mask_apply(s.view(), &KeysMask::all_ones(2).unwrap()).is_err());
    }

    #[test]
    fn mask_selection_composes() {
        let s = array![[1.0, 2.0, 3.0, 4.0]];
        let m1 = KeysMask::new(vec![true, true, false, true]).unwrap();
        let m2 = KeysMask::new(vec![true, false, true, true]).unwrap();
        let both: Vec<bool> = m1.bits().iter().zip(m2.bits()).map(|(a, b)| *a && *b).collect();
        let direct = mask_apply(s.view(), &KeysMask::new(both).unwrap()).unwrap();
        let restricted: Vec<bool> = m1.selected().iter().map(|&i| m2.bits()[i]).collect();
        let staged = mask_apply(
            mask_apply(s.view(), &m1).unwrap().view(),
            &KeysMask::new(restricted).unwrap(),
        )
        .unwrap();
        assert_eq!(direct, staged);
    }

    #[test]
    fn empty_mask_rejected_everywhere() {
        assert!(KeysMask::new(vec![false, false]).is_err());
        assert!(serde_json::from_str::<KeysMask>("[false,false]").is_err());
        let m: KeysMask = serde_json::from_str("[false,true]").unwrap();
        assert_eq!(m.popcount(), 1);
    }

    #[test]
    fn spanning_mask_fits_exactly() {
        let (s, x, y) = exact_toy(1, 4, &[0, 2]);
        let m = KeysMask::new(vec![true, false, true, false]).unwrap();
        assert!(fitness(&m, s.view(), x.view(), y.view()).unwrap() < 1e-8);
        let mut mf = MaskFitness::training(s.view(), x.view(), y.view()).unwrap();
        assert!(mf.fitness(m.bits()).unwrap() < 1e-8);
        let wrong = KeysMask::new(vec![false, true, false, true]).unwrap();
        assert!(fitness(&wrong, s.view(), x.view(), y.view()).unwrap() > 1e-3);
    }

    #[test]
    fn memoized_fitness_matches_direct() {
        let (s, x, y) = exact_toy(2, 5, &[1, 3, 4]);
        let y = &y + &Array1::from_shape_fn(y.len(), |i| ((i * 7919) % 13) as f64 * 0.01);
        let mut mf = MaskFitness::training(s.view(), x.view(), y.view()).unwrap();
        for code in 1u32..32 {
            let bits: Vec<bool> = (0..5).map(|b| code >> b & 1 == 1).collect();
            let direct = fitness(&KeysMask::new(bits.clone()).unwrap(), s.view(), x.view(), y.view()).unwrap();
            let fast = mf.fitness(&bits).unwrap();
            assert!((direct - fast).abs() < 1e-9, "{bits:?}: {direct} vs {fast}");
            assert_eq!(mf.fitness(&bits).unwrap(), fast);
        }
        assert_eq!(mf.distinct_evaluations(), 31);
        assert_eq!(mf.fitness(&[false; 5]).unwrap(), f64::INFINITY);
        assert!(mf.fitness(&[true; 4]).is_err());
    }

    #[test]
    fn validation_fitness_scores_held_out_rows() {
        let (s, x, y) = exact_toy(3, 4, &[0, 1]);
        let mut mf = MaskFitness::validation_split(s.view(), x.view(), y.view(), 9).unwrap();
        assert!(mf.fitness(&[true, true, false, false]).unwrap() < 1e-8);
        assert!(mf.fitness(&[false, false, true, true]).unwrap() > 1e-3);
    }

    #[test]
    fn swarm_beats_median_mask() {
        let (s, x, y) = exact_toy(4, 8, &[0, 3, 6]);
        let noisy = &y + &Array1::from_shape_fn(y.len(), |i| (i as f64 * 0.37).sin() * 0.05);
        let mut exhaustive = MaskFitness::training(s.view(), x.view(), noisy.view()).unwrap();
        let mut all: Vec<f64> = (1u32..256)
            .map(|code| {
                let bits: Vec<bool> = (0..8).map(|b| code >> b & 1 == 1).collect();
                exhaustive.fitness(&bits).unwrap()
            })
            .collect();
        all.sort_by(f64::total_cmp);
        let median = all[all.len() / 2];
        let mut mf = MaskFitness::training(s.view(), x.view(), noisy.view()).unwrap();
        let res = bpso::run(&SwarmConfig::new(10, 8, 100, 5), &mut mf).unwrap();
        assert!(res.gbest_fitness <= median);
    }

    fn two_input_front(m: usize) -> FuzzyFrontEnd {
        let specs = [InputSpec::new(0.0, 1.0, m).unwrap(), InputSpec::new(0.0, 1.0, m).unwrap()];
        FuzzyFrontEnd::new(&specs, MfKind::GBell, TNorm::Product).unwrap()
    }

    fn tsk_dataset(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
        // two-rule TSK teacher: "x0 low" and "x0 high"
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array::from_shape_fn((n, 2), |_| rng.random_range(0.0..1.0));
        let y = x.map_axis(Axis(1), |r| {
            let lo = 1.0 / (1.0 + (r[0] / 0.5_f64).powi(4));
            let hi = 1.0 / (1.0 + ((r[0] - 1.0) / 0.5_f64).powi(4));
            (lo * (2.0 * r[0] - r[1] + 0.5) + hi * (-r[0] + 3.0 * r[1])) / (lo + hi)
        });
        (x, y)
    }

    fn rmse(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        rmse_of(a.view(), b.view())
    }

    #[test]
    fn reduced_model_close_to_full_anfis_on_tsk_teacher() {
        let (x, y) = tsk_dataset(11, 200);
        let (xt, yt) = tsk_dataset(12, 200);
        let mut full = AnfisModel::new(two_input_front(2));
        full.train(x.view(), y.view(), 100, 0.01).unwrap();
        let full_rmse = rmse(&full.predict(xt.view()).unwrap(), &yt);

        let cfg = ReductionConfig {
            seed: 3,
            ..ReductionConfig::default()
        };
        let fit = fit(two_input_front(2), x.view(), y.view(), &cfg).unwrap();
        let red_rmse = rmse(&fit.model.predict(xt.view()).unwrap(), &yt);
        assert!(fit.model.rule_count() <= fit.model.component_count());
        assert!(fit.model.component_count() <= 4);
        assert!(red_rmse <= 1.5 * full_rmse.max(1e-6), "reduced {red_rmse} vs full {full_rmse}");
    }

    #[test]
    fn rank_one_firing_keeps_one_component() {
        // one input with two memberships: firing rows are (w, 1 - w)
        let front = FuzzyFrontEnd::new(&[InputSpec::new(0.0, 1.0, 2).unwrap()], MfKind::GBell, TNorm::Product)
            .unwrap();
        let x = Array::from_shape_fn((50, 1), |(i, _)| i as f64 / 49.0);
        let y = x.column(0).mapv(|v| v * v);
        let fit = fit(front, x.view(), y.view(), &ReductionConfig::default()).unwrap();
        assert_eq!(fit.model.component_count(), 1);
        assert_eq!(fit.model.rule_count(), 1);
    }

    #[test]
    fn premise_parameters_are_untouched() {
        let (x, y) = tsk_dataset(5, 80);
        let front = two_input_front(3);
        let before = front.clone();
        let fit = fit(front, x.view(), y.view(), &ReductionConfig::default()).unwrap();
        assert_eq!(fit.model.front(), &before);
    }

    #[test]
    fn training_rmse_equals_gbest_fitness() {
        let (x, y) = tsk_dataset(6, 120);
        let fit = fit(two_input_front(3), x.view(), y.view(), &ReductionConfig::default()).unwrap();
        let r = rmse(&predict_reduced(&fit.model, x.view()).unwrap(), &y);
        assert!((r - fit.gbest_fitness).abs() < 1e-9, "{r} vs {}", fit.gbest_fitness);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn pca_only_equals_all_ones_mask() {
        let (x, y) = tsk_dataset(7, 100);
        let cfg = ReductionConfig {
            mode: ReductionMode::PcaOnly,
            ..ReductionConfig::default()
        };
        let pca_only = fit(two_input_front(3), x.view(), y.view(), &cfg).unwrap().model;
        let k = pca_only.component_count();
        assert_eq!(pca_only.rule_count(), k);

        let front = two_input_front(3);
        let scores = pca_only
            .transform()
            .apply(front.normalized_firing(x.view()).unwrap().values.view())
            .unwrap();
        let consequents =
            lse_fit(&assemble_design(x.view(), with_offset(scores.view()).view()).unwrap(), y.view()).unwrap();
        let manual = ReducedModel::from_parts(
            front,
            pca_only.transform().clone(),
            KeysMask::all_ones(k).unwrap(),
            consequents,
        )
        .unwrap();
        assert_eq!(manual.predict(x.view()).unwrap(), pca_only.predict(x.view()).unwrap());
    }

    #[test]
    fn component_relabeling_leaves_predictions() {
        let (x, y) = tsk_dataset(8, 100);
        let model = fit(two_input_front(3), x.view(), y.view(), &ReductionConfig::default())
            .unwrap()
            .model;
        let ComponentTransform::Pca(basis) = model.transform() else {
            panic!("expected a PCA transform")
        };
        let k = basis.n_components();
        let perm: Vec<usize> = (0..k).rev().collect();
        let permuted_basis = PcaBasis::from_parts(
            basis.mean().to_owned(),
            basis.components().select(Axis(1), &perm),
            basis.eigenvalues().select(Axis(0), &perm),
            basis.explained_ratio().select(Axis(0), &perm),
        )
        .unwrap();
        let bits: Vec<bool> = perm.iter().map(|&i| model.mask().bits()[i]).collect();
        let mask = KeysMask::new(bits).unwrap();
        // offset row stays first; selected rows come back in reverse order
        let rows: Vec<usize> = std::iter::once(0).chain((1..=model.rule_count()).rev()).collect();
        let consequents = ConsequentParams::new(model.consequents().coeffs().select(Axis(0), &rows)).unwrap();
        let relabeled = ReducedModel::from_parts(
            model.front().clone(),
            ComponentTransform::Pca(permuted_basis),
            mask,
            consequents,
        )
        .unwrap();
        let a = model.predict(x.view()).unwrap();
        let b = relabeled.predict(x.view()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let (x, y) = tsk_dataset(9, 100);
        let cfg = ReductionConfig {
            seed: 77,
            ..ReductionConfig::default()
        };
        let a = fit(two_input_front(3), x.view(), y.view(), &cfg).unwrap();
        let b = fit(two_input_front(3), x.view(), y.view(), &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.model).unwrap(),
            serde_json::to_string(&b.model).unwrap()
        );
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn rule_mode_searches_raw_rules() {
        let (x, y) = tsk_dataset(10, 100);
        let cfg = ReductionConfig {
            mode: ReductionMode::BpsoOnly,
            iterations: 30,
            ..ReductionConfig::default()
        };
        let fit = fit(two_input_front(3), x.view(), y.view(), &cfg).unwrap();
        assert_eq!(fit.model.transform(), &ComponentTransform::Identity { dims: 9 });
        assert_eq!(fit.model.component_count(), 9);
        assert!(fit.model.rule_count() >= 1);
    }

    #[test]
    fn serialization_round_trip() {
        let (x, y) = tsk_dataset(13, 60);
        let model = fit(two_input_front(2), x.view(), y.view(), &ReductionConfig::default())
            .unwrap()
            .model;
        let back: ReducedModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back.predict(x.view()).unwrap(), model.predict(x.view()).unwrap());
    }
}
