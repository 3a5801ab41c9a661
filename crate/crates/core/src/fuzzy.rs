//! Membership functions, the grid-partitioned rule base, and the first three
//! network layers: fuzzification, rule firing and normalization.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums below this are treated as a collapsed rule base.
pub const ROW_SUM_GUARD: f64 = 1e-300;

/// Premise parameters never shrink below this during gradient steps.
const MIN_POSITIVE_PARAM: f64 = 1e-6;

/// Generalized bell: `1 / (1 + |(x - c) / a|^(2b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBellParams {
    a: f64,
    b: f64,
    c: f64,
}

impl GBellParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidMembership(format!("gbell width a must be > 0, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidMembership(format!("gbell shape b must be > 0, got {b}")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidMembership(format!("gbell center c must be finite, got {c}")));
        }
        Ok(GBellParams { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mu(&self, x: f64) -> f64 {
        let t = ((x - self.c) / self.a).abs();
        1.0 / (1.0 + t.powf(2.0 * self.b))
    }

    /// Partial derivatives `(dmu/da, dmu/db, dmu/dc)`.
    ///
    /// At `x == c` the `ln|t|` factor of `dmu/db` is taken at its limit, so all
    /// three partials are zero there.
    pub fn grad(&self, x: f64) -> [f64; 3] {
        let t = (x - self.c) / self.a;
        if t == 0.0 {
            return [0.0, 0.0, 0.0];
        }
        let abs_t = t.abs();
        let q = abs_t.powf(2.0 * self.b);
        let mu = 1.0 / (1.0 + q);
        let mu2 = mu * mu;
        let da = 2.0 * self.b * q * mu2 / self.a;
        let db = -2.0 * abs_t.ln() * q * mu2;
        let dc = 2.0 * self.b * mu2 * abs_t.powf(2.0 * self.b - 1.0) * t.signum() / self.a;
        [da, db, dc]
    }
}

/// Gaussian: `exp(-((x - c) / sigma)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    c: f64,
    sigma: f64,
}

impl GaussianParams {
    pub fn new(c: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidMembership(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidMembership(format!("gaussian center must be finite, got {c}")));
        }
        Ok(GaussianParams { c, sigma })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self, x: f64) -> f64 {
        let t = (x - self.c) / self.sigma;
        (-0.5 * t * t).exp()
    }

    /// Partial derivatives `(dmu/dc, dmu/dsigma)`.
    pub fn grad(&self, x: f64) -> [f64; 2] {
        let t = (x - self.c) / self.sigma;
        let mu = (-0.5 * t * t).exp();
        [mu * t / self.sigma, mu * t * t / self.sigma]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfKind {
    #[default]
    GBell,
    Gaussian,
}

impl std::str::FromStr for MfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbell" => Ok(MfKind::GBell),
            "gaussian" | "gauss" => Ok(MfKind::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown membership type '{other}'"))),
        }
    }
}

impl std::fmt::Display for MfKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MfKind::GBell => "gbell",
            MfKind::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MembershipFn {
    GBell(GBellParams),
    Gaussian(GaussianParams),
}

impl MembershipFn {
    pub fn mu(&self, x: f64) -> f64 {
        match self {
            MembershipFn::GBell(p) => p.mu(x),
            MembershipFn::Gaussian(p) => p.mu(x),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            MembershipFn::GBell(_) => 3,
            MembershipFn::Gaussian(_) => 2,
        }
    }

    /// Gradient in the same order as [`MembershipFn::params`].
    pub fn grad(&self, x: f64) -> Vec<f64> {
        match self {
            MembershipFn::GBell(p) => p.grad(x).to_vec(),
            MembershipFn::Gaussian(p) => p.grad(x).to_vec(),
        }
    }

    /// `(a, b, c)` for gbell, `(c, sigma)` for gaussian.
    pub fn params(&self) -> Vec<f64> {
        match self {
            MembershipFn::GBell(p) => vec![p.a, p.b, p.c],
            MembershipFn::Gaussian(p) => vec![p.c, p.sigma],
        }
    }

    /// Replaces parameters, flooring the positive ones so the function stays valid.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} membership parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        *self = match self {
            MembershipFn::GBell(_) => MembershipFn::GBell(GBellParams::new(
                values[0].max(MIN_POSITIVE_PARAM),
                values[1].max(MIN_POSITIVE_PARAM),
                values[2],
            )?),
            MembershipFn::Gaussian(_) => MembershipFn::Gaussian(GaussianParams::new(
                values[0],
                values[1].max(MIN_POSITIVE_PARAM),
            )?),
        };
        Ok(())
    }
}

/// Grid-partitioning of one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub lo: f64,
    pub hi: f64,
    pub mf_count: usize,
}

impl InputSpec {
    pub fn new(lo: f64, hi: f64, mf_count: usize) -> Result<Self> {
        let spec = InputSpec { lo, hi, mf_count };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "input range must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.mf_count < 1 {
            return Err(Error::InvalidConfig("mf_count must be >= 1".into()));
        }
        Ok(())
    }

    /// Evenly spaced membership functions covering `[lo, hi]`.
    pub fn initial_mfs(&self, kind: MfKind) -> Result<Vec<MembershipFn>> {
        self.validate()?;
        let m = self.mf_count;
        let span = self.hi - self.lo;
        let (centers, half_spacing): (Vec<f64>, f64) = if m == 1 {
            (vec![(self.lo + self.hi) / 2.0], span / 2.0)
        } else {
            let step = span / (m - 1) as f64;
            ((0..m).map(|i| self.lo + i as f64 * step).collect(), step / 2.0)
        };
        centers
            .into_iter()
            .map(|c| match kind {
                MfKind::GBell => GBellParams::new(half_spacing, 2.0, c).map(MembershipFn::GBell),
                // same 0.5 crossing point as the bell
                MfKind::Gaussian => {
                    let sigma = half_spacing / (2.0 * std::f64::consts::LN_2).sqrt();
                    GaussianParams::new(c, sigma).map(MembershipFn::Gaussian)
                }
            })
            .collect()
    }
}

/// Full Cartesian product of per-input membership functions, in lexicographic
/// order with the last input varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleGrid {
    shape: Vec<usize>,
    rules: Vec<Vec<usize>>,
}

impl RuleGrid {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidConfig("rule grid needs at least one input".into()));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidConfig("mf_count must be >= 1".into()));
        }
        let total = shape
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::InvalidConfig("rule count overflows".into()))?;
        let mut rules = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            rules.push(idx.clone());
            for pos in (0..shape.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < shape[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
        Ok(RuleGrid { shape, rules })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rules(&self) -> &[Vec<usize>] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn input_count(&self) -> usize {
        self.shape.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNorm {
    #[default]
    Product,
    Min,
}

/// N x M rule activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringMatrix {
    pub values: Array2<f64>,
    pub normalized: bool,
}

impl FiringMatrix {
    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn rules(&self) -> usize {
        self.values.ncols()
    }
}

/// Divides each row by its sum.
pub fn normalize(fm: &FiringMatrix) -> Result<FiringMatrix> {
    let mut values = fm.values.clone();
    for (row_idx, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
        let sum: f64 = row.sum();
        if !(sum >= ROW_SUM_GUARD) {
            return Err(Error::DegenerateRow { row: row_idx, sum });
        }
        row.mapv_inplace(|w| w / sum);
    }
    Ok(FiringMatrix {
        values,
        normalized: true,
    })
}

/// Layers 1-3: membership functions per input plus the rule grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyFrontEnd {
    mfs: Vec<Vec<MembershipFn>>,
    grid: RuleGrid,
    #[serde(default)]
    tnorm: TNorm,
}

/// Builds the rule grid and evenly initialized membership functions.
pub fn build_grid(specs: &[InputSpec], kind: MfKind) -> Result<(RuleGrid, Vec<Vec<MembershipFn>>)> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("at least one input spec is required".into()));
    }
    let mfs = specs
        .iter()
        .map(|s| s.initial_mfs(kind))
        .collect::<Result<Vec<_>>>()?;
    let grid = RuleGrid::new(specs.iter().map(|s| s.mf_count).collect())?;
    Ok((grid, mfs))
}

impl FuzzyFrontEnd {
    pub fn new(specs: &[InputSpec], kind: MfKind, tnorm: TNorm) -> Result<Self> {
        let (grid, mfs) = build_grid(specs, kind)?;
        Ok(FuzzyFrontEnd { mfs, grid, tnorm })
    }

    pub fn from_parts(mfs: Vec<Vec<MembershipFn>>, grid: RuleGrid, tnorm: TNorm) -> Result<Self> {
        if mfs.len() != grid.input_count()
            || mfs.iter().zip(grid.shape()).any(|(m, &s)| m.len() != s)
        {
            return Err(Error::DimensionMismatch(
                "membership functions do not match grid shape".into(),
            ));
        }
        Ok(FuzzyFrontEnd { mfs, grid, tnorm })
    }

    pub fn grid(&self) -> &RuleGrid {
        &self.grid
    }

    pub fn mfs(&self) -> &[Vec<MembershipFn>] {
        &self.mfs
    }

    pub fn mfs_mut(&mut self) -> &mut [Vec<MembershipFn>] {
        &mut self.mfs
    }

    pub fn tnorm(&self) -> TNorm {
        self.tnorm
    }

    pub fn input_count(&self) -> usize {
        self.grid.input_count()
    }

    pub fn rule_count(&self) -> usize {
        self.grid.rule_count()
    }

    pub(crate) fn check_inputs(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_count() {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} columns, model expects {}",
                x.ncols(),
                self.input_count()
            )));
        }
        Ok(())
    }

    /// Layer 1 for one sample: `mu[i][m]` is the degree of input `i` in MF `m`.
    pub fn memberships(&self, sample: &[f64]) -> Vec<Vec<f64>> {
        self.mfs
            .iter()
            .zip(sample)
            .map(|(mfs, &x)| mfs.iter().map(|mf| mf.mu(x)).collect())
            .collect()
    }

    pub(crate) fn fire_rule(&self, mu: &[Vec<f64>], rule: &[usize]) -> f64 {
        match self.tnorm {
            TNorm::Product => rule.iter().enumerate().map(|(i, &m)| mu[i][m]).product(),
            TNorm::Min => rule
                .iter()
                .enumerate()
                .map(|(i, &m)| mu[i][m])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Layer 2: unnormalized firing strengths.
    pub fn firing_strengths(&self, x: ArrayView2<f64>) -> Result<FiringMatrix> {
        self.check_inputs(x)?;
        let n = x.nrows();
        let m = self.rule_count();
        let mut values = Array2::zeros((n, m));
        let mut sample = vec![0.0; x.ncols()];
        for (row, mut out) in x.axis_iter(Axis(0)).zip(values.axis_iter_mut(Axis(0))) {
            for (dst, &src) in sample.iter_mut().zip(row.iter()) {
                *dst = src;
            }
            if sample.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("input sample".into()));
            }
            let mu = self.memberships(&sample);
            for (w, rule) in out.iter_mut().zip(self.grid.rules()) {
                *w = self.fire_rule(&mu, rule);
            }
        }
        Ok(FiringMatrix {
            values,
            normalized: false,
        })
    }

    /// Layers 2-3.
    pub fn normalized_firing(&self, x: ArrayView2<f64>) -> Result<FiringMatrix> {
        normalize(&self.firing_strengths(x)?)
    }
}
