//! Layers 4-5: first-order TSK consequents, their least-squares fit, and the
//! baseline two-pass hybrid learner.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyFrontEnd, TNorm};
use crate::linalg::lstsq;

/// Default premise learning rate for the backward pass.
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

/// Row `j` holds `(p_j1 .. p_jd, r_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequentParams {
    coeffs: Array2<f64>,
}

impl ConsequentParams {
    pub fn new(coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.ncols() == 0 {
            return Err(Error::InvalidConfig("consequent rows need d + 1 >= 1 columns".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("consequent coefficients".into()));
        }
        Ok(ConsequentParams { coeffs })
    }

    pub fn zeros(rules: usize, inputs: usize) -> Self {
        ConsequentParams {
            coeffs: Array2::zeros((rules, inputs + 1)),
        }
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn rule_count(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn input_count(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    /// Per-rule linear outputs `f[n, j] = p_j . x_n + r_j`.
    pub fn rule_outputs(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_count() {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} columns, consequents expect {}",
                x.ncols(),
                self.input_count()
            )));
        }
        let d = self.input_count();
        let slopes = self.coeffs.slice(ndarray::s![.., ..d]);
        let mut out = x.dot(&slopes.t());
        for mut row in out.axis_iter_mut(Axis(0)) {
            row += &self.coeffs.column(d);
        }
        Ok(out)
    }
}

/// N x K(d+1) least-squares design; block `j` is `weight_j * [x, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Array2<f64>,
    inputs: usize,
}

impl DesignMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn rule_count(&self) -> usize {
        self.values.ncols() / (self.inputs + 1)
    }
}

pub fn assemble_design(x: ArrayView2<f64>, weights: ArrayView2<f64>) -> Result<DesignMatrix> {
    let (n, d) = x.dim();
    if weights.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples but {} weight rows",
            weights.nrows()
        )));
    }
    let k = weights.ncols();
    let block = d + 1;
    let mut values = Array2::zeros((n, k * block));
    for ((xr, wr), mut out) in x
        .axis_iter(Axis(0))
        .zip(weights.axis_iter(Axis(0)))
        .zip(values.axis_iter_mut(Axis(0)))
    {
        for (j, &w) in wr.iter().enumerate() {
            let base = j * block;
            for (i, &xi) in xr.iter().enumerate() {
                out[base + i] = w * xi;
            }
            out[base + d] = w;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(DesignMatrix { values, inputs: d })
}

/// Least-squares consequents for a design matrix.
pub fn lse_fit(design: &DesignMatrix, y: ArrayView1<f64>) -> Result<ConsequentParams> {
    let sol = lstsq(design.values.view(), y)?;
    let k = design.rule_count();
    let coeffs = Array2::from_shape_vec((k, design.inputs + 1), sol.coeffs)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    ConsequentParams::new(coeffs)
}

/// `y_n = sum_j weights[n, j] * (p_j . x_n + r_j)`.
pub fn predict(
    x: ArrayView2<f64>,
    weights: ArrayView2<f64>,
    params: &ConsequentParams,
) -> Result<Array1<f64>> {
    if weights.nrows() != x.nrows() || weights.ncols() != params.rule_count() {
        return Err(Error::DimensionMismatch(format!(
            "weights are {}x{}, expected {}x{}",
            weights.nrows(),
            weights.ncols(),
            x.nrows(),
            params.rule_count()
        )));
    }
    let f = params.rule_outputs(x)?;
    Ok((&f * &weights).sum_axis(Axis(1)))
}

pub(crate) fn mean_squared_error(pred: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

/// Premise-parameter gradient, indexed `[input][mf][param]`.
pub type PremiseGradient = Vec<Vec<Vec<f64>>>;

/// Conventional grid-partitioned ANFIS trained by the hybrid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnfisModel {
    front: FuzzyFrontEnd,
    consequents: ConsequentParams,
}

impl AnfisModel {
    pub fn new(front: FuzzyFrontEnd) -> Self {
        let consequents = ConsequentParams::zeros(front.rule_count(), front.input_count());
        AnfisModel { front, consequents }
    }

    pub fn from_parts(front: FuzzyFrontEnd, consequents: ConsequentParams) -> Result<Self> {
        if consequents.rule_count() != front.rule_count()
            || consequents.input_count() != front.input_count()
        {
            return Err(Error::DimensionMismatch(
                "consequent shape does not match rule grid".into(),
            ));
        }
        Ok(AnfisModel { front, consequents })
    }

    pub fn front(&self) -> &FuzzyFrontEnd {
        &self.front
    }

    pub fn front_mut(&mut self) -> &mut FuzzyFrontEnd {
        &mut self.front
    }

    pub fn consequents(&self) -> &ConsequentParams {
        &self.consequents
    }

    pub fn rule_count(&self) -> usize {
        self.front.rule_count()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let wbar = self.front.normalized_firing(x)?;
        predict(x, wbar.values.view(), &self.consequents)
    }

    pub fn mse(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
        Ok(mean_squared_error(self.predict(x)?.view(), y))
    }

    /// Forward pass only: refits the consequents and returns the training MSE.
    pub fn fit_consequents(&mut self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
        check_targets(x, y)?;
        let wbar = self.front.normalized_firing(x)?;
        let design = assemble_design(x, wbar.values.view())?;
        self.consequents = lse_fit(&design, y)?;
        let pred = predict(x, wbar.values.view(), &self.consequents)?;
        Ok(mean_squared_error(pred.view(), y))
    }

    /// Analytic gradient of the training MSE with respect to every premise
    /// parameter, holding the consequents fixed.
    pub fn premise_gradient(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<PremiseGradient> {
        check_targets(x, y)?;
        self.front.check_inputs(x)?;
        let front = &self.front;
        let rules = front.grid().rules();
        let d = front.input_count();
        let mut grad: PremiseGradient = front
            .mfs()
            .iter()
            .map(|mfs| mfs.iter().map(|mf| vec![0.0; mf.param_count()]).collect())
            .collect();
        let f_all = self.consequents.rule_outputs(x)?;
        let mut sample = vec![0.0; d];
        let mut w = vec![0.0; rules.len()];
        let mut prefix = vec![1.0; d + 1];
        let mut suffix = vec![1.0; d + 1];

        for (n, row) in x.axis_iter(Axis(0)).enumerate() {
            for (dst, &src) in sample.iter_mut().zip(row.iter()) {
                *dst = src;
            }
            let mu = front.memberships(&sample);
            for (wj, rule) in w.iter_mut().zip(rules) {
                *wj = front.fire_rule(&mu, rule);
            }
            let s: f64 = w.iter().sum();
            if !(s >= crate::fuzzy::ROW_SUM_GUARD) {
                return Err(Error::DegenerateRow { row: n, sum: s });
            }
            let f = f_all.row(n);
            let yhat: f64 = w.iter().zip(f.iter()).map(|(wj, fj)| wj * fj).sum::<f64>() / s;
            let err = yhat - y[n];

            // dL_n/dmu[i][m], L_n = err^2 (scaled by 1/N at the end)
            let mut dmu: Vec<Vec<f64>> = mu.iter().map(|m| vec![0.0; m.len()]).collect();
            for (j, rule) in rules.iter().enumerate() {
                let dy_dw = (f[j] - yhat) / s;
                let coef = 2.0 * err * dy_dw;
                if coef == 0.0 {
                    continue;
                }
                match front.tnorm() {
                    TNorm::Product => {
                        for i in 0..d {
                            prefix[i + 1] = prefix[i] * mu[i][rule[i]];
                        }
                        for i in (0..d).rev() {
                            suffix[i] = suffix[i + 1] * mu[i][rule[i]];
                        }
                        for i in 0..d {
                            dmu[i][rule[i]] += coef * prefix[i] * suffix[i + 1];
                        }
                    }
                    TNorm::Min => {
                        let (arg, _) = rule.iter().enumerate().fold(
                            (0usize, f64::INFINITY),
                            |(bi, bv), (i, &m)| if mu[i][m] < bv { (i, mu[i][m]) } else { (bi, bv) },
                        );
                        dmu[arg][rule[arg]] += coef;
                    }
                }
            }
            for (i, mfs) in front.mfs().iter().enumerate() {
                for (m, mf) in mfs.iter().enumerate() {
                    if dmu[i][m] == 0.0 {
                        continue;
                    }
                    for (g, dp) in grad[i][m].iter_mut().zip(mf.grad(sample[i])) {
                        *g += dmu[i][m] * dp;
                    }
                }
            }
        }
        let scale = 1.0 / x.nrows() as f64;
        for g in grad.iter_mut().flatten().flatten() {
            *g *= scale;
        }
        Ok(grad)
    }

    /// One hybrid epoch: least-squares consequents on the current firing
    /// strengths, then one batch gradient step on the premise parameters.
    /// Returns the training MSE after the forward pass.
    pub fn hybrid_epoch(&mut self, x: ArrayView2<f64>, y: ArrayView1<f64>, lr: f64) -> Result<f64> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be >= 0, got {lr}")));
        }
        let mse = self.fit_consequents(x, y)?;
        if lr == 0.0 {
            return Ok(mse);
        }
        let grad = self.premise_gradient(x, y)?;
        if grad.iter().flatten().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { lr });
        }
        for (mfs, g_in) in self.front.mfs_mut().iter_mut().zip(&grad) {
            for (mf, g) in mfs.iter_mut().zip(g_in) {
                let next: Vec<f64> = mf.params().iter().zip(g).map(|(p, gp)| p - lr * gp).collect();
                mf.set_params(&next)?;
            }
        }
        Ok(mse)
    }

    /// Runs `epochs` hybrid epochs followed by a final consequent refit.
    /// Returns the per-epoch training MSE.
    pub fn train(
        &mut self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        epochs: usize,
        lr: f64,
    ) -> Result<Vec<f64>> {
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            history.push(self.hybrid_epoch(x, y, lr)?);
        }
        self.fit_consequents(x, y)?;
        Ok(history)
    }
}

fn check_targets(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    Ok(())
}
