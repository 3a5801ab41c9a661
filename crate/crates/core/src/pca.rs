//! Principal component analysis of the normalized firing-strength matrix.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// fraction of the full norm.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Column means.
pub fn mean_vector(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    if a.nrows() == 0 {
        return Err(Error::InsufficientData("mean of an empty matrix".into()));
    }
    Ok(a.sum_axis(Axis(0)) / a.nrows() as f64)
}

/// Population covariance (divisor n).
pub fn covariance_matrix(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mu = mean_vector(a)?;
    let centered = &a - &mu;
    let mut cov = centered.t().dot(&centered) / n as f64;
    // exact symmetry
    let d = cov.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok(cov)
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors as
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[[i, j]] * a[[i, j]];
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvectors are sign-normalized so that the largest-magnitude entry of each
/// is positive (lowest index wins ties); equal eigenvalues keep their original
/// diagonal order.
pub fn eig_sym(s: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric matrix".into()));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-8 * scale {
                return Err(Error::InvalidConfig(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut a = s.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let target = JACOBI_TOLERANCE * frobenius(&a);
    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = v.select(Axis(1), &order);
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let (_, pivot) = col.iter().enumerate().fold((0usize, 0.0f64), |(bi, bv), (i, &x)| {
            // near-equal magnitudes count as a tie
            if x.abs() > bv.abs() * (1.0 + 1e-12) {
                (i, x)
            } else {
                (bi, bv)
            }
        });
        if pivot < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Applies the rotation in the (p, q) plane: `a <- J^T a J`, `v <- v J`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    let app = a[[p, p]];
    let aqq = a[[q, q]];
    let apq = a[[p, q]];
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[[k, p]] = new_kp;
        a[[p, k]] = new_kp;
        a[[k, q]] = new_kq;
        a[[q, k]] = new_kq;
    }
    a[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

/// Smallest K whose leading eigenvalues reach `threshold` of the total.
///
/// Eigenvalues are expected in descending order; tiny negatives from round-off
/// count as zero. A zero spectrum yields 1.
pub fn select_components(eigenvalues: &[f64], threshold: f64) -> usize {
    if eigenvalues.is_empty() {
        return 1;
    }
    let clamped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        warn!("all-zero covariance spectrum; keeping a single component");
        return 1;
    }
    let mut acc = 0.0;
    for (k, l) in clamped.iter().enumerate() {
        acc += l;
        if acc / total >= threshold {
            return k + 1;
        }
    }
    clamped.len()
}

/// Frozen component transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    mean: Array1<f64>,
    /// M x K, one component per column.
    components: Array2<f64>,
    eigenvalues: Array1<f64>,
    explained_ratio: Array1<f64>,
}

impl PcaBasis {
    /// Fits on `a` keeping enough components to explain `threshold` of the variance.
    pub fn fit(a: ArrayView2<f64>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "variance threshold must be in (0, 1], got {threshold}"
            )));
        }
        let (mean, eig) = Self::decompose(a)?;
        let k = select_components(eig.values.as_slice().unwrap_or(&[]), threshold);
        Ok(Self::truncate(mean, eig, k))
    }

    /// Fits keeping exactly `k` components.
    pub fn fit_with_components(a: ArrayView2<f64>, k: usize) -> Result<Self> {
        if k == 0 || k > a.ncols() {
            return Err(Error::InvalidConfig(format!(
                "component count {k} out of range 1..={}",
                a.ncols()
            )));
        }
        let (mean, eig) = Self::decompose(a)?;
        Ok(Self::truncate(mean, eig, k))
    }

    fn decompose(a: ArrayView2<f64>) -> Result<(Array1<f64>, SymmetricEigen)> {
        let mean = mean_vector(a)?;
        let cov = covariance_matrix(a)?;
        let mut eig = eig_sym(cov.view())?;
        eig.values.mapv_inplace(|l| l.max(0.0));
        Ok((mean, eig))
    }

    fn truncate(mean: Array1<f64>, eig: SymmetricEigen, k: usize) -> Self {
        let total: f64 = eig.values.sum();
        let eigenvalues = eig.values.slice(ndarray::s![..k]).to_owned();
        let explained_ratio = if total > 0.0 {
            eigenvalues.mapv(|l| l / total)
        } else {
            Array1::zeros(k)
        };
        PcaBasis {
            mean,
            components: eig.vectors.slice(ndarray::s![.., ..k]).to_owned(),
            eigenvalues,
            explained_ratio,
        }
    }

    pub fn from_parts(
        mean: Array1<f64>,
        components: Array2<f64>,
        eigenvalues: Array1<f64>,
        explained_ratio: Array1<f64>,
    ) -> Result<Self> {
        let k = components.ncols();
        if components.nrows() != mean.len() || eigenvalues.len() != k || explained_ratio.len() != k {
            return Err(Error::DimensionMismatch("inconsistent PCA basis parts".into()));
        }
        Ok(PcaBasis {
            mean,
            components,
            eigenvalues,
            explained_ratio,
        })
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn components(&self) -> ArrayView2<'_, f64> {
        self.components.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn explained_ratio(&self) -> ArrayView1<'_, f64> {
        self.explained_ratio.view()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    /// Centered scores `(A - 1 mu^T) W`.
    pub fn project(&self, a: ArrayView2<f64>) -> Result<Array2<f64>> {
        if a.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} columns, basis expects {}",
                a.ncols(),
                self.input_dim()
            )));
        }
        Ok((&a - &self.mean).dot(&self.components))
    }

    pub fn reconstruct(&self, scores: ArrayView2<f64>) -> Result<Array2<f64>> {
        if scores.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch(format!(
                "scores have {} columns, basis has {} components",
                scores.ncols(),
                self.n_components()
            )));
        }
        Ok(scores.dot(&self.components.t()) + &self.mean)
    }
}
