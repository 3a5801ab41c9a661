//! Dense least squares via Householder QR, with a ridge fallback for
//! rank-deficient or underdetermined systems.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Ridge strength used when the triangular factor is (numerically) singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// A diagonal entry of R below this fraction of the largest one marks the
/// system as rank-deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub coeffs: Vec<f64>,
    /// True when the ridge-regularized system was solved instead of the plain one.
    pub ridge: bool,
}

/// Column-major scratch matrix; Householder sweeps touch whole columns so this
/// layout keeps the inner loops contiguous.
struct ColMajor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn from_view(a: ArrayView2<f64>, extra_rows: usize) -> Self {
        let (m, n) = a.dim();
        let rows = m + extra_rows;
        let mut data = vec![0.0; rows * n];
        for j in 0..n {
            let col = &mut data[j * rows..j * rows + m];
            for (dst, &src) in col.iter_mut().zip(a.column(j).iter()) {
                *dst = src;
            }
        }
        ColMajor {
            rows,
            cols: n,
            data,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// Reduces the matrix to upper-triangular form in place and applies the
    /// same reflections to `rhs`. Returns the number of reflection steps.
    fn triangularize(&mut self, rhs: &mut [f64]) -> usize {
        let m = self.rows;
        let steps = m.min(self.cols);
        let mut v = vec![0.0; m];
        for k in 0..steps {
            let (head, tail) = self.data.split_at_mut((k + 1) * m);
            let col_k = &mut head[k * m..];
            let norm = col_k[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if col_k[k] > 0.0 { -norm } else { norm };
            let vk = &mut v[k..];
            vk.copy_from_slice(&col_k[k..]);
            vk[0] -= alpha;
            let vnorm2: f64 = vk.iter().map(|x| x * x).sum();
            col_k[k] = alpha;
            for x in col_k[k + 1..].iter_mut() {
                *x = 0.0;
            }
            if vnorm2 == 0.0 {
                continue;
            }
            for col_j in tail.chunks_exact_mut(m) {
                reflect(vk, vnorm2, &mut col_j[k..]);
            }
            reflect(vk, vnorm2, &mut rhs[k..]);
        }
        steps
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.cols;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                acc -= self.at(i, j) * xj;
            }
            x[i] = acc / self.at(i, i);
        }
        x
    }
}

#[inline]
fn reflect(v: &[f64], vnorm2: f64, target: &mut [f64]) {
    let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / vnorm2;
    if scale != 0.0 {
        for (t, vi) in target.iter_mut().zip(v) {
            *t -= scale * vi;
        }
    }
}

fn check_finite(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("least-squares design matrix".into()));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("least-squares targets".into()));
    }
    Ok(())
}

/// Minimizes `||a x - b||_2`.
///
/// Uses Householder QR when `a` has at least as many rows as columns and its
/// triangular factor is well conditioned; otherwise solves the ridge problem
/// `min ||a x - b||^2 + RIDGE_LAMBDA ||x||^2` through QR of the stacked system
/// `[a; sqrt(lambda) I]`.
pub fn lstsq(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<LstsqSolution> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "design has {m} rows but {} targets",
            b.len()
        )));
    }
    if m == 0 {
        return Err(Error::InsufficientData("least squares needs at least one row".into()));
    }
    check_finite(a, b)?;
    if n == 0 {
        return Ok(LstsqSolution {
            coeffs: Vec::new(),
            ridge: false,
        });
    }

    if m >= n {
        let mut qr = ColMajor::from_view(a, 0);
        let mut rhs = b.to_vec();
        qr.triangularize(&mut rhs);
        let diag: Vec<f64> = (0..n).map(|i| qr.at(i, i).abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 && min >= RANK_TOLERANCE * max {
            return Ok(LstsqSolution {
                coeffs: qr.back_substitute(&rhs),
                ridge: false,
            });
        }
    }

    let mut aug = ColMajor::from_view(a, n);
    let shift = RIDGE_LAMBDA.sqrt();
    for j in 0..n {
        aug.data[j * aug.rows + m + j] = shift;
    }
    let mut rhs = b.to_vec();
    rhs.resize(m + n, 0.0);
    aug.triangularize(&mut rhs);
    Ok(LstsqSolution {
        coeffs: aug.back_substitute(&rhs),
        ridge: true,
    })
}

/// A QR-compressed least-squares problem that answers column-subset queries
/// without touching the original rows again.
///
/// With `a = Q R`, any column subset `S` satisfies
/// `||a_S x - b||^2 = ||R_S x - Q^T b||^2 + tail`, where `tail` is the squared
/// norm of the part of `b` outside the column space of `Q`.
///
/// Subsets are solved by Cholesky on the cached Gram matrix `R^T R`. A subset
/// whose pivots drop below `CHOLESKY_MARGIN` of the largest is treated as
/// rank-deficient and gets the same ridge shift as [`lstsq`]. Subsets
/// conditioned between `CHOLESKY_MARGIN` and `RANK_TOLERANCE` thus get the
/// ridge fit here and the plain fit from [`lstsq`]; with the tiny shift the
/// two agree closely.
#[derive(Debug, Clone)]
pub struct CompressedLstsq {
    r: Array2<f64>,
    qtb: Vec<f64>,
    tail: f64,
    rows: usize,
    gram: Array2<f64>,
    rtb: Vec<f64>,
}

/// Cholesky pivots of a column subset must stay above this fraction of the
/// largest one for the plain solve.
const CHOLESKY_MARGIN: f64 = 1e-5;

/// Dot product with eight independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let rest: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + rest
}

/// Solves `g c = rhs` for symmetric positive definite `g` (row-major, n x n),
/// or returns `None` if a pivot falls below `margin` times the largest.
fn cholesky_solve(mut g: Vec<f64>, n: usize, rhs: &[f64], margin: f64) -> Option<Vec<f64>> {
    let mut max_pivot: f64 = 0.0;
    for j in 0..n {
        let row_j = &g[j * n..j * n + j];
        let d = g[j * n + j] - dot(row_j, row_j);
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        max_pivot = max_pivot.max(ljj);
        if ljj < margin * max_pivot {
            return None;
        }
        g[j * n + j] = ljj;
        let (head, tail) = g.split_at_mut((j + 1) * n);
        let row_j = &head[j * n..j * n + j];
        for row_i in tail.chunks_exact_mut(n) {
            row_i[j] = (row_i[j] - dot(&row_i[..j], row_j)) / ljj;
        }
    }
    // the running max can grow after an early pivot was accepted
    if (0..n).any(|j| g[j * n + j] < margin * max_pivot) {
        return None;
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        y[i] = (y[i] - dot(&g[i * n..i * n + i], &y[..i])) / g[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= g[k * n + i] * y[k];
        }
        y[i] /= g[i * n + i];
    }
    Some(y)
}

impl CompressedLstsq {
    pub fn new(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Self> {
        let (m, n) = a.dim();
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "design has {m} rows but {} targets",
                b.len()
            )));
        }
        if m == 0 {
            return Err(Error::InsufficientData("least squares needs at least one row".into()));
        }
        check_finite(a, b)?;
        let mut qr = ColMajor::from_view(a, 0);
        let mut rhs = b.to_vec();
        let k = qr.triangularize(&mut rhs);
        let r = Array2::from_shape_fn((k, n), |(i, j)| if i <= j { qr.at(i, j) } else { 0.0 });
        let tail = rhs[k..].iter().map(|x| x * x).sum();
        rhs.truncate(k);
        let gram = r.t().dot(&r);
        let rtb = r.t().dot(&ArrayView1::from(&rhs[..])).to_vec();
        Ok(CompressedLstsq {
            r,
            qtb: rhs,
            tail,
            rows: m,
            gram,
            rtb,
        })
    }

    /// Number of rows of the original system.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.r.ncols()
    }

    /// Solves the subproblem restricted to `columns`; returns the coefficients
    /// and the residual sum of squares of the original system.
    pub fn solve_columns(&self, columns: &[usize]) -> Result<(LstsqSolution, f64)> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols()) {
            return Err(Error::DimensionMismatch(format!(
                "column {bad} out of range for {} columns",
                self.cols()
            )));
        }
        let k = self.r.nrows();
        let n = columns.len();
        let sub = Array2::from_shape_fn((k, n), |(i, j)| self.r[[i, columns[j]]]);
        let g: Vec<f64> = columns
            .iter()
            .flat_map(|&a| columns.iter().map(move |&b| self.gram[[a, b]]))
            .collect();
        let rhs: Vec<f64> = columns.iter().map(|&c| self.rtb[c]).collect();
        let plain = if n <= k {
            cholesky_solve(g.clone(), n, &rhs, CHOLESKY_MARGIN)
        } else {
            None
        };
        let sol = match plain {
            Some(coeffs) => LstsqSolution { coeffs, ridge: false },
            None if k == 0 => LstsqSolution {
                coeffs: vec![0.0; n],
                ridge: false,
            },
            None => {
                let mut shifted = g;
                for i in 0..n {
                    shifted[i * n + i] += RIDGE_LAMBDA;
                }
                match cholesky_solve(shifted, n, &rhs, 0.0) {
                    Some(coeffs) => LstsqSolution { coeffs, ridge: true },
                    None => lstsq(sub.view(), ArrayView1::from(&self.qtb[..]))?,
                }
            }
        };
        let fitted = sub.dot(&ArrayView1::from(&sol.coeffs[..]));
        let head: f64 = fitted
            .iter()
            .zip(self.qtb.iter())
            .map(|(f, t)| (f - t) * (f - t))
            .sum();
        Ok((sol, head + self.tail))
    }
}
