//! Principal component analysis with a cyclic Jacobi eigensolver.
//!
//! Covariance is normalized by `1/M`. When there are fewer samples than
//! dimensions the `M x M` Gram matrix of the centered samples is decomposed
//! instead of the `N x N` covariance and its eigenvectors are mapped back
//! through the data matrix; both routes are available through [`FitMethod`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep cap for [`sym_eigen`].
pub const MAX_SWEEPS: usize = 100;
/// Off-diagonal convergence bound, scaled by `max(1, ||S||_F)`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are clamped to zero.
pub const RELATIVE_ZERO: f64 = 1e-12;

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`; unit norm, first significant
    /// coordinate positive.
    pub vectors: Vec<Vec<f64>>,
}

/// Eigendecomposition of a symmetric `n x n` row-major matrix by cyclic
/// Jacobi rotations.
pub fn sym_eigen(matrix: &[f64], n: usize) -> Result<SymEigen> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: matrix.len(),
        });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigen input"));
    }
    let scale = matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            let diff = (matrix[i * n + j] - matrix[j * n + i]).abs();
            if diff > 1e-9 * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }

    let mut a = matrix.to_vec();
    // symmetrize so rounding noise in the input cannot stall convergence
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * frob.max(1.0);

    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .fold(0.0f64, |m, (p, q)| m.max(a[p * n + q].abs()));
        if off < tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in (0..n).filter(|&k| k != p && k != q) {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable, so tied eigenvalues keep their rotation order
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut u: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            normalize_sign(&mut u);
            u
        })
        .collect();
    Ok(SymEigen { values, vectors })
}

/// Flips `u` so its first significant coordinate is positive.
fn normalize_sign(u: &mut [f64]) {
    if let Some(first) = u.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum FitMethod {
    /// Gram route when `M < N`, covariance route otherwise.
    #[default]
    Auto,
    /// Decompose the `N x N` covariance directly.
    Covariance,
    /// Decompose the `M x M` Gram matrix and map back.
    Gram,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `K` orthonormal rows of length `N`.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn fit(samples: &[Vec<f64>], k: usize) -> Result<Self> {
        Self::fit_with(samples, k, FitMethod::Auto)
    }

    pub fn fit_with(samples: &[Vec<f64>], k: usize, method: FitMethod) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "PCA needs at least 2 samples, got {m}"
            )));
        }
        let n = samples[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("PCA samples are empty".into()));
        }
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA samples"));
        }
        if k == 0 || k > n.min(m - 1) {
            return Err(Error::InvalidArgument(format!(
                "PCA dimension {k} must be in 1..={} for {m} samples of length {n}",
                n.min(m - 1)
            )));
        }

        let mut mean = vec![0.0; n];
        for s in samples {
            for (acc, v) in mean.iter_mut().zip(s) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let centered: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| s.iter().zip(&mean).map(|(v, mu)| v - mu).collect())
            .collect();

        let use_gram = match method {
            FitMethod::Auto => m < n,
            FitMethod::Covariance => false,
            FitMethod::Gram => true,
        };
        let (mut eigenvalues, components) = if use_gram {
            gram_route(&centered, n, k)?
        } else {
            covariance_route(&centered, n, k)?
        };

        let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        for l in eigenvalues.iter_mut() {
            if *l < RELATIVE_ZERO * top || *l < 0.0 {
                *l = 0.0;
            }
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
        })
    }

    /// Coefficients `y_i = u_i . (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        Ok(self.components.iter().map(|u| dot(u, &centered)).collect())
    }

    /// `mean + sum_i y_i u_i`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: y.len(),
            });
        }
        let mut x = self.mean.clone();
        for (coef, u) in y.iter().zip(&self.components) {
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi += coef * ui;
            }
        }
        Ok(x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if n == 0 || self.components.is_empty() {
            return Err(Error::InvalidModel("PCA model is empty".into()));
        }
        if self.eigenvalues.len() != self.components.len() {
            return Err(Error::InvalidModel(
                "PCA eigenvalue and component counts differ".into(),
            ));
        }
        if self.components.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidModel("PCA component length mismatch".into()));
        }
        let all = self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.eigenvalues);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(
                "PCA model has non-finite values".into(),
            ));
        }
        Ok(())
    }
}

fn covariance_route(
    centered: &[Vec<f64>],
    n: usize,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = centered.len() as f64;
    let mut cov = vec![0.0; n * n];
    for phi in centered {
        for i in 0..n {
            for j in i..n {
                cov[i * n + j] += phi[i] * phi[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i * n + j] /= m;
            cov[j * n + i] = cov[i * n + j];
        }
    }
    let eig = sym_eigen(&cov, n)?;
    Ok((
        eig.values.into_iter().take(k).collect(),
        eig.vectors.into_iter().take(k).collect(),
    ))
}

fn gram_route(centered: &[Vec<f64>], n: usize, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = centered.len();
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g = dot(&centered[i], &centered[j]) / m as f64;
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    let eig = sym_eigen(&gram, m)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);

    let mut values = Vec::with_capacity(k);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (mu, w) in eig.values.iter().zip(&eig.vectors).take(k) {
        if *mu <= RELATIVE_ZERO * top || *mu <= 0.0 {
            break;
        }
        // u = A w / |A w|
        let mut u = vec![0.0; n];
        for (wi, phi) in w.iter().zip(centered) {
            for (uj, pj) in u.iter_mut().zip(phi) {
                *uj += wi * pj;
            }
        }
        orthogonalize(&mut u, &components);
        let len = norm(&u);
        if len <= 1e-12 {
            break;
        }
        u.iter_mut().for_each(|x| *x /= len);
        normalize_sign(&mut u);
        values.push(*mu);
        components.push(u);
    }
    // zero-variance directions: complete the basis from the standard axes
    let mut axis = 0;
    while components.len() < k && axis < n {
        let mut u = vec![0.0; n];
        u[axis] = 1.0;
        axis += 1;
        orthogonalize(&mut u, &components);
        orthogonalize(&mut u, &components);
        let len = norm(&u);
        if len > 1e-6 {
            u.iter_mut().for_each(|x| *x /= len);
            normalize_sign(&mut u);
            values.push(0.0);
            components.push(u);
        }
    }
    Ok((values, components))
}

fn orthogonalize(u: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let d = dot(u, b);
        for (x, y) in u.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
}
