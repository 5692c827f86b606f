//! Singular spectrum analysis of a single time series.
//!
//! The series is embedded into a trajectory matrix of `n_c` lagged rows,
//! each of length `L − n_c`. The lag-correlation matrix `Y·Yᵀ / L` is
//! diagonalized; projecting the series on each eigenvector gives a
//! principal component, and diagonal averaging of each principal component
//! against its eigenvector gives a reconstructed component. The
//! reconstructed components sum back to the series exactly.
//!
//! Indices in this module are 0-based; [`boundary_weights`] alone uses the
//! 1-based convention of the textbook case formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SquareMatrix};

/// Embedding dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub n_c: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { n_c: 5 }
    }
}

impl EmbeddingConfig {
    pub fn new(n_c: usize) -> Self {
        Self { n_c }
    }

    pub fn validate_for(&self, len: usize) -> Result<()> {
        if self.n_c < 2 {
            return Err(Error::Embedding(format!("n_c = {} < 2", self.n_c)));
        }
        if len <= 2 * self.n_c {
            return Err(Error::Embedding(format!(
                "series of length {len} too short for n_c = {}",
                self.n_c
            )));
        }
        Ok(())
    }
}

/// Lagged copies of the series: `rows[i][j] = X[i + j]`, `j < L − n_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    rows: Vec<Vec<f64>>,
    series_len: usize,
}

impl TrajectoryMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn series_len(&self) -> usize {
        self.series_len
    }
}

pub fn embed(series: &[f64], cfg: &EmbeddingConfig) -> Result<TrajectoryMatrix> {
    cfg.validate_for(series.len())?;
    let width = series.len() - cfg.n_c;
    let rows = (0..cfg.n_c).map(|i| series[i..i + width].to_vec()).collect();
    Ok(TrajectoryMatrix { rows, series_len: series.len() })
}

/// `C = Y·Yᵀ / L` where `L` is the length of the embedded series.
pub fn correlation(y: &TrajectoryMatrix) -> SquareMatrix {
    let n = y.rows.len();
    let inv_len = 1.0 / y.series_len as f64;
    let mut c = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = y.rows[i].iter().zip(&y.rows[j]).map(|(a, b)| a * b).sum();
            c[(i, j)] = dot * inv_len;
            c[(j, i)] = dot * inv_len;
        }
    }
    c
}

/// Eigenpairs of `C` by decreasing |λ|, with the sign convention of
/// [`symmetric_eigen`].
pub fn eigendecompose(c: &SquareMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let e = symmetric_eigen(c)?;
    Ok((e.values, e.vectors))
}

/// `A_i(t) = Σ_j X(t + j) ρ_i(j)` for every window start `t = 0 ..= L − n_c`.
pub fn principal_components(series: &[f64], eigenvectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    eigenvectors
        .iter()
        .map(|rho| {
            series
                .windows(rho.len())
                .map(|w| w.iter().zip(rho).map(|(x, r)| x * r).sum())
                .collect()
        })
        .collect()
}

/// Normalization `M(t)` and summation limits `ℒ(t)`, `𝒰(t)` of the
/// reconstruction, 1-based in both `t` and the returned limits.
pub fn boundary_weights(t: usize, len: usize, n_c: usize) -> (usize, usize, usize) {
    debug_assert!((1..=len).contains(&t));
    let m = if t < n_c {
        t
    } else if t <= len - n_c + 1 {
        n_c
    } else {
        len - t + 1
    };
    let upper = if t < n_c { t } else { n_c };
    let lower = if t <= len - n_c + 1 { 1 } else { t + n_c - len };
    (m, lower, upper)
}

/// Diagonal averaging of one principal component against its eigenvector.
fn reconstruct_one(principal: &[f64], rho: &[f64], len: usize) -> Vec<f64> {
    let n_c = rho.len();
    (1..=len)
        .map(|t| {
            let (m, lower, upper) = boundary_weights(t, len, n_c);
            let sum: f64 = (lower..=upper).map(|j| principal[t - j] * rho[j - 1]).sum();
            sum / m as f64
        })
        .collect()
}

/// Reconstructed components `R_i(t)`, each of the series' length.
pub fn reconstruct(series: &[f64], eigenvectors: &[Vec<f64>], principal: &[Vec<f64>]) -> Vec<Vec<f64>> {
    eigenvectors
        .iter()
        .zip(principal)
        .map(|(rho, a)| reconstruct_one(a, rho, series.len()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaDecomposition {
    pub n_c: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub principal: Vec<Vec<f64>>,
    pub reconstructed: Vec<Vec<f64>>,
}

impl SsaDecomposition {
    pub fn series_len(&self) -> usize {
        self.reconstructed.first().map_or(0, Vec::len)
    }

    /// Sum of the given 1-based reconstructed components.
    pub fn sum_components<I: IntoIterator<Item = usize>>(&self, indices: I) -> Vec<f64> {
        let mut out = vec![0.0; self.series_len()];
        for i in indices {
            for (o, r) in out.iter_mut().zip(&self.reconstructed[i - 1]) {
                *o += r;
            }
        }
        out
    }
}

/// The full embed → correlate → diagonalize → project → reconstruct chain.
pub fn decompose(series: &[f64], cfg: &EmbeddingConfig) -> Result<SsaDecomposition> {
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Embedding("series has non-finite values".into()));
    }
    let y = embed(series, cfg)?;
    let c = correlation(&y);
    let (eigenvalues, eigenvectors) = eigendecompose(&c)?;
    let principal = principal_components(series, &eigenvectors);
    let reconstructed = reconstruct(series, &eigenvectors, &principal);
    Ok(SsaDecomposition { n_c: cfg.n_c, eigenvalues, eigenvectors, principal, reconstructed })
}
