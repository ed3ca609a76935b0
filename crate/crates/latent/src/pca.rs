use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{LatentError, Result};

/// Top principal components of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// `k` orthonormal rows of length `dim`.
    pub components: Vec<Vec<f64>>,
    /// Share of total variance per component, non-increasing.
    pub explained_variance_ratios: Vec<f64>,
    pub mean: Vec<f64>,
}

impl PcaResult {
    pub fn top_ratio_sum(&self, k: usize) -> f64 {
        self.explained_variance_ratios.iter().take(k).sum()
    }

    /// Coordinates of `x` along each component.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(ci, (xi, mi))| ci * (xi - mi)).sum())
            .collect()
    }
}

/// PCA of the rows of `data` from a symmetric eigendecomposition of the
/// covariance, or of the Gram matrix when there are fewer rows than columns.
/// Each component is oriented so that its largest-magnitude coordinate is
/// positive.
pub fn pca(data: &DMatrix<f64>, k: usize) -> Result<PcaResult> {
    let (m, dim) = data.shape();
    if m < 2 {
        return Err(LatentError::Pca(format!("need at least two rows, got {m}")));
    }
    if k == 0 || k > m.min(dim) {
        return Err(LatentError::Pca(format!("k={k} outside 1..={}", m.min(dim))));
    }
    let mean: DVector<f64> = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let total = centered.norm_squared();
    let wide = m < dim;
    let eig = if wide {
        (&centered * centered.transpose()).symmetric_eigen()
    } else {
        (centered.transpose() * &centered).symmetric_eigen()
    };
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lambda = eig.eigenvalues[i].max(0.0);
        let u = eig.eigenvectors.column(i);
        let raw: Vec<f64> = if wide { (centered.transpose() * u).iter().copied().collect() } else { u.iter().copied().collect() };
        let c = orthonormalise(raw, &components);
        components.push(c);
        ratios.push(if total > 0.0 { (lambda / total).min(1.0) } else { 0.0 });
    }
    Ok(PcaResult { components, explained_variance_ratios: ratios, mean: mean.iter().copied().collect() })
}

// Gram-Schmidt against `basis`; falls back to unit vectors when `v` is
// (numerically) inside their span.
fn orthonormalise(v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    let dim = v.len();
    let reduce = |mut x: Vec<f64>| {
        for b in basis {
            let d: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
            x.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
        }
        let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        (x, n)
    };
    let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (mut x, mut n) = reduce(v);
    if n <= 1e-9 * scale.max(1e-300) {
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            (x, n) = reduce(e);
            if n > 0.5 {
                break;
            }
        }
    }
    x.iter_mut().for_each(|a| *a /= n);
    let pivot = x.iter().copied().fold(0.0, |best: f64, a| if a.abs() > best.abs() { a } else { best });
    if pivot < 0.0 {
        x.iter_mut().for_each(|a| *a = -*a);
    }
    x
}
