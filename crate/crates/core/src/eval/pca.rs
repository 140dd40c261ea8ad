use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::check_rows;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// Orthonormal components, one per row, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each component over the total variance.
    pub explained_variance_ratio: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }
}

/// Principal components of the sample covariance of `x`. Each component is
/// signed so that its largest-magnitude entry is positive.
pub fn pca_fit(x: &[Vec<f64>], n_components: usize) -> Result<PcaModel> {
    let d = check_rows(x)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::Input(format!("PCA needs at least 2 rows, got {n}")));
    }
    let max = (n - 1).min(d);
    if n_components == 0 || n_components > max {
        return Err(Error::Input(format!(
            "n_components = {n_components} outside 1..={max} for {n} rows x {d} columns"
        )));
    }
    let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - means[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = Vec::with_capacity(n_components);
    let mut ratios = Vec::with_capacity(n_components);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for &k in &order[..n_components] {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0, |m: f64, e| if e.abs() > m.abs() { e } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        let lambda = eig.eigenvalues[k].max(0.0);
        components.push(v);
        eigenvalues.push(lambda);
        ratios.push(if total > 0.0 { lambda / total } else { 0.0 });
    }
    Ok(PcaModel { means, components, explained_variance_ratio: ratios, eigenvalues })
}

/// Projects the centered rows of `x` onto the components.
pub fn pca_scores(model: &PcaModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if let Some(i) = x.iter().position(|r| r.len() != model.means.len()) {
        return Err(Error::Input(format!(
            "row {i} has {} columns, model expects {}",
            x[i].len(),
            model.means.len()
        )));
    }
    Ok(x.iter()
        .map(|row| {
            model
                .components
                .iter()
                .map(|c| c.iter().zip(row).zip(&model.means).map(|((w, v), m)| w * (v - m)).sum())
                .collect()
        })
        .collect())
}

/// Maps scores back to the original coordinates.
pub fn pca_reconstruct(model: &PcaModel, scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
    scores
        .iter()
        .map(|s| {
            let mut row = model.means.clone();
            for (c, &z) in model.components.iter().zip(s) {
                for (r, w) in row.iter_mut().zip(c) {
                    *r += z * w;
                }
            }
            row
        })
        .collect()
}
