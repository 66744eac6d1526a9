use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HstCoefficients;
use crate::error::{invalid, Error, Result};

/// Principal components of an ensemble of coefficient sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSpectra {
    pub mean: Vec<f64>,
    /// Unit basis vectors over the flattened `(re, im)` coefficients,
    /// sorted by decreasing singular value.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Fraction of total variance per component.
    pub explained: Vec<f64>,
}

impl PcaSpectra {
    /// Number of components whose singular value exceeds `floor`.
    pub fn rank_above(&self, floor: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > floor).count()
    }
}

/// Mean-centred PCA of the flattened coefficient vectors via SVD.
pub fn pca_spectra(sets: &[HstCoefficients]) -> Result<PcaSpectra> {
    if sets.len() < 2 {
        return Err(invalid("PCA needs at least two coefficient sets"));
    }
    let shape = sets[0].shape();
    if let Some(bad) = sets.iter().position(|s| s.shape() != shape) {
        return Err(Error::ShapeMismatch(format!(
            "coefficient set {bad} has a different path structure"
        )));
    }
    let rows: Vec<Vec<f64>> = sets.iter().map(HstCoefficients::flatten).collect();
    let dim = rows[0].len();
    let n = rows.len();
    let mean: Vec<f64> = (0..dim)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, dim, |i, k| rows[i][k] - mean[k]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let components = order.iter().map(|&i| v_t.row(i).iter().copied().collect()).collect();
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let explained = singular_values
        .iter()
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect();
    Ok(PcaSpectra {
        mean,
        components,
        singular_values,
        explained,
    })
}
