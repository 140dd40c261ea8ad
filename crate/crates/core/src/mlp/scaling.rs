use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-input min-max scaling to `[0, 1]` using training extrema.
///
/// Constant inputs map to 0. Values outside the training range are not
/// clipped, so held-out rows may fall outside `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn scale_fit(x: &[Vec<f64>]) -> Result<ScalingParams> {
    let first = x.first().ok_or_else(|| Error::Input("cannot fit scaling on zero rows".into()))?;
    let mut min = first.clone();
    let mut max = first.clone();
    for (i, row) in x.iter().enumerate() {
        if row.len() != min.len() {
            return Err(Error::Input(format!("row {i} has {} inputs, expected {}", row.len(), min.len())));
        }
        for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    Ok(ScalingParams { min, max })
}

impl ScalingParams {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Identity scaling for `dim` inputs.
    pub fn identity(dim: usize) -> Self {
        Self { min: vec![0.0; dim], max: vec![1.0; dim] }
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for (((o, &v), &lo), &hi) in out.iter_mut().zip(row).zip(&self.min).zip(&self.max) {
            let range = hi - lo;
            *o = if range > 0.0 { (v - lo) / range } else { 0.0 };
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Input(format!("row has {} inputs, scaling expects {}", row.len(), self.dim())));
        }
        let mut out = vec![0.0; row.len()];
        self.apply_into(row, &mut out);
        Ok(out)
    }
}

pub fn scale_apply(params: &ScalingParams, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|r| params.apply_row(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_rules() {
        let x = vec![vec![2.0, 7.0], vec![4.0, 7.0], vec![3.0, 7.0]];
        let p = scale_fit(&x).unwrap();
        assert_eq!(scale_apply(&p, &x).unwrap(), vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]);
        // No clipping for held-out values.
        assert_eq!(p.apply_row(&[5.0, 8.0]).unwrap(), vec![1.5, 0.0]);
        assert!(p.apply_row(&[1.0]).is_err());
        assert!(scale_fit(&[]).is_err());
    }
}
