use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature centering and scaling fitted on training rows.
///
/// Uses the population standard deviation (divisor `n`); columns with zero
/// variance map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn standardize_fit(x: &[Vec<f64>]) -> Result<StandardizationParams> {
    if x.len() < 2 {
        return Err(Error::Input(format!("standardization needs at least 2 rows, got {}", x.len())));
    }
    let dim = super::check_rows(x)?;
    let n = x.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in x {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(StandardizationParams { mean, std })
}

impl StandardizationParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

pub fn standardize_apply(params: &StandardizationParams, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter()
        .map(|row| {
            if row.len() != params.dim() {
                return Err(Error::Input(format!("row has {} features, scaler expects {}", row.len(), params.dim())));
            }
            Ok(params.apply_row(row))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let p = standardize_fit(&x).unwrap();
        let z = standardize_apply(&p, &x).unwrap();
        assert_eq!(z, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn fitted_columns_are_centered() {
        let x: Vec<Vec<f64>> = (0..37).map(|i| vec![(i as f64).sin() * 1e3, (i * i) as f64, 3.0]).collect();
        let z = standardize_apply(&standardize_fit(&x).unwrap(), &x).unwrap();
        for j in 0..3 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
        assert!(z.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn needs_two_rows() {
        assert!(standardize_fit(&[vec![1.0]]).is_err());
        let p = standardize_fit(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(standardize_apply(&p, &[vec![1.0, 2.0]]).is_err());
    }
}
