//! Binary soft-margin SVM solved in the dual by SMO.
//!
//! Each step picks the pair `(i, j)` with the maximal first-order KKT
//! violation for `i` and the best second-order gain for `j`, then solves the
//! two-variable subproblem analytically. Training stops once the violation
//! gap `max_{I_up} -y G - min_{I_low} -y G` drops to `tol`; the bias is the
//! midpoint of that gap, so every training point meets its KKT condition
//! within `tol / 2`.

use serde::{Deserialize, Serialize};

use super::{check_rows, Kernel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the dual objective after every update in the report.
    pub record_objective: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { c: super::DEFAULT_C, tol: 1e-3, max_iter: 1_000_000, record_objective: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// Class ids predicted for decision >= 0 and < 0 respectively.
    pub classes: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SmoReport {
    pub iterations: usize,
    pub converged: bool,
    /// Multipliers for every training row, in input order.
    pub alphas: Vec<f64>,
    pub objective_history: Vec<f64>,
}

const TAU: f64 = 1e-12;

/// Trains on rows `x` with labels `y` in `{-1, +1}`.
pub fn train_binary_svm(x: &[Vec<f64>], y: &[f64], kernel: Kernel, cfg: &SmoConfig) -> Result<(SvmBinaryModel, SmoReport)> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.len(), y.len())));
    }
    check_rows(x)?;
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Input(format!("binary labels must be -1 or +1, got {v}")));
    }
    if !(cfg.c > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::Input(format!("need C > 0 and tol > 0, got C = {}, tol = {}", cfg.c, cfg.tol)));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Training("binary SVM needs both classes present".into()));
    }

    let n = x.len();
    let c = cfg.c;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| k[i * n + j];

    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let dual = |alpha: &[f64], grad: &[f64]| -> f64 { -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() };

    let mut report = SmoReport::default();
    if cfg.record_objective {
        report.objective_history.push(0.0);
    }
    while report.iterations < cfg.max_iter {
        let mut i = usize::MAX;
        let mut vmax = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > vmax {
                vmax = v;
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut vmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            vmin = vmin.min(v);
            if i != usize::MAX && v < vmax {
                let b = vmax - v;
                let a = (kij(i, i) + kij(t, t) - 2.0 * kij(i, t)).max(TAU);
                let gain = -b * b / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || vmax - vmin <= cfg.tol {
            report.converged = true;
            break;
        }

        // Move along d_i = y_i, d_j = -y_j, which keeps sum(alpha y) fixed.
        let a = (kij(i, i) + kij(j, j) - 2.0 * kij(i, j)).max(TAU);
        let vi = -y[i] * grad[i];
        let vj = -y[j] * grad[j];
        let mut step = (vi - vj) / a;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });

        let before = if cfg.record_objective || cfg!(debug_assertions) { dual(&alpha, &grad) } else { 0.0 };
        alpha[i] = (alpha[i] + y[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * step).clamp(0.0, c);
        for t in 0..n {
            grad[t] += y[t] * step * (kij(t, i) - kij(t, j));
        }
        report.iterations += 1;
        if cfg.record_objective || cfg!(debug_assertions) {
            let after = dual(&alpha, &grad);
            debug_assert!(
                after >= before - 1e-9 * (1.0 + before.abs()),
                "dual objective decreased: {before} -> {after}"
            );
            if cfg.record_objective {
                report.objective_history.push(after);
            }
        }
    }

    let (mut m_up, mut m_low) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..n {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t]) {
            m_up = m_up.max(v);
        }
        if in_low(alpha[t], y[t]) {
            m_low = m_low.min(v);
        }
    }
    let bias = match (m_up.is_finite(), m_low.is_finite()) {
        (true, true) => 0.5 * (m_up + m_low),
        (true, false) => m_up,
        (false, true) => m_low,
        (false, false) => 0.0,
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    report.alphas = alpha;
    let model = SvmBinaryModel { kernel, support_vectors, dual_coef, bias, classes: (1, 0) };
    Ok((model, report))
}

impl SvmBinaryModel {
    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// Decision value without a dimension check.
    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Primal weights `sum coef_i sv_i`; only meaningful for the linear kernel.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let mut w = vec![0.0; self.dim().unwrap_or(0)];
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coef) {
            for (wj, xj) in w.iter_mut().zip(sv) {
                *wj += coef * xj;
            }
        }
        Some(w)
    }
}

pub fn decision_value(model: &SvmBinaryModel, x: &[f64]) -> Result<f64> {
    if let Some(dim) = model.dim() {
        if dim != x.len() {
            return Err(Error::Input(format!("input has {} features, model expects {dim}", x.len())));
        }
    }
    Ok(model.decision_unchecked(x))
}

/// `+1` when the decision value is `>= 0`, else `-1`.
pub fn predict_binary(model: &SvmBinaryModel, x: &[f64]) -> Result<f64> {
    Ok(if decision_value(model, x)? >= 0.0 { 1.0 } else { -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_problem() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![-1.0, 1.0];
        let (m, r) = train_binary_svm(&x, &y, Kernel::Linear, &SmoConfig::default()).unwrap();
        // Hard margin: w = 1, b = 0, alpha = 1/2 on both points.
        assert!(r.converged);
        assert_eq!(m.support_vectors.len(), 2);
        assert!((r.alphas[0] - 0.5).abs() < 1e-9 && (r.alphas[1] - 0.5).abs() < 1e-9);
        assert!(decision_value(&m, &[0.0]).unwrap().abs() < 1e-9);
        assert_eq!(predict_binary(&m, &[0.0]).unwrap(), 1.0);
        assert!((decision_value(&m, &[1.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((m.linear_weights().unwrap()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_zero_decision_predicts_positive() {
        let m = SvmBinaryModel {
            kernel: Kernel::Linear,
            support_vectors: vec![vec![1.0]],
            dual_coef: vec![1.0],
            bias: -2.0,
            classes: (1, 0),
        };
        assert_eq!(decision_value(&m, &[2.0]).unwrap(), 0.0);
        assert_eq!(predict_binary(&m, &[2.0]).unwrap(), 1.0);
        assert!(decision_value(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn xor_with_gaussian_kernel() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        let k = Kernel::gaussian(1.0).unwrap();
        let (m, _) = train_binary_svm(&x, &y, k, &SmoConfig::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(predict_binary(&m, xi).unwrap(), *yi);
        }
    }

    #[test]
    fn gaussian_self_kernel_and_far_limit() {
        let x = vec![vec![0.0, 0.0], vec![3.0, 3.0]];
        let y = vec![-1.0, 1.0];
        let (m, _) = train_binary_svm(&x, &y, Kernel::gaussian(0.5).unwrap(), &SmoConfig::default()).unwrap();
        let far = decision_value(&m, &[1e3, -1e3]).unwrap();
        assert_eq!(far, m.bias);
        // At a support vector the own term contributes coef * 1.
        let at = decision_value(&m, &m.support_vectors[0]).unwrap();
        let other = m.dual_coef[1] * m.kernel.eval(&m.support_vectors[1], &m.support_vectors[0]);
        assert!((at - (m.dual_coef[0] + other + m.bias)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![0.0], vec![1.0]];
        let cfg = SmoConfig::default();
        assert!(matches!(train_binary_svm(&x, &[1.0, 1.0], Kernel::Linear, &cfg), Err(Error::Training(_))));
        assert!(matches!(train_binary_svm(&x, &[1.0, 0.0], Kernel::Linear, &cfg), Err(Error::Input(_))));
        let bad = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(train_binary_svm(&bad, &[1.0, -1.0], Kernel::Linear, &cfg), Err(Error::Input(_))));
    }
}
