//! Grouped evaluation protocols, repeated experiment runs, the
//! Mann-Whitney U test and PCA.

mod experiment;
mod folds;
mod pca;
mod stats;

pub use experiment::{
    compare_reports, config_digest, conventional_span_seconds, extract_all, format_table, run_conventional, run_experiment, Comparison,
    ExperimentConfig, Pipeline, RunMetadata, RunReport, SelectionScope,
};
pub use folds::{grouped_holdout_keys, grouped_kfold, loo_by_bottle, loo_by_bottle_keys, EvalProtocol, Fold, FoldPlan};
pub use pca::{pca_fit, pca_reconstruct, pca_scores, PcaModel};
pub use stats::{exact_u_counts, mann_whitney_u, Alternative, StatTestResult, TestMethod, EXACT_LIMIT};

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}
