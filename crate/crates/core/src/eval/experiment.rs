use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, mean_std, median, Alternative, EvalProtocol, StatTestResult};
use crate::dataset::{ClassLabel, Dataset, Experiment, N_SENSORS};
use crate::error::{Error, Result};
use crate::features::{extract_fingerprint, FeatureVector, CATALOG};
use crate::mlp::{build_architecture, train, TrainConfig};
use crate::seed;
use crate::selection::{rfecv_select, SelectionConfig, SelectionResult};
use crate::svm::{train_ovo, SvmParams, EXP1_KERNEL_SCALE, EXP2_KERNEL_SCALE};
use crate::windows::{slice_window, window_to_seconds, WindowPlan, WindowSweepResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Pipeline {
    /// Fingerprint, feature selection and one-vs-one SVM.
    Conventional,
    /// Raw window `window` into the deep network.
    Rapid { window: usize },
}

/// Where feature selection runs in the conventional pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionScope {
    /// Once, on every measurement, before evaluation.
    #[default]
    Global,
    /// Inside every fold, on its training rows only.
    PerFold,
    /// Keep all features.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub svm: SvmParams,
    pub selection: SelectionConfig,
    pub selection_scope: SelectionScope,
    pub conventional_protocol: EvalProtocol,
    pub plan: WindowPlan,
    pub rapid_protocol: EvalProtocol,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_experiment(Experiment::Exp1)
    }
}

impl ExperimentConfig {
    /// Defaults for `experiment`, with its kernel scale for both the final
    /// classifier and selection scoring.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let scale = match experiment {
            Experiment::Exp1 => EXP1_KERNEL_SCALE,
            Experiment::Exp2 => EXP2_KERNEL_SCALE,
        };
        let svm = SvmParams::gaussian_scale(scale).expect("positive scale");
        Self {
            experiment,
            svm,
            selection: SelectionConfig { scoring: svm, ..SelectionConfig::default() },
            selection_scope: SelectionScope::Global,
            conventional_protocol: EvalProtocol::LooByBottle,
            plan: WindowPlan::default(),
            rapid_protocol: crate::windows::RAPID_PROTOCOL,
            train: crate::windows::sweep_train_config(),
        }
    }
}

/// Wall-clock medians. Kept apart from the accuracies, which are
/// reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Median seconds to train one fold's model.
    pub train_seconds: f64,
    /// Median seconds to classify one validation measurement.
    pub inference_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub pipeline: Pipeline,
    pub protocol: EvalProtocol,
    pub repetitions: usize,
    /// Per repetition: mean training accuracy over folds.
    pub train_accuracies: Vec<f64>,
    /// Per repetition: accuracy over all validation rows.
    pub val_accuracies: Vec<f64>,
    pub train_mean: f64,
    pub train_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
    /// Seconds of signal needed before a prediction.
    pub recognition_seconds: f64,
    pub preprocessing: String,
    pub online: bool,
    pub input_size: usize,
    /// Features used by the conventional pipeline after global selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_features: Option<Vec<String>>,
    pub config_digest: String,
    pub metadata: RunMetadata,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn approach(&self) -> String {
        match self.pipeline {
            Pipeline::Conventional => "conventional".into(),
            Pipeline::Rapid { window } => format!("rapid (window {window})"),
        }
    }

    /// Report for window `t` of a finished sweep.
    pub fn from_sweep(sweep: &WindowSweepResult, t: usize, digest: String) -> Result<Self> {
        let w = sweep
            .window(t)
            .ok_or_else(|| Error::Bounds(format!("sweep has no window {t}")))?;
        let timing = sweep.timings.iter().find(|x| x.t == t);
        Ok(RunReport {
            experiment: sweep.experiment,
            pipeline: Pipeline::Rapid { window: t },
            protocol: sweep.protocol,
            repetitions: sweep.repetitions,
            train_accuracies: w.train_accuracies.clone(),
            val_accuracies: w.val_accuracies.clone(),
            train_mean: w.train_mean,
            train_std: w.train_std,
            val_mean: w.val_mean,
            val_std: w.val_std,
            recognition_seconds: w.seconds,
            preprocessing: "min-max scaling".into(),
            online: true,
            input_size: sweep.plan.input_size(t),
            selected_features: None,
            config_digest: digest,
            metadata: RunMetadata {
                train_seconds: timing.map_or(0.0, |x| x.train_seconds),
                inference_seconds: timing.map_or(0.0, |x| x.inference_seconds),
            },
        })
    }
}

/// FNV-1a hash of the canonical JSON of `value`, as 16 hex digits.
pub fn config_digest<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string(value)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

/// Seconds of signal the conventional pipeline consumes: everything from
/// `start` to the end of the recording.
pub fn conventional_span_seconds(n_points: usize, start: usize, rate_hz: f64) -> f64 {
    n_points.saturating_sub(start) as f64 / rate_hz
}

/// Fingerprints of every measurement, with the first `start` samples of
/// baseline dropped.
pub fn extract_all(dataset: &Dataset, start: usize) -> Result<Vec<FeatureVector>> {
    let trimmed = dataset.trimmed(start, dataset.manifest.n_points)?;
    trimmed
        .measurements
        .par_iter()
        .map(|m| extract_fingerprint(m, &CATALOG).map_err(|e| e.context(format!("measurement {}", m.id))))
        .collect()
}

struct FoldResult {
    train_accuracy: f64,
    val_correct: usize,
    val_total: usize,
    train_seconds: f64,
    inference_seconds: f64,
}

fn rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

/// Runs `pipeline` `repetitions` times with reshuffled training order and
/// freshly drawn folds, all derived from `seed`.
pub fn run_experiment(
    dataset: &Dataset,
    pipeline: Pipeline,
    cfg: &ExperimentConfig,
    repetitions: usize,
    seed: u64,
) -> Result<RunReport> {
    let data = dataset.for_experiment(cfg.experiment)?;
    match pipeline {
        Pipeline::Conventional => {
            let vectors = extract_all(&data, cfg.plan.start)?;
            let mut report = run_conventional(&vectors, cfg, repetitions, seed)?;
            report.recognition_seconds =
                conventional_span_seconds(data.manifest.n_points, cfg.plan.start, data.manifest.sample_rate_hz);
            Ok(report)
        }
        Pipeline::Rapid { window } => run_rapid(&data, window, cfg, repetitions, seed),
    }
}

fn digest_of(cfg: &ExperimentConfig, pipeline: Pipeline, repetitions: usize, seed: u64) -> Result<String> {
    config_digest(&(cfg, pipeline, repetitions, seed))
}

/// Conventional pipeline on precomputed fingerprints.
pub fn run_conventional(
    vectors: &[FeatureVector],
    cfg: &ExperimentConfig,
    repetitions: usize,
    seed: u64,
) -> Result<RunReport> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let vectors: Vec<&FeatureVector> =
        vectors.iter().filter(|v| cfg.experiment.class_index(v.label).is_some()).collect();
    if vectors.is_empty() {
        return Err(Error::Input(format!("no fingerprints belong to {}", cfg.experiment)));
    }
    let names = vectors[0].names.clone();
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let y: Vec<usize> = vectors.iter().map(|v| cfg.experiment.class_index(v.label).unwrap_or(0)).collect();
    let labels: Vec<ClassLabel> = vectors.iter().map(|v| v.label).collect();
    let bottles: Vec<&str> = vectors.iter().map(|v| v.bottle_id.as_str()).collect();

    let selection_cfg = SelectionConfig { seed: seed::derive(seed, &[0x5e1]), ..cfg.selection.clone() };
    let global: Option<SelectionResult> = match cfg.selection_scope {
        SelectionScope::Global => Some(rfecv_select(&x, &y, &bottles, &selection_cfg).map_err(|e| e.context("feature selection"))?),
        _ => None,
    };
    let x_used = global.as_ref().map_or_else(|| x.clone(), |s| s.project(&x));

    let mut results = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let plan = cfg.conventional_protocol.plan_keys(&labels, &bottles, seed::derive(seed, &[0xf01d, r as u64]))?;
        let folds = plan
            .folds
            .par_iter()
            .enumerate()
            .map(|(f, fold)| {
                let run = || -> Result<FoldResult> {
                    let mut train_rows = fold.train.clone();
                    train_rows.shuffle(&mut seed::rng(seed, &[r as u64, f as u64]));
                    let yt: Vec<usize> = train_rows.iter().map(|&i| y[i]).collect();
                    let clock = Instant::now();
                    let (xt, xv) = if cfg.selection_scope == SelectionScope::PerFold {
                        let groups: Vec<&str> = train_rows.iter().map(|&i| bottles[i]).collect();
                        let sel = rfecv_select(&rows(&x, &train_rows), &yt, &groups, &selection_cfg)?;
                        (sel.project(&rows(&x, &train_rows)), sel.project(&rows(&x, &fold.validation)))
                    } else {
                        (rows(&x_used, &train_rows), rows(&x_used, &fold.validation))
                    };
                    let model = train_ovo(&xt, &yt, &cfg.svm)?;
                    let train_seconds = clock.elapsed().as_secs_f64();
                    let mut train_correct = 0;
                    for (row, &c) in xt.iter().zip(&yt) {
                        if model.predict(row)? == c {
                            train_correct += 1;
                        }
                    }
                    let clock = Instant::now();
                    let mut val_correct = 0;
                    for (row, &i) in xv.iter().zip(&fold.validation) {
                        if model.predict(row)? == y[i] {
                            val_correct += 1;
                        }
                    }
                    let inference_seconds = clock.elapsed().as_secs_f64() / xv.len().max(1) as f64;
                    Ok(FoldResult {
                        train_accuracy: train_correct as f64 / yt.len() as f64,
                        val_correct,
                        val_total: xv.len(),
                        train_seconds,
                        inference_seconds,
                    })
                };
                run().map_err(|e| e.context(format!("repetition {r}, fold {f}")))
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(folds);
    }
    let input_size = global.as_ref().map_or(names.len(), |s| s.chosen_size);
    let mut report = summarize(cfg, Pipeline::Conventional, &results, seed)?;
    report.preprocessing = match cfg.selection_scope {
        SelectionScope::Off => "feature extraction".into(),
        _ => "feature extraction + selection".into(),
    };
    report.online = false;
    report.input_size = input_size;
    report.selected_features = global.map(|s| s.chosen_indices.iter().map(|&i| names[i].clone()).collect());
    Ok(report)
}

fn run_rapid(data: &Dataset, window: usize, cfg: &ExperimentConfig, repetitions: usize, seed: u64) -> Result<RunReport> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    cfg.plan.validate()?;
    let y = data.class_indices(cfg.experiment)?;
    let x = data
        .measurements
        .iter()
        .map(|m| slice_window(m, &cfg.plan, window))
        .collect::<Result<Vec<_>>>()?;
    let arch = build_architecture(window, cfg.plan.delta, N_SENSORS, cfg.experiment.roster().len())?;
    let mut results = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let plan = cfg.rapid_protocol.plan(data, seed::derive(seed, &[0xf01d, r as u64]))?;
        let folds = plan
            .folds
            .par_iter()
            .enumerate()
            .map(|(f, fold)| {
                let run = || -> Result<FoldResult> {
                    let xt = rows(&x, &fold.train);
                    let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
                    let train_cfg = TrainConfig {
                        seed: seed::derive(seed, &[r as u64, window as u64, f as u64]),
                        ..cfg.train.clone()
                    };
                    let clock = Instant::now();
                    let model = train(&arch, &xt, &yt, &train_cfg)?;
                    let train_seconds = clock.elapsed().as_secs_f64();
                    let train_correct = model.predict_batch(&xt)?.iter().zip(&yt).filter(|(p, c)| p == c).count();
                    let xv = rows(&x, &fold.validation);
                    let clock = Instant::now();
                    let predicted = model.predict_batch(&xv)?;
                    let inference_seconds = clock.elapsed().as_secs_f64() / xv.len().max(1) as f64;
                    let val_correct = predicted.iter().zip(&fold.validation).filter(|(p, &i)| **p == y[i]).count();
                    Ok(FoldResult {
                        train_accuracy: train_correct as f64 / yt.len() as f64,
                        val_correct,
                        val_total: xv.len(),
                        train_seconds,
                        inference_seconds,
                    })
                };
                run().map_err(|e| e.context(format!("repetition {r}, fold {f}")))
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(folds);
    }
    let mut report = summarize(cfg, Pipeline::Rapid { window }, &results, seed)?;
    report.recognition_seconds = window_to_seconds(window, cfg.plan.delta, data.manifest.sample_rate_hz);
    report.preprocessing = "min-max scaling".into();
    report.online = true;
    report.input_size = cfg.plan.input_size(window);
    Ok(report)
}

fn summarize(cfg: &ExperimentConfig, pipeline: Pipeline, results: &[Vec<FoldResult>], seed: u64) -> Result<RunReport> {
    let mut train_acc = Vec::with_capacity(results.len());
    let mut val_acc = Vec::with_capacity(results.len());
    let mut train_secs = Vec::new();
    let mut infer_secs = Vec::new();
    for folds in results {
        let n = folds.len().max(1) as f64;
        train_acc.push(folds.iter().map(|f| f.train_accuracy).sum::<f64>() / n);
        let correct: usize = folds.iter().map(|f| f.val_correct).sum();
        let total: usize = folds.iter().map(|f| f.val_total).sum();
        val_acc.push(correct as f64 / total.max(1) as f64);
        train_secs.extend(folds.iter().map(|f| f.train_seconds));
        infer_secs.extend(folds.iter().map(|f| f.inference_seconds));
    }
    let (train_mean, train_std) = mean_std(&train_acc);
    let (val_mean, val_std) = mean_std(&val_acc);
    let protocol = match pipeline {
        Pipeline::Conventional => cfg.conventional_protocol,
        Pipeline::Rapid { .. } => cfg.rapid_protocol,
    };
    Ok(RunReport {
        experiment: cfg.experiment,
        pipeline,
        protocol,
        repetitions: results.len(),
        train_accuracies: train_acc,
        val_accuracies: val_acc,
        train_mean,
        train_std,
        val_mean,
        val_std,
        recognition_seconds: 0.0,
        preprocessing: String::new(),
        online: false,
        input_size: 0,
        selected_features: None,
        config_digest: digest_of(cfg, pipeline, results.len(), seed)?,
        metadata: RunMetadata { train_seconds: median(&train_secs), inference_seconds: median(&infer_secs) },
    })
}

/// Aligned text table with one row per report.
pub fn format_table(reports: &[RunReport]) -> String {
    let header = [
        "approach",
        "experiment",
        "val accuracy (%)",
        "train accuracy (%)",
        "recognition (s)",
        "preprocessing",
        "online",
        "input size",
        "train time (s)",
    ];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            [
                r.approach(),
                r.experiment.to_string(),
                format!("{:.2} ± {:.2}", 100.0 * r.val_mean, 100.0 * r.val_std),
                format!("{:.2} ± {:.2}", 100.0 * r.train_mean, 100.0 * r.train_std),
                format!("{:.2}", r.recognition_seconds),
                r.preprocessing.clone(),
                if r.online { "yes" } else { "no" }.to_string(),
                r.input_size.to_string(),
                format!("{:.3}", r.metadata.train_seconds),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: Vec<&str>| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, header.to_vec());
    line(&mut out, widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in &rows {
        line(&mut out, row.iter().map(String::as_str).collect());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: StatTestResult,
}

/// Mann-Whitney U test on the per-repetition validation accuracies of two
/// runs of the same experiment.
pub fn compare_reports(a: &RunReport, b: &RunReport, alternative: Alternative) -> Result<Comparison> {
    if a.experiment != b.experiment {
        return Err(Error::Input(format!(
            "reports come from different experiments ({} vs {})",
            a.experiment, b.experiment
        )));
    }
    let test = mann_whitney_u(&a.val_accuracies, &b.val_accuracies, alternative)?;
    Ok(Comparison { a: a.approach(), b: b.approach(), test })
}
