//! Rising-window protocol: growing prefixes of the raw traces, one network
//! per prefix length, and streaming prediction once a prefix is complete.

mod online;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use online::{online_feed, OnlineSession};

use crate::dataset::{Dataset, Experiment, Measurement, N_SENSORS, TRIM_END, TRIM_START};
use crate::error::{Error, Result};
use crate::eval::{median, mean_std, EvalProtocol};
use crate::mlp::{build_architecture, train, MlpModel, TrainConfig};
use crate::seed;

/// Samples added per window step.
pub const DEFAULT_DELTA: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPlan {
    /// First sample of every window.
    pub start: usize,
    /// Exclusive bound no window may pass.
    pub end: usize,
    pub delta: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self { start: TRIM_START, end: TRIM_END, delta: DEFAULT_DELTA }
    }
}

impl WindowPlan {
    pub fn new(start: usize, end: usize, delta: usize) -> Result<Self> {
        let plan = Self { start, end, delta };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.end <= self.start || self.end - self.start < self.delta {
            return Err(Error::Config(format!(
                "window plan [{}, {}) with delta {} holds no window",
                self.start, self.end, self.delta
            )));
        }
        Ok(())
    }

    /// Number of windows, `floor((end - start) / delta)`.
    pub fn count(&self) -> usize {
        if self.delta == 0 {
            return 0;
        }
        self.end.saturating_sub(self.start) / self.delta
    }

    /// Samples per sensor in window `t`.
    pub fn samples(&self, t: usize) -> usize {
        t * self.delta
    }

    /// Length of the flattened input for window `t`.
    pub fn input_size(&self, t: usize) -> usize {
        N_SENSORS * self.samples(t)
    }

    fn check_window(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.count() {
            return Err(Error::Bounds(format!("window {t} outside 1..={}", self.count())));
        }
        Ok(())
    }
}

/// Seconds of signal covered by window `t`.
pub fn window_to_seconds(t: usize, delta: usize, rate_hz: f64) -> f64 {
    (t * delta) as f64 / rate_hz
}

/// Seconds spanned by every window of the plan together.
pub fn span_seconds(plan: &WindowPlan, rate_hz: f64) -> f64 {
    (plan.end - plan.start) as f64 / rate_hz
}

/// Samples `[start, start + t * delta)` of each sensor, sensor 1 first.
pub fn slice_window(m: &Measurement, plan: &WindowPlan, t: usize) -> Result<Vec<f64>> {
    plan.check_window(t)?;
    let stop = plan.start + plan.samples(t);
    let mut out = Vec::with_capacity(plan.input_size(t));
    for s in 1..=N_SENSORS {
        let trace = m
            .trace(s)
            .ok_or_else(|| Error::Input(format!("measurement {} has no sensor {s}", m.id)))?;
        let part = trace.samples.get(plan.start..stop).ok_or_else(|| {
            Error::Bounds(format!(
                "measurement {} sensor {s} has {} samples, window {t} needs {stop}",
                m.id,
                trace.samples.len()
            ))
        })?;
        out.extend_from_slice(part);
    }
    Ok(out)
}

fn slice_rows(dataset: &Dataset, rows: &[usize], plan: &WindowPlan, t: usize) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|&r| slice_window(&dataset.measurements[r], plan, t)).collect()
}

/// Trains the window-`t` network on every measurement of `dataset`.
pub fn train_window_model(
    dataset: &Dataset,
    experiment: Experiment,
    plan: &WindowPlan,
    t: usize,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    let y = dataset.class_indices(experiment)?;
    let rows: Vec<usize> = (0..dataset.len()).collect();
    let x = slice_rows(dataset, &rows, plan, t)?;
    let arch = build_architecture(t, plan.delta, N_SENSORS, experiment.roster().len())?;
    train(&arch, &x, &y, cfg).map_err(|e| e.context(format!("window {t}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub plan: WindowPlan,
    pub protocol: EvalProtocol,
    pub train: TrainConfig,
    pub repetitions: usize,
    pub seed: u64,
}

/// Each repetition trains one network per window on a fresh split that
/// holds out a fifth of every class's bottles.
pub const RAPID_PROTOCOL: EvalProtocol = EvalProtocol::GroupedHoldout { fraction: 0.2 };

/// Training budget for window networks: stop once the epoch loss reaches
/// 0.05, and after 100 epochs at the latest.
pub fn sweep_train_config() -> TrainConfig {
    TrainConfig { epochs: 100, target_loss: Some(0.05), ..TrainConfig::default() }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Exp1,
            plan: WindowPlan::default(),
            protocol: RAPID_PROTOCOL,
            train: sweep_train_config(),
            repetitions: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t: usize,
    pub seconds: f64,
    pub train_mean: f64,
    pub train_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
    /// Repetitions in which this window had the best validation accuracy.
    pub best_freq: usize,
    /// Per repetition: mean training accuracy over folds.
    pub train_accuracies: Vec<f64>,
    /// Per repetition: accuracy over all validation rows.
    pub val_accuracies: Vec<f64>,
}

/// Wall-clock medians over folds and repetitions for one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTiming {
    pub t: usize,
    pub train_seconds: f64,
    pub inference_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepResult {
    pub experiment: Experiment,
    pub plan: WindowPlan,
    pub protocol: EvalProtocol,
    pub repetitions: usize,
    pub sample_rate_hz: f64,
    pub windows: Vec<WindowStats>,
    /// Best validation window of each repetition, lowest `t` on ties.
    pub best_window_per_repetition: Vec<usize>,
    /// Wall-clock measurements; the only part that varies between runs.
    pub timings: Vec<WindowTiming>,
}

impl WindowSweepResult {
    pub fn window(&self, t: usize) -> Option<&WindowStats> {
        self.windows.iter().find(|w| w.t == t)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            t: usize,
            seconds: f64,
            train_mean: f64,
            train_std: f64,
            val_mean: f64,
            val_std: f64,
            best_freq: usize,
            train_accuracies: &'a [f64],
            val_accuracies: &'a [f64],
        }
        #[derive(Serialize)]
        struct Report<'a> {
            experiment: Experiment,
            plan: &'a WindowPlan,
            protocol: &'a EvalProtocol,
            repetitions: usize,
            windows: Vec<Row<'a>>,
            best_window_per_repetition: &'a [usize],
            metadata: Metadata<'a>,
        }
        #[derive(Serialize)]
        struct Metadata<'a> {
            timings: &'a [WindowTiming],
        }
        let windows = self
            .windows
            .iter()
            .map(|w| Row {
                t: w.t,
                seconds: w.seconds,
                train_mean: w.train_mean,
                train_std: w.train_std,
                val_mean: w.val_mean,
                val_std: w.val_std,
                best_freq: w.best_freq,
                train_accuracies: &w.train_accuracies,
                val_accuracies: &w.val_accuracies,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&Report {
            experiment: self.experiment,
            plan: &self.plan,
            protocol: &self.protocol,
            repetitions: self.repetitions,
            windows,
            best_window_per_repetition: &self.best_window_per_repetition,
            metadata: Metadata { timings: &self.timings },
        })?)
    }

    /// Accuracy-versus-time table, one row per window.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "seconds", "train_mean", "train_std", "val_mean", "val_std", "best_freq"])?;
        for s in &self.windows {
            w.write_record([
                s.t.to_string(),
                s.seconds.to_string(),
                s.train_mean.to_string(),
                s.train_std.to_string(),
                s.val_mean.to_string(),
                s.val_std.to_string(),
                s.best_freq.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct FoldOutcome {
    train_accuracy: f64,
    val_correct: usize,
    val_total: usize,
    train_seconds: f64,
    inference_seconds: f64,
}

fn count_correct(model: &MlpModel, x: &[Vec<f64>], y: &[usize]) -> Result<usize> {
    Ok(model.predict_batch(x)?.iter().zip(y).filter(|(p, l)| p == l).count())
}

/// Evaluates a fresh network per window, repetition and fold.
///
/// Folds are redrawn for every repetition from the sweep seed; each network
/// gets its own seed derived from `(repetition, window, fold)`, so results
/// do not depend on scheduling.
pub fn sweep(dataset: &Dataset, cfg: &SweepConfig) -> Result<WindowSweepResult> {
    cfg.plan.validate()?;
    if cfg.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    dataset.check_integrity()?;
    let y = dataset.class_indices(cfg.experiment)?;
    let count = cfg.plan.count();
    let needed = cfg.plan.start + cfg.plan.samples(count);
    if let Some(m) = dataset.measurements.iter().find(|m| m.n_points < needed) {
        return Err(Error::Bounds(format!("measurement {} has {} points, plan needs {needed}", m.id, m.n_points)));
    }
    let plans = (0..cfg.repetitions)
        .map(|r| cfg.protocol.plan(dataset, seed::derive(cfg.seed, &[0xf01d, r as u64])))
        .collect::<Result<Vec<_>>>()?;
    let n_classes = cfg.experiment.roster().len();

    let mut tasks = Vec::new();
    for (r, plan) in plans.iter().enumerate() {
        for t in 1..=count {
            for f in 0..plan.len() {
                tasks.push((r, t, f));
            }
        }
    }
    let outcomes = tasks
        .par_iter()
        .map(|&(r, t, f)| {
            let fold = &plans[r].folds[f];
            let run = || -> Result<FoldOutcome> {
                let xt = slice_rows(dataset, &fold.train, &cfg.plan, t)?;
                let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
                let xv = slice_rows(dataset, &fold.validation, &cfg.plan, t)?;
                let yv: Vec<usize> = fold.validation.iter().map(|&i| y[i]).collect();
                let arch = build_architecture(t, cfg.plan.delta, N_SENSORS, n_classes)?;
                let train_cfg =
                    TrainConfig { seed: seed::derive(cfg.seed, &[r as u64, t as u64, f as u64]), ..cfg.train.clone() };
                let clock = Instant::now();
                let model = train(&arch, &xt, &yt, &train_cfg)?;
                let train_seconds = clock.elapsed().as_secs_f64();
                let train_correct = count_correct(&model, &xt, &yt)?;
                let clock = Instant::now();
                let val_correct = count_correct(&model, &xv, &yv)?;
                let inference_seconds = clock.elapsed().as_secs_f64() / xv.len().max(1) as f64;
                Ok(FoldOutcome {
                    train_accuracy: train_correct as f64 / yt.len() as f64,
                    val_correct,
                    val_total: yv.len(),
                    train_seconds,
                    inference_seconds,
                })
            };
            run().map_err(|e| e.context(format!("window {t}, repetition {r}, fold {f}")))
        })
        .collect::<Result<Vec<_>>>()?;

    // Regroup the flat outcome list by (repetition, window).
    let mut train_acc = vec![vec![0.0; cfg.repetitions]; count];
    let mut val_acc = vec![vec![0.0; cfg.repetitions]; count];
    let mut train_secs = vec![Vec::new(); count];
    let mut infer_secs = vec![Vec::new(); count];
    let mut it = outcomes.into_iter();
    for (r, plan) in plans.iter().enumerate() {
        for t in 1..=count {
            let (mut tr, mut correct, mut total) = (0.0, 0, 0);
            for _ in 0..plan.len() {
                let o = it.next().expect("one outcome per task");
                tr += o.train_accuracy;
                correct += o.val_correct;
                total += o.val_total;
                train_secs[t - 1].push(o.train_seconds);
                infer_secs[t - 1].push(o.inference_seconds);
            }
            train_acc[t - 1][r] = tr / plan.len() as f64;
            val_acc[t - 1][r] = correct as f64 / total.max(1) as f64;
        }
    }
    let best: Vec<usize> = (0..cfg.repetitions)
        .map(|r| {
            (1..=count).fold(1, |b, t| if val_acc[t - 1][r] > val_acc[b - 1][r] { t } else { b })
        })
        .collect();
    let rate = dataset.manifest.sample_rate_hz;
    let windows = (1..=count)
        .map(|t| {
            let (train_mean, train_std) = mean_std(&train_acc[t - 1]);
            let (val_mean, val_std) = mean_std(&val_acc[t - 1]);
            WindowStats {
                t,
                seconds: window_to_seconds(t, cfg.plan.delta, rate),
                train_mean,
                train_std,
                val_mean,
                val_std,
                best_freq: best.iter().filter(|&&b| b == t).count(),
                train_accuracies: train_acc[t - 1].clone(),
                val_accuracies: val_acc[t - 1].clone(),
            }
        })
        .collect();
    let timings = (1..=count)
        .map(|t| WindowTiming {
            t,
            train_seconds: median(&train_secs[t - 1]),
            inference_seconds: median(&infer_secs[t - 1]),
        })
        .collect();
    Ok(WindowSweepResult {
        experiment: cfg.experiment,
        plan: cfg.plan,
        protocol: cfg.protocol,
        repetitions: cfg.repetitions,
        sample_rate_hz: rate,
        windows,
        best_window_per_repetition: best,
        timings,
    })
}

/// Smallest window whose mean validation accuracy is within `epsilon` of
/// the best window's.
pub fn select_earliest(result: &WindowSweepResult, epsilon: f64) -> Result<usize> {
    if result.windows.is_empty() {
        return Err(Error::Input("sweep result has no windows".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Input(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let best = result.windows.iter().map(|w| w.val_mean).fold(f64::NEG_INFINITY, f64::max);
    let chosen = result.windows.iter().filter(|w| w.val_mean >= best - epsilon).map(|w| w.t).min();
    Ok(chosen.unwrap_or(result.windows[0].t))
}
