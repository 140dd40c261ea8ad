//! Deep fully connected classifier for rising-window inputs.
//!
//! The window network has eight weight layers: an input of
//! `sensors * t * delta` raw samples, hidden widths 100 then six times 30,
//! ReLU activations and a softmax output trained with cross-entropy by plain
//! mini-batch SGD. Inputs are min-max scaled with extrema from the training
//! rows.

mod scaling;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use scaling::{scale_apply, scale_fit, ScalingParams};

use crate::error::{Error, Result};
use crate::seed;
use crate::svm::{from_versioned_json, to_versioned_json};

pub const HIDDEN_WIDTHS: [usize; 7] = [100, 30, 30, 30, 30, 30, 30];

const FORMAT: &str = "enose-mlp";
const PREDICT_CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    /// Input width, hidden widths, then the number of classes.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
}

impl MlpArchitecture {
    /// A softmax classifier with ReLU hidden layers.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Input(format!("invalid layer sizes {layer_sizes:?}")));
        }
        if layer_sizes[layer_sizes.len() - 1] < 2 {
            return Err(Error::Input("a softmax classifier needs at least 2 outputs".into()));
        }
        Ok(Self { layer_sizes, hidden_activation: Activation::Relu })
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Trainable parameters of each weight layer: `in * out + out`.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).collect()
    }
}

/// Network for rising window `t` of `delta` samples on each of `n_sensors`.
pub fn build_architecture(t: usize, delta: usize, n_sensors: usize, n_classes: usize) -> Result<MlpArchitecture> {
    if t == 0 || delta == 0 || n_sensors == 0 || n_classes < 2 {
        return Err(Error::Input(format!(
            "need t, delta, n_sensors >= 1 and n_classes >= 2; got {t}, {delta}, {n_sensors}, {n_classes}"
        )));
    }
    let mut sizes = vec![n_sensors * t * delta];
    sizes.extend(HIDDEN_WIDTHS);
    sizes.push(n_classes);
    MlpArchitecture::new(sizes)
}

pub fn param_count(a: &MlpArchitecture) -> usize {
    a.layer_param_counts().iter().sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub architecture: MlpArchitecture,
    pub layers: Vec<Dense>,
    pub scaling: ScalingParams,
}

/// Per-layer gradients laid out like [`Dense`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without improvement on a held-out slice
    /// of the training rows, restoring the best weights.
    pub patience: Option<usize>,
    /// Fraction of training rows held out when `patience` is set.
    pub holdout_fraction: f64,
    /// Stop once the mean training loss of an epoch falls to this value.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            learning_rate: 0.01,
            batch_size: 16,
            epochs: 300,
            patience: None,
            holdout_fraction: 0.1,
            target_loss: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Parameter updates performed (one per mini-batch).
    pub updates: usize,
    pub epochs_run: usize,
    /// Mean loss over the training rows before the first update.
    pub initial_loss: f64,
    /// Mean mini-batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub stopped_early: bool,
}

/// `c = alpha * a * b + beta * c` for an `m x k` by `k x n` product, each
/// operand described by its row and column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    (m, k, n): (usize, usize, usize),
    alpha: f64,
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    beta: f64,
    (c, rsc): (&mut [f64], usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + cols.saturating_sub(1) * cs;
    assert!(k == 0 || (last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len()));
    assert!(last(m, n, rsc, 1) < c.len());
    // SAFETY: the asserts keep every strided access inside its slice, and
    // `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Activations of one mini-batch, reused across batches.
struct Workspace {
    batch: usize,
    /// Output of each layer, `batch x width`; the last holds probabilities.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn new(arch: &MlpArchitecture, batch: usize) -> Self {
        let widest = arch.layer_sizes[1..].iter().copied().max().unwrap_or(1);
        Self {
            batch,
            acts: arch.layer_sizes[1..].iter().map(|&w| vec![0.0; w * batch]).collect(),
            delta: vec![0.0; widest * batch],
            delta_prev: vec![0.0; widest * batch],
        }
    }
}

enum Target<'a> {
    Accumulate(&'a mut Gradients),
    Step(f64),
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl MlpModel {
    /// He-uniform weights (limit `sqrt(6 / fan_in)`) and zero biases.
    pub fn init(architecture: &MlpArchitecture, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[0x1417]);
        let layers = architecture
            .layer_sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Dense {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)).collect(),
                    biases: vec![0.0; w[1]],
                }
            })
            .collect();
        Self { architecture: architecture.clone(), layers, scaling: ScalingParams::identity(architecture.input_size()) }
    }

    pub fn zeros(architecture: &MlpArchitecture) -> Self {
        let layers = architecture
            .layer_sizes
            .windows(2)
            .map(|w| Dense { inputs: w[0], outputs: w[1], weights: vec![0.0; w[0] * w[1]], biases: vec![0.0; w[1]] })
            .collect();
        Self { architecture: architecture.clone(), layers, scaling: ScalingParams::identity(architecture.input_size()) }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn forward_batch(&self, input: &[f64], ws: &mut Workspace) {
        let b = ws.batch;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(l);
            let prev: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let out = &mut rest[0];
            let (n_in, n_out) = (layer.inputs, layer.outputs);
            for s in 0..b {
                out[s * n_out..(s + 1) * n_out].copy_from_slice(&layer.biases);
            }
            gemm(
                (b, n_in, n_out),
                1.0,
                (&prev[..b * n_in], n_in, 1),
                (&layer.weights, 1, n_in),
                1.0,
                (&mut out[..b * n_out], n_out),
            );
            if l == last {
                for s in 0..b {
                    softmax_in_place(&mut out[s * layer.outputs..(s + 1) * layer.outputs]);
                }
            } else if self.architecture.hidden_activation == Activation::Relu {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    /// Mean cross-entropy of the batch held in `ws` against `labels`.
    fn batch_loss(&self, ws: &Workspace, labels: &[usize]) -> f64 {
        let k = self.architecture.n_classes();
        let probs = &ws.acts[self.layers.len() - 1];
        labels.iter().enumerate().map(|(s, &y)| -probs[s * k + y].max(f64::MIN_POSITIVE).ln()).sum::<f64>()
            / labels.len() as f64
    }

    /// Backpropagates the mean batch loss. `Target::Step` applies an SGD
    /// update in place, `Target::Accumulate` adds the gradient instead.
    fn backward(&mut self, input: &[f64], labels: &[usize], ws: &mut Workspace, mut target: Target<'_>) {
        let b = ws.batch;
        let last = self.layers.len() - 1;
        let k = self.architecture.n_classes();
        let inv_b = 1.0 / b as f64;
        {
            let probs = &ws.acts[last];
            for s in 0..b {
                for c in 0..k {
                    let onehot = if labels[s] == c { 1.0 } else { 0.0 };
                    ws.delta[s * k + c] = (probs[s * k + c] - onehot) * inv_b;
                }
            }
        }
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.layers[l].inputs, self.layers[l].outputs);
            let prev: &[f64] = if l == 0 { input } else { &ws.acts[l - 1] };
            if l > 0 {
                let layer = &self.layers[l];
                let dp = &mut ws.delta_prev[..b * n_in];
                gemm(
                    (b, n_out, n_in),
                    1.0,
                    (&ws.delta[..b * n_out], n_out, 1),
                    (&layer.weights, n_in, 1),
                    0.0,
                    (dp, n_in),
                );
                if self.architecture.hidden_activation == Activation::Relu {
                    for (d, a) in dp.iter_mut().zip(&prev[..b * n_in]) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
            }
            let (weights, biases, scale) = match &mut target {
                Target::Accumulate(g) => (&mut g.weights[l], &mut g.biases[l], 1.0),
                Target::Step(lr) => {
                    let layer = &mut self.layers[l];
                    (&mut layer.weights, &mut layer.biases, -*lr)
                }
            };
            for o in 0..n_out {
                let db: f64 = (0..b).map(|s| ws.delta[s * n_out + o]).sum();
                biases[o] += scale * db;
            }
            gemm(
                (n_out, b, n_in),
                scale,
                (&ws.delta[..b * n_out], 1, n_out),
                (&prev[..b * n_in], n_in, 1),
                1.0,
                (weights, n_in),
            );
            if l > 0 {
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
    }

    /// Class probabilities for an input that is already scaled.
    pub fn forward_scaled(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.architecture.input_size() {
            return Err(Error::Input(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.architecture.input_size()
            )));
        }
        let mut ws = Workspace::new(&self.architecture, 1);
        self.forward_batch(x, &mut ws);
        Ok(ws.acts.pop().unwrap_or_default())
    }

    /// Class probabilities for a raw input; applies the stored scaling.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scaled = self.scaling.apply_row(x)?;
        self.forward_scaled(&scaled)
    }

    /// Most probable class for a raw input; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.forward(x)?;
        Ok(argmax(&p))
    }

    /// Most probable class of each raw row, evaluated in mini-batches.
    /// Agrees exactly with [`MlpModel::predict`] row by row.
    pub fn predict_batch(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        let d = self.architecture.input_size();
        let k = self.architecture.n_classes();
        let mut out = Vec::with_capacity(x.len());
        let mut buf = vec![0.0; PREDICT_CHUNK * d];
        for part in x.chunks(PREDICT_CHUNK) {
            for (row, slot) in part.iter().zip(buf.chunks_exact_mut(d)) {
                if row.len() != d {
                    return Err(Error::Input(format!("input has {} values, network expects {d}", row.len())));
                }
                self.scaling.apply_into(row, slot);
            }
            let mut ws = Workspace::new(&self.architecture, part.len());
            self.forward_batch(&buf[..part.len() * d], &mut ws);
            let probs = &ws.acts[ws.acts.len() - 1];
            out.extend(probs.chunks_exact(k).map(argmax));
        }
        Ok(out)
    }

    /// Cross-entropy loss and its gradient for one scaled example.
    pub fn loss_and_gradient(&self, x: &[f64], y: usize) -> Result<(f64, Gradients)> {
        if x.len() != self.architecture.input_size() || y >= self.architecture.n_classes() {
            return Err(Error::Input("example does not match the architecture".into()));
        }
        let mut ws = Workspace::new(&self.architecture, 1);
        self.forward_batch(x, &mut ws);
        let loss = self.batch_loss(&ws, &[y]);
        let mut grads = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        };
        // Accumulate mode leaves the parameters untouched.
        let mut scratch = self.clone();
        scratch.backward(x, &[y], &mut ws, Target::Accumulate(&mut grads));
        Ok((loss, grads))
    }

    fn loss_scaled(&self, x: &[f64], y: usize) -> f64 {
        let mut ws = Workspace::new(&self.architecture, 1);
        self.forward_batch(x, &mut ws);
        self.batch_loss(&ws, &[y])
    }

    /// Mean loss over packed rows, evaluated in chunks.
    fn mean_loss(&self, packed: &[f64], labels: &[usize], rows: &[usize], chunk: usize) -> f64 {
        let d = self.architecture.input_size();
        let mut total = 0.0;
        let mut buf = Vec::new();
        for part in rows.chunks(chunk.max(1)) {
            gather(packed, d, part, &mut buf);
            let mut ws = Workspace::new(&self.architecture, part.len());
            self.forward_batch(&buf, &mut ws);
            let ys: Vec<usize> = part.iter().map(|&r| labels[r]).collect();
            total += self.batch_loss(&ws, &ys) * part.len() as f64;
        }
        total / rows.len().max(1) as f64
    }

    pub fn to_json(&self) -> Result<String> {
        to_versioned_json(FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = from_versioned_json(FORMAT, text)?;
        let ok = model.layers.len() == model.architecture.n_layers()
            && model.layers.iter().zip(model.architecture.layer_sizes.windows(2)).all(|(l, w)| {
                l.inputs == w[0] && l.outputs == w[1] && l.weights.len() == w[0] * w[1] && l.biases.len() == w[1]
            })
            && model.scaling.dim() == model.architecture.input_size();
        if !ok {
            return Err(Error::Input("serialized network dimensions do not chain".into()));
        }
        Ok(model)
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
}

fn gather(packed: &[f64], d: usize, rows: &[usize], out: &mut Vec<f64>) {
    out.clear();
    for &r in rows {
        out.extend_from_slice(&packed[r * d..(r + 1) * d]);
    }
}

/// Class probabilities of a raw input.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

pub fn train(architecture: &MlpArchitecture, x: &[Vec<f64>], y: &[usize], cfg: &TrainConfig) -> Result<MlpModel> {
    train_with_report(architecture, x, y, cfg).map(|(m, _)| m)
}

/// Fits min-max scaling on `x`, then trains by mini-batch SGD.
pub fn train_with_report(
    architecture: &MlpArchitecture,
    x: &[Vec<f64>],
    y: &[usize],
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Input(format!("{} rows and {} labels", x.len(), y.len())));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Input(format!(
            "need epochs >= 1, batch_size >= 1 and learning_rate > 0; got {}, {}, {}",
            cfg.epochs, cfg.batch_size, cfg.learning_rate
        )));
    }
    let d = architecture.input_size();
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::Input(format!("row {i} has {} inputs, architecture expects {d}", x[i].len())));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= architecture.n_classes()) {
        return Err(Error::Input(format!("label {c} outside {} classes", architecture.n_classes())));
    }

    let scaling = scale_fit(x)?;
    let mut packed = vec![0.0; x.len() * d];
    for (row, out) in x.iter().zip(packed.chunks_exact_mut(d)) {
        scaling.apply_into(row, out);
    }

    let mut rng = seed::rng(cfg.seed, &[0x5eed]);
    let mut train_rows: Vec<usize> = (0..x.len()).collect();
    let mut holdout_rows = Vec::new();
    if cfg.patience.is_some() {
        train_rows.shuffle(&mut rng);
        let n_hold = ((x.len() as f64 * cfg.holdout_fraction).round() as usize).min(x.len() - 1);
        holdout_rows = train_rows.split_off(x.len() - n_hold);
        train_rows.sort_unstable();
    }

    let mut model = MlpModel::init(architecture, cfg.seed);
    model.scaling = scaling;
    let mut report = TrainReport { initial_loss: model.mean_loss(&packed, y, &train_rows, 64), ..Default::default() };
    let mut best: Option<(f64, Vec<Dense>)> = None;
    let mut since_best = 0;
    let mut order = train_rows.clone();
    let mut buf = Vec::new();
    let mut labels = Vec::new();
    let full = Workspace::new(architecture, cfg.batch_size);
    let mut workspaces = (full, None::<Workspace>);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            gather(&packed, d, batch, &mut buf);
            labels.clear();
            labels.extend(batch.iter().map(|&r| y[r]));
            let ws = if batch.len() == cfg.batch_size {
                &mut workspaces.0
            } else {
                workspaces.1.get_or_insert_with(|| Workspace::new(architecture, batch.len()))
            };
            model.forward_batch(&buf, ws);
            epoch_loss += model.batch_loss(ws, &labels) * batch.len() as f64;
            model.backward(&buf, &labels, ws, Target::Step(cfg.learning_rate));
            report.updates += 1;
        }
        epoch_loss /= order.len() as f64;
        report.epochs_run = epoch;
        report.epoch_losses.push(epoch_loss);
        if !epoch_loss.is_finite() || model.layers.iter().any(|l| l.weights.iter().any(|w| !w.is_finite())) {
            return Err(Error::Divergence { epoch, loss: epoch_loss });
        }
        if let Some(patience) = cfg.patience {
            if !holdout_rows.is_empty() {
                let val = model.mean_loss(&packed, y, &holdout_rows, 64);
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, model.layers.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience {
                        report.stopped_early = true;
                        break;
                    }
                }
            }
        }
        if cfg.target_loss.is_some_and(|t| epoch_loss <= t) {
            report.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    if let Some((_, layers)) = best {
        model.layers = layers;
    }
    Ok((model, report))
}

/// Largest relative difference between backpropagated and central
/// finite-difference gradients over every parameter, for one scaled example.
///
/// The relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &MlpModel, x: &[f64], y: usize, epsilon: f64) -> Result<f64> {
    let (_, grads) = model.loss_and_gradient(x, y)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    };
    for l in 0..probe.layers.len() {
        for i in 0..probe.layers[l].weights.len() {
            let orig = probe.layers[l].weights[i];
            probe.layers[l].weights[i] = orig + epsilon;
            let plus = probe.loss_scaled(x, y);
            probe.layers[l].weights[i] = orig - epsilon;
            let minus = probe.loss_scaled(x, y);
            probe.layers[l].weights[i] = orig;
            compare(grads.weights[l][i], (plus - minus) / (2.0 * epsilon));
        }
        for i in 0..probe.layers[l].biases.len() {
            let orig = probe.layers[l].biases[i];
            probe.layers[l].biases[i] = orig + epsilon;
            let plus = probe.loss_scaled(x, y);
            probe.layers[l].biases[i] = orig - epsilon;
            let minus = probe.loss_scaled(x, y);
            probe.layers[l].biases[i] = orig;
            compare(grads.biases[l][i], (plus - minus) / (2.0 * epsilon));
        }
    }
    Ok(worst)
}

/// Accuracy of `model` on raw rows.
pub fn accuracy(model: &MlpModel, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    if x.len() != y.len() {
        return Err(Error::Input(format!("{} rows and {} labels", x.len(), y.len())));
    }
    let predicted = model.predict_batch(x)?;
    let correct = predicted.iter().zip(y).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / x.len() as f64)
}
