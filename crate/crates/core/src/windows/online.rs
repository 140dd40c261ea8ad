use super::WindowPlan;
use crate::dataset::{ClassLabel, Experiment, N_SENSORS};
use crate::error::{Error, Result};
use crate::mlp::MlpModel;

/// Streams sensor frames into a window-`t` network and predicts once, on
/// the frame that completes the window.
///
/// Frames are counted from the window origin: the first frame fed must be
/// sample `plan.start` of the measurement. Frames arriving after the
/// prediction are ignored.
#[derive(Clone, Debug)]
pub struct OnlineSession {
    model: MlpModel,
    roster: &'static [ClassLabel],
    window: usize,
    /// Per sensor, the samples seen so far.
    buffers: Vec<Vec<f64>>,
    seen: usize,
    emitted: Option<ClassLabel>,
}

impl OnlineSession {
    pub fn new(model: MlpModel, plan: &WindowPlan, t: usize, experiment: Experiment) -> Result<Self> {
        plan.check_window(t)?;
        if model.architecture.input_size() != plan.input_size(t) {
            return Err(Error::Input(format!(
                "network takes {} inputs, window {t} produces {}",
                model.architecture.input_size(),
                plan.input_size(t)
            )));
        }
        let roster = experiment.roster();
        if model.architecture.n_classes() != roster.len() {
            return Err(Error::Input(format!(
                "network has {} outputs, {experiment} has {} classes",
                model.architecture.n_classes(),
                roster.len()
            )));
        }
        let window = plan.samples(t);
        Ok(Self {
            model,
            roster,
            window,
            buffers: vec![Vec::with_capacity(window); N_SENSORS],
            seen: 0,
            emitted: None,
        })
    }

    /// Frames per sensor needed before the prediction.
    pub fn window_samples(&self) -> usize {
        self.window
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    pub fn emitted(&self) -> Option<ClassLabel> {
        self.emitted
    }

    /// Buffers one frame of six conductances. Returns the label on the
    /// frame that completes the window and `None` otherwise.
    pub fn feed(&mut self, frame: &[f64]) -> Result<Option<ClassLabel>> {
        if self.emitted.is_some() {
            return Ok(None);
        }
        if frame.len() != N_SENSORS {
            return Err(Error::Input(format!("frame has {} values, expected {N_SENSORS}", frame.len())));
        }
        if let Some(s) = frame.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("frame value for sensor {} is not finite", s + 1)));
        }
        for (buf, &v) in self.buffers.iter_mut().zip(frame) {
            buf.push(v);
        }
        self.seen += 1;
        if self.seen < self.window {
            return Ok(None);
        }
        let flat: Vec<f64> = self.buffers.concat();
        let label = self.roster[self.model.predict(&flat)?];
        self.emitted = Some(label);
        Ok(Some(label))
    }
}

pub fn online_feed(session: &mut OnlineSession, frame: &[f64]) -> Result<Option<ClassLabel>> {
    session.feed(frame)
}
