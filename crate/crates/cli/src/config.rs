use std::path::{Path, PathBuf};

use enose::dataset::{Experiment, GeneratorConfig};
use enose::eval::{EvalProtocol, ExperimentConfig, SelectionScope};
use enose::mlp::TrainConfig;
use enose::svm::{Kernel, SmoConfig, SvmParams, DEFAULT_C, EXP1_KERNEL_SCALE, EXP2_KERNEL_SCALE};
use enose::windows::{sweep_train_config, WindowPlan, RAPID_PROTOCOL};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Conventional,
    Rapid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub c: f64,
    /// Gaussian kernel scale; the experiment's default when absent.
    pub kernel_scale: Option<f64>,
    pub tol: f64,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self { c: DEFAULT_C, kernel_scale: None, tol: SmoConfig::default().tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub step: usize,
    pub folds: usize,
    pub scope: SelectionScope,
    /// Box constraint of the linear ranking machine.
    pub ranking_c: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self { step: 1, folds: 5, scope: SelectionScope::Global, ranking_c: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub pipeline: PipelineKind,
    /// Fixed window for the rapid pipeline; when absent a sweep picks the
    /// earliest window within `epsilon` of the best.
    pub window: Option<usize>,
    pub epsilon: f64,
    pub plan: WindowPlan,
    pub svm: SvmSettings,
    pub selection: SelectionSettings,
    pub train: TrainConfig,
    /// Split for the rapid pipeline; the conventional one leaves one bottle out.
    pub rapid_protocol: EvalProtocol,
    pub repetitions: usize,
    pub seed: u64,
    /// Dataset directory; the synthetic generator is used when absent.
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Exp1,
            pipeline: PipelineKind::Conventional,
            window: None,
            epsilon: 0.01,
            plan: WindowPlan::default(),
            svm: SvmSettings::default(),
            selection: SelectionSettings::default(),
            train: sweep_train_config(),
            rapid_protocol: RAPID_PROTOCOL,
            repetitions: 5,
            seed: 0,
            dataset: None,
            out: PathBuf::from("out"),
            workers: None,
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if !(self.svm.c > 0.0) || !(self.selection.ranking_c > 0.0) {
            return bad("box constraints must be positive".into());
        }
        if self.svm.kernel_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("kernel_scale must be positive".into());
        }
        self.plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(t) = self.window {
            if t == 0 || t > self.plan.count() {
                return bad(format!("window {t} outside 1..={}", self.plan.count()));
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn kernel_scale(&self) -> f64 {
        self.svm.kernel_scale.unwrap_or(match self.experiment {
            Experiment::Exp1 => EXP1_KERNEL_SCALE,
            Experiment::Exp2 => EXP2_KERNEL_SCALE,
        })
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let smo = SmoConfig { c: self.svm.c, tol: self.svm.tol, ..SmoConfig::default() };
        let kernel = Kernel::from_scale(self.kernel_scale()).map_err(|e| CliError::Usage(e.to_string()))?;
        let svm = SvmParams { kernel, smo };
        let mut cfg = ExperimentConfig::for_experiment(self.experiment);
        cfg.svm = svm;
        cfg.selection.step = self.selection.step;
        cfg.selection.folds = self.selection.folds;
        cfg.selection.scoring = svm;
        cfg.selection.ranking.smo.c = self.selection.ranking_c;
        cfg.selection_scope = self.selection.scope;
        cfg.plan = self.plan;
        cfg.rapid_protocol = self.rapid_protocol;
        cfg.train = self.train.clone();
        Ok(cfg)
    }
}
