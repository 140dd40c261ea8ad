//! Kernel SVM trained by sequential minimal optimization and composed into a
//! one-vs-one multiclass classifier over standardized features.

mod kernel;
mod multiclass;
mod smo;
mod standardize;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub use kernel::Kernel;
pub use multiclass::{predict_ovo, train_ovo, OvoVote, SvmMulticlassModel, SvmParams};
pub(crate) use multiclass::train_pairs;
pub use smo::{decision_value, predict_binary, train_binary_svm, SmoConfig, SmoReport, SvmBinaryModel};
pub use standardize::{standardize_apply, standardize_fit, StandardizationParams};

use crate::error::{Error, Result};

/// Box constraint used in both experiments.
pub const DEFAULT_C: f64 = 10.0;
/// Kernel scales for the three-class and four-class experiments.
pub const EXP1_KERNEL_SCALE: f64 = 8.3;
pub const EXP2_KERNEL_SCALE: f64 = 19.0;

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

pub(crate) fn to_versioned_json<T: Serialize>(format: &str, model: &T) -> Result<String> {
    let env = Envelope { format: format.to_string(), version: MODEL_VERSION, model };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub(crate) fn from_versioned_json<T: DeserializeOwned>(format: &str, text: &str) -> Result<T> {
    let env: Envelope<T> = serde_json::from_str(text)?;
    if env.format != format || env.version != MODEL_VERSION {
        return Err(Error::Input(format!(
            "expected {format} v{MODEL_VERSION}, found {} v{}",
            env.format, env.version
        )));
    }
    Ok(env.model)
}

pub(crate) fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map_or(0, Vec::len);
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Input(format!("row {i} has {} features, expected {dim}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("row {i} feature {j} is not finite")));
        }
    }
    Ok(dim)
}
