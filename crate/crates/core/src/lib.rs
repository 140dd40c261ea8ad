//! Electronic-nose wine spoilage classification.
//!
//! Two pipelines share the same measurement model:
//!
//! * **conventional**: a 138-value fingerprint per measurement
//!   ([`features`]), SVM-RFE feature selection with cross-validation
//!   ([`selection`]) and a one-vs-one gaussian SVM ([`svm`]);
//! * **rapid**: growing prefixes of the raw traces ([`windows`]) fed to a
//!   deep fully connected network ([`mlp`]), so a prediction is available a
//!   few seconds after gas injection.
//!
//! [`eval`] holds the grouped evaluation protocols, the Mann-Whitney U test
//! used to compare the pipelines and PCA for exploratory score plots.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod mlp;
pub mod selection;
pub mod svm;
pub mod windows;

mod seed;

pub use error::{Error, Result};
