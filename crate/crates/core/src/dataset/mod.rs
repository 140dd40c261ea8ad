//! Measurement data model: six conductance traces per acquisition, grouped
//! into bottles, plus the manifest describing a collection on disk.

mod io;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, read_trace_file, write_dataset, write_trace_file};
pub use synthetic::{
    generate_synthetic, ClassArchetype, GeneratorConfig, ResponseCurve, SensorArchetype,
    ValueRange,
};

pub const N_SENSORS: usize = 6;
pub const SAMPLE_RATE_HZ: f64 = 18.5;
/// 180 s at 18.5 Hz.
pub const CANONICAL_POINTS: usize = 3330;
/// Gas reaches the sensors 10 s into acquisition.
pub const CANONICAL_INJECTION: usize = 185;
pub const ABSORPTION_SECONDS: f64 = 80.0;
pub const DESORPTION_SECONDS: f64 = 90.0;
/// Analysis interval `[150, 3300)` used by both pipelines.
pub const TRIM_START: usize = 150;
pub const TRIM_END: usize = 3300;

/// Volatile-acidity ranges (g/l acetic acid) that define the wine classes.
pub const VOLATILE_ACIDITY: [(ClassLabel, [f64; 2]); 3] = [
    (ClassLabel::HQ, [0.15, 0.3]),
    (ClassLabel::AQ, [0.31, 0.41]),
    (ClassLabel::LQ, [0.8, 3.0]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    HQ,
    AQ,
    LQ,
    /// Ethanol reference, only part of the four-class experiment.
    Ea,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [ClassLabel::HQ, ClassLabel::AQ, ClassLabel::LQ, ClassLabel::Ea];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::HQ => "HQ",
            ClassLabel::AQ => "AQ",
            ClassLabel::LQ => "LQ",
            ClassLabel::Ea => "Ea",
        }
    }

    pub fn is_wine(self) -> bool {
        self != ClassLabel::Ea
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HQ" => Ok(ClassLabel::HQ),
            "AQ" => Ok(ClassLabel::AQ),
            "LQ" => Ok(ClassLabel::LQ),
            "Ea" => Ok(ClassLabel::Ea),
            other => Err(Error::Input(format!("unknown class label {other:?}"))),
        }
    }
}

/// Which classification task a run addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// HQ / AQ / LQ wines only.
    Exp1,
    /// Wines plus the ethanol reference.
    Exp2,
}

impl Experiment {
    pub fn roster(self) -> &'static [ClassLabel] {
        match self {
            Experiment::Exp1 => &ClassLabel::ALL[..3],
            Experiment::Exp2 => &ClassLabel::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
        }
    }

    /// Class index of `label` within this experiment's roster.
    pub fn class_index(self, label: ClassLabel) -> Option<usize> {
        self.roster().iter().position(|&l| l == label)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            other => Err(Error::Input(format!("unknown experiment {other:?} (expected exp1 or exp2)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorTrace {
    /// 1-based sensor position in the array.
    pub sensor_index: usize,
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl SensorTrace {
    pub fn new(sensor_index: usize, samples: Vec<f64>) -> Self {
        Self { sensor_index, samples, sample_rate_hz: SAMPLE_RATE_HZ }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub id: String,
    /// Grouping key. Ethanol measurements carry their batch key here.
    pub bottle_id: String,
    pub label: ClassLabel,
    pub traces: Vec<SensorTrace>,
    pub n_points: usize,
    pub injection_index: usize,
    /// First sample of the desorption phase.
    pub desorption_index: usize,
}

impl Measurement {
    pub fn sample_rate_hz(&self) -> f64 {
        self.traces.first().map_or(SAMPLE_RATE_HZ, |t| t.sample_rate_hz)
    }

    /// Trace for a 1-based sensor index.
    pub fn trace(&self, sensor_index: usize) -> Option<&SensorTrace> {
        self.traces.iter().find(|t| t.sensor_index == sensor_index)
    }
}

/// Desorption onset implied by the acquisition timeline: absorption lasts
/// 80 s after injection.
pub fn default_desorption_index(injection_index: usize, n_points: usize, sample_rate_hz: f64) -> usize {
    let onset = injection_index + (ABSORPTION_SECONDS * sample_rate_hz).round() as usize;
    onset.min(n_points.saturating_sub(1))
}

/// Lists every broken invariant of `m`. Empty means the measurement is valid.
pub fn validate_measurement(m: &Measurement) -> Vec<String> {
    let mut violations = Vec::new();
    if m.traces.len() != N_SENSORS {
        violations.push(format!("traces: expected {N_SENSORS}, found {}", m.traces.len()));
    }
    let mut seen = [false; N_SENSORS];
    for trace in &m.traces {
        let s = trace.sensor_index;
        if !(1..=N_SENSORS).contains(&s) {
            violations.push(format!("trace {s}: sensor index outside 1..={N_SENSORS}"));
        } else if std::mem::replace(&mut seen[s - 1], true) {
            violations.push(format!("trace {s}: sensor index appears more than once"));
        }
        if !(trace.sample_rate_hz > 0.0 && trace.sample_rate_hz.is_finite()) {
            violations.push(format!("trace {s}: sample_rate_hz {} is not positive", trace.sample_rate_hz));
        }
        if trace.samples.is_empty() {
            violations.push(format!("trace {s}: no samples"));
            continue;
        }
        if trace.samples.len() != m.n_points {
            violations.push(format!("trace {s}: length {} != {}", trace.samples.len(), m.n_points));
        }
        if let Some(k) = trace.samples.iter().position(|v| !v.is_finite()) {
            violations.push(format!("trace {s}: non-finite conductance at k={k}"));
        } else if let Some(k) = trace.samples.iter().position(|&v| v <= 0.0) {
            violations.push(format!("trace {s}: non-positive conductance at k={k}"));
        }
    }
    if m.injection_index >= m.n_points {
        violations.push(format!("injection_index: {} >= n_points {}", m.injection_index, m.n_points));
    }
    if m.desorption_index < m.injection_index || m.desorption_index >= m.n_points.max(1) {
        violations.push(format!(
            "desorption_index: {} outside [{}, {})",
            m.desorption_index, m.injection_index, m.n_points
        ));
    }
    violations
}

/// Slices every trace to `[start, end)` and rebases the phase markers.
pub fn trim_to_interval(m: &Measurement, start: usize, end: usize) -> Result<Measurement> {
    if start >= end || end > m.n_points {
        return Err(Error::Bounds(format!(
            "trim interval [{start}, {end}) invalid for {} points in measurement {}",
            m.n_points, m.id
        )));
    }
    let n_points = end - start;
    let rebase = |k: usize| k.saturating_sub(start).min(n_points - 1);
    let traces = m
        .traces
        .iter()
        .map(|t| {
            let samples = t.samples.get(start..end).ok_or_else(|| {
                Error::Bounds(format!("trace {} of {} shorter than {end}", t.sensor_index, m.id))
            })?;
            Ok(SensorTrace { samples: samples.to_vec(), ..t.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Measurement {
        traces,
        n_points,
        injection_index: rebase(m.injection_index),
        desorption_index: rebase(m.desorption_index),
        ..m.clone()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleRecord {
    pub bottle_id: String,
    pub label: ClassLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub id: String,
    pub bottle_id: String,
    pub label: ClassLabel,
    pub injection_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desorption_index: Option<usize>,
    pub file: String,
}

/// Contents of `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate_hz: f64,
    pub n_points: usize,
    pub provenance: Provenance,
    pub class_counts: BTreeMap<ClassLabel, usize>,
    pub bottles: Vec<BottleRecord>,
    pub measurements: Vec<MeasurementRecord>,
    /// Documentation only: volatile acidity range per class in g/l.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va_g_per_l: Option<BTreeMap<ClassLabel, [f64; 2]>>,
}

impl Manifest {
    /// Manifest describing `measurements` exactly.
    pub fn describe(measurements: &[Measurement], provenance: Provenance) -> Self {
        let mut class_counts = BTreeMap::new();
        let mut bottles: Vec<BottleRecord> = Vec::new();
        for m in measurements {
            *class_counts.entry(m.label).or_insert(0) += 1;
            if !bottles.iter().any(|b| b.bottle_id == m.bottle_id) {
                bottles.push(BottleRecord { bottle_id: m.bottle_id.clone(), label: m.label });
            }
        }
        let records = measurements
            .iter()
            .map(|m| MeasurementRecord {
                id: m.id.clone(),
                bottle_id: m.bottle_id.clone(),
                label: m.label,
                injection_index: m.injection_index,
                desorption_index: Some(m.desorption_index),
                file: format!("{}.csv", m.id),
            })
            .collect();
        let first = measurements.first();
        Manifest {
            sample_rate_hz: first.map_or(SAMPLE_RATE_HZ, Measurement::sample_rate_hz),
            n_points: first.map_or(CANONICAL_POINTS, |m| m.n_points),
            provenance,
            class_counts,
            bottles,
            measurements: records,
            va_g_per_l: Some(VOLATILE_ACIDITY.into_iter().collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub measurements: Vec<Measurement>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Builds a dataset and its manifest, rejecting any inconsistency.
    pub fn new(measurements: Vec<Measurement>, provenance: Provenance) -> Result<Self> {
        let manifest = Manifest::describe(&measurements, provenance);
        let dataset = Dataset { measurements, manifest };
        dataset.check_integrity()?;
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Verifies every measurement and the manifest against the data.
    pub fn check_integrity(&self) -> Result<()> {
        for m in &self.measurements {
            let violations = validate_measurement(m);
            if !violations.is_empty() {
                return Err(Error::Integrity(format!("measurement {}: {}", m.id, violations.join("; "))));
            }
            if m.n_points != self.manifest.n_points {
                return Err(Error::Integrity(format!(
                    "measurement {} has {} points, manifest declares {}",
                    m.id, m.n_points, self.manifest.n_points
                )));
            }
        }
        let mut bottle_labels: BTreeMap<&str, ClassLabel> = BTreeMap::new();
        for b in &self.manifest.bottles {
            if bottle_labels.insert(&b.bottle_id, b.label).is_some_and(|prev| prev != b.label) {
                return Err(Error::Integrity(format!("bottle {} declared with two labels", b.bottle_id)));
            }
        }
        let mut counts: BTreeMap<ClassLabel, usize> = BTreeMap::new();
        for m in &self.measurements {
            *counts.entry(m.label).or_insert(0) += 1;
            match bottle_labels.get(m.bottle_id.as_str()) {
                Some(&label) if label != m.label => {
                    return Err(Error::Integrity(format!(
                        "bottle {} is declared {label} but measurement {} is labeled {}",
                        m.bottle_id, m.id, m.label
                    )));
                }
                Some(_) => {}
                None => {
                    // Bottles must be declared when a roster is present.
                    if !self.manifest.bottles.is_empty() {
                        return Err(Error::Integrity(format!(
                            "measurement {} references undeclared bottle {}",
                            m.id, m.bottle_id
                        )));
                    }
                    bottle_labels.insert(&m.bottle_id, m.label);
                }
            }
        }
        let declared: BTreeMap<ClassLabel, usize> =
            self.manifest.class_counts.iter().filter(|(_, &n)| n > 0).map(|(&l, &n)| (l, n)).collect();
        if declared != counts {
            return Err(Error::Integrity(format!(
                "manifest class counts {declared:?} differ from actual {counts:?}"
            )));
        }
        if self.manifest.measurements.len() != self.measurements.len() {
            return Err(Error::Integrity(format!(
                "manifest lists {} measurements, found {}",
                self.manifest.measurements.len(),
                self.measurements.len()
            )));
        }
        Ok(())
    }

    /// The measurements taking part in `experiment`, in dataset order.
    pub fn for_experiment(&self, experiment: Experiment) -> Result<Dataset> {
        let roster = experiment.roster();
        let kept: Vec<Measurement> =
            self.measurements.iter().filter(|m| roster.contains(&m.label)).cloned().collect();
        Dataset::new(kept, self.manifest.provenance.clone())
    }

    /// Class index of every measurement in `experiment`'s roster order.
    pub fn class_indices(&self, experiment: Experiment) -> Result<Vec<usize>> {
        self.measurements
            .iter()
            .map(|m| {
                experiment.class_index(m.label).ok_or_else(|| {
                    Error::Input(format!("measurement {} is {}, which {experiment} does not use", m.id, m.label))
                })
            })
            .collect()
    }

    pub fn bottle_ids(&self) -> Vec<&str> {
        self.measurements.iter().map(|m| m.bottle_id.as_str()).collect()
    }

    /// Applies `trim_to_interval` to every measurement.
    pub fn trimmed(&self, start: usize, end: usize) -> Result<Dataset> {
        let measurements =
            self.measurements.iter().map(|m| trim_to_interval(m, start, end)).collect::<Result<Vec<_>>>()?;
        Dataset::new(measurements, self.manifest.provenance.clone())
    }
}

#[cfg(test)]
pub(crate) fn constant_measurement(id: &str, bottle: &str, label: ClassLabel, n: usize, value: f64) -> Measurement {
    Measurement {
        id: id.to_string(),
        bottle_id: bottle.to_string(),
        label,
        traces: (1..=N_SENSORS).map(|s| SensorTrace::new(s, vec![value; n])).collect(),
        n_points: n,
        injection_index: n / 10,
        desorption_index: n / 2,
    }
}
