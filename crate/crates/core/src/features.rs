//! Per-sensor feature catalog and the 138-value fingerprint (23 features on
//! each of the six sensors) used by the conventional pipeline.
//!
//! Segments come from the measurement's phase markers: absorption is
//! `[injection_index, desorption_index)` and desorption runs to the end of
//! the trace. Areas use the trapezoidal rule on raw conductance with the
//! time axis in seconds.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Measurement, SensorTrace, N_SENSORS};
use crate::error::{Error, Result};

pub const FEATURES_PER_SENSOR: usize = 23;
pub const FINGERPRINT_LEN: usize = FEATURES_PER_SENSOR * N_SENSORS;

/// Smoothing factors of the three exponential-moving-average filters.
pub const EMA_ALPHAS: [f64; 3] = [0.1, 0.01, 0.001];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmaParams {
    alpha: f64,
}

impl EmaParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::Input(format!("ema alpha must lie in (0, 1), got {alpha}")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    DeltaG,
    DeltaGNorm,
    AucAbsorption,
    AucDesorption,
    /// Maximum of the ema filter over absorption; index into [`EMA_ALPHAS`].
    EmaMax(usize),
    /// Minimum of the ema filter over desorption.
    EmaMin(usize),
    BaselineMean,
    FinalValue,
    Maximum,
    Minimum,
    Mean,
    StdDev,
    MaxDiff,
    MinDiff,
    RiseTime90,
    FallTime10,
    SlopeAbsorption,
    SlopeDesorption,
    AucTotal,
}

/// The documented fingerprint order for one sensor.
pub const CATALOG: [Feature; FEATURES_PER_SENSOR] = [
    Feature::DeltaG,
    Feature::DeltaGNorm,
    Feature::AucAbsorption,
    Feature::AucDesorption,
    Feature::EmaMax(0),
    Feature::EmaMin(0),
    Feature::EmaMax(1),
    Feature::EmaMin(1),
    Feature::EmaMax(2),
    Feature::EmaMin(2),
    Feature::BaselineMean,
    Feature::FinalValue,
    Feature::Maximum,
    Feature::Minimum,
    Feature::Mean,
    Feature::StdDev,
    Feature::MaxDiff,
    Feature::MinDiff,
    Feature::RiseTime90,
    Feature::FallTime10,
    Feature::SlopeAbsorption,
    Feature::SlopeDesorption,
    Feature::AucTotal,
];

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::DeltaG => f.write_str("delta_g"),
            Feature::DeltaGNorm => f.write_str("delta_g_norm"),
            Feature::AucAbsorption => f.write_str("auc_absorption"),
            Feature::AucDesorption => f.write_str("auc_desorption"),
            Feature::EmaMax(i) => write!(f, "ema_max_{}", EMA_ALPHAS[*i]),
            Feature::EmaMin(i) => write!(f, "ema_min_{}", EMA_ALPHAS[*i]),
            Feature::BaselineMean => f.write_str("baseline_mean"),
            Feature::FinalValue => f.write_str("final_value"),
            Feature::Maximum => f.write_str("maximum"),
            Feature::Minimum => f.write_str("minimum"),
            Feature::Mean => f.write_str("mean"),
            Feature::StdDev => f.write_str("std_dev"),
            Feature::MaxDiff => f.write_str("max_diff"),
            Feature::MinDiff => f.write_str("min_diff"),
            Feature::RiseTime90 => f.write_str("rise_time_90"),
            Feature::FallTime10 => f.write_str("fall_time_10"),
            Feature::SlopeAbsorption => f.write_str("slope_absorption"),
            Feature::SlopeDesorption => f.write_str("slope_desorption"),
            Feature::AucTotal => f.write_str("auc_total"),
        }
    }
}

/// `<feature>_<sensor>` for every fingerprint column, sensor-major.
pub fn fingerprint_names(catalog: &[Feature]) -> Vec<String> {
    (1..=N_SENSORS).flat_map(|s| catalog.iter().map(move |f| format!("{f}_{s}"))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub measurement_id: String,
    pub bottle_id: String,
    pub label: ClassLabel,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest conductance change over the trace.
pub fn delta_g(trace: &SensorTrace) -> f64 {
    max_of(&trace.samples) - min_of(&trace.samples)
}

/// Conductance change relative to the trace minimum.
pub fn delta_g_norm(trace: &SensorTrace) -> f64 {
    let min = min_of(&trace.samples);
    (max_of(&trace.samples) - min) / min
}

fn segment<'a>(trace: &'a SensorTrace, range: &Range<usize>) -> Result<&'a [f64]> {
    if range.start > range.end || range.end > trace.samples.len() {
        return Err(Error::Bounds(format!(
            "segment [{}, {}) outside trace {} of length {}",
            range.start,
            range.end,
            trace.sensor_index,
            trace.samples.len()
        )));
    }
    Ok(&trace.samples[range.clone()])
}

fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

/// Trapezoidal area under the trace over `range`, in conductance·seconds.
pub fn auc(trace: &SensorTrace, range: Range<usize>) -> Result<f64> {
    Ok(trapezoid(segment(trace, &range)?, 1.0 / trace.sample_rate_hz))
}

fn ema_of(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    if xs.is_empty() {
        return out;
    }
    let mut y = 0.0;
    out.push(y);
    for w in xs.windows(2) {
        y = (1.0 - alpha) * y + alpha * (w[1] - w[0]);
        out.push(y);
    }
    out
}

/// Exponential moving average of first differences, `y[0] = 0`.
pub fn ema_transform(trace: &SensorTrace, p: EmaParams) -> Vec<f64> {
    ema_of(&trace.samples, p.alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmaExtrema {
    /// Maximum of the filter over the rising segment.
    pub max: f64,
    pub argmax: usize,
    /// Minimum of the filter over the falling segment.
    pub min: f64,
    pub argmin: usize,
}

pub fn ema_extrema(
    trace: &SensorTrace,
    p: EmaParams,
    rising: Range<usize>,
    falling: Range<usize>,
) -> Result<EmaExtrema> {
    let y = ema_transform(trace, p);
    ema_extrema_of(&y, trace, rising, falling)
}

fn ema_extrema_of(y: &[f64], trace: &SensorTrace, rising: Range<usize>, falling: Range<usize>) -> Result<EmaExtrema> {
    for r in [&rising, &falling] {
        if r.start >= r.end {
            return Err(Error::Bounds(format!("empty segment [{}, {}) on trace {}", r.start, r.end, trace.sensor_index)));
        }
        segment(trace, r)?;
    }
    // First index wins ties.
    let (argmax, max) = rising.clone().map(|k| (k, y[k])).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (argmin, min) = falling.clone().map(|k| (k, y[k])).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(EmaExtrema { max, argmax, min, argmin })
}

fn ls_slope(samples: &[f64], rate: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let t_mean = (n - 1) as f64 / 2.0 / rate;
    let g_mean = samples.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &g) in samples.iter().enumerate() {
        let dt = k as f64 / rate - t_mean;
        sxy += dt * (g - g_mean);
        sxx += dt * dt;
    }
    sxy / sxx
}

struct SensorContext<'a> {
    trace: &'a SensorTrace,
    absorption: Range<usize>,
    desorption: Range<usize>,
    injection: usize,
    ema: [Option<EmaExtrema>; 3],
}

impl SensorContext<'_> {
    fn ema(&mut self, i: usize) -> Result<EmaExtrema> {
        if let Some(e) = self.ema[i] {
            return Ok(e);
        }
        let y = ema_of(&self.trace.samples, EMA_ALPHAS[i]);
        let e = ema_extrema_of(&y, self.trace, self.absorption.clone(), self.desorption.clone())?;
        self.ema[i] = Some(e);
        Ok(e)
    }

    fn value(&mut self, feature: Feature) -> Result<f64> {
        let g = &self.trace.samples;
        let rate = self.trace.sample_rate_hz;
        let abs = &g[self.absorption.clone()];
        let des = &g[self.desorption.clone()];
        let v = match feature {
            Feature::DeltaG => delta_g(self.trace),
            Feature::DeltaGNorm => delta_g_norm(self.trace),
            Feature::AucAbsorption => trapezoid(abs, 1.0 / rate),
            Feature::AucDesorption => trapezoid(des, 1.0 / rate),
            Feature::EmaMax(i) => self.ema(i)?.max,
            Feature::EmaMin(i) => self.ema(i)?.min,
            Feature::BaselineMean => {
                let base = &g[..self.injection];
                if base.is_empty() {
                    g[0]
                } else {
                    base.iter().sum::<f64>() / base.len() as f64
                }
            }
            Feature::FinalValue => g[g.len() - 1],
            Feature::Maximum => max_of(g),
            Feature::Minimum => min_of(g),
            Feature::Mean => g.iter().sum::<f64>() / g.len() as f64,
            Feature::StdDev => {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / g.len() as f64).sqrt()
            }
            Feature::MaxDiff if g.len() < 2 => 0.0,
            Feature::MinDiff if g.len() < 2 => 0.0,
            Feature::MaxDiff => g.windows(2).map(|w| (w[1] - w[0]) * rate).fold(f64::NEG_INFINITY, f64::max),
            Feature::MinDiff => g.windows(2).map(|w| (w[1] - w[0]) * rate).fold(f64::INFINITY, f64::min),
            Feature::RiseTime90 => {
                let start = abs[0];
                let threshold = start + 0.9 * (max_of(abs) - start);
                let k = abs.iter().position(|&v| v >= threshold).unwrap_or(0);
                k as f64 / rate
            }
            Feature::FallTime10 => {
                let start = des[0];
                let floor = min_of(des);
                let threshold = floor + 0.1 * (start - floor);
                let k = des.iter().position(|&v| v <= threshold).unwrap_or(0);
                k as f64 / rate
            }
            Feature::SlopeAbsorption => ls_slope(abs, rate),
            Feature::SlopeDesorption => ls_slope(des, rate),
            Feature::AucTotal => trapezoid(g, 1.0 / rate),
        };
        Ok(v)
    }
}

/// Computes the fingerprint of `m`: `catalog` evaluated on sensor 1, then
/// sensor 2, and so on.
pub fn extract_fingerprint(m: &Measurement, catalog: &[Feature]) -> Result<FeatureVector> {
    if catalog.len() != FEATURES_PER_SENSOR {
        return Err(Error::Input(format!(
            "feature catalog has {} entries, expected {FEATURES_PER_SENSOR}",
            catalog.len()
        )));
    }
    let absorption = m.injection_index..m.desorption_index;
    let desorption = m.desorption_index..m.n_points;
    if absorption.is_empty() || desorption.is_empty() {
        return Err(Error::Bounds(format!(
            "measurement {}: absorption [{}, {}) or desorption [{}, {}) is empty",
            m.id, absorption.start, absorption.end, desorption.start, desorption.end
        )));
    }
    let mut values = Vec::with_capacity(FINGERPRINT_LEN);
    for s in 1..=N_SENSORS {
        let trace = m
            .trace(s)
            .ok_or_else(|| Error::Input(format!("measurement {} has no sensor {s}", m.id)))?;
        if trace.samples.len() != m.n_points {
            return Err(Error::Input(format!("measurement {} sensor {s}: length mismatch", m.id)));
        }
        let mut ctx = SensorContext {
            trace,
            absorption: absorption.clone(),
            desorption: desorption.clone(),
            injection: m.injection_index,
            ema: [None; 3],
        };
        for &feature in catalog {
            let v = ctx.value(feature)?;
            if !v.is_finite() {
                return Err(Error::Extraction { feature: feature.to_string(), sensor: s });
            }
            values.push(v);
        }
    }
    Ok(FeatureVector {
        measurement_id: m.id.clone(),
        bottle_id: m.bottle_id.clone(),
        label: m.label,
        names: fingerprint_names(catalog),
        values,
    })
}

/// Writes the fingerprint matrix: feature columns, then `label`, `bottle_id`.
pub fn write_fingerprint_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let names = vectors.first().map_or_else(|| fingerprint_names(&CATALOG), |v| v.names.clone());
    let mut header = names.clone();
    header.push("label".into());
    header.push("bottle_id".into());
    writer.write_record(&header)?;
    for v in vectors {
        if v.names != names {
            return Err(Error::Input(format!("{}: feature names differ from the first row", v.measurement_id)));
        }
        let mut row: Vec<String> = v.values.iter().map(f64::to_string).collect();
        row.push(v.label.to_string());
        row.push(v.bottle_id.clone());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_fingerprint_csv`]. Rows get synthetic
/// ids `row<N>` since the format carries none.
pub fn read_fingerprint_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let perr = |message: String| Error::Parse { file: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| perr(e.to_string()))?;
    let header = reader.headers().map_err(|e| perr(e.to_string()))?.clone();
    let n = header.len();
    if n < 3 || &header[n - 2] != "label" || &header[n - 1] != "bottle_id" {
        return Err(perr("header must end with label,bottle_id".into()));
    }
    let names: Vec<String> = header.iter().take(n - 2).map(str::to_string).collect();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| perr(e.to_string()))?;
        if record.len() != n {
            return Err(perr(format!("row {}: expected {n} fields", i + 1)));
        }
        let values = record
            .iter()
            .take(n - 2)
            .map(|f| f.parse::<f64>().map_err(|_| perr(format!("row {}: bad number {f:?}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        out.push(FeatureVector {
            measurement_id: format!("row{}", i + 1),
            bottle_id: record[n - 1].to_string(),
            label: record[n - 2].parse().map_err(|e: Error| perr(e.to_string()))?,
            names: names.clone(),
            values,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, trim_to_interval, GeneratorConfig, TRIM_END, TRIM_START};
    use proptest::prelude::*;

    fn trace(samples: &[f64], rate: f64) -> SensorTrace {
        SensorTrace { sensor_index: 1, samples: samples.to_vec(), sample_rate_hz: rate }
    }

    #[test]
    fn delta_g_cases() {
        assert_eq!(delta_g(&trace(&[4.0; 10], 1.0)), 0.0);
        assert_eq!(delta_g(&trace(&[1.0, 3.0, 2.0], 1.0)), 2.0);
        assert_eq!(delta_g_norm(&trace(&[2.0, 4.0], 1.0)), 1.0);
        assert_eq!(delta_g_norm(&trace(&[4.0; 10], 1.0)), 0.0);
        assert_eq!(delta_g_norm(&trace(&[1.0, 3.0, 2.0], 1.0)), 2.0);
    }

    #[test]
    fn auc_cases() {
        let c = 2.5;
        let n = 37;
        let rate = 18.5;
        let a = auc(&trace(&vec![c; n], rate), 0..n).unwrap();
        assert!((a - c * (n - 1) as f64 / rate).abs() < 1e-12);
        assert_eq!(auc(&trace(&[0.5, 1.5], 1.0), 0..2).unwrap(), 1.0);
        assert!(matches!(auc(&trace(&[1.0, 2.0], 1.0), 0..3), Err(Error::Bounds(_))));
    }

    #[test]
    fn ema_of_step_decays_geometrically() {
        let p = EmaParams::new(0.1).unwrap();
        let y = ema_transform(&trace(&[1.0, 2.0, 2.0, 2.0, 2.0], 1.0), p);
        let expected = [0.0, 0.1, 0.09, 0.081, 0.0729];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{y:?}");
        }
        let e = ema_extrema(&trace(&[1.0, 2.0, 2.0, 2.0, 2.0], 1.0), p, 0..3, 3..5).unwrap();
        assert!((e.max - 0.1).abs() < 1e-15);
        assert_eq!(e.argmax, 1);
    }

    #[test]
    fn ema_of_constant_is_zero() {
        let t = trace(&[3.0; 50], 1.0);
        let p = EmaParams::new(0.01).unwrap();
        assert!(ema_transform(&t, p).iter().all(|&v| v == 0.0));
        let e = ema_extrema(&t, p, 0..25, 25..50).unwrap();
        assert_eq!((e.max, e.min), (0.0, 0.0));
    }

    #[test]
    fn ema_of_ramp_approaches_unit_increment() {
        let xs: Vec<f64> = (0..5000).map(|k| k as f64 + 1.0).collect();
        for alpha in EMA_ALPHAS.into_iter().take(2) {
            let y = ema_transform(&trace(&xs, 1.0), EmaParams::new(alpha).unwrap());
            // y[k] = 1 - (1-alpha)^k for unit increments.
            let k = 4999;
            assert!((y[k] - (1.0 - (1.0 - alpha).powi(k as i32))).abs() < 1e-12);
            assert!((y[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ema_params_reject_closed_endpoints() {
        assert!(EmaParams::new(0.0).is_err());
        assert!(EmaParams::new(1.0).is_err());
        assert!(EmaParams::new(0.5).is_ok());
    }

    fn noiseless() -> Measurement {
        let cfg = GeneratorConfig {
            noise_std: 0.0,
            bottle_jitter: 0.0,
            measurement_jitter: 0.0,
            ..GeneratorConfig::default()
        }
        .with_counts([0, 0, 1, 0]);
        generate_synthetic(&cfg).unwrap().measurements.remove(0)
    }

    #[test]
    fn delta_g_matches_closed_form_peak() {
        let m = noiseless();
        let arch = &GeneratorConfig::default().archetypes[&ClassLabel::LQ];
        for (s, sensor) in arch.sensors.iter().enumerate() {
            let peak = sensor.amplitude.mid() * (1.0 - (-80.0 / sensor.tau_absorption.mid()).exp());
            assert!((delta_g(&m.traces[s]) - peak).abs() < 1e-9);
        }
    }

    #[test]
    fn ema_max_sits_inside_absorption() {
        let m = noiseless();
        let p = EmaParams::new(0.01).unwrap();
        for t in &m.traces {
            // Scan the whole filtered trace independently of ema_extrema.
            let y = ema_transform(t, p);
            let (k, _) = y.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
            assert!((m.injection_index..m.desorption_index).contains(&k), "global max at {k}");
            let e = ema_extrema(t, p, m.injection_index..m.desorption_index, m.desorption_index..m.n_points).unwrap();
            assert_eq!(e.argmax, k);
            assert!(e.min < 0.0);
        }
    }

    #[test]
    fn fingerprint_shape_and_order() {
        let m = noiseless();
        let v = extract_fingerprint(&m, &CATALOG).unwrap();
        assert_eq!(v.values.len(), 138);
        assert_eq!(v.names.len(), 138);
        assert_eq!(v.names[0], "delta_g_1");
        assert_eq!(v.names[6], "ema_max_0.01_1");
        assert_eq!(v.names[23], "delta_g_2");
        assert_eq!(v.names[137], "auc_total_6");
        let unique: std::collections::HashSet<_> = v.names.iter().collect();
        assert_eq!(unique.len(), 138);
        assert_eq!(extract_fingerprint(&m, &CATALOG).unwrap(), v);
        assert!(extract_fingerprint(&m, &CATALOG[..22]).is_err());
    }

    #[test]
    fn fingerprint_scaling_behaviour() {
        let m = noiseless();
        let mut doubled = m.clone();
        for t in &mut doubled.traces {
            t.samples.iter_mut().for_each(|v| *v *= 2.0);
        }
        let a = extract_fingerprint(&m, &CATALOG).unwrap();
        let b = extract_fingerprint(&doubled, &CATALOG).unwrap();
        for s in 0..N_SENSORS {
            let i = s * FEATURES_PER_SENSOR;
            assert!((b.values[i] - 2.0 * a.values[i]).abs() < 1e-9);
            assert!((b.values[i + 1] - a.values[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn trimmed_fingerprint_ignores_outside_samples() {
        let cfg = GeneratorConfig::default().with_counts([0, 1, 0, 0]);
        let m = generate_synthetic(&cfg).unwrap().measurements.remove(0);
        let a = extract_fingerprint(&trim_to_interval(&m, TRIM_START, TRIM_END).unwrap(), &CATALOG).unwrap();
        let mut mutated = m.clone();
        for t in &mut mutated.traces {
            t.samples[..TRIM_START].iter_mut().for_each(|v| *v = 99.0);
            t.samples[TRIM_END..].iter_mut().for_each(|v| *v = 0.5);
        }
        let b = extract_fingerprint(&trim_to_interval(&mutated, TRIM_START, TRIM_END).unwrap(), &CATALOG).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn csv_round_trip() {
        let m = noiseless();
        let v = extract_fingerprint(&m, &CATALOG).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.csv");
        write_fingerprint_csv(std::fs::File::create(&path).unwrap(), std::slice::from_ref(&v)).unwrap();
        let back = read_fingerprint_csv(&path).unwrap();
        assert_eq!(back[0].values, v.values);
        assert_eq!(back[0].names, v.names);
        assert_eq!(back[0].label, ClassLabel::LQ);
    }

    proptest! {
        #[test]
        fn delta_g_scaling(samples in prop::collection::vec(0.1f64..100.0, 2..200), scale in 0.01f64..100.0) {
            let t = trace(&samples, 18.5);
            let scaled = trace(&samples.iter().map(|v| v * scale).collect::<Vec<_>>(), 18.5);
            prop_assert!((delta_g(&scaled) - scale * delta_g(&t)).abs() <= 1e-9 * (1.0 + scale * delta_g(&t)));
            prop_assert!((delta_g_norm(&scaled) - delta_g_norm(&t)).abs() <= 1e-9 * (1.0 + delta_g_norm(&t)));
        }

        #[test]
        fn ema_ignores_offsets(samples in prop::collection::vec(0.1f64..100.0, 2..200), offset in -50.0f64..50.0) {
            let p = EmaParams::new(0.1).unwrap();
            let a = ema_transform(&trace(&samples, 1.0), p);
            let b = ema_transform(&trace(&samples.iter().map(|v| v + offset).collect::<Vec<_>>(), 1.0), p);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
