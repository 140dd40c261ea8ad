//! On-disk layout: a directory holding `manifest.json` plus one
//! `<measurement_id>.csv` per measurement with header `t,s1,...,s6`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{
    default_desorption_index, Dataset, Manifest, Measurement, SensorTrace, N_SENSORS,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const COLUMN_ERROR: &str = "expected 1 time + 6 sensor columns";

fn parse_error(file: &Path, message: impl Into<String>) -> Error {
    Error::Parse { file: file.to_path_buf(), message: message.into() }
}

/// Reads one trace CSV into six sensor traces.
pub fn read_trace_file(path: &Path, sample_rate_hz: f64) -> Result<Vec<SensorTrace>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_error(path, e.to_string()))?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| parse_error(path, "empty trace file"))?
        .map_err(|e| parse_error(path, e.to_string()))?;
    if header.len() != N_SENSORS + 1 {
        return Err(parse_error(path, format!("{COLUMN_ERROR}, header has {}", header.len())));
    }
    let expected: Vec<String> =
        std::iter::once("t".to_string()).chain((1..=N_SENSORS).map(|s| format!("s{s}"))).collect();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(parse_error(path, format!("header must be {}", expected.join(","))));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); N_SENSORS];
    for (row, record) in records.enumerate() {
        let record = record.map_err(|e| parse_error(path, e.to_string()))?;
        let line = row + 2;
        if record.len() != N_SENSORS + 1 {
            return Err(parse_error(path, format!("line {line}: {COLUMN_ERROR}, found {}", record.len())));
        }
        for (s, field) in record.iter().skip(1).enumerate() {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, format!("line {line}: bad number {field:?}")))?;
            columns[s].push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(parse_error(path, "no samples"));
    }
    Ok(columns
        .into_iter()
        .enumerate()
        .map(|(s, samples)| SensorTrace { sensor_index: s + 1, samples, sample_rate_hz })
        .collect())
}

/// Writes a measurement's traces. Values use the shortest representation
/// that round-trips, so re-writing a loaded file reproduces it byte for byte.
pub fn write_trace_file(path: &Path, m: &Measurement) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=N_SENSORS).map(|s| format!("s{s}")));
    writer.write_record(&header)?;
    let rate = m.sample_rate_hz();
    let mut ordered: Vec<&SensorTrace> = m.traces.iter().collect();
    ordered.sort_by_key(|t| t.sensor_index);
    let mut row = Vec::with_capacity(N_SENSORS + 1);
    for k in 0..m.n_points {
        row.clear();
        row.push((k as f64 / rate).to_string());
        row.extend(ordered.iter().map(|t| t.samples[k].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads and validates a dataset directory.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let manifest_path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| parse_error(&manifest_path, e.to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| parse_error(&manifest_path, e.to_string()))?;
    let mut measurements = Vec::with_capacity(manifest.measurements.len());
    for record in &manifest.measurements {
        let path: PathBuf = root.join(&record.file);
        let traces = read_trace_file(&path, manifest.sample_rate_hz)?;
        let n_points = traces[0].samples.len();
        if n_points != manifest.n_points {
            return Err(parse_error(
                &path,
                format!("{n_points} rows, manifest declares n_points = {}", manifest.n_points),
            ));
        }
        let desorption_index = record.desorption_index.unwrap_or_else(|| {
            default_desorption_index(record.injection_index, n_points, manifest.sample_rate_hz)
        });
        let m = Measurement {
            id: record.id.clone(),
            bottle_id: record.bottle_id.clone(),
            label: record.label,
            traces,
            n_points,
            injection_index: record.injection_index,
            desorption_index,
        };
        let violations = super::validate_measurement(&m);
        if !violations.is_empty() {
            return Err(parse_error(&path, violations.join("; ")));
        }
        measurements.push(m);
    }
    let dataset = Dataset { measurements, manifest };
    dataset.check_integrity()?;
    Ok(dataset)
}

/// Writes `manifest.json` and every trace file under `root`.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    for (m, record) in dataset.measurements.iter().zip(&dataset.manifest.measurements) {
        write_trace_file(&root.join(&record.file), m)?;
    }
    let json = serde_json::to_string_pretty(&dataset.manifest)?;
    fs::write(root.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{constant_measurement, ClassLabel, Provenance};

    fn fixture() -> Dataset {
        let ms = vec![
            constant_measurement("m1", "B1", ClassLabel::HQ, 40, 1.5),
            constant_measurement("m2", "B2", ClassLabel::AQ, 40, 2.25),
            constant_measurement("m3", "B3", ClassLabel::LQ, 40, 0.1),
        ];
        Dataset::new(ms, Provenance::Real).unwrap()
    }

    #[test]
    fn load_three_measurements() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&fixture(), dir.path()).unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.len(), 3);
        let counts: Vec<_> = d.manifest.class_counts.iter().map(|(l, n)| (*l, *n)).collect();
        assert_eq!(counts, vec![(ClassLabel::HQ, 1), (ClassLabel::AQ, 1), (ClassLabel::LQ, 1)]);
        assert_eq!(d, fixture());
    }

    #[test]
    fn five_columns_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&fixture(), dir.path()).unwrap();
        let path = dir.path().join("m2.csv");
        fs::write(&path, "t,s1,s2,s3,s4\n0,1,1,1,1\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("expected 1 time + 6 sensor columns"), "{text}");
        assert!(text.contains("m2.csv"), "{text}");
    }

    #[test]
    fn missing_trace_file_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&fixture(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("m3.csv")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Parse { file, .. } if file.ends_with("m3.csv")), "{err}");
    }

    #[test]
    fn short_trace_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let d = fixture();
        write_dataset(&d, dir.path()).unwrap();
        let mut short = d.measurements[0].clone();
        short.n_points = 39;
        for t in &mut short.traces {
            t.samples.pop();
        }
        write_trace_file(&dir.path().join("m1.csv"), &short).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn bottle_label_conflict_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = fixture();
        d.manifest.measurements[2].bottle_id = "B1".into();
        d.measurements[2].bottle_id = "B1".into();
        write_dataset(&d, dir.path()).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn count_mismatch_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = fixture();
        d.manifest.class_counts.insert(ClassLabel::HQ, 2);
        write_dataset(&d, dir.path()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Integrity(_))));
    }
}
