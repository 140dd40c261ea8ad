use enose::dataset::{generate_synthetic, load_dataset, write_dataset, Experiment, GeneratorConfig};
use enose::eval::{
    compare_reports, extract_all, format_table, run_experiment, Alternative, ExperimentConfig, Pipeline, RunReport,
    SelectionScope,
};
use enose::features::{read_fingerprint_csv, write_fingerprint_csv};
use enose::mlp::TrainConfig;
use enose::windows::{select_earliest, sweep, SweepConfig, WindowPlan};
use enose::Error;

fn small() -> enose::dataset::Dataset {
    generate_synthetic(&GeneratorConfig::default().with_counts([6, 6, 8, 4])).unwrap()
}

#[test]
fn dataset_and_fingerprints_survive_disk() {
    let data = small();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&data, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.len(), data.len());
    assert_eq!(back.manifest.class_counts, data.manifest.class_counts);

    let vectors = extract_all(&back, 150).unwrap();
    let csv = dir.path().join("fingerprints.csv");
    write_fingerprint_csv(std::fs::File::create(&csv).unwrap(), &vectors).unwrap();
    // The CSV carries no measurement ids, everything else must come back exactly.
    let read = read_fingerprint_csv(&csv).unwrap();
    assert_eq!(read.len(), vectors.len());
    for (r, v) in read.iter().zip(&vectors) {
        assert_eq!((&r.bottle_id, r.label, &r.names, &r.values), (&v.bottle_id, v.label, &v.names, &v.values));
    }
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset(dir.path()).is_err());
}

#[test]
fn conventional_and_rapid_reports_compare() {
    let data = small();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp1);
    cfg.selection_scope = SelectionScope::Off;
    cfg.train = TrainConfig { epochs: 20, target_loss: Some(0.05), ..TrainConfig::default() };
    let conventional = run_experiment(&data, Pipeline::Conventional, &cfg, 3, 1).unwrap();
    let rapid = run_experiment(&data, Pipeline::Rapid { window: 1 }, &cfg, 3, 1).unwrap();
    assert!(!conventional.online && rapid.online);
    assert_eq!(rapid.input_size, 300);
    assert!((rapid.recognition_seconds - 50.0 / 18.5).abs() < 1e-12);

    let back = RunReport::from_json(&rapid.to_json().unwrap()).unwrap();
    assert_eq!(back, rapid);
    let table = format_table(&[conventional.clone(), rapid.clone()]);
    assert_eq!(table.lines().count(), 4);

    let cmp = compare_reports(&conventional, &rapid, Alternative::TwoSided).unwrap();
    assert_eq!(cmp.test.u + cmp.test.u_other, 9.0);

    let mut cfg2 = cfg.clone();
    cfg2.experiment = Experiment::Exp2;
    let other = run_experiment(&data, Pipeline::Rapid { window: 1 }, &cfg2, 2, 1).unwrap();
    assert!(matches!(compare_reports(&rapid, &other, Alternative::TwoSided), Err(Error::Input(_))));
}

#[test]
fn runs_are_reproducible() {
    let data = small();
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp1);
    cfg.selection_scope = SelectionScope::Off;
    let a = run_experiment(&data, Pipeline::Conventional, &cfg, 2, 5).unwrap();
    let b = run_experiment(&data, Pipeline::Conventional, &cfg, 2, 5).unwrap();
    assert_eq!(a.val_accuracies, b.val_accuracies);
    assert_eq!(a.config_digest, b.config_digest);
}

#[test]
fn short_sweep_picks_an_early_window() {
    let data = small().for_experiment(Experiment::Exp1).unwrap();
    let cfg = SweepConfig {
        plan: WindowPlan::new(150, 450, 50).unwrap(),
        repetitions: 3,
        seed: 2,
        ..SweepConfig::default()
    };
    let result = sweep(&data, &cfg).unwrap();
    assert_eq!(result.windows.len(), 6);
    let total: usize = result.windows.iter().map(|w| w.best_freq).sum();
    assert_eq!(total, 3);
    let t = select_earliest(&result, 0.01).unwrap();
    assert!(t >= 1 && t <= 6);
    let json: serde_json::Value = serde_json::from_str(&result.to_json().unwrap()).unwrap();
    assert!(json.get("metadata").is_some());
}
