//! `enose`: command-line front end for the wine-spoilage pipelines.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use enose::dataset::{generate_synthetic, load_dataset, write_dataset, Dataset, Experiment};
use enose::eval::{
    compare_reports, config_digest, extract_all, format_table, pca_fit, pca_scores, run_experiment,
    Alternative, Pipeline, RunReport,
};
use enose::features::{read_fingerprint_csv, write_fingerprint_csv, FeatureVector};
use enose::selection::{rfecv_select, SelectionConfig};
use enose::svm::{standardize_apply, standardize_fit};
use enose::windows::{select_earliest, sweep, SweepConfig};

use config::{PipelineKind, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(enose::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(e) if matches!(e.root(), enose::Error::Config(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<enose::Error> for CliError {
    fn from(e: enose::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "enose", version, about = "Electronic-nose wine spoilage classification")]
struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct RunArgs {
    /// Dataset directory; the synthetic generator is used when omitted.
    dataset: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<Experiment>,
    #[arg(long, value_enum)]
    pipeline: Option<PipelineKind>,
    /// Fixed window for the rapid pipeline.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Accuracy slack when choosing the earliest window.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Training epochs for the network.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset and its manifest.
    Generate {
        /// Measurements per class as HQ,AQ,LQ,Ea.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Compute the fingerprint matrix of a dataset.
    Extract {
        dataset: Option<PathBuf>,
    },
    /// Recursive feature elimination with grouped cross-validation.
    Select {
        /// Dataset directory or fingerprint CSV.
        input: Option<PathBuf>,
        #[arg(long)]
        experiment: Option<Experiment>,
    },
    /// Run the conventional or rapid pipeline and write its report.
    Run(RunArgs),
    /// Evaluate every window of the rising-window plan.
    Sweep(RunArgs),
    /// Compare two run reports with the Mann-Whitney U test.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "two-sided", value_parser = parse_alternative)]
        alternative: Alternative,
    },
    /// Principal component scores of the fingerprint matrix.
    Pca {
        /// Dataset directory or fingerprint CSV.
        input: Option<PathBuf>,
        #[arg(short = 'n', long, default_value_t = 3)]
        components: usize,
        /// Standardize features before the decomposition.
        #[arg(long)]
        standardize: bool,
    },
    /// Check a dataset against its manifest.
    Validate {
        dataset: PathBuf,
    },
}

fn parse_alternative(s: &str) -> Result<Alternative, String> {
    match s {
        "two-sided" => Ok(Alternative::TwoSided),
        "less" => Ok(Alternative::Less),
        "greater" => Ok(Alternative::Greater),
        _ => Err(format!("expected two-sided, less or greater, got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Defaults, then the config file, then flags.
fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if matches!(cli.command, Command::Generate { .. }) {
            cfg.generator.seed = seed;
        }
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match &cli.command {
        Command::Generate { counts: Some(counts) } => {
            let counts: [usize; 4] = counts
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage(format!("--counts takes 4 values, got {}", counts.len())))?;
            cfg.generator = cfg.generator.clone().with_counts(counts);
        }
        Command::Run(a) | Command::Sweep(a) => {
            if let Some(d) = &a.dataset {
                cfg.dataset = Some(d.clone());
            }
            if let Some(e) = a.experiment {
                cfg.experiment = e;
            }
            if let Some(p) = a.pipeline {
                cfg.pipeline = p;
            }
            if a.window.is_some() {
                cfg.window = a.window;
            }
            if let Some(r) = a.repetitions {
                cfg.repetitions = r;
            }
            if let Some(e) = a.epsilon {
                cfg.epsilon = e;
            }
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
        }
        Command::Extract { dataset: Some(d) } => cfg.dataset = Some(d.clone()),
        Command::Select { input, experiment } => {
            if let Some(e) = experiment {
                cfg.experiment = *e;
            }
            if let Some(p) = input.as_ref().filter(|p| p.is_dir()) {
                cfg.dataset = Some(p.clone());
            }
        }
        Command::Pca { input: Some(p), .. } if p.is_dir() => cfg.dataset = Some(p.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> CliResult {
    let cfg = resolve(&cli)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    // Archetype tables are long and rarely edited; leave them out of the banner.
    let mut shown = serde_json::to_value(&cfg).map_err(enose::Error::from)?;
    if let Some(g) = shown.get_mut("generator").and_then(|g| g.as_object_mut()) {
        g.remove("archetypes");
    }
    eprintln!("effective config: {shown}");
    match &cli.command {
        Command::Generate { .. } => cmd_generate(&cfg),
        Command::Extract { .. } => cmd_extract(&cfg),
        Command::Select { input, .. } => cmd_select(&cfg, input.as_deref()),
        Command::Run(_) => cmd_run(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg).map(|_| ()),
        Command::Compare { a, b, alternative } => cmd_compare(&cfg, a, b, *alternative),
        Command::Pca { input, components, standardize } => cmd_pca(&cfg, input.as_deref(), *components, *standardize),
        Command::Validate { dataset } => cmd_validate(dataset),
    }
}

fn dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    match &cfg.dataset {
        Some(path) => Ok(load_dataset(path)?),
        None => {
            eprintln!("no dataset given; generating synthetic data (seed {})", cfg.generator.seed);
            Ok(generate_synthetic(&cfg.generator)?)
        }
    }
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn cmd_generate(cfg: &RunConfig) -> CliResult {
    let data = generate_synthetic(&cfg.generator)?;
    write_dataset(&data, &cfg.out)?;
    let counts: Vec<String> = data.manifest.class_counts.iter().map(|(l, n)| format!("{l}={n}")).collect();
    println!(
        "wrote {} measurements from {} bottles to {} ({})",
        data.len(),
        data.manifest.bottles.len(),
        cfg.out.display(),
        counts.join(", ")
    );
    Ok(())
}

fn cmd_extract(cfg: &RunConfig) -> CliResult {
    let data = dataset(cfg)?;
    if data.is_empty() {
        return Err(enose::Error::Input("dataset has no measurements".into()).into());
    }
    let vectors = extract_all(&data, cfg.plan.start)?;
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("fingerprints.csv");
    write_fingerprint_csv(fs::File::create(&path)?, &vectors)?;
    println!("wrote {} x {} fingerprint matrix to {}", vectors.len(), vectors[0].values.len(), path.display());
    Ok(())
}

/// Fingerprints from a CSV file, or extracted from the configured dataset.
fn fingerprints(cfg: &RunConfig, input: Option<&Path>) -> CliResult<Vec<FeatureVector>> {
    match input {
        Some(p) if p.is_file() => Ok(read_fingerprint_csv(p)?),
        Some(p) if !p.exists() => Err(enose::Error::Input(format!("{} does not exist", p.display())).into()),
        _ => Ok(extract_all(&dataset(cfg)?, cfg.plan.start)?),
    }
}

fn cmd_select(cfg: &RunConfig, input: Option<&Path>) -> CliResult {
    let vectors: Vec<FeatureVector> = fingerprints(cfg, input)?
        .into_iter()
        .filter(|v| cfg.experiment.class_index(v.label).is_some())
        .collect();
    if vectors.is_empty() {
        return Err(enose::Error::Input(format!("no fingerprints belong to {}", cfg.experiment)).into());
    }
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let y: Vec<usize> = vectors.iter().filter_map(|v| cfg.experiment.class_index(v.label)).collect();
    let groups: Vec<&str> = vectors.iter().map(|v| v.bottle_id.as_str()).collect();
    let exp = cfg.experiment_config()?;
    let sel_cfg = SelectionConfig { seed: cfg.seed, ..exp.selection };
    let result = rfecv_select(&x, &y, &groups, &sel_cfg)?;
    let path = write(cfg, "selection.json", &result.to_json(&vectors[0].names)?)?;
    let best = result.cv_curve.iter().find(|p| p.n_features == result.chosen_size);
    println!(
        "kept {} of {} features (cv accuracy {:.4}); report in {}",
        result.chosen_size,
        x[0].len(),
        best.map_or(f64::NAN, |p| p.mean_accuracy),
        path.display()
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> CliResult<enose::windows::WindowSweepResult> {
    let data = dataset(cfg)?.for_experiment(cfg.experiment)?;
    let exp = cfg.experiment_config()?;
    let sweep_cfg = SweepConfig {
        experiment: cfg.experiment,
        plan: cfg.plan,
        protocol: exp.rapid_protocol,
        train: cfg.train.clone(),
        repetitions: cfg.repetitions,
        seed: cfg.seed,
    };
    let result = sweep(&data, &sweep_cfg)?;
    write(cfg, "sweep.json", &result.to_json()?)?;
    fs::create_dir_all(&cfg.out)?;
    result.write_csv(fs::File::create(cfg.out.join("sweep.csv"))?)?;
    let earliest = select_earliest(&result, cfg.epsilon)?;
    let w = result.window(earliest).expect("selected window exists");
    println!(
        "{} windows evaluated; earliest within {} of the best: t = {} ({:.2} s, validation {:.4})",
        result.windows.len(),
        cfg.epsilon,
        earliest,
        w.seconds,
        w.val_mean
    );
    Ok(result)
}

fn cmd_run(cfg: &RunConfig) -> CliResult {
    let exp = cfg.experiment_config()?;
    let report = match (cfg.pipeline, cfg.window) {
        (PipelineKind::Conventional, _) => run_experiment(&dataset(cfg)?, Pipeline::Conventional, &exp, cfg.repetitions, cfg.seed)?,
        (PipelineKind::Rapid, Some(t)) => {
            run_experiment(&dataset(cfg)?, Pipeline::Rapid { window: t }, &exp, cfg.repetitions, cfg.seed)?
        }
        (PipelineKind::Rapid, None) => {
            let result = cmd_sweep(cfg)?;
            let t = select_earliest(&result, cfg.epsilon)?;
            RunReport::from_sweep(&result, t, config_digest(&(&exp, Pipeline::Rapid { window: t }, cfg.repetitions, cfg.seed))?)?
        }
    };
    write(cfg, "report.json", &report.to_json()?)?;
    let table = format_table(std::slice::from_ref(&report));
    write(cfg, "report.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_compare(cfg: &RunConfig, a: &Path, b: &Path, alternative: Alternative) -> CliResult {
    let read = |p: &Path| -> CliResult<RunReport> {
        let text = fs::read_to_string(p).map_err(|e| enose::Error::Input(format!("{}: {e}", p.display())))?;
        RunReport::from_json(&text).map_err(|e| e.context(p.display().to_string()).into())
    };
    let (ra, rb) = (read(a)?, read(b)?);
    let cmp = compare_reports(&ra, &rb, alternative)?;
    let mut text = format_table(&[ra, rb]);
    text.push_str(&format!(
        "\nMann-Whitney U = {} ({:?}, {:?}); p = {:.6}\n",
        cmp.test.u, cmp.test.alternative, cmp.test.method, cmp.test.p_value
    ));
    write(cfg, "comparison.json", &serde_json::to_string_pretty(&cmp).map_err(enose::Error::from)?)?;
    write(cfg, "comparison.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_pca(cfg: &RunConfig, input: Option<&Path>, n: usize, standardize: bool) -> CliResult {
    let vectors = fingerprints(cfg, input)?;
    let mut x: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    if standardize {
        let params = standardize_fit(&x)?;
        x = standardize_apply(&params, &x)?;
    }
    let model = pca_fit(&x, n)?;
    let scores = pca_scores(&model, &x)?;
    fs::create_dir_all(&cfg.out)?;
    let mut csv = String::new();
    let header: Vec<String> = (1..=n).map(|k| format!("pc{k}")).collect();
    csv.push_str(&format!("{},label,bottle_id\n", header.join(",")));
    for (row, v) in scores.iter().zip(&vectors) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        csv.push_str(&format!("{},{},{}\n", cells.join(","), v.label, v.bottle_id));
    }
    let path = write(cfg, "pca_scores.csv", &csv)?;
    write(cfg, "pca.json", &serde_json::to_string_pretty(&model).map_err(enose::Error::from)?)?;
    for (k, r) in model.explained_variance_ratio.iter().enumerate() {
        println!("pc{}: {:.2}%", k + 1, 100.0 * r);
    }
    println!("cumulative variance: {:.2}%", 100.0 * model.cumulative_ratio());
    println!("scores in {}", path.display());
    Ok(())
}

fn cmd_validate(path: &Path) -> CliResult {
    let data = load_dataset(path)?;
    data.check_integrity()?;
    let counts: Vec<String> = data.manifest.class_counts.iter().map(|(l, n)| format!("{l}={n}")).collect();
    println!("{}: {} measurements valid ({})", path.display(), data.len(), counts.join(", "));
    Ok(())
}
