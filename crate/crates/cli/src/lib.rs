//! The `kforms` command line: dataset generation, training runs, vector
//! field export and gradient checks. Exit codes: 0 success, 1 runtime
//! failure, 2 bad input or configuration.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kforms::checkpoint::{load_classifier, save_classifier};
use kforms::data::{gen_paths, gen_surfaces, DataSource, DatasetBundle, TuDataset};
use kforms::gradcheck::{pipeline_suite, GradcheckConfig};
use kforms::model::{evaluate, kfold_cv, train, write_representations_csv, HeadKind, MetricRecord};
use kforms::{Dataset, Error, ReadoutKind, Result, Split};
use serde::Serialize;

use crate::config::{Preset, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "kforms", version, about = "Neural k-forms on embedded simplicial complexes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train on generated planar paths.
    TrainPaths(RunArgs),
    /// Train on generated surfaces in R^3.
    TrainSurfaces(RunArgs),
    /// Cross-validate on a TU dataset directory or dataset bundle.
    TrainGraphs(RunArgs),
    /// Sample the coefficient functions of a trained model on a grid.
    ExportField(ExportArgs),
    /// Finite-difference check of all gradients on seeded pipelines.
    Gradcheck(GradcheckArgs),
    /// Write a generated or parsed dataset as a JSON bundle.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReadoutArg {
    Sum,
    L1,
    L2,
}

impl From<ReadoutArg> for ReadoutKind {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Sum => ReadoutKind::ColumnSum,
            ReadoutArg::L1 => ReadoutKind::ColumnL1,
            ReadoutArg::L2 => ReadoutKind::ColumnL2,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for data generation, initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "kforms-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Subdivision steps per simplex edge.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    #[arg(long)]
    pub num_forms: Option<usize>,
    /// Form degree; chains are replaced by the standard basis of k-simplices
    /// when it differs from the data.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub dataset_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid points per axis.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Perturb the analytic gradients; every check must then fail.
    #[arg(long)]
    pub corrupt: bool,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DataKind {
    Paths,
    Surfaces,
    Graphs,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(value_enum)]
    pub kind: DataKind,
    #[command(flatten)]
    pub run: RunArgs,
}

impl RunArgs {
    /// Preset, then config file, then flags; validated.
    pub fn resolve(&self, preset: Preset) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(preset, self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.lr {
            t.lr = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.hidden_dim {
            t.hidden_dim = v;
        }
        if let Some(v) = self.steps {
            t.steps = v;
        }
        if let Some(v) = self.readout {
            t.readout = v.into();
        }
        if let Some(v) = self.num_forms {
            t.num_forms = v;
        }
        if let Some(v) = self.k {
            t.k = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        if let Some(v) = &self.dataset_dir {
            cfg.dataset_dir = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    config: &'a RunConfig,
}

fn set_threads(cfg: &RunConfig) {
    if let Some(n) = cfg.threads {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Replaces the chains by the standard basis of `k`-simplices when the
/// requested degree differs from the data.
fn chains_for_degree(data: Dataset, k: usize) -> Result<Dataset> {
    if data.chain_dim() == k {
        Ok(data)
    } else {
        data.with_standard_chains(k)
            .map_err(|e| Error::InvalidArgument(format!("cannot use {k}-forms on this data: {e}")))
    }
}

fn check_model_shape(cfg: &RunConfig, data: &Dataset) -> Result<()> {
    if cfg.train.head == HeadKind::None && cfg.train.num_forms != data.num_classes {
        return Err(Error::InvalidArgument(format!(
            "without a head num_forms ({}) must equal the number of classes ({})",
            cfg.train.num_forms, data.num_classes
        )));
    }
    if data.num_classes < 2 {
        return Err(Error::InvalidArgument("the dataset has fewer than two classes".into()));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct RunSummary {
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    val: Option<kforms::model::Evaluation>,
    test: Option<kforms::model::Evaluation>,
}

fn train_synthetic(name: &str, preset: Preset, args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(preset)?;
    let data = match preset {
        Preset::Paths => gen_paths(&cfg.paths)?,
        _ => gen_surfaces(&cfg.surfaces)?,
    };
    let data = chains_for_degree(data, cfg.train.k)?;
    check_model_shape(&cfg, &data)?;
    let split = Split::stratified(&data.labels(), cfg.val_fraction, cfg.test_fraction, cfg.train.seed)?;
    set_threads(&cfg);

    create_dir(&args.out)?;
    write_json(&args.out.join("config.json"), &Sidecar { command: name, config: &cfg })?;
    let outcome = train(&cfg.train, &data, &split)?;
    save_classifier(&args.out.join("model.ckpt"), &outcome.model)?;
    MetricRecord::write_jsonl(&outcome.history, &args.out.join("metrics.jsonl"))?;
    write_representations_csv(&outcome.model, &data, &args.out.join("representations.csv"))?;
    let eval = |idx: &[usize]| if idx.is_empty() { Ok(None) } else { evaluate(&outcome.model, &data, idx).map(Some) };
    let summary = RunSummary {
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        stopped_early: outcome.stopped_early,
        val: eval(&split.val)?,
        test: eval(&split.test)?,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    match &summary.test {
        Some(t) => println!("{name}: test accuracy {:.4} (best epoch {})", t.accuracy, outcome.best_epoch),
        None => println!("{name}: trained for {} epochs", outcome.epochs_run),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_graphs(cfg: &RunConfig) -> Result<(Dataset, DataSource)> {
    let dir = cfg.dataset_dir.as_ref().ok_or_else(|| {
        Error::InvalidArgument("train-graphs needs --dataset-dir or dataset_dir in the config".into())
    })?;
    if dir.is_file() {
        let bundle = DatasetBundle::load(dir)?;
        return Ok((bundle.dataset, bundle.source));
    }
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.clone()));
    }
    let tu = TuDataset::read_dir(dir)?;
    let data = tu.to_dataset(&cfg.features)?;
    Ok((data, DataSource::Tu { name: tu.name, features: cfg.features.clone() }))
}

fn train_graphs(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(Preset::Graphs)?;
    let (data, _) = load_graphs(&cfg)?;
    let data = chains_for_degree(data, cfg.train.k)?;
    check_model_shape(&cfg, &data)?;
    set_threads(&cfg);

    create_dir(&args.out)?;
    write_json(&args.out.join("config.json"), &Sidecar { command: "train-graphs", config: &cfg })?;
    let report = kfold_cv(&cfg.train, &data, cfg.folds)?;
    write_json(&args.out.join("cv_report.json"), &report)?;
    println!("train-graphs: {}-fold accuracy {:.4} +- {:.4}", cfg.folds, report.mean_accuracy, report.std_accuracy);
    Ok(ExitCode::SUCCESS)
}

fn export_field(args: &ExportArgs) -> Result<ExitCode> {
    if args.grid == 0 || !args.lo.is_finite() || !args.hi.is_finite() || args.lo > args.hi {
        return Err(Error::InvalidArgument("grid must be positive and lo <= hi finite".into()));
    }
    let model = load_classifier(&args.checkpoint)?;
    let form = &model.form;
    let n = form.n();
    let rows = u32::try_from(n).ok().and_then(|n| args.grid.checked_pow(n)).filter(|&r| r <= 10_000_000);
    let rows = rows.ok_or_else(|| Error::InvalidArgument(format!("{}^{n} grid points is too many", args.grid)))?;
    let step = if args.grid > 1 { (args.hi - args.lo) / (args.grid - 1) as f64 } else { 0.0 };

    let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    for j in 0..form.num_forms() {
        header.extend((0..form.table().len()).map(|r| format!("f{}_{}", j + 1, form.table().label(r))));
    }
    let mut text = header.join(",") + "\n";
    let mut point = vec![0.0; n];
    for row in 0..rows {
        let mut idx = row;
        for d in (0..n).rev() {
            point[d] = args.lo + step * (idx % args.grid) as f64;
            idx /= args.grid;
        }
        let values = form.psi().forward(&point)?;
        let cells: Vec<String> = point.iter().chain(&values).map(f64::to_string).collect();
        writeln!(text, "{}", cells.join(",")).expect("string write");
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(&args.out, text.as_bytes())?;
    let sidecar = serde_json::json!({
        "command": "export-field",
        "checkpoint": args.checkpoint,
        "grid": args.grid,
        "lo": args.lo,
        "hi": args.hi,
    });
    write_json(&sidecar_path(&args.out), &sidecar)?;
    println!("export-field: {rows} rows x {} columns", header.len());
    Ok(ExitCode::SUCCESS)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    out.with_file_name(name)
}

fn gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    if args.instances == 0 {
        return Err(Error::InvalidArgument("instances must be positive".into()));
    }
    let reports = pipeline_suite(args.seed, args.instances, args.corrupt, &GradcheckConfig::default())?;
    for r in &reports {
        println!(
            "[{}] {}: {} parameters, max relative error {:.2e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.num_params,
            r.max_rel_error
        );
    }
    if let Some(out) = &args.out {
        write_json(out, &reports)?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("gradcheck: {}/{} passed", reports.len() - failed, reports.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn gen_data(args: &GenDataArgs) -> Result<ExitCode> {
    let (preset, name) = match args.kind {
        DataKind::Paths => (Preset::Paths, "paths"),
        DataKind::Surfaces => (Preset::Surfaces, "surfaces"),
        DataKind::Graphs => (Preset::Graphs, "graphs"),
    };
    let cfg = args.run.resolve(preset)?;
    let (data, source) = match args.kind {
        DataKind::Paths => (gen_paths(&cfg.paths)?, DataSource::Paths(cfg.paths.clone())),
        DataKind::Surfaces => (gen_surfaces(&cfg.surfaces)?, DataSource::Surfaces(cfg.surfaces.clone())),
        DataKind::Graphs => load_graphs(&cfg)?,
    };
    let out = &args.run.out;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    DatasetBundle::new(source, data).save(out)?;
    write_json(&sidecar_path(out), &Sidecar { command: "gen-data", config: &cfg })?;
    println!("gen-data: wrote {name} bundle to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::TrainPaths(a) => train_synthetic("train-paths", Preset::Paths, a),
        Command::TrainSurfaces(a) => train_synthetic("train-surfaces", Preset::Surfaces, a),
        Command::TrainGraphs(a) => train_graphs(a),
        Command::ExportField(a) => export_field(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::GenData(a) => gen_data(a),
    }
}

/// Runs the command and maps errors to exit codes 1 and 2.
pub fn main_exit(cli: &Cli) -> ExitCode {
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
