use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ferbench::config::RunConfig;
use ferbench::eval::PerformanceTensor;
use ferbench::metrics::build_similarity_report;
use ferbench::pipeline::{self, RunPaths, Selection, Stage, StageOutcome};
use ferbench::report::{render_figures, write_report_tables};
use ferbench::Error;

#[derive(Parser)]
#[command(name = "ferbench", version, about = "Cross-dataset facial expression benchmark")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only these datasets (repeatable).
    #[arg(long = "dataset", global = true)]
    datasets: Vec<String>,
    /// Only these architectures (repeatable).
    #[arg(long = "arch", global = true)]
    archs: Vec<String>,
    /// Only these folds (repeatable).
    #[arg(long = "fold", global = true)]
    folds: Vec<usize>,
    /// Concurrent jobs for preprocess, train and evaluate.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print planned jobs without running them.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Args)]
struct TensorInput {
    /// Use this performance tensor CSV instead of the run's results.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Output directory (with --tensor).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Raw dataset layout to manifest.
    Ingest,
    /// Expand video clips into sampled frames.
    SampleFrames,
    /// Map raw labels onto the seven canonical classes.
    UnifyClasses,
    /// Face, landmark, pose, age and gender estimates.
    Annotate,
    AgeGroups,
    Exclude,
    /// Align, crop and save processed faces.
    Preprocess,
    Stats,
    Split,
    Train,
    Evaluate,
    Metrics(TensorInput),
    Report(TensorInput),
    /// Every stage in order.
    RunAll,
    /// Write the synthetic desk-scale datasets and a config for them.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn selection(common: &Common) -> Selection {
    Selection {
        datasets: common.datasets.clone(),
        architectures: common.archs.clone(),
        folds: common.folds.clone(),
        dry_run: common.dry_run,
    }
}

fn print_outcome(stage: &str, out: &StageOutcome) {
    for job in &out.planned {
        println!("plan: {job}");
    }
    for note in &out.notes {
        println!("{stage}: {note}");
    }
    if !out.written.is_empty() {
        println!("{stage}: wrote {} file(s)", out.written.len());
    }
}

fn from_tensor(stage: Stage, tensor: &Path, out: &Path) -> Result<StageOutcome, Error> {
    let tensor = PerformanceTensor::read_csv(tensor)?;
    if tensor.is_empty() {
        return Err(Error::Config("tensor has no entries".into()));
    }
    if stage == Stage::Metrics {
        return pipeline::write_metrics(&tensor, out);
    }
    let report = build_similarity_report(&tensor);
    let mut outcome = StageOutcome {
        written: write_report_tables(&report, out)?,
        ..Default::default()
    };
    let figs = render_figures(None, Some(&report), &out.join("figures"))?;
    outcome.written.extend(figs.written);
    outcome.notes.extend(figs.notices);
    Ok(outcome)
}

fn synth(out: &Path, seed: u64) -> Result<StageOutcome, Error> {
    let mut cfg = pipeline::synthetic_run(out, seed)?;
    // The config sits in `out`, and relative paths resolve against its directory.
    let relative = |p: &Path| p.strip_prefix(out).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
    cfg.output_root = relative(&cfg.output_root);
    for ds in cfg.datasets.values_mut() {
        ds.root = relative(&ds.root);
    }
    let path = out.join("ferbench.toml");
    ferbench::fsutil::write_string_atomic(&path, &cfg.to_toml())?;
    Ok(StageOutcome {
        notes: vec![format!("config written to {}", path.display())],
        written: vec![path],
        ..Default::default()
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = &cli.common;
    let stage = match &cli.command {
        Command::Ingest => Stage::Ingest,
        Command::SampleFrames => Stage::SampleFrames,
        Command::UnifyClasses => Stage::UnifyClasses,
        Command::Annotate => Stage::Annotate,
        Command::AgeGroups => Stage::AgeGroups,
        Command::Exclude => Stage::Exclude,
        Command::Preprocess => Stage::Preprocess,
        Command::Stats => Stage::Stats,
        Command::Split => Stage::Split,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Metrics(t) | Command::Report(t) => {
            let stage = if matches!(cli.command, Command::Metrics(_)) {
                Stage::Metrics
            } else {
                Stage::Report
            };
            if let Some(tensor) = &t.tensor {
                let out = match (&t.out, &common.config) {
                    (Some(o), _) => o.clone(),
                    (None, Some(_)) => {
                        let paths = RunPaths::new(&load_config(common)?.output_root);
                        if stage == Stage::Metrics {
                            paths.metrics()
                        } else {
                            paths.report()
                        }
                    }
                    (None, None) => return Err(Error::Config("--tensor needs --out or --config".into())),
                };
                print_outcome(stage.as_str(), &from_tensor(stage, tensor, &out)?);
                return Ok(());
            }
            stage
        }
        Command::RunAll => {
            let cfg = load_config(common)?;
            for (stage, out) in pipeline::run_all(&cfg, &selection(common))? {
                print_outcome(stage.as_str(), &out);
            }
            return Ok(());
        }
        Command::Synth { out } => {
            print_outcome("synth", &synth(out, common.seed.unwrap_or(0))?);
            return Ok(());
        }
    };
    let cfg = load_config(common)?;
    let out = pipeline::run_stage(stage, &cfg, &selection(common))?;
    print_outcome(stage.as_str(), &out);
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
