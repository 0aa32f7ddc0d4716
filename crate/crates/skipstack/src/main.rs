use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skipstack::config::{ExperimentConfig, Overrides};
use skipstack::experiments;
use skipstack::formats::{OutputDir, TableFormat};
use skipstack::manifest::write_manifest;
use skipstack::svg::PlotKind;
use skipstack::{CliError, Result};

/// Multi-skip feature stacking experiments.
#[derive(Debug, Parser)]
#[command(name = "skipstack", version)]
struct Cli {
    /// JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SKIPSTACK_THREADS")]
    threads: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum)]
    format: Option<TableFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a latent model and write model.json.
    ModelGen,
    /// Condition-number coverage of the single-skip and stacked designs.
    SimCondition,
    /// Tabulate the sandwich bounds and check the corollary's growth.
    SimBounds,
    /// Monte-Carlo check of the matrix Bernstein bound.
    BernsteinCheck,
    /// Normalized singular values of stacked feature matrices, one curve per level.
    Spectrum {
        #[arg(long)]
        svg: bool,
        /// Also write each stacked matrix in the binary container.
        #[arg(long)]
        matrices: bool,
    },
    /// Generate the synthetic multi-speed action dataset.
    DatasetGen,
    /// Fit the codec on the training split and encode every sample.
    Encode {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Also write each sample's descriptor set.
        #[arg(long)]
        descriptors: bool,
    },
    /// Train the one-vs-all classifier on encoded training samples.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        encodings: Option<PathBuf>,
    },
    /// Evaluate a trained classifier on the test split.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        encodings: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Single-level and stacked accuracy grid, end to end.
    RunRecognition {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Feature-count cost of each stacked schedule.
    CostReport,
    /// Render a CSV written by another command as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ModelGen => "model-gen",
            Command::SimCondition => "sim-condition",
            Command::SimBounds => "sim-bounds",
            Command::BernsteinCheck => "bernstein-check",
            Command::Spectrum { .. } => "spectrum",
            Command::DatasetGen => "dataset-gen",
            Command::Encode { .. } => "encode",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::RunRecognition { .. } => "run-recognition",
            Command::CostReport => "cost-report",
            Command::Plot { .. } => "plot",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides { seed: cli.seed, out: cli.out, threads: cli.threads, format: cli.format };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut out = OutputDir::create(cfg.out_dir())?;
    let name = cli.command.name();
    log::info!("{name}: seed {}, output {}", cfg.seed(), out.dir().display());
    match &cli.command {
        Command::ModelGen => drop(experiments::model_gen(&cfg, &mut out)?),
        Command::SimCondition => drop(experiments::sim_condition(&cfg, &mut out)?),
        Command::SimBounds => drop(experiments::sim_bounds(&cfg, &mut out)?),
        Command::BernsteinCheck => drop(experiments::bernstein_check(&cfg, &mut out)?),
        Command::Spectrum { svg, matrices } => drop(experiments::spectrum(&cfg, &mut out, *svg, *matrices)?),
        Command::DatasetGen => drop(experiments::dataset_gen(&cfg, &mut out)?),
        Command::Encode { dataset, descriptors } => drop(experiments::encode(&cfg, &mut out, dataset.as_deref(), *descriptors)?),
        Command::Train { dataset, encodings } => drop(experiments::train(&cfg, &mut out, dataset.as_deref(), encodings.as_deref())?),
        Command::Evaluate { dataset, encodings, classifier } => {
            let report = experiments::evaluate(&cfg, &mut out, dataset.as_deref(), encodings.as_deref(), classifier.as_deref())?;
            println!("MAcc {:.2}  MAP {:.2}", report.macc, report.map);
        }
        Command::RunRecognition { dataset } => {
            for row in experiments::run_recognition(&cfg, &mut out, dataset.as_deref())? {
                println!("{:<8} MAcc {:6.2}  MAP {:6.2}  cost {:.3}", row.label, row.macc, row.map, row.relative_cost);
            }
        }
        Command::CostReport => {
            for r in experiments::cost_report(&cfg, &mut out)? {
                println!("{:<8} relative cost {:.4}", r.label, r.total_relative);
            }
        }
        Command::Plot { input, kind } => drop(experiments::plot(&mut out, input, *kind)?),
    }
    write_manifest(&mut out, name, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
