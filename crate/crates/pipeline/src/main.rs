use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lltext_pipeline::config::Precision;
use lltext_pipeline::{PipelineError, RunConfig};

/// Batch toolkit for scene-text-aware low-light image enhancement.
#[derive(Parser)]
#[command(name = "toolkit", version, about)]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML). Environment variables prefixed LLTEXT_
    /// override individual keys (LLTEXT_TRAIN__EPOCHS=5).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Task {
    /// Train the enhancement network.
    TrainEnhance(Common),
    /// Train the low-light synthesis curve model.
    TrainSynth(Common),
    /// Enhance a dataset split with a trained checkpoint.
    Enhance(Common),
    /// Synthesize low-light images from long exposures.
    Synthesize(Common),
    /// Export copy-paste-augmented samples for inspection.
    Augment(Common),
    /// Score an enhanced tree against ground truth.
    Evaluate(Common),
}

fn load_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run() -> Result<(), PipelineError> {
    let cli = Cli::parse();
    match &cli.task {
        Task::TrainEnhance(common) => {
            let cfg = load_config(common)?;
            let summary = lltext_pipeline::train_enhancer(&cfg)?;
            println!(
                "trained {} step(s); total loss {} -> {}; checkpoint {}; log {}",
                summary.steps,
                summary.first_total,
                summary.final_total,
                summary.checkpoint.display(),
                summary.log.display()
            );
        }
        Task::TrainSynth(common) => {
            let cfg = load_config(common)?;
            let summary = lltext_pipeline::train_synth(&cfg)?;
            println!(
                "trained {} step(s); total loss {} -> {}; checkpoint {}; log {}",
                summary.steps,
                summary.first_total,
                summary.final_total,
                summary.checkpoint.display(),
                summary.log.display()
            );
        }
        Task::Enhance(common) => {
            let cfg = load_config(common)?;
            let summary = dispatch_enhance(&cfg)?;
            println!("enhanced {} image(s) into {}", summary.0, summary.1.display());
        }
        Task::Synthesize(common) => {
            let cfg = load_config(common)?;
            let summary = dispatch_synthesize(&cfg)?;
            println!("synthesized {} image(s) into {}", summary.0, summary.1.display());
        }
        Task::Augment(common) => {
            let cfg = load_config(common)?;
            let summary = lltext_pipeline::augment::augment_command(&cfg)?;
            println!(
                "augmented {} sample(s), {} paste(s), into {}",
                summary.samples,
                summary.total_pasted,
                summary.out_dir.display()
            );
        }
        Task::Evaluate(common) => {
            let cfg = load_config(common)?;
            let summary = lltext_pipeline::evaluate::evaluate_command::<f64>(&cfg)?;
            print!("{}", summary.report.table());
            println!(
                "report: {} / {}",
                summary.report_json.display(),
                summary.report_table.display()
            );
        }
    }
    Ok(())
}

fn dispatch_enhance(cfg: &RunConfig) -> Result<(usize, PathBuf), PipelineError> {
    let s = match cfg.precision {
        Precision::F32 => lltext_pipeline::infer::enhance_command::<f32>(cfg)?,
        Precision::F64 => lltext_pipeline::infer::enhance_command::<f64>(cfg)?,
    };
    Ok((s.outputs.len(), s.out_dir))
}

fn dispatch_synthesize(cfg: &RunConfig) -> Result<(usize, PathBuf), PipelineError> {
    let s = match cfg.precision {
        Precision::F32 => lltext_pipeline::infer::synthesize_command::<f32>(cfg)?,
        Precision::F64 => lltext_pipeline::infer::synthesize_command::<f64>(cfg)?,
    };
    Ok((s.outputs.len(), s.out_dir))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
