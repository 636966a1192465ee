//! `utikit`: run the ultrasound tongue imaging pipeline from one config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use uti_core::eval::{read_jsonl, GoldRecord, Prediction};
use uti_core::ingest::fixtures::{generate_fixture_set, BlobParams};
use utikit::config::BackendKind;
use utikit::stages::write_eval_outputs;
use utikit::{run_stage, PipelineConfig, Stage, StageOutcome, StageStatus};

#[derive(Parser)]
#[command(name = "utikit", version, about = "Ultrasound tongue imaging data pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Pipeline config file (TOML).
    #[arg(long, default_value = "utikit.toml")]
    config: PathBuf,
    /// Override the seed of every stage that runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the gateway backend of the forge and eval stages.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic moving-blob clip set with a ready-to-run config.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cluster frames and select keyframes.
    Ingest(Overrides),
    /// Track tongue regions and build the knowledge store.
    Trajectory(Overrides),
    /// Generate the dialogue dataset.
    Forge {
        #[command(subcommand)]
        action: Option<ForgeAction>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build fused multimodal input sequences.
    Fuse(Overrides),
    /// Score predictions against gold records.
    Eval(EvalArgs),
    /// Run every stage in order, skipping those that are up to date.
    Pipeline(Overrides),
    /// Run a single named stage.
    Run {
        #[arg(value_enum)]
        stage: Stage,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Subcommand)]
enum ForgeAction {
    /// Generate the dialogue dataset.
    Generate(Overrides),
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Predictions file (JSONL); scores these files instead of the pipeline outputs.
    #[arg(long, requires_all = ["gold", "out"])]
    predictions: Option<PathBuf>,
    /// Gold file (JSONL).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Output directory for the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(o: &Overrides) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&o.config)?;
    if let Some(seed) = o.seed {
        config.ingest.seed = seed;
        config.forge.seed = seed;
        config.fusion.seed = seed;
    }
    if let Some(backend) = o.backend {
        config.forge.gateway.backend = backend;
        config.eval.judge_gateway.backend = backend;
    }
    config.validate()?;
    Ok(config)
}

fn report(outcome: &StageOutcome) {
    let status = match outcome.status {
        StageStatus::Ran => format!("ran in {} ms", outcome.entry.duration_ms),
        StageStatus::Skipped => "up to date, skipped".to_string(),
    };
    println!("{:<10} {status}  outputs {}", outcome.stage.as_str(), &outcome.entry.outputs_hash[..16]);
}

fn unparseable_exit(count: usize) -> ExitCode {
    if count > 0 {
        eprintln!("error: {count} response(s) carry no readable diagnosis");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn stage(stage: Stage, o: &Overrides) -> Result<ExitCode> {
    let outcome = run_stage(stage, &load_config(o)?)?;
    report(&outcome);
    Ok(unparseable_exit(outcome.unparseable))
}

fn fixtures(out: &Path, count: usize, seed: u64) -> Result<ExitCode> {
    let set = generate_fixture_set(out, count, seed, &BlobParams::default())
        .with_context(|| format!("generating fixtures in {}", out.display()))?;
    let mut config = PipelineConfig::new("manifest.jsonl", "work");
    config.ingest.seed = seed;
    config.forge.seed = seed;
    config.fusion.seed = seed;
    let path = out.join("utikit.toml");
    std::fs::write(&path, config.to_toml_string()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} clips, manifest {}, config {}", set.entries.len(), set.manifest.display(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(args: &EvalArgs) -> Result<ExitCode> {
    let (Some(pred), Some(gold), Some(out)) = (&args.predictions, &args.gold, &args.out) else {
        return stage(Stage::Eval, &args.overrides);
    };
    let config = if args.overrides.config.exists() {
        load_config(&args.overrides)?
    } else {
        PipelineConfig::new("", "")
    };
    let predictions: Vec<Prediction> = read_jsonl(pred).with_context(|| format!("reading {}", pred.display()))?;
    let gold: Vec<GoldRecord> = read_jsonl(gold).with_context(|| format!("reading {}", gold.display()))?;
    let unparseable = write_eval_outputs(&predictions, &gold, &config, out)?;
    println!("wrote {}", out.join("report.json").display());
    Ok(unparseable_exit(unparseable))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fixtures { out, count, seed } => fixtures(&out, count, seed),
        Command::Ingest(o) => stage(Stage::Ingest, &o),
        Command::Trajectory(o) => stage(Stage::Trajectory, &o),
        Command::Forge { action: Some(ForgeAction::Generate(o)), .. } => stage(Stage::Forge, &o),
        Command::Forge { action: None, overrides } => stage(Stage::Forge, &overrides),
        Command::Fuse(o) => stage(Stage::Fuse, &o),
        Command::Eval(args) => eval(&args),
        Command::Run { stage: s, overrides } => stage(s, &overrides),
        Command::Pipeline(o) => {
            let config = load_config(&o)?;
            let mut unparseable = 0;
            for s in Stage::ALL {
                let outcome = run_stage(s, &config)?;
                report(&outcome);
                unparseable += outcome.unparseable;
            }
            Ok(unparseable_exit(unparseable))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
