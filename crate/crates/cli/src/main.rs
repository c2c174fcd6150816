mod commands;
mod config;
mod failure;
mod output;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::layer::SubscriberExt;
use tracing_subscriber::util::SubscriberInitExt;
use tracing_subscriber::{filter::LevelFilter, fmt, Layer};

use crate::config::PipelineConfig;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "autocut", version, about = "Automatic ad-video editing pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Pipeline configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Validate inputs and print the plan without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Overrides the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured catalog directory.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a catalog and write a normalized copy.
    Ingest(commands::IngestArgs),
    /// Apply the curation rules.
    Filter,
    /// Dataset statistics.
    Stats,
    /// Train a residual quantizer for one modality.
    TrainQuantizer(commands::TrainArgs),
    /// Tokenize every embedding of one modality.
    Encode(commands::EncodeArgs),
    /// Build or query the retrieval indexes.
    #[command(subcommand)]
    Index(commands::IndexCommand),
    /// Continuity segmentation of every source video.
    Segment(commands::SegmentArgs),
    /// Serialize the alignment corpus.
    BuildAlign,
    /// Build fine-tuning samples.
    BuildSft(commands::SftArgs),
    /// Plan and assemble edits with the baseline predictor.
    Edit(commands::EditArgs),
    /// Emit subtitles and render commands for an existing edit decision list.
    RenderScript(commands::RenderArgs),
    /// Score predictions with native and judged metrics.
    Evaluate(commands::EvaluateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Filter => "filter",
            Command::Stats => "stats",
            Command::TrainQuantizer(_) => "train-quantizer",
            Command::Encode(_) => "encode",
            Command::Index(commands::IndexCommand::Build(_)) => "index-build",
            Command::Index(commands::IndexCommand::Query(_)) => "index-query",
            Command::Segment(_) => "segment",
            Command::BuildAlign => "build-align",
            Command::BuildSft(_) => "build-sft",
            Command::Edit(_) => "edit",
            Command::RenderScript(_) => "render-script",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<PipelineConfig, Failure> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("--config <path> is required"))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
        cfg.video_quantizer.seed = seed;
        cfg.audio_quantizer.seed = seed;
    }
    if let Some(catalog) = &global.catalog {
        cfg.paths.catalog = catalog.clone();
    }
    if let Some(out) = &global.out {
        if cfg.paths.models.starts_with(&cfg.paths.out) {
            cfg.paths.models = out.join(cfg.paths.models.strip_prefix(&cfg.paths.out).expect("prefix"));
        }
        if cfg.paths.indexes.starts_with(&cfg.paths.out) {
            cfg.paths.indexes = out.join(cfg.paths.indexes.strip_prefix(&cfg.paths.out).expect("prefix"));
        }
        cfg.paths.out = out.clone();
    }
    Ok(cfg)
}

/// JSON events to stderr, and to `<out>/logs/<subcommand>.jsonl` on real runs.
fn init_logging(level: LevelFilter, log_file: Option<PathBuf>) {
    let stderr = fmt::layer().json().with_writer(std::io::stderr).with_filter(level);
    let file = log_file.and_then(|path| {
        std::fs::create_dir_all(path.parent()?).ok()?;
        let f = File::create(&path).ok()?;
        Some(fmt::layer().json().with_ansi(false).with_writer(Mutex::new(f)).with_filter(level))
    });
    let _ = tracing_subscriber::registry().with(stderr).with(file).try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = load_config(&cli.global).and_then(|cfg| {
        let log_file = (!cli.global.dry_run).then(|| cfg.paths.out.join("logs").join(format!("{name}.jsonl")));
        init_logging(cli.global.log_level, log_file);
        let ctx = commands::Context {
            cfg,
            dry_run: cli.global.dry_run,
            subcommand: name,
        };
        commands::run(&ctx, cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            tracing::error!(kind = ?failure.kind, message = %failure.message, "{name} failed");
            eprintln!("{}", failure.record(name));
            ExitCode::from(failure.code() as u8)
        }
    }
}
