use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sentiscope::pipeline::{BackendKind, Config, Overrides, Pipeline, SampleMode, Stage};
use sentiscope::Result;

/// Spatio-temporal sentiment statistics for geotagged microblog archives.
#[derive(Parser)]
#[command(name = "sentiscope", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, short, global = true, default_value = "sentiscope.toml")]
    config: PathBuf,

    /// Override `run.dir`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    /// Override `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override `classifier.backend` (baseline or external).
    #[arg(long, global = true)]
    backend: Option<BackendKind>,

    /// Override `classifier.adapter` (host:port).
    #[arg(long, global = true)]
    adapter: Option<String>,

    /// Override `network.resolution`.
    #[arg(long, global = true)]
    resolution: Option<f64>,

    /// Process records on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read the corpus, apply the time window and repair truncated retweets.
    Ingest,
    /// Resolve posts to regions.
    Geocode,
    /// Clean post text for classification.
    Clean,
    /// Split the annotated set, train the baseline and report held-out metrics.
    Train,
    /// Label every cleaned post.
    Classify,
    /// Pick posts for manual annotation.
    AnnotateSample {
        /// Number of posts; overrides `sample.k`.
        #[arg(long, short)]
        k: Option<usize>,
        /// `margin` (least certain first) or `random`; overrides `sample.mode`.
        #[arg(long)]
        mode: Option<SampleMode>,
    },
    /// Yearly user statistics, sentiment series and survey comparison.
    Aggregate,
    /// Interaction network, communities and the region association test.
    Network,
    /// Write report.md from the stage outputs.
    Report,
    /// Run every stage in order.
    All,
    /// Write a synthetic demo dataset with a matching config.
    Demo {
        /// Output directory.
        dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        records: usize,
    },
}

fn stage_of(c: &Command) -> Option<Stage> {
    Some(match c {
        Command::Ingest => Stage::Ingest,
        Command::Geocode => Stage::Geocode,
        Command::Clean => Stage::Clean,
        Command::Train => Stage::Train,
        Command::Classify => Stage::Classify,
        Command::AnnotateSample { .. } => Stage::AnnotateSample,
        Command::Aggregate => Stage::Aggregate,
        Command::Network => Stage::Network,
        Command::Report => Stage::Report,
        Command::All | Command::Demo { .. } => return None,
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Demo { dir, records } = &cli.command {
        let seed = cli.global.seed.unwrap_or(20221231);
        sentiscope::synth::write_demo_dataset(dir, *records, seed)?;
        println!("wrote demo dataset to {}", dir.display());
        return Ok(());
    }

    let g = &cli.global;
    let mut cfg = Config::load(&g.config)?;
    cfg.apply(&Overrides {
        run_dir: g.run_dir.clone(),
        seed: g.seed,
        backend: g.backend,
        adapter: g.adapter.clone(),
        resolution: g.resolution,
        parallel: g.sequential.then_some(false),
    })?;
    if let Command::AnnotateSample { k, mode } = &cli.command {
        cfg.sample.k = k.unwrap_or(cfg.sample.k);
        cfg.sample.mode = mode.unwrap_or(cfg.sample.mode);
    }
    let pipeline = Pipeline::new(cfg);
    match stage_of(&cli.command) {
        Some(stage) => {
            let rec = pipeline.run(stage)?;
            for (k, v) in &rec.counts {
                log::info!("{stage}: {k} = {v}");
            }
        }
        None => pipeline.run_all()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
