//! `affectlab`: extraction, rendering, evaluation and synthetic data from
//! the command line.

mod cache;
mod commands;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use provider::ProviderConfig;

#[derive(Parser)]
#[command(
    name = "affectlab",
    version,
    about = "Multi-modal bio-signal features and affect classification"
)]
struct Cli {
    /// More log output (repeatable); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute feature blocks for every trial of one or more manifests.
    Extract(ExtractArgs),
    /// Write topography and spectrogram PNGs.
    Render(RenderArgs),
    /// Run an experiment config and write the report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset with planted effects.
    Synth(SynthArgs),
    /// Answer embedding exchange jobs with the stub (debugging aid).
    EmbedStubServe(ServeArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Dataset manifest (JSON); repeat for several datasets.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Output directory; one subdirectory per dataset.
    #[arg(long)]
    pub out: PathBuf,
    /// Run config (JSON): feature_sets, extraction, missing_policy, provider.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated feature sets, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Embedding provider: stub[:SEED], echo[:DIM] or sidecar:DIR.
    #[arg(long)]
    pub provider: Option<ProviderConfig>,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory, laid out as <dataset>/<subject>/<trial>_<kind>.png.
    #[arg(long)]
    pub out: PathBuf,
    /// Image kinds: topo, topo-per-second, cardiac, gsr. Default: topo, cardiac, gsr.
    #[arg(long = "kind", value_delimiter = ',')]
    pub kinds: Vec<commands::render::Kind>,
    /// Only these subjects.
    #[arg(long = "subject")]
    pub subjects: Vec<String>,
    /// Only these trial ids.
    #[arg(long = "trial")]
    pub trials: Vec<String>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset manifest (JSON); repeat for several datasets.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Output directory for the report, provenance and saved models.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Embedding provider: stub[:SEED], echo[:DIM] or sidecar:DIR.
    #[arg(long)]
    pub provider: Option<ProviderConfig>,
    /// Also fit on all training data and save the models.
    #[arg(long)]
    pub save_model: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory; manifest.json is written at its top.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator config (JSON); defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Exchange directory shared with the client.
    #[arg(long)]
    pub root: PathBuf,
    /// Answer with zero vectors instead of stub embeddings.
    #[arg(long)]
    pub echo: bool,
    /// Stub seed; must match the client's for identical embeddings.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Serve what is pending and exit.
    #[arg(long)]
    pub once: bool,
    /// Polling interval in milliseconds.
    #[arg(long, default_value_t = 50)]
    pub poll_ms: u64,
}

/// Problems with the experiment description itself; exit code 2.
#[derive(Debug)]
pub struct SpecError(pub String);

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

fn is_spec_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<SpecError>()
            || c.downcast_ref::<affectlab::Error>().is_some_and(|e| {
                matches!(
                    e.root(),
                    affectlab::Error::InvalidExperiment(_) | affectlab::Error::FeatureSetMismatch { .. }
                )
            })
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Extract(a) => commands::extract::run(&a),
        Command::Render(a) => commands::render::run(&a),
        Command::Evaluate(a) => commands::evaluate::run(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::EmbedStubServe(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_spec_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
