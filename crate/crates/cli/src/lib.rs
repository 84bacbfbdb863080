//! Command-line runner for the `rvfield` experiments.
//!
//! Every command reads a TOML config, writes CSV/JSON outputs into the
//! output directory, and finishes with `manifest.json` echoing the resolved
//! config, the model file and the crate version. Reruns with the same config
//! and seed produce byte-identical files regardless of `--threads`.

mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

pub use commands::Command;
pub use config::Config;
pub use error::CliError;

use commands::{Model, Sink};

#[derive(Debug, Parser)]
#[command(
    name = "rvfield",
    version,
    about = "Extremal-cluster and alignment-score experiments"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 = one per core. Overrides `threads` from the config.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Runs the parsed command; returns the names of the files written.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Config("a seed is required (config `seed` or --seed)".into()))?;
    let (model, model_text) = Model::load(cli.command, &cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut sink = Sink::new(&cli.out)?;
    pool.install(|| commands::dispatch(cli.command, &cfg, seed, &model, &mut sink))?;

    // threads do not affect results, so they stay out of the manifest
    let mut resolved = cfg.clone();
    resolved.threads = 0;
    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": serde_json::to_value(&resolved).expect("config serializes"),
        "model": model_text,
        "outputs": sink.written.clone(),
    });
    let mut body = serde_json::to_string_pretty(&manifest).expect("json serializes");
    body.push('\n');
    sink.text("manifest.json", &body)?;
    Ok(sink.written)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("rvfield: {e}");
            e.exit_code()
        }
    }
}
