use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qgibbs::study;
use qgibbs::Manifest;

/// Environment variable giving the default worker thread count.
const THREADS_ENV: &str = "QGIBBS_THREADS";

#[derive(Parser)]
#[command(name = "qgibbs", version, about = "Quenched Gibbs-state experiments on random point configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a manifest.
    Run {
        manifest: PathBuf,
        /// Master seed, replacing the manifest's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, replacing the manifest's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: $QGIBBS_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Dotted manifest override, e.g. `sampler.sweeps=5000`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn run(
    manifest: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    mut overrides: Vec<String>,
) -> Result<(), String> {
    if let Some(n) = thread_count(threads)? {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    let m = Manifest::load(&manifest, &overrides).map_err(|e| format!("{}: {e}", manifest.display()))?;
    let dir = out.unwrap_or_else(|| m.output.clone());
    let outcome = study::run(&m, &dir).map_err(|e| e.to_string())?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            manifest,
            seed,
            out,
            threads,
            overrides,
        } => run(manifest, seed, out, threads, overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
