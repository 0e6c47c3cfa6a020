use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use capfat::config::ExperimentConfig;
use capfat::run::run;

/// Run a capacity, fatness, perfectness, Hardy, Maz'ya, cover or
/// equivalence experiment described by a TOML config.
#[derive(Parser, Debug)]
#[command(name = "capfat", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Number of ladder levels to use, extending by halving if needed.
    #[arg(long)]
    refinements: Option<usize>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_FIXTURE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("usage: capfat --config <path> [--out <dir>] [--seed <int>] [--workers <int>] [--refinements <n>]");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.refinements {
        if let Err(e) = cfg.with_refinements(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    if let Some(n) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let out = args.out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    match run(&cfg, &out) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: some solves did not converge");
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_fixture_error() {
                ExitCode::from(EXIT_FIXTURE)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
