use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Simulates a two-observer Bell experiment and writes its reports.
#[derive(Parser, Debug)]
#[command(name = "belltrace", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the trials per setting pair.
    #[arg(long)]
    n: Option<u64>,
    /// More logging; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match belltrace::run(&args.config, &args.out, args.seed, args.n) {
        Ok(summary) => {
            if let Some(c) = &summary.estimates.chsh {
                println!("S = {:.4} ± {:.4} (model {:.4})", c.s_estimate, c.se, c.s_analytic);
            }
            println!("stage table: {}", summary.stage_table.pattern);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
