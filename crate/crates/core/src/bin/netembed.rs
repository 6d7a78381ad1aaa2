use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use netembed::harness::{run, RunOptions, Scenario, Subcommand};

/// Numerical verification of glued geodesic simplex maps over embedded nets.
#[derive(Parser, Debug)]
#[command(name = "netembed", version)]
struct Cli {
    /// audit, phi-verify, net-check, degree, directions or all
    #[arg(value_parser = parse_subcommand)]
    subcommand: Subcommand,

    /// Scenario file
    #[arg(long)]
    config: PathBuf,

    /// Worker threads (default: all cores)
    #[arg(long, env = "NETEMBED_THREADS")]
    threads: Option<usize>,

    /// Output directory (overrides the scenario's `output.dir`)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Sampling seed (overrides the scenario's `samples.seed`)
    #[arg(long)]
    seed: Option<u64>,

    /// Report wall_ms as 0 so repeated runs give identical JSON
    #[arg(long)]
    no_timing: bool,
}

fn parse_subcommand(s: &str) -> Result<Subcommand, String> {
    s.parse().map_err(|e: netembed::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("netembed: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let scenario = match Scenario::load(&cli.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("netembed: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { seed: cli.seed, timing: !cli.no_timing };
    let report = match run(cli.subcommand, &scenario, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("netembed: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", report.summary());
    let dir = cli.out.or_else(|| scenario.output.clone()).unwrap_or_else(|| PathBuf::from("netembed-out"));
    match report.write(&dir) {
        Ok(files) => println!("wrote {} files to {}", files.len(), dir.display()),
        Err(e) => {
            eprintln!("netembed: writing reports: {e}");
            return ExitCode::from(2);
        }
    }
    if report.hypothesis_violated {
        println!("hypothesis violated: the net embedding is not isometric");
    }
    if report.passed() {
        println!("PASS {} {}", scenario.name, report.subcommand);
        ExitCode::SUCCESS
    } else {
        println!("FAIL {} {}", scenario.name, report.subcommand);
        ExitCode::from(1)
    }
}
