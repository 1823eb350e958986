use std::path::PathBuf;
use std::process::ExitCode;

use bar_core::frontend::{cmd_load, cmd_scan, cmd_tensor, cmd_validate, exit_code, RunConfig};
use bar_core::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barsim", version, about = "Optical condensate loading in the boson-accumulation regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file. Results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Memory budget for the coupling tensor in GiB.
    #[arg(long, global = true)]
    budget_gib: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Grid of n' - n over excited and ground temperatures.
    Scan,
    /// Step-by-step loading trajectories.
    Load,
    /// Build and cache the coupling tensor, print its sum-rule summary.
    Tensor,
    /// Run the invariant and oracle checks.
    Validate,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    if let Some(g) = cli.budget_gib {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidArgument(format!("budget must be positive, got {g}")));
        }
        config.alpha.budget_bytes = (g * (1u64 << 30) as f64) as u64;
    }
    config.check()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32> {
    let config = load_config(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let out = cli.out.as_deref();
    let text = match cli.command {
        Command::Scan => cmd_scan(&config, out)?,
        Command::Load => cmd_load(&config, out)?,
        Command::Tensor => {
            let (text, status) = cmd_tensor(&config, out)?;
            log::info!("tensor cache: {status:?}");
            text
        }
        Command::Validate => {
            let report = cmd_validate(&config, out)?;
            let text = report.render();
            if out.is_none() {
                print!("{text}");
            } else {
                eprint!("{text}");
            }
            return Ok(if report.passed() { 0 } else { 1 });
        }
    };
    if out.is_none() {
        print!("{text}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
