mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qmcf", version, about = "Correlated-sampling QC-AFQMC energies and forces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state energy with the configured method.
    Energy(CommonArgs),
    /// Central-difference force, optionally over a bond-length grid.
    Force(CommonArgs),
    /// Orbital entropies and the recommended active space.
    ActiveSpace(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides seeds.global.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override, e.g. protocol.n_walkers=64.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("QMCF_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("QMCF_THREADS='{v}' is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Energy(a) => (commands::Kind::Energy, a),
        Command::Force(a) => (commands::Kind::Force, a),
        Command::ActiveSpace(a) => (commands::Kind::ActiveSpace, a),
    };
    let result = init_threads().map_err(commands::Failure::config).and_then(|_| {
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| commands::Failure::config(format!("{}: {e}", args.config.display())))?;
        let mut cfg = config::load(&text, &args.overrides, args.seed).map_err(commands::Failure::config)?;
        if let Some(out) = args.out {
            cfg.output = out;
        }
        let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
        commands::run(kind, &cfg, &base)
    });
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", serde_json::to_string_pretty(&f.to_json()).expect("error serializes"));
            ExitCode::FAILURE
        }
    }
}
