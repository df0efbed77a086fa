use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;
use thinfilm_cli::commands::{
    run_asymptotics, run_classify, run_oscillation, run_phaseplane, run_polys, run_shoot,
    CmdResult, CommandError,
};
use thinfilm_cli::config::{canonical_json, load, RunConfig};

#[derive(Parser)]
#[command(
    name = "thinfilm",
    version,
    about = "Heteroclinic connections of (H''' + xi^2 + a) H^3 = 1"
)]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "THINFILM_THREADS")]
    threads: Option<usize>,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate and track the heteroclinic candidate.
    Shoot,
    /// Classify a grid of manifold seeds.
    Classify,
    /// Separatrix tables and region grid of the bounce phase plane.
    Phaseplane,
    /// Double-zero table and sampled curves of the polynomial family.
    Polys,
    /// Limit-system fit constants and matching amplitudes.
    Asymptotics,
    /// Extrema diagnostics near the heteroclinic candidate.
    OscillationReport,
}

fn execute<T: RunConfig>(
    cli: &Cli,
    run: impl Fn(&T, &Path) -> CmdResult<Value>,
) -> Result<(), CommandError> {
    let cfg: T = load(cli.config.as_deref())?;
    if cli.dry_run {
        println!("{}", canonical_json(&cfg));
        return Ok(());
    }
    let summary = run(&cfg, &cli.out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary["results"]).unwrap_or_default()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
        {
            eprintln!("config error: invalid thread count {n}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Shoot => execute(&cli, run_shoot),
        Command::Classify => execute(&cli, run_classify),
        Command::Phaseplane => execute(&cli, run_phaseplane),
        Command::Polys => execute(&cli, run_polys),
        Command::Asymptotics => execute(&cli, run_asymptotics),
        Command::OscillationReport => execute(&cli, run_oscillation),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = e.to_json();
            eprintln!("{e}");
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let _ = std::fs::write(
                    cli.out.join("error.json"),
                    format!(
                        "{}\n",
                        serde_json::to_string_pretty(&doc).unwrap_or_default()
                    ),
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
