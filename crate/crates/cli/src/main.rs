use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use finsler_cli::{exit, run_check, run_compare, run_tensors, table, CliError, Prepared, RunConfig, RunReport};

/// Verify Finsler connection axioms on sampled points.
#[derive(Debug, Parser)]
#[command(name = "finsler", version)]
struct Cli {
    /// Write the JSON report to this path (`-` for stdout, replacing the table).
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the default residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the jet order.
    #[arg(long, global = true, value_name = "K")]
    order: Option<usize>,
    /// Include wall-clock time in the JSON report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured suite; exit 0 if all pass.
    Check { config: PathBuf },
    /// Dump first-layer tensors at one point.
    Tensors {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y: Vec<f64>,
    },
    /// Characterization matrix of the configured connections.
    Compare { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.tolerance = t;
    }
    if let Some(k) = cli.order {
        cfg.order = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Check { config } => run_check(&Prepared::new(load(cli, config)?)?)?,
        Command::Compare { config } => run_compare(&Prepared::new(load(cli, config)?)?)?,
        Command::Tensors { config, x, y } => run_tensors(load(cli, config)?, x.clone(), y.clone())?,
    };
    if cli.timing {
        report.wall_clock_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

fn emit(cli: &Cli, report: &RunReport) -> Result<(), CliError> {
    let json = report.to_json();
    let to_stdout = cli.json.as_deref().is_some_and(|p| p.as_os_str() == "-");
    if to_stdout {
        print!("{json}");
    } else {
        let value: serde_json::Value = serde_json::from_str(&json).expect("report is valid JSON");
        print!("{}", table::render(&value));
    }
    let target = match &cli.json {
        Some(p) if !to_stdout => Some(p.clone()),
        None => report.config.output.clone(),
        _ => None,
    };
    if let Some(path) = target {
        std::fs::write(&path, json)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(report) => match emit(&cli, &report) {
            Ok(()) => report.summary.exit_code,
            Err(e) => {
                eprintln!("error: {e}");
                exit::CONFIG_ERROR
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit::CONFIG_ERROR
        }
    };
    ExitCode::from(code as u8)
}
