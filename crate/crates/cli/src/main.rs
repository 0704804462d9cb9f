use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use infogeo_cli::checks::{bound_checks, divergence_values, metric_checks, run_checks};
use infogeo_cli::config::load_config;
use infogeo_cli::report::RunReport;
use infogeo_cli::sweep;

#[derive(Parser)]
#[command(name = "infogeo", version, about = "Verify information-geometric bounds on finite models")]
struct Cli {
    /// Suite file (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`. Without one, output goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the suite seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evaluate the selected divergences at (theta, theta_prime).
    Divergence,
    /// Compare finite-difference metrics with their closed forms.
    Metric,
    /// Evaluate the pointwise and Bayesian bounds against the estimator.
    Bound,
    /// Run the suite's checks.
    Verify,
    /// Tabulate metric, bound and covariance over the grid and orders.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Divergence => "divergence",
            Self::Metric => "metric",
            Self::Bound => "bound",
            Self::Verify => "verify",
            Self::Sweep => "sweep",
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool> {
    let path = cli.config.as_deref().context("--config PATH is required")?;
    let mut suite = load_config(path)?;
    if let Some(seed) = cli.seed {
        suite.seed = seed;
    }
    let out_dir = suite.output_dir(cli.out.as_deref());

    if let Command::Sweep = cli.command {
        let format = cli.format.unwrap_or(Format::Csv);
        let rows = sweep::run_sweep(&suite)?;
        let body = match format {
            Format::Csv => sweep::to_csv(&rows)?,
            Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        };
        emit(out_dir.as_deref(), suite.output.sweep.as_deref(), "sweep", format, &body)?;
        return Ok(true);
    }

    let records = match cli.command {
        Command::Divergence => divergence_values(&suite)?,
        Command::Metric => run_checks(&suite, &metric_checks(&suite), false)?,
        Command::Bound => run_checks(&suite, &bound_checks(&suite), false)?,
        Command::Verify => run_checks(&suite, &suite.checks, true)?,
        Command::Sweep => unreachable!(),
    };
    let report = RunReport::new(cli.command.name(), &suite.digest, suite.seed, records);
    let format = cli.format.unwrap_or(Format::Json);
    let body = match format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    emit(out_dir.as_deref(), suite.output.report.as_deref(), "report", format, &body)?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}", c.name);
    }
    eprintln!(
        "{}: {} checks, {} passed, {} failed",
        cli.command.name(),
        report.summary.total,
        report.summary.passed,
        report.summary.failed
    );
    Ok(report.all_pass())
}

fn emit(
    dir: Option<&Path>,
    name: Option<&str>,
    stem: &str,
    format: Format,
    body: &str,
) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
            let file = dir.join(name.map_or_else(|| format!("{stem}.{}", format.ext()), str::to_string));
            fs::write(&file, body).with_context(|| format!("cannot write {}", file.display()))?;
        }
        None => std::io::stdout().write_all(body.as_bytes()).context("cannot write to stdout")?,
    }
    Ok(())
}
