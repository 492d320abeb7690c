use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use biascast::cli::{self, ReportFormat, RunConfig};
use biascast::Platform;

#[derive(Parser)]
#[command(name = "biascast", version, about = "Forecast daily political-leaning activity on social media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's preset.
    #[arg(long)]
    preset: Option<String>,
    /// Report format printed to stdout.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Label posts and write per-leaning daily series plus a summary.
    Ingest(Common),
    /// Fit, evaluate and report every requested model.
    Run(Common),
    /// Search SARIMA orders on each training series.
    Gridsearch(Common),
    /// Write the configured synthetic series.
    Simulate(Common),
    /// Re-render an existing report.csv.
    Report {
        /// Directory holding report.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "twitter")]
        platform: Platform,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(preset) = &common.preset {
        config.preset = preset.clone();
    }
    config.validate()?;
    Ok(config)
}

fn print_report(out_dir: &Path, config: &RunConfig, format: ReportFormat) -> anyhow::Result<()> {
    print!("{}", cli::cmd_report(out_dir, config.platform, format)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest(c) => {
            let config = load(&c)?;
            let summary = cli::cmd_ingest(&config).context("ingest failed")?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Run(c) => {
            let config = load(&c)?;
            let outcome = cli::cmd_run(&config).context("run failed")?;
            print_report(&config.out_dir, &config, c.format)?;
            if !outcome.succeeded() {
                for f in &outcome.failures {
                    eprintln!("failed: {} / {} / {}: {}", f.metric, f.leaning, f.kind, f.error);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Gridsearch(c) => {
            let config = load(&c)?;
            let reports = cli::cmd_gridsearch(&config).context("grid search failed")?;
            let mut failed = false;
            for r in &reports {
                match (&r.winner, &r.error) {
                    (Some(spec), _) => println!("{} {}: {spec}", r.metric, r.leaning),
                    (None, e) => {
                        failed = true;
                        eprintln!("{} {}: {}", r.metric, r.leaning, e.as_deref().unwrap_or("no winner"));
                    }
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Simulate(c) => {
            let config = load(&c)?;
            let series = cli::cmd_simulate(&config)?;
            println!("wrote {} values to {}", series.len(), config.out_dir.join("synthetic.csv").display());
        }
        Command::Report { out, platform, format } => {
            print!("{}", cli::cmd_report(&out, platform, format)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
