use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowsect_cli::commands::{
    cmd_check, cmd_identities, cmd_section, cmd_suspend, CommandOutput, EXIT_PARSE_ERROR,
};
use flowsect_cli::config::{load_config, ConfigError, Overrides};

/// Decide the cross-section criterion for volume-preserving torus flows and
/// construct sections, return maps and suspensions.
#[derive(Parser)]
#[command(name = "flowsect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the scenario and evaluate the section criterion.
    Check(RunArgs),
    /// Run the full pipeline: criterion, closed form, section, Poincaré map.
    Section(RunArgs),
    /// Build a suspension scenario, emit it, and round-trip its section.
    Suspend(RunArgs),
    /// Run the operator-identity suite.
    Identities(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override every axis of the grid resolution.
    #[arg(long)]
    resolution: Option<usize>,
    /// Override the Poincaré seed count.
    #[arg(long)]
    seeds: Option<usize>,
    /// Override the target cohomology class, e.g. "1,0" or "2,1,0".
    #[arg(long, value_name = "k1,k2[,k3]")]
    class_hint: Option<String>,
}

fn parse_hint(raw: &str) -> Result<Vec<i64>, String> {
    raw.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("bad class hint '{raw}': {e}")))
        .collect()
}

fn run(cli: Cli) -> Result<CommandOutput, (i32, String)> {
    let (args, runner): (&RunArgs, fn(&_, &_) -> anyhow::Result<CommandOutput>) =
        match &cli.command {
            Command::Check(a) => (a, |cfg, _out| cmd_check(cfg)),
            Command::Section(a) => (a, |cfg, out| cmd_section(cfg, out)),
            Command::Suspend(a) => (a, |cfg, out| cmd_suspend(cfg, out)),
            Command::Identities(a) => (a, |cfg, _out| cmd_identities(cfg)),
        };

    let mut overrides = Overrides {
        resolution: args.resolution,
        seeds: args.seeds,
        class_hint: None,
    };
    if let Some(raw) = &args.class_hint {
        overrides.class_hint =
            Some(parse_hint(raw).map_err(|m| (EXIT_PARSE_ERROR, m))?);
    }

    let cfg = load_config(&args.config, &overrides)
        .map_err(|e: ConfigError| (EXIT_PARSE_ERROR, e.to_string()))?;
    let output = runner(&cfg, &args.out).map_err(|e| (1, format!("{e:#}")))?;

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return Err((1, format!("cannot create {}: {e}", args.out.display())));
    }
    let report_path = args.out.join("report.toml");
    if let Err(e) = std::fs::write(&report_path, &output.report) {
        return Err((1, format!("cannot write {}: {e}", report_path.display())));
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            print!("{}", output.report);
            ExitCode::from(output.exit_code as u8)
        }
        Err((code, message)) => {
            eprintln!("flowsect: {message}");
            ExitCode::from(code as u8)
        }
    }
}
