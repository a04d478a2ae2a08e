use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use detumble_cli::{cmd_compare, cmd_plot, cmd_run, CliError, PlotKind};
use detumble_core::sim::ControllerKind;

#[derive(Parser, Debug)]
#[command(
    name = "detumble",
    version,
    about = "Magnetic detumbling simulator for a single-torquer satellite"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write trace.csv and metrics.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config entry, e.g. `--set mpc.zeta=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the scenario under two controllers and tabulate their metrics.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "bdot-x", value_parser = parse_controller)]
        left: ControllerKind,
        #[arg(long, default_value = "mpc", value_parser = parse_controller)]
        right: ControllerKind,
    },
    /// Plot a time history from a trace as SVG.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown controller `{s}` (expected bdot-full, bdot-x or mpc)"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let report = cmd_run(&config, &out, &overrides)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("metrics serialize"));
        }
        Command::Compare {
            config,
            out,
            overrides,
            left,
            right,
        } => {
            print!("{}", cmd_compare(&config, &out, &overrides, left, right)?);
        }
        Command::Plot { trace, kind, out } => cmd_plot(&trace, kind, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
