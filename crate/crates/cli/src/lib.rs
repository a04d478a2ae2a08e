//! Command-line front end for the detumbling simulator: JSON scenario
//! configs, CSV traces, metrics files, controller comparison and SVG plots.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod plot;
pub mod trace;

pub use commands::{cmd_compare, cmd_plot, cmd_run, MetricsReport};
pub use config::{config_hash, load_config, parse_config, BUNDLED_BASELINE};
pub use plot::{render_svg, PlotKind};
pub use trace::{write_trace, Trace, HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace: {0}")]
    Trace(String),
    #[error("simulation aborted: {0}")]
    Simulation(String),
}

impl CliError {
    /// 1 for usage, configuration and I/O problems, 2 when the simulation itself aborted.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Simulation(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
