//! The `run`, `compare` and `plot` subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use detumble_core::sim::{
    compute_metrics, run_scenario, ControllerKind, DetumbleMetrics, ScenarioConfig, SimulationError,
};
use detumble_core::DEG_PER_RAD;
use log::info;
use serde::Serialize;

use crate::config::{config_hash, load_config};
use crate::plot::{render_svg, PlotKind};
use crate::trace::{write_trace, Trace};
use crate::CliError;

/// Contents of `metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub controller: &'static str,
    pub config_hash: String,
    pub records: usize,
    #[serde(flatten)]
    pub metrics: DetumbleMetrics,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn save_trace(path: &Path, records: &[detumble_core::sim::SimulationRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace(BufWriter::new(file), records)
}

/// Run one scenario and write `trace.csv` and `metrics.json` into `out`.
/// An aborted run still leaves the records gathered so far on disk.
pub fn run_to_dir(cfg: &ScenarioConfig, out: &Path) -> Result<MetricsReport, CliError> {
    create_dir(out)?;
    let hash = config_hash(cfg);
    info!(
        "running {} for {} s (config {})",
        cfg.controller.name(),
        cfg.duration,
        &hash[..12]
    );
    let (records, metrics, aborted) = match run_scenario(cfg) {
        Ok(run) => (run.records, run.metrics, None),
        Err(SimulationError::NonFinite { step, time, records }) => {
            let metrics = compute_metrics(&records, cfg.settle_threshold_deg_s.to_radians());
            (
                records,
                metrics,
                Some(format!("non-finite state at step {step} (t = {time} s)")),
            )
        }
        Err(SimulationError::Setup(e)) => return Err(CliError::Simulation(e.to_string())),
    };
    save_trace(&out.join("trace.csv"), &records)?;
    let report = MetricsReport {
        controller: cfg.controller.name(),
        config_hash: hash,
        records: records.len(),
        metrics,
    };
    let json = serde_json::to_vec_pretty(&report).expect("metrics serialize");
    write_file(&out.join("metrics.json"), &json)?;
    match aborted {
        Some(msg) => Err(CliError::Simulation(format!(
            "{msg}; {} records kept in {}",
            records.len(),
            out.display()
        ))),
        None => Ok(report),
    }
}

pub fn cmd_run(config: &Path, out: &Path, overrides: &[String]) -> Result<MetricsReport, CliError> {
    let cfg = load_config(config, overrides)?;
    run_to_dir(&cfg, out)
}

/// Run the same scenario under two controllers, side by side. Traces and
/// metrics go to `out/<controller>/`, the table to `out/comparison.txt`.
pub fn cmd_compare(
    config: &Path,
    out: &Path,
    overrides: &[String],
    left: ControllerKind,
    right: ControllerKind,
) -> Result<String, CliError> {
    if left == right {
        return Err(CliError::Usage(format!(
            "compare needs two different controllers, got {} twice",
            left.name()
        )));
    }
    let base = load_config(config, overrides)?;
    let mut cfgs = [base.clone(), base];
    cfgs[0].controller = left;
    cfgs[1].controller = right;
    for cfg in &cfgs {
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dirs: Vec<PathBuf> = cfgs.iter().map(|c| out.join(c.controller.name())).collect();

    let results: Vec<Result<MetricsReport, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(&dirs)
            .map(|(cfg, dir)| s.spawn(move || run_to_dir(cfg, dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let mut reports = Vec::with_capacity(2);
    for r in results {
        reports.push(r?);
    }
    let table = comparison_table(&reports);
    write_file(&out.join("comparison.txt"), table.as_bytes())?;
    Ok(table)
}

/// Plain-text table of the metrics of several runs. Rows that only apply to
/// the MPC show `-` for the other controllers.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for (axis, name) in ["wx", "wy", "wz"].iter().enumerate() {
        rows.push((
            format!("settle time {name} [s]"),
            reports
                .iter()
                .map(|r| r.metrics.settle_time[axis].map_or("unsettled".to_string(), |t| format!("{t:.1}")))
                .collect(),
        ));
    }
    for (axis, name) in ["wx", "wy", "wz"].iter().enumerate() {
        rows.push((
            format!("final |{name}| [deg/s]"),
            reports
                .iter()
                .map(|r| format!("{:.4}", r.metrics.final_rates[axis].abs() * DEG_PER_RAD))
                .collect(),
        ));
    }
    let optional = |get: fn(&DetumbleMetrics) -> Option<f64>| -> Option<Vec<String>> {
        let cells: Vec<Option<f64>> = reports.iter().map(|r| get(&r.metrics)).collect();
        cells.iter().any(Option::is_some).then(|| {
            cells
                .iter()
                .map(|c| c.map_or("-".to_string(), |v| format!("{v:.4e}")))
                .collect()
        })
    };
    if let Some(cells) = optional(|m| m.max_residual_norm) {
        rows.push(("max ‖F‖".into(), cells));
    }
    if let Some(cells) = optional(|m| m.min_v) {
        rows.push(("min v [A·m²]".into(), cells));
    }

    let width0 = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .max()
        .unwrap_or(0)
        .max("metric".len());
    let widths: Vec<usize> = (0..reports.len())
        .map(|i| {
            rows.iter()
                .map(|(_, c)| c[i].len())
                .chain([reports[i].controller.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
    let mut out = pad("metric", width0);
    for (r, w) in reports.iter().zip(&widths) {
        out.push_str("  ");
        out.push_str(&pad(r.controller, *w));
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for (label, cells) in &rows {
        let mut line = pad(label, width0);
        for (c, w) in cells.iter().zip(&widths) {
            line.push_str("  ");
            line.push_str(&pad(c, *w));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Render `kind` from the trace at `trace_path` into `out`. Nothing is
/// written when the trace cannot be plotted.
pub fn cmd_plot(trace_path: &Path, kind: PlotKind, out: &Path) -> Result<(), CliError> {
    let file = File::open(trace_path).map_err(|e| CliError::io(trace_path, e))?;
    let trace = Trace::read(file)?;
    let svg = render_svg(&trace, kind)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out, svg.as_bytes())
}
