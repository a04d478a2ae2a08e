//! Static SVG time-history plots of a trace.
//!
//! The output depends only on the trace contents: fixed canvas size, fixed
//! tick rule and fixed number formatting, so identical traces give identical
//! files. Long runs are decimated to a min/max envelope per pixel column.

use std::fmt::Write as _;

use clap::ValueEnum;
use detumble_core::DEG_PER_RAD;

use crate::trace::Trace;
use crate::CliError;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const BUCKETS: usize = 1200;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Body rates in deg/s.
    Rates,
    /// Torquer dipole `mx` and dummy input `v`.
    Inputs,
    /// Optimality residual norm, logarithmic axis.
    Residual,
    /// Rotational kinetic energy.
    Lyapunov,
}

struct Series {
    label: &'static str,
    points: Vec<(f64, f64)>,
}

struct Layout {
    title: &'static str,
    y_label: &'static str,
    columns: &'static [(&'static str, &'static str)],
    scale: f64,
    log: bool,
}

impl PlotKind {
    fn layout(self) -> Layout {
        match self {
            PlotKind::Rates => Layout {
                title: "Angular velocity",
                y_label: "rate [deg/s]",
                columns: &[("wx", "ωx"), ("wy", "ωy"), ("wz", "ωz")],
                scale: DEG_PER_RAD,
                log: false,
            },
            PlotKind::Inputs => Layout {
                title: "Controller inputs",
                y_label: "dipole [A·m²]",
                columns: &[("mx", "mx"), ("v", "v")],
                scale: 1.0,
                log: false,
            },
            PlotKind::Residual => Layout {
                title: "Optimality residual",
                y_label: "‖F‖",
                columns: &[("f_norm", "‖F‖")],
                scale: 1.0,
                log: true,
            },
            PlotKind::Lyapunov => Layout {
                title: "Rotational kinetic energy",
                y_label: "V [J]",
                columns: &[("lyap", "V")],
                scale: 1.0,
                log: false,
            },
        }
    }
}

/// Render `kind` for `trace` as an SVG document.
pub fn render_svg(trace: &Trace, kind: PlotKind) -> Result<String, CliError> {
    if trace.is_empty() {
        return Err(CliError::Trace("trace has no data rows".into()));
    }
    let layout = kind.layout();
    let t = trace.column("t")?;
    let mut series = Vec::new();
    for (column, label) in layout.columns {
        let ys = trace.column(column)?;
        let points: Vec<(f64, f64)> = t
            .iter()
            .zip(ys)
            .filter_map(|(t, y)| Some((t.as_ref().copied()?, y.as_ref().copied()? * layout.scale)))
            .filter(|(t, y)| t.is_finite() && y.is_finite() && (!layout.log || *y > 0.0))
            .collect();
        series.push(Series { label, points });
    }
    if series.iter().all(|s| s.points.is_empty()) {
        let names: Vec<_> = layout.columns.iter().map(|(c, _)| *c).collect();
        return Err(CliError::Trace(format!(
            "no plottable values in column(s) {}",
            names.join(", ")
        )));
    }

    let (mut t0, mut t1) = series
        .iter()
        .flat_map(|s| s.points.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let minutes = t1 > 600.0;
    if minutes {
        t0 /= 60.0;
        t1 /= 60.0;
        for s in &mut series {
            for p in &mut s.points {
                p.0 /= 60.0;
            }
        }
    }
    let transform = |y: f64| if layout.log { y.log10() } else { y };
    let (y0, y1) = series
        .iter()
        .flat_map(|s| s.points.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            let y = transform(p.1);
            (a.min(y), b.max(y))
        });

    let (x_ticks, x_lo, x_hi) = linear_ticks(t0, t1);
    let (y_ticks, y_lo, y_hi) = if layout.log {
        log_ticks(y0, y1)
    } else {
        linear_ticks(y0, y1)
    };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + plot_h - (transform(y) - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        layout.title
    );

    for tick in &x_ticks {
        let x = px(*tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            tick_label(*tick, &x_ticks)
        );
    }
    for tick in &y_ticks {
        let y = TOP + plot_h - (tick - y_lo) / (y_hi - y_lo) * plot_h;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let label = if layout.log {
            format!("1e{}", *tick as i64)
        } else {
            tick_label(*tick, &y_ticks)
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        if minutes { "time [min]" } else { "time [s]" }
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        layout.y_label
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts = envelope(&s.points, t0, t1);
        if !pts.is_empty() {
            let mut path = String::with_capacity(pts.len() * 16);
            for (k, (x, y)) in pts.iter().enumerate() {
                if k > 0 {
                    path.push(' ');
                }
                let _ = write!(path, "{:.2},{:.2}", px(*x), py(*y));
            }
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{path}"/>"#
            );
        }
        let ly = TOP + 20.0 + 22.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Keep the first, lowest, highest and last sample of every pixel column,
/// in their original order.
fn envelope(points: &[(f64, f64)], t0: f64, t1: f64) -> Vec<(f64, f64)> {
    if points.len() <= 4 * BUCKETS {
        return points.to_vec();
    }
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    let bucket_of = |x: f64| (((x - t0) / span * BUCKETS as f64) as usize).min(BUCKETS - 1);
    let mut out = Vec::with_capacity(4 * BUCKETS);
    let mut start = 0;
    while start < points.len() {
        let b = bucket_of(points[start].0);
        let mut end = start;
        while end < points.len() && bucket_of(points[end].0) == b {
            end += 1;
        }
        let chunk = &points[start..end];
        let lo = (0..chunk.len())
            .min_by(|a, b| chunk[*a].1.total_cmp(&chunk[*b].1))
            .unwrap_or(0);
        let hi = (0..chunk.len())
            .max_by(|a, b| chunk[*a].1.total_cmp(&chunk[*b].1))
            .unwrap_or(0);
        let mut keep = vec![0, lo, hi, chunk.len() - 1];
        keep.sort_unstable();
        keep.dedup();
        out.extend(keep.into_iter().map(|i| chunk[i]));
        start = end;
    }
    out
}

/// Round step of 1, 2 or 5 times a power of ten giving about five intervals.
fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Ticks covering `[lo, hi]` and the padded axis limits they define.
fn linear_ticks(lo: f64, hi: f64) -> (Vec<f64>, f64, f64) {
    let (lo, hi) = if hi - lo > 1e-12 * hi.abs().max(lo.abs()) {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    };
    let step = nice_step(hi - lo);
    let first = (lo / step).floor();
    let last = (hi / step).ceil();
    let ticks: Vec<f64> = (0..=((last - first) as usize))
        .map(|k| (first + k as f64) * step)
        .collect();
    (ticks, first * step, last * step)
}

fn log_ticks(lo: f64, hi: f64) -> (Vec<f64>, f64, f64) {
    let first = lo.floor();
    let last = hi.ceil().max(first + 1.0);
    let stride = ((last - first) / 8.0).ceil().max(1.0);
    let ticks = (0..)
        .map(|k| first + stride * k as f64)
        .take_while(|d| *d <= last)
        .collect();
    (ticks, first, last)
}

fn tick_label(value: f64, ticks: &[f64]) -> String {
    let step = if ticks.len() > 1 { ticks[1] - ticks[0] } else { 1.0 };
    let magnitude = ticks.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if (1e-3..1e5).contains(&step) && magnitude < 1e6 {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        // Tick positions come from float multiplication; keep "-0.0" out.
        let value = if value.abs() < 0.5 * step { 0.0 } else { value };
        format!("{value:.decimals$}")
    } else if value == 0.0 {
        "0".into()
    } else {
        format!("{value:.1e}")
    }
}
