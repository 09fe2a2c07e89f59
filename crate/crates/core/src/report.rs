//! CSV, JSON and SVG writers for trial logs and summaries.

use crate::simulation::{LogRow, Phase, TrialRecord};
use plotters::prelude::*;
use serde::Serialize;
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: io::Error,
    },
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot failed: {0}")]
    Plot(String),
}

impl ReportError {
    fn io(path: &Path, source: io::Error) -> Self {
        ReportError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Trial log as CSV, one row per logged step.
pub fn write_log_csv<W: Write>(rows: &[LogRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", LogRow::CSV_HEADER)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.phi,
            r.theta,
            r.d,
            r.x,
            r.y,
            r.z,
            r.y_r,
            r.z_r,
            r.e_y,
            r.e_z,
            r.v,
            r.omega_phi,
            r.omega_theta,
            r.u_prismatic
        )?;
    }
    Ok(())
}

/// Per-trial rows of a batch: index, target, final error, success, phase
/// durations and failure kind.
pub fn write_trials_csv<W: Write>(trials: &[TrialRecord], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "trial,seed,x,y,z,final_error_m,success,localize_s,approach_s,detach_s,return_s,final_phase,failure"
    )?;
    for (i, t) in trials.iter().enumerate() {
        let failure = t
            .failure
            .as_ref()
            .map(|f| format!("{:?}", f.kind).to_lowercase())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            t.seed,
            t.target.x,
            t.target.y,
            t.target.z,
            t.final_error,
            t.success,
            t.phase_durations.localize,
            t.phase_durations.approach,
            t.phase_durations.detach,
            t.phase_durations.return_home,
            format!("{:?}", t.final_phase()).to_lowercase(),
            failure
        )?;
    }
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|e| ReportError::io(path, e))
}

fn series_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

type Series<'a> = (&'a str, Vec<(f64, f64)>, RGBColor);

fn line_chart(
    path: &Path,
    title: &str,
    y_desc: &str,
    series: &[Series<'_>],
) -> Result<(), ReportError> {
    let plot_err = |e: &dyn std::fmt::Display| ReportError::Plot(format!("{}: {e}", path.display()));
    let (x0, x1) = series_range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = series_range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(72)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| plot_err(&e))?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(y_desc)
            .draw()
            .map_err(|e| plot_err(&e))?;
        for (label, points, color) in series {
            let c = *color;
            chart
                .draw_series(LineSeries::new(points.iter().copied(), c.stroke_width(2)))
                .map_err(|e| plot_err(&e))?
                .label(*label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(&e))?;
        root.present().map_err(|e| plot_err(&e))?;
    }
    write_file(path, svg.as_bytes())
}

/// Write `tracking.svg` (y, z against their references), `error.svg`
/// (e_y, e_z) and `lyapunov.svg` (V) for the approach phase of a log.
pub fn write_tracking_plots(rows: &[LogRow], dir: &Path) -> Result<(), ReportError> {
    let approach: Vec<&LogRow> = rows.iter().filter(|r| r.phase == Phase::Approach).collect();
    let pick = |f: fn(&LogRow) -> f64| approach.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    line_chart(
        &dir.join("tracking.svg"),
        "End-effector tracking",
        "position [m]",
        &[
            ("y", pick(|r| r.y), BLUE),
            ("y_r", pick(|r| r.y_r), CYAN),
            ("z", pick(|r| r.z), RED),
            ("z_r", pick(|r| r.z_r), MAGENTA),
        ],
    )?;
    line_chart(
        &dir.join("error.svg"),
        "Tracking error",
        "error [m]",
        &[("e_y", pick(|r| r.e_y), BLUE), ("e_z", pick(|r| r.e_z), RED)],
    )?;
    line_chart(
        &dir.join("lyapunov.svg"),
        "Lyapunov function",
        "V [m^2]",
        &[("V", pick(|r| r.v), BLACK)],
    )
}
