//! Error metrics, invariant drift and CSV reports.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;

/// `Δx · max_{j≥1} |s_j - s_0|` for a series of grid sums `s_j`.
pub fn err_alpha(series: &[f64], dx: f64) -> f64 {
    let Some(&s0) = series.first() else { return 0.0 };
    dx * series.iter().skip(1).fold(0.0f64, |m, s| m.max((s - s0).abs()))
}

/// `‖u - u_exact‖₂ / ‖u_exact‖₂`.
pub fn rel_solution_error(u: &[f64], exact: &[f64]) -> Result<f64, MetricError> {
    if u.len() != exact.len() {
        return Err(MetricError::Length(u.len(), exact.len()));
    }
    let norm = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    let diff = u.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// `π_k = log(e_k/e_{k-1}) / log(h_k/h_{k-1})` for consecutive `(h, e)` pairs.
pub fn order_estimate(errors: &[(f64, f64)]) -> Result<Vec<f64>, MetricError> {
    if let Some(&(_, e)) = errors.iter().find(|(h, e)| *e <= 0.0 || *h <= 0.0) {
        return Err(MetricError::NonPositive(e));
    }
    Ok(errors.windows(2).map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln()).collect())
}

/// Diagnostics of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: String,
    pub dx: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub lambda: f64,
    pub err1: f64,
    pub err2: f64,
    pub err3: f64,
    pub err4: f64,
    /// `NaN` when there is no exact solution to compare against.
    pub sol_err: f64,
    pub newton_avg_iters: f64,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn errs(&self) -> [f64; 4] {
        [self.err1, self.err2, self.err3, self.err4]
    }
}

/// Grid sums of the four monitor densities at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub j: usize,
    pub t: f64,
    #[serde(rename = "sumG1")]
    pub sum_g1: f64,
    #[serde(rename = "sumG2")]
    pub sum_g2: f64,
    #[serde(rename = "sumG3")]
    pub sum_g3: f64,
    #[serde(rename = "sumG4")]
    pub sum_g4: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub i: usize,
    pub x: f64,
    pub u: f64,
    pub v: f64,
}

pub const REPORT_HEADER: &str = "scheme,dx,dt,T,lambda,err1,err2,err3,err4,sol_err,newton_avg_iters,wall_seconds";
pub const SERIES_HEADER: &str = "j,t,sumG1,sumG2,sumG3,sumG4";
pub const PROFILE_HEADER: &str = "i,x,u,v";

/// Shortest-round-trip float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()
}

fn report_line(r: &RunReport) -> String {
    let nums = [
        r.dx,
        r.dt,
        r.t_final,
        r.lambda,
        r.err1,
        r.err2,
        r.err3,
        r.err4,
        r.sol_err,
        r.newton_avg_iters,
        r.wall_seconds,
    ];
    std::iter::once(r.scheme.clone())
        .chain(nums.iter().map(|&x| fmt_f64(x)))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_report(report: &RunReport, path: &Path) -> io::Result<()> {
    write_reports(std::slice::from_ref(report), path)
}

pub fn write_reports(reports: &[RunReport], path: &Path) -> io::Result<()> {
    write_lines(path, REPORT_HEADER, reports.iter().map(report_line))
}

pub fn write_series(series: &[SeriesRow], path: &Path) -> io::Result<()> {
    write_lines(
        path,
        SERIES_HEADER,
        series.iter().map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.j,
                fmt_f64(s.t),
                fmt_f64(s.sum_g1),
                fmt_f64(s.sum_g2),
                fmt_f64(s.sum_g3),
                fmt_f64(s.sum_g4)
            )
        }),
    )
}

pub fn write_profile(rows: &[ProfileRow], path: &Path) -> io::Result<()> {
    write_lines(
        path,
        PROFILE_HEADER,
        rows.iter().map(|p| format!("{},{},{},{}", p.i, fmt_f64(p.x), fmt_f64(p.u), fmt_f64(p.v))),
    )
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

pub fn read_reports(path: &Path) -> Result<Vec<RunReport>, csv::Error> {
    read_rows(path)
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>, csv::Error> {
    read_rows(path)
}

pub fn read_profile(path: &Path) -> Result<Vec<ProfileRow>, csv::Error> {
    read_rows(path)
}
