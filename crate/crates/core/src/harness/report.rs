//! Convergence tables, CSV / plot-data writers and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Point;

use super::config::{fmt_num, StudyConfig, TestId};

pub const CSV_HEADER: &str = "dx,dt,e_inf,e_2,p_inf,p_2,positivity_error,iterations,wall_time_s";

/// One refinement level of one measured field.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dx: f64,
    pub dt: f64,
    pub e_inf: f64,
    pub e_2: f64,
    pub p_inf: Option<f64>,
    pub p_2: Option<f64>,
    pub positivity_error: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Solver error message when the row failed.
    pub failure: Option<String>,
}

impl ReportRow {
    pub fn failed(dx: f64, dt: f64, message: String, wall_time_s: f64) -> Self {
        Self {
            dx,
            dt,
            e_inf: f64::NAN,
            e_2: f64::NAN,
            p_inf: None,
            p_2: None,
            positivity_error: f64::NAN,
            iterations: 0,
            wall_time_s,
            failure: Some(message),
        }
    }
}

/// Rows for one of `v`, `dv` (first partial derivative of `v`) or `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldReport {
    pub field: String,
    pub rows: Vec<ReportRow>,
}

impl FieldReport {
    pub fn new(field: &str) -> Self {
        Self {
            field: field.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn e_2(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_2).collect()
    }

    pub fn e_inf(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_inf).collect()
    }

    pub fn p_2(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.p_2).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |p: Option<f64>| p.map(fmt_num).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                fmt_num(r.dx),
                fmt_num(r.dt),
                fmt_num(r.e_inf),
                fmt_num(r.e_2),
                opt(r.p_inf),
                opt(r.p_2),
                fmt_num(r.positivity_error),
                r.iterations,
                fmt_num(r.wall_time_s),
            );
        }
        s
    }
}

/// Final-time density and initial-time value of one run next to the truth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotData {
    pub dx: f64,
    pub dim: usize,
    pub x: Vec<Point>,
    pub m_t: Vec<f64>,
    pub m_exact_t: Vec<f64>,
    /// Empty for studies without a value function.
    pub v_0: Vec<f64>,
    pub v_exact_0: Vec<f64>,
}

impl PlotData {
    pub fn to_text(&self) -> String {
        let mut s = if self.dim == 2 {
            String::from("# x1 x2 m_T m_exact_T v_0 v_exact_0\n")
        } else {
            String::from("# x m_T m_exact_T v_0 v_exact_0\n")
        };
        let at = |v: &[f64], i: usize| v.get(i).copied().map_or("nan".to_string(), fmt_num);
        for (i, x) in self.x.iter().enumerate() {
            if self.dim == 2 {
                let _ = write!(s, "{} {} ", fmt_num(x[0]), fmt_num(x[1]));
            } else {
                let _ = write!(s, "{} ", fmt_num(x[0]));
            }
            let _ = writeln!(
                s,
                "{} {} {} {}",
                at(&self.m_t, i),
                at(&self.m_exact_t, i),
                at(&self.v_0, i),
                at(&self.v_exact_0, i)
            );
        }
        s
    }
}

/// Per-run quantities used by the conservation and stability checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    pub dx: f64,
    /// `max_k |sum m_k - sum m_0| / sum m_0` over every density iterate.
    pub mass_drift: f64,
    /// Same drift with the mass that left the box added back.
    pub balance_error: f64,
    pub l2_initial: f64,
    pub l2_max: f64,
    pub converged: bool,
    pub increments: Vec<f64>,
    pub max_control_ratio: f64,
    pub control_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub test: TestId,
    pub fields: Vec<FieldReport>,
    pub plots: Vec<PlotData>,
    pub diagnostics: Vec<RunDiagnostics>,
}

impl ConvergenceReport {
    pub fn field(&self, name: &str) -> Option<&FieldReport> {
        self.fields.iter().find(|f| f.field == name)
    }

    /// Plain-text table for terminal output.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for f in &self.fields {
            let _ = writeln!(s, "{} / {}", self.test, f.field);
            let _ = writeln!(
                s,
                "{:>10} {:>10} {:>10} {:>10} {:>6} {:>6} {:>10} {:>5}",
                "dx", "dt", "E_inf", "E_2", "p_inf", "p_2", "pos.err", "iter"
            );
            for r in &f.rows {
                let p = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
                if let Some(msg) = &r.failure {
                    let _ = writeln!(s, "{:>10.3e} failed: {msg}", r.dx);
                    continue;
                }
                let _ = writeln!(
                    s,
                    "{:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>6} {:>6} {:>10.3e} {:>5}",
                    r.dx,
                    r.dt,
                    r.e_inf,
                    r.e_2,
                    p(r.p_inf),
                    p(r.p_2),
                    r.positivity_error,
                    r.iterations
                );
            }
        }
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<test>_<field>.csv`, `<test>_plot_dx<dx>.dat` and
/// `<test>_manifest.cfg` into `out_dir`, returning the paths written.
pub fn emit_report(report: &ConvergenceReport, config: &StudyConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for f in &report.fields {
        let p = out_dir.join(format!("{}_{}.csv", report.test, f.field));
        write_file(&p, &f.to_csv())?;
        written.push(p);
    }
    for plot in &report.plots {
        let p = out_dir.join(format!("{}_plot_dx{}.dat", report.test, fmt_num(plot.dx)));
        write_file(&p, &plot.to_text())?;
        written.push(p);
    }
    let mut manifest = config.to_kv();
    for d in &report.diagnostics {
        let _ = writeln!(
            manifest,
            "# dx {}: converged {}, outer iterations {}, control radius {}, max |a|/R {}, mass drift {}",
            fmt_num(d.dx),
            d.converged,
            d.increments.len(),
            fmt_num(d.control_radius),
            fmt_num(d.max_control_ratio),
            fmt_num(d.mass_drift)
        );
    }
    let p = out_dir.join(format!("{}_manifest.cfg", report.test));
    write_file(&p, &manifest)?;
    written.push(p);
    Ok(written)
}
