//! Convergence studies for the four built-in test problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::basis::{interpolate, Extension};
use crate::characteristics::{CnSolver, FnDrift};
use crate::error::{Error, Result};
use crate::fp::{fp_solve, DensityField, FpBoundary, FpProblem};
use crate::grid::{Point, UniformGrid};
use crate::hjb::{numerical_gradient, HjbBoundary};
use crate::mfg::{estimate_radius, mfg_solve, steps_for, CouplingSpec, MfgProblem, MfgSolution};
use crate::oracle::{LqParameters, OuProcess};

use super::config::{DtRule, StudyConfig, TestId};
use super::metrics::{error_metrics, positivity_error, rates};
use super::report::{ConvergenceReport, FieldReport, PlotData, ReportRow, RunDiagnostics};

/// Initial density of the local-coupling test: `4 sin^2(2 pi (x - 1/4))` on
/// `[1/4, 3/4]`, zero elsewhere.
pub fn local_initial_density(x: Point) -> f64 {
    let s = x[0];
    if (0.25..=0.75).contains(&s) {
        4.0 * (2.0 * std::f64::consts::PI * (s - 0.25)).sin().powi(2)
    } else {
        0.0
    }
}

pub fn lq_parameters(config: &StudyConfig) -> LqParameters {
    let d = config.test.dim();
    let mean = if d == 2 { [config.mean0; 2] } else { [config.mean0, 0.0] };
    LqParameters::new(config.horizon, config.sigma(), d, mean, [config.var0; 2])
}

fn with_radius(mut problem: MfgProblem, config: &StudyConfig) -> MfgProblem {
    let radius = config
        .control_radius
        .unwrap_or_else(|| estimate_radius(&problem, config.radius_safety));
    problem.controls = config.control_set(radius);
    problem
}

/// The linear-quadratic problem on the grid of width `dx`.
pub fn lq_problem(config: &StudyConfig, dx: f64) -> Result<MfgProblem> {
    let params = lq_parameters(config);
    let grid = config.grid(dx)?;
    let boundary = move |t: f64, x: Point| params.exact_value(t, x);
    let problem = MfgProblem {
        grid,
        sigma: config.sigma(),
        horizon: config.horizon,
        n_steps: steps_for(config.horizon, config.dt_rule.dt(dx)),
        coupling: CouplingSpec::NonlocalMoment,
        terminal: Arc::new(|_| 0.0),
        initial: Arc::new(move |x| params.initial_density(x)),
        hjb_boundary: HjbBoundary::Dirichlet(Arc::new(boundary)),
        fp_boundary: FpBoundary::Dirichlet,
        fp_mode: config.fp_mode,
        controls: config.control_set(1.0),
        solver: CnSolver::default(),
        tolerance: config.tau,
        max_iterations: config.max_outer,
        damping: config.damping,
    };
    Ok(with_radius(problem, config))
}

/// The local-coupling problem on the grid of width `dx` with time rule `rule`.
pub fn local_problem(config: &StudyConfig, dx: f64, rule: DtRule) -> Result<MfgProblem> {
    let grid = config.grid(dx)?;
    let problem = MfgProblem {
        grid,
        sigma: config.sigma(),
        horizon: config.horizon,
        n_steps: steps_for(config.horizon, rule.dt(dx)),
        coupling: CouplingSpec::LocalPointwise {
            reference: Arc::new(local_initial_density),
            reference_weight: 3.0,
            cap: 4.0,
        },
        terminal: Arc::new(|_| 0.0),
        initial: Arc::new(local_initial_density),
        hjb_boundary: HjbBoundary::Neumann,
        fp_boundary: FpBoundary::Neumann,
        fp_mode: config.fp_mode,
        controls: config.control_set(1.0),
        solver: CnSolver::default(),
        tolerance: config.tau,
        max_iterations: config.max_outer,
        damping: config.damping,
    };
    Ok(with_radius(problem, config))
}

/// Fields of a fine solve needed to score coarser ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution {
    pub grid: UniformGrid,
    pub v0: Vec<f64>,
    pub dv0: Vec<f64>,
    pub m_t: Vec<f64>,
}

impl ReferenceSolution {
    fn from_solution(sol: &MfgSolution) -> Self {
        let grad = sol.value.gradient(0);
        Self {
            grid: sol.value.grid.clone(),
            v0: sol.value.slice(0).to_vec(),
            dv0: grad.iter().map(|g| g[0]).collect(),
            m_t: sol.density.last().to_vec(),
        }
    }

    /// Cubic interpolation of the three fields onto the nodes of `grid`.
    pub fn sample_on(&self, grid: &UniformGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let at = |f: &[f64]| grid.sample(|x| interpolate(f, x, &self.grid, Extension::Clamp));
        (at(&self.v0), at(&self.dv0), at(&self.m_t))
    }

    fn to_text(&self, key: &str) -> String {
        let enc = |f: &[f64]| {
            f.iter()
                .map(|v| format!("{:016x}", v.to_bits()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "# reference {key}\n{} {}\n{}\n{}\n{}\n",
            self.grid.dim(),
            self.grid.cells_per_axis(),
            enc(&self.v0),
            enc(&self.dv0),
            enc(&self.m_t)
        )
    }

    fn from_text(text: &str, key: &str, grid: &UniformGrid) -> Option<Self> {
        let mut lines = text.lines();
        if lines.next()? != format!("# reference {key}") {
            return None;
        }
        let header: Vec<&str> = lines.next()?.split_whitespace().collect();
        if header.len() != 2
            || header[0].parse::<usize>().ok()? != grid.dim()
            || header[1].parse::<usize>().ok()? != grid.cells_per_axis()
        {
            return None;
        }
        let mut dec = || -> Option<Vec<f64>> {
            let v: Vec<f64> = lines
                .next()?
                .split_whitespace()
                .map(|h| u64::from_str_radix(h, 16).ok().map(f64::from_bits))
                .collect::<Option<_>>()?;
            (v.len() == grid.len()).then_some(v)
        };
        Some(Self {
            grid: grid.clone(),
            v0: dec()?,
            dv0: dec()?,
            m_t: dec()?,
        })
    }
}

pub fn reference_cache_path(config: &StudyConfig) -> PathBuf {
    config
        .cache_dir()
        .join(format!("{}-reference-{}.txt", config.test, &config.reference_key()[..16]))
}

/// Loads the local-test reference from the cache or computes and stores it.
pub fn local_reference(config: &StudyConfig) -> Result<ReferenceSolution> {
    let key = config.reference_key();
    let path = reference_cache_path(config);
    let grid = config.grid(config.ref_dx)?;
    if let Ok(text) = fs::read_to_string(&path) {
        if let Some(r) = ReferenceSolution::from_text(&text, &key, &grid) {
            log::info!("loaded reference from {}", path.display());
            return Ok(r);
        }
        log::warn!("ignoring stale reference cache {}", path.display());
    }
    log::info!("computing reference at dx = {:e}", config.ref_dx);
    let problem = local_problem(config, config.ref_dx, config.ref_dt_rule)?;
    let sol = mfg_solve(&problem)?;
    let r = ReferenceSolution::from_solution(&sol);
    store(&path, &r.to_text(&key))?;
    Ok(r)
}

fn store(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Computed and true fields of one refinement level.
struct Measured {
    grid: UniformGrid,
    dt: f64,
    iterations: usize,
    positivity: f64,
    /// (field, approx, truth)
    fields: Vec<(&'static str, Vec<f64>, Vec<f64>)>,
    plot: PlotData,
    diagnostics: RunDiagnostics,
}

fn density_diagnostics(dx: f64, m: &DensityField) -> RunDiagnostics {
    RunDiagnostics {
        dx,
        mass_drift: m.max_relative_mass_drift(),
        balance_error: m.max_relative_balance_error(),
        l2_initial: m.l2_norm(0),
        l2_max: (0..=m.n_steps()).map(|k| m.l2_norm(k)).fold(0.0, f64::max),
        converged: true,
        ..RunDiagnostics::default()
    }
}

fn mfg_measured(
    dx: f64,
    sol: &MfgSolution,
    problem: &MfgProblem,
    truth_v0: Vec<f64>,
    truth_dv0: Vec<f64>,
    truth_mt: Vec<f64>,
) -> Measured {
    let grid = problem.grid.clone();
    let v0 = sol.value.slice(0).to_vec();
    let dv0: Vec<f64> = numerical_gradient(&v0, &grid, sol.value.extension)
        .iter()
        .map(|g| g[0])
        .collect();
    let m_t = sol.density.last().to_vec();
    let mut diagnostics = density_diagnostics(dx, &sol.density);
    diagnostics.mass_drift = sol.max_mass_drift;
    diagnostics.converged = sol.converged;
    diagnostics.increments = sol.increments.clone();
    diagnostics.control_radius = problem.controls.radius;
    diagnostics.max_control_ratio = sol.records.iter().map(|r| r.max_control_ratio).fold(0.0, f64::max);
    let plot = PlotData {
        dx,
        dim: grid.dim(),
        x: (0..grid.len()).map(|i| grid.node(i)).collect(),
        m_t: m_t.clone(),
        m_exact_t: truth_mt.clone(),
        v_0: v0.clone(),
        v_exact_0: truth_v0.clone(),
    };
    Measured {
        dt: problem.dt(),
        iterations: sol.iterations,
        positivity: positivity_error(&sol.density),
        fields: vec![("v", v0, truth_v0), ("dv", dv0, truth_dv0), ("m", m_t, truth_mt)],
        plot,
        diagnostics,
        grid,
    }
}

fn run_lq(config: &StudyConfig, dx: f64) -> Result<Measured> {
    let params = lq_parameters(config);
    let problem = lq_problem(config, dx)?;
    let sol = mfg_solve(&problem)?;
    let g = &problem.grid;
    let t = config.horizon;
    Ok(mfg_measured(
        dx,
        &sol,
        &problem,
        g.sample(|x| params.exact_value(0.0, x)),
        g.sample(|x| params.exact_gradient(0.0, x)[0]),
        g.sample(|x| params.exact_density(t, x)),
        ))
}

fn run_local(config: &StudyConfig, dx: f64, reference: &ReferenceSolution) -> Result<Measured> {
    let problem = local_problem(config, dx, config.dt_rule)?;
    let sol = mfg_solve(&problem)?;
    let (v, dv, m) = reference.sample_on(&problem.grid);
    Ok(mfg_measured(dx, &sol, &problem, v, dv, m))
}

pub fn ou_process(config: &StudyConfig) -> OuProcess {
    OuProcess {
        theta: config.ou_theta,
        centre: 0.0,
        sigma: config.sigma(),
        mean0: config.mean0,
        var0: config.var0,
    }
}

fn run_ou(config: &StudyConfig, dx: f64) -> Result<Measured> {
    let ou = ou_process(config);
    let grid = config.grid(dx)?;
    let n = steps_for(config.horizon, config.dt_rule.dt(dx));
    let dt = config.horizon / n as f64;
    let drift = FnDrift::with_lipschitz(move |_t, x: Point| [ou.drift(x[0]), 0.0], ou.theta);
    let init = move |x: Point| ou.density(0.0, x);
    let m = fp_solve(&FpProblem {
        grid: &grid,
        sigma: config.sigma(),
        dt,
        n_steps: n,
        drift: &drift,
        initial: &init,
        mode: config.fp_mode,
        boundary: FpBoundary::Dirichlet,
        solver: CnSolver::default(),
    })?;
    let truth = grid.sample(|x| ou.density(config.horizon, x));
    let plot = PlotData {
        dx,
        dim: 1,
        x: (0..grid.len()).map(|i| grid.node(i)).collect(),
        m_t: m.last().to_vec(),
        m_exact_t: truth.clone(),
        ..PlotData::default()
    };
    Ok(Measured {
        dt,
        iterations: 1,
        positivity: positivity_error(&m),
        fields: vec![("m", m.last().to_vec(), truth)],
        plot,
        diagnostics: density_diagnostics(dx, &m),
        grid,
    })
}

fn field_names(test: TestId) -> &'static [&'static str] {
    match test {
        TestId::FpOnlyOu => &["m"],
        _ => &["v", "dv", "m"],
    }
}

/// Runs every refinement of the configured study. A failing row is recorded
/// with its error message and the study continues.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let reference = if config.test == TestId::Local1d {
        Some(local_reference(config)?)
    } else {
        None
    };
    let names = field_names(config.test);
    let mut fields: Vec<FieldReport> = names.iter().map(|n| FieldReport::new(n)).collect();
    let mut plots = Vec::new();
    let mut diagnostics = Vec::new();
    for &dx in &config.dx_list {
        let start = Instant::now();
        let outcome = match config.test {
            TestId::Lq1d | TestId::Lq2d => run_lq(config, dx),
            TestId::Local1d => run_local(config, dx, reference.as_ref().expect("reference computed above")),
            TestId::FpOnlyOu => run_ou(config, dx),
        };
        let wall = start.elapsed().as_secs_f64();
        match outcome.and_then(|m| score(m, wall)) {
            Ok((rows, plot, diag)) => {
                for (f, r) in fields.iter_mut().zip(rows) {
                    f.rows.push(r);
                }
                plots.push(plot);
                diagnostics.push(diag);
            }
            Err(e) => {
                log::error!("{} dx = {dx:e} failed: {e}", config.test);
                let dt = config.dt_rule.dt(dx);
                for f in fields.iter_mut() {
                    f.rows.push(ReportRow::failed(dx, dt, e.to_string(), wall));
                }
            }
        }
    }
    for f in fields.iter_mut() {
        let dxs: Vec<f64> = f.rows.iter().map(|r| r.dx).collect();
        let p_inf = rates(&f.e_inf(), &dxs);
        let p_2 = rates(&f.e_2(), &dxs);
        for (r, (a, b)) in f.rows.iter_mut().zip(p_inf.into_iter().zip(p_2)) {
            r.p_inf = a;
            r.p_2 = b;
        }
    }
    Ok(ConvergenceReport {
        test: config.test,
        fields,
        plots,
        diagnostics,
    })
}

fn score(m: Measured, wall: f64) -> Result<(Vec<ReportRow>, PlotData, RunDiagnostics)> {
    let mut rows = Vec::new();
    for (_, approx, truth) in &m.fields {
        let e = error_metrics(approx, truth, &m.grid)?;
        rows.push(ReportRow {
            dx: m.grid.dx(),
            dt: m.dt,
            e_inf: e.e_inf,
            e_2: e.e_2,
            p_inf: None,
            p_2: None,
            positivity_error: m.positivity,
            iterations: m.iterations,
            wall_time_s: wall,
            failure: None,
        });
    }
    Ok((rows, m.plot, m.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson_integrate;

    #[test]
    fn local_initial_density_has_unit_mass() {
        let g = UniformGrid::new(1, 0.0, 1.0, 1.0 / 400.0).unwrap();
        let m = g.sample(local_initial_density);
        assert!((simpson_integrate(&m, &g) - 1.0).abs() < 1e-6);
        assert_eq!(local_initial_density([0.1, 0.0]), 0.0);
        assert!((local_initial_density([0.5, 0.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reference_cache_round_trip() {
        let g = UniformGrid::new(1, 0.0, 1.0, 0.1).unwrap();
        let r = ReferenceSolution {
            grid: g.clone(),
            v0: g.sample(|x| x[0].sin()),
            dv0: g.sample(|x| x[0].cos()),
            m_t: g.sample(|x| 1.0 / 3.0 + x[0]),
        };
        let text = r.to_text("abc");
        assert_eq!(ReferenceSolution::from_text(&text, "abc", &g), Some(r));
        assert_eq!(ReferenceSolution::from_text(&text, "abd", &g), None);
    }

    #[test]
    fn ou_study_rows_and_rates() {
        let mut cfg = StudyConfig::defaults(TestId::FpOnlyOu);
        cfg.dx_list = vec![0.2, 0.1];
        let rep = run_study(&cfg).unwrap();
        let m = rep.field("m").unwrap();
        assert_eq!(m.rows.len(), 2);
        assert!(m.rows[0].p_2.is_none() && m.rows[1].p_2.unwrap() > 1.5);
    }

    #[test]
    fn failing_row_is_recorded() {
        let mut cfg = StudyConfig::defaults(TestId::FpOnlyOu);
        cfg.dx_list = vec![0.2, 0.1];
        cfg.horizon = 0.05;
        // a NaN drift makes every characteristic fail to converge
        cfg.ou_theta = f64::NAN;
        let rep = run_study(&cfg).unwrap();
        let m = rep.field("m").unwrap();
        assert!(m.rows.iter().all(|r| r.failure.is_some()));
    }
}
