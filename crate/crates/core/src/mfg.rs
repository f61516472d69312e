//! Forward-backward fixed point for the coupled system.

use std::sync::Arc;
use std::time::Instant;

use crate::basis::{for_each_weight, Extension};
use crate::characteristics::{build_stencil, CnSolver, Drift, ZeroDrift};
use crate::error::{Error, Result};
use crate::fp::{
    assemble_mass_matrix, fp_solve_from, initial_coefficients, DensityField, FpBoundary, FpMode, FpProblem,
    MassQuadrature, EXACT_MASS_POINTS,
};
use crate::grid::{Point, UniformGrid};
use crate::hjb::{hjb_solve, numerical_gradient, slice_index, ControlSet, Coupling, HjbBoundary, HjbProblem, ValueField};
use crate::quadrature::{simpson_integrate, simpson_integrate_map};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Form of the running cost `F(x, m)`.
#[derive(Clone)]
pub enum CouplingSpec {
    Zero,
    /// `|x - int y m(t, y) dy|^2 / 2`.
    NonlocalMoment,
    /// `weight * reference(x) - min(cap, m(t, x))`.
    LocalPointwise {
        reference: ScalarFn,
        reference_weight: f64,
        cap: f64,
    },
}

impl std::fmt::Debug for CouplingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CouplingSpec::Zero => write!(f, "Zero"),
            CouplingSpec::NonlocalMoment => write!(f, "NonlocalMoment"),
            CouplingSpec::LocalPointwise { reference_weight, cap, .. } => {
                write!(f, "LocalPointwise(weight {reference_weight}, cap {cap})")
            }
        }
    }
}

/// Fully specified coupled problem on a fixed grid and time step.
#[derive(Clone)]
pub struct MfgProblem {
    pub grid: UniformGrid,
    pub sigma: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub coupling: CouplingSpec,
    /// Terminal cost `G(x)`.
    pub terminal: ScalarFn,
    /// Initial density `m0*`.
    pub initial: ScalarFn,
    pub hjb_boundary: HjbBoundary,
    pub fp_boundary: FpBoundary,
    pub fp_mode: FpMode,
    pub controls: ControlSet,
    pub solver: CnSolver,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relaxation `m <- (1 - d) m + d FP(m)`; `1` is plain Picard.
    pub damping: f64,
}

impl MfgProblem {
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// Number of steps for a target step `dt`: `ceil(T / dt)`, so the actual step
/// `T / N` never exceeds the target.
pub fn steps_for(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// One outer iteration, as logged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `max_k int |m^{n+1}_k - m^n_k|`.
    pub increment: f64,
    pub wall_time_s: f64,
    /// Largest `|a*| / R` seen in the backward sweep.
    pub max_control_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct MfgSolution {
    pub value: ValueField,
    pub density: DensityField,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
    /// Largest nodal mass drift over all density iterates.
    pub max_mass_drift: f64,
}

/// Drift `b(t, x) = -grad v(t_k, x)`, `k = floor(t / dt)`, interpolating
/// nodal fourth-order gradients with the cubic basis.
pub struct GradientDrift {
    grid: UniformGrid,
    dt: f64,
    gradients: Vec<Vec<Point>>,
}

impl GradientDrift {
    pub fn gradient_at(&self, t: f64, x: Point) -> Point {
        let k = slice_index(t, self.dt, self.gradients.len() - 1);
        let g = &self.gradients[k];
        let mut out = [0.0; 2];
        // nodal gradients are odd under reflection, so extrapolate instead
        for_each_weight(x, &self.grid, Extension::Clamp, |i, w| {
            out[0] += w * g[i][0];
            out[1] += w * g[i][1];
        });
        out
    }

    pub fn nodal_gradient(&self, k: usize) -> &[Point] {
        &self.gradients[k]
    }
}

impl Drift for GradientDrift {
    fn eval(&self, t: f64, x: Point) -> Point {
        let g = self.gradient_at(t, x);
        [-g[0], -g[1]]
    }
}

pub fn mfg_drift_from_value(v: &ValueField) -> GradientDrift {
    GradientDrift {
        grid: v.grid.clone(),
        dt: v.dt,
        gradients: (0..=v.n_steps()).map(|k| v.gradient(k)).collect(),
    }
}

/// Running cost built from the current density iterate.
pub fn coupling_from_density(spec: &CouplingSpec, m: &DensityField, boundary: FpBoundary) -> Coupling {
    match spec {
        CouplingSpec::Zero => Coupling::Zero,
        CouplingSpec::NonlocalMoment => {
            let grid = &m.grid;
            let coords: Vec<Point> = (0..grid.len()).map(|i| grid.node(i)).collect();
            let means = m
                .slices
                .iter()
                .map(|s| {
                    let mut mean = [0.0; 2];
                    for (a, slot) in mean.iter_mut().enumerate().take(grid.dim()) {
                        let weighted: Vec<f64> = s.iter().zip(&coords).map(|(v, x)| v * x[a]).collect();
                        *slot = simpson_integrate(&weighted, grid);
                    }
                    mean
                })
                .collect();
            Coupling::NonlocalMoment { means }
        }
        CouplingSpec::LocalPointwise {
            reference,
            reference_weight,
            cap,
        } => {
            let r = reference.clone();
            Coupling::LocalPointwise {
                grid: m.grid.clone(),
                density: m.slices.clone(),
                extension: boundary.extension(),
                reference: Arc::new(move |x| r(x)),
                reference_weight: *reference_weight,
                cap: *cap,
            }
        }
    }
}

/// `max_k int |a_k - b_k|` with Simpson quadrature.
pub fn max_l1_increment(a: &DensityField, b: &DensityField) -> f64 {
    a.slices
        .iter()
        .zip(&b.slices)
        .map(|(x, y)| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            simpson_integrate_map(&diff, &a.grid, f64::abs)
        })
        .fold(0.0, f64::max)
}

/// Control radius from the a-priori gradient bound, with `grad G` and
/// `grad F(., m0)` estimated on the nodes.
pub fn estimate_radius(problem: &MfgProblem, safety: f64) -> f64 {
    let grid = &problem.grid;
    let ext = problem.hjb_boundary.extension();
    let sup = |f: &[f64]| {
        numerical_gradient(f, grid, ext)
            .iter()
            .map(|g| g[0].hypot(g[1]))
            .fold(0.0, f64::max)
    };
    let g = grid.sample(|x| (problem.terminal)(x));
    let m0 = grid.sample(|x| (problem.initial)(x));
    let f = match &problem.coupling {
        CouplingSpec::Zero => vec![0.0; grid.len()],
        CouplingSpec::NonlocalMoment => {
            let field = DensityField {
                grid: grid.clone(),
                dt: problem.dt(),
                slices: vec![m0],
                lost_mass: vec![],
            };
            let c = coupling_from_density(&problem.coupling, &field, problem.fp_boundary);
            grid.sample(|x| c.eval(0, x))
        }
        CouplingSpec::LocalPointwise {
            reference,
            reference_weight,
            cap,
        } => m0
            .iter()
            .enumerate()
            .map(|(i, m)| reference_weight * reference(grid.node(i)) - cap.min(*m))
            .collect(),
    };
    ControlSet::radius_from_bound(sup(&g), problem.horizon, sup(&f), safety)
}

/// Alternates backward HJB and forward FP sweeps until the density iterates
/// settle below the tolerance.
pub fn mfg_solve(problem: &MfgProblem) -> Result<MfgSolution> {
    let grid = &problem.grid;
    if !(problem.damping > 0.0 && problem.damping <= 1.0) {
        return Err(Error::Config(format!("damping {} outside (0, 1]", problem.damping)));
    }
    let dt = problem.dt();
    let stencil = build_stencil(grid.dim())?;
    let mass = assemble_mass_matrix(
        grid,
        match problem.fp_mode {
            FpMode::Simpson => MassQuadrature::Simpson,
            FpMode::ExactGauss { .. } => MassQuadrature::Gauss(EXACT_MASS_POINTS),
        },
    )?;
    let initial = |x: Point| (problem.initial)(x);
    let m_init = initial_coefficients(grid, &initial, problem.fp_mode, &mass);
    let fp_with = |drift: &dyn Drift| {
        let fp = FpProblem {
            grid,
            sigma: problem.sigma,
            dt,
            n_steps: problem.n_steps,
            drift,
            initial: &initial,
            mode: problem.fp_mode,
            boundary: problem.fp_boundary,
            solver: problem.solver,
        };
        fp_solve_from(&fp, &stencil, &mass, m_init.clone())
    };
    let terminal_of = |_m: &DensityField| grid.sample(|x| (problem.terminal)(x));

    let mut density = fp_with(&ZeroDrift)?;
    let mut max_mass_drift = density.max_relative_mass_drift();
    let mut increments = Vec::new();
    let mut records = Vec::new();
    let mut converged = false;
    let mut value = None;
    for iteration in 1..=problem.max_iterations {
        let start = Instant::now();
        let coupling = coupling_from_density(&problem.coupling, &density, problem.fp_boundary);
        let v = hjb_solve(&HjbProblem {
            grid,
            sigma: problem.sigma,
            dt,
            n_steps: problem.n_steps,
            controls: &problem.controls,
            coupling: &coupling,
            terminal: terminal_of(&density),
            boundary: problem.hjb_boundary.clone(),
        })?;
        drop(coupling);
        let drift = mfg_drift_from_value(&v);
        let mut next = fp_with(&drift)?;
        drop(drift);
        if problem.damping < 1.0 {
            for (n, o) in next.slices.iter_mut().zip(&density.slices) {
                for (a, b) in n.iter_mut().zip(o) {
                    *a = problem.damping * *a + (1.0 - problem.damping) * b;
                }
            }
        }
        max_mass_drift = max_mass_drift.max(next.max_relative_mass_drift());
        let inc = max_l1_increment(&next, &density);
        let record = IterationRecord {
            iteration,
            increment: inc,
            wall_time_s: start.elapsed().as_secs_f64(),
            max_control_ratio: v.max_control_ratio,
        };
        log::info!(
            "outer iteration {iteration}: increment {inc:.3e}, {:.2}s, max |a|/R {:.3}",
            record.wall_time_s,
            record.max_control_ratio
        );
        records.push(record);
        increments.push(inc);
        density = next;
        value = Some(v);
        if inc < problem.tolerance {
            converged = true;
            break;
        }
    }
    let value = value.ok_or_else(|| Error::Config("max_iterations must be at least 1".into()))?;
    Ok(MfgSolution {
        value,
        density,
        iterations: increments.len(),
        increments,
        converged,
        records,
        max_mass_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::FnDrift;
    use crate::fp::fp_solve;
    use crate::test_util::gaussian_1d;

    fn base(grid: UniformGrid, coupling: CouplingSpec) -> MfgProblem {
        MfgProblem {
            grid,
            sigma: 0.3,
            horizon: 0.1,
            n_steps: 10,
            coupling,
            terminal: Arc::new(|_| 0.0),
            initial: Arc::new(|x| gaussian_1d(x[0], 0.0, 0.1)),
            hjb_boundary: HjbBoundary::Extrapolate,
            fp_boundary: FpBoundary::Dirichlet,
            fp_mode: FpMode::Simpson,
            controls: ControlSet::with_radius(1.0),
            solver: CnSolver::default(),
            tolerance: 1e-10,
            max_iterations: 10,
            damping: 1.0,
        }
    }

    #[test]
    fn zero_coupling_decouples() {
        let g = UniformGrid::new(1, -2.0, 2.0, 0.1).unwrap();
        let p = base(g.clone(), CouplingSpec::Zero);
        let sol = mfg_solve(&p).unwrap();
        assert!(sol.converged && sol.iterations <= 2);
        assert!(sol.value.slices.iter().flatten().all(|&v| v == 0.0));
        let init = |x: Point| gaussian_1d(x[0], 0.0, 0.1);
        let pure = fp_solve(&FpProblem {
            grid: &g,
            sigma: 0.3,
            dt: 0.01,
            n_steps: 10,
            drift: &ZeroDrift,
            initial: &init,
            mode: FpMode::Simpson,
            boundary: FpBoundary::Dirichlet,
            solver: CnSolver::default(),
        })
        .unwrap();
        assert_eq!(pure.slices, sol.density.slices);
    }

    #[test]
    fn constant_value_gives_zero_drift() {
        let g = UniformGrid::new(1, -1.0, 1.0, 0.1).unwrap();
        let v = ValueField {
            grid: g.clone(),
            dt: 0.1,
            slices: vec![vec![3.0; g.len()]; 3],
            extension: Extension::Clamp,
            max_control_ratio: 0.0,
        };
        let d = mfg_drift_from_value(&v);
        for x in [-0.95, 0.0, 0.33] {
            let b = d.eval(0.15, [x, 0.0]);
            assert!(b[0].abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_value_drives_ou_density() {
        let g = UniformGrid::new(1, -2.0, 2.0, 0.05).unwrap();
        let (n, dt) = (40, 0.01);
        let v = ValueField {
            grid: g.clone(),
            dt,
            slices: vec![g.sample(|x| 0.5 * x[0] * x[0]); n + 1],
            extension: Extension::Clamp,
            max_control_ratio: 0.0,
        };
        let drift = mfg_drift_from_value(&v);
        for x in [-1.9, -0.3, 0.7, 2.0] {
            assert!((drift.eval(0.2, [x, 0.0])[0] + x).abs() < 1e-10);
        }
        let sigma = 0.4;
        let init = |x: Point| gaussian_1d(x[0], 0.3, 0.05);
        let m = fp_solve(&FpProblem {
            grid: &g,
            sigma,
            dt,
            n_steps: n,
            drift: &drift,
            initial: &init,
            mode: FpMode::Simpson,
            boundary: FpBoundary::Dirichlet,
            solver: CnSolver::default(),
        })
        .unwrap();
        let ou = crate::oracle::OuProcess {
            theta: 1.0,
            centre: 0.0,
            sigma,
            mean0: 0.3,
            var0: 0.05,
        };
        let t = n as f64 * dt;
        let second: Vec<f64> = (0..g.len()).map(|i| m.last()[i] * g.coord(i).powi(2)).collect();
        let exact = ou.variance(t) + ou.mean(t).powi(2);
        assert!((simpson_integrate(&second, &g) - exact).abs() < 5e-4);
    }

    #[test]
    fn nonlocal_coupling_uses_first_moment() {
        let g = UniformGrid::new(1, -2.0, 2.0, 0.05).unwrap();
        let field = DensityField {
            grid: g.clone(),
            dt: 0.1,
            slices: vec![g.sample(|x| gaussian_1d(x[0], 0.25, 0.05))],
            lost_mass: vec![],
        };
        let c = coupling_from_density(&CouplingSpec::NonlocalMoment, &field, FpBoundary::Dirichlet);
        match &c {
            Coupling::NonlocalMoment { means } => assert!((means[0][0] - 0.25).abs() < 1e-9),
            _ => unreachable!(),
        }
        assert!((c.eval(0, [1.25, 0.0]) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn coupled_iterates_conserve_mass_with_reflection() {
        // homogeneous Dirichlet lets tail mass leave the box, reflection keeps it
        let g = UniformGrid::new(1, -2.0, 2.0, 0.2).unwrap();
        let mut p = base(g, CouplingSpec::NonlocalMoment);
        p.fp_boundary = FpBoundary::Neumann;
        p.initial = Arc::new(|x| gaussian_1d(x[0], 0.1, 0.1));
        p.controls = ControlSet::with_radius(2.0);
        let sol = mfg_solve(&p).unwrap();
        assert!(sol.converged);
        assert!(sol.max_mass_drift < 1e-12, "{}", sol.max_mass_drift);
        assert!(sol.increments.last().unwrap() < &p.tolerance);
    }

    #[test]
    fn steps_round_up() {
        assert_eq!(steps_for(1.0, 0.25), 4);
        assert_eq!(steps_for(1.0, 0.3), 4);
        assert_eq!(steps_for(0.25, 0.25 / 7.0), 7);
    }

    #[test]
    fn affine_value_gives_constant_drift() {
        let g = UniformGrid::new(1, -1.0, 1.0, 0.1).unwrap();
        let v = ValueField {
            grid: g.clone(),
            dt: 0.1,
            slices: vec![g.sample(|x| 0.4 * x[0] - 1.0); 2],
            extension: Extension::Clamp,
            max_control_ratio: 0.0,
        };
        let d = mfg_drift_from_value(&v);
        let f = FnDrift::new(|_t, _x| [-0.4, 0.0]);
        for x in [-1.0, -0.55, 0.0, 0.99] {
            assert!((d.eval(0.05, [x, 0.0])[0] - f.eval(0.05, [x, 0.0])[0]).abs() < 1e-12);
        }
    }
}
