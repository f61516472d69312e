//! Semi-Lagrangian scheme for
//! `-dv/dt - (sigma^2/2) Lap v + |grad v|^2 / 2 = F(x, mu(t))`, `v(T) = G`.
//!
//! The discrete operator minimises, over controls in the ball of radius `R`,
//! the stencil average of the interpolated value at the foot points
//! `x_i - dt a + sqrt(dt) sigma e^l`, plus trapezoidal running costs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{interpolate, Extension};
use crate::characteristics::{build_stencil, StochasticStencil};
use crate::error::{Error, Result};
use crate::grid::{Point, UniformGrid};

/// Admissible controls `{|a| <= radius}` and the nested grid search used to
/// minimise over them.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    pub radius: f64,
    /// Points per axis of the initial grid over `[-R, R]^d`.
    pub coarse_points: usize,
    /// Number of local refinement rounds around the incumbent.
    pub rounds: usize,
    /// Points per axis of each local grid.
    pub refine_points: usize,
    /// Factor applied to the half-width of the search window every round.
    pub shrink: f64,
}

impl Default for ControlSet {
    fn default() -> Self {
        Self {
            radius: 2.0,
            coarse_points: 15,
            rounds: 6,
            refine_points: 5,
            shrink: 0.25,
        }
    }
}

impl ControlSet {
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius,
            ..Self::default()
        }
    }

    /// Default radius from the a-priori bound `|grad v| <= |grad G| + T sup |grad F|`,
    /// inflated by `safety`.
    pub fn radius_from_bound(grad_terminal: f64, horizon: f64, grad_running: f64, safety: f64) -> f64 {
        (safety * (grad_terminal + horizon * grad_running)).max(1e-3)
    }

    /// Nested grid search. Returns the best control and objective value; the
    /// incumbent is always kept, so extra rounds never increase the minimum.
    pub fn minimize(&self, dim: usize, mut objective: impl FnMut(Point) -> f64) -> (Point, f64) {
        let r = self.radius;
        let r2 = r * r * (1.0 + 1e-12);
        let mut best = [0.0; 2];
        let mut best_val = f64::INFINITY;
        let mut visit = |a: Point, best: &mut Point, best_val: &mut f64| {
            if a[0] * a[0] + a[1] * a[1] > r2 {
                return;
            }
            let v = objective(a);
            if v < *best_val {
                *best_val = v;
                *best = a;
            }
        };
        let axis = |center: f64, half: f64, n: usize| -> Vec<f64> {
            if n <= 1 {
                return vec![center];
            }
            (0..n)
                .map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64)
                .collect()
        };
        let sweep = |center: Point, half: f64, n: usize, best: &mut Point, best_val: &mut f64, visit: &mut dyn FnMut(Point, &mut Point, &mut f64)| {
            let xs = axis(center[0], half, n);
            if dim == 1 {
                for &a0 in &xs {
                    visit([a0, 0.0], best, best_val);
                }
            } else {
                let ys = axis(center[1], half, n);
                for &a1 in &ys {
                    for &a0 in &xs {
                        visit([a0, a1], best, best_val);
                    }
                }
            }
        };
        sweep([0.0; 2], r, self.coarse_points, &mut best, &mut best_val, &mut visit);
        let mut half = r;
        for _ in 0..self.rounds {
            half *= self.shrink;
            let center = best;
            sweep(center, half, self.refine_points, &mut best, &mut best_val, &mut visit);
        }
        (best, best_val)
    }
}

/// Running cost `F(x, mu(t_k))`.
#[derive(Clone)]
pub enum Coupling {
    Zero,
    /// `F = |x - mean_k|^2 / 2` with `mean_k` the first moment at slice `k`.
    NonlocalMoment { means: Vec<Point> },
    /// `F = w m0*(x) - min(cap, m_k(x))`.
    LocalPointwise {
        grid: UniformGrid,
        density: Vec<Vec<f64>>,
        extension: Extension,
        reference: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
        reference_weight: f64,
        cap: f64,
    },
}

impl std::fmt::Debug for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coupling::Zero => write!(f, "Zero"),
            Coupling::NonlocalMoment { means } => write!(f, "NonlocalMoment({} slices)", means.len()),
            Coupling::LocalPointwise { density, cap, .. } => {
                write!(f, "LocalPointwise({} slices, cap {cap})", density.len())
            }
        }
    }
}

impl Coupling {
    #[inline]
    pub fn eval(&self, k: usize, x: Point) -> f64 {
        match self {
            Coupling::Zero => 0.0,
            Coupling::NonlocalMoment { means } => {
                let m = means[k];
                0.5 * ((x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2))
            }
            Coupling::LocalPointwise {
                grid,
                density,
                extension,
                reference,
                reference_weight,
                cap,
            } => {
                let m = if *extension == Extension::ZeroPad && !grid.contains(x) {
                    0.0
                } else {
                    interpolate(&density[k], x, grid, *extension)
                };
                reference_weight * reference(x) - cap.min(m)
            }
        }
    }

    /// `F` at grid node `node` of slice `k` (nodal density value, no interpolation).
    #[inline]
    pub fn eval_node(&self, k: usize, node: usize, x: Point) -> f64 {
        match self {
            Coupling::LocalPointwise {
                density,
                reference,
                reference_weight,
                cap,
                ..
            } => reference_weight * reference(x) - cap.min(density[k][node]),
            _ => self.eval(k, x),
        }
    }
}

/// Boundary treatment of the value function.
#[derive(Clone)]
pub enum HjbBoundary {
    /// Boundary nodes take the supplied values `g(t_k, x_i)`; interior foot
    /// points near the boundary use one-sided stencils.
    Dirichlet(Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>),
    /// Homogeneous Neumann by even reflection.
    Neumann,
    /// No boundary data; one-sided stencils everywhere.
    Extrapolate,
}

impl std::fmt::Debug for HjbBoundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HjbBoundary::Dirichlet(_) => write!(f, "Dirichlet"),
            HjbBoundary::Neumann => write!(f, "Neumann"),
            HjbBoundary::Extrapolate => write!(f, "Extrapolate"),
        }
    }
}

impl HjbBoundary {
    pub fn extension(&self) -> Extension {
        match self {
            HjbBoundary::Neumann => Extension::Reflect,
            _ => Extension::Clamp,
        }
    }
}

/// Everything the discrete operator needs besides the data at `t_{k+1}`.
pub struct SlScheme<'a> {
    pub grid: &'a UniformGrid,
    pub dt: f64,
    pub sigma: f64,
    pub stencil: &'a StochasticStencil,
    pub controls: &'a ControlSet,
    pub coupling: &'a Coupling,
    pub extension: Extension,
}

/// Value of the discrete operator and its minimising control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlValue {
    pub value: f64,
    pub control: Point,
}

/// `S[mu](f, k, i)`.
pub fn sl_operator(f_next: &[f64], k: usize, i: usize, scheme: &SlScheme<'_>) -> SlValue {
    let grid = scheme.grid;
    let x = grid.node(i);
    let dt = scheme.dt;
    let noise = dt.sqrt() * scheme.sigma;
    let half_dt = 0.5 * dt;
    let has_cost = !matches!(scheme.coupling, Coupling::Zero);
    let objective = |a: Point| {
        let base = [x[0] - dt * a[0], x[1] - dt * a[1]];
        let mut acc = 0.0;
        for (e, w) in scheme.stencil.iter() {
            let z = [base[0] + noise * e[0], base[1] + noise * e[1]];
            let mut v = interpolate(f_next, z, grid, scheme.extension);
            if has_cost {
                v += half_dt * scheme.coupling.eval(k + 1, z);
            }
            acc += w * v;
        }
        acc + half_dt * (a[0] * a[0] + a[1] * a[1])
    };
    let (control, best) = scheme.controls.minimize(grid.dim(), objective);
    let value = best + half_dt * scheme.coupling.eval_node(k, i, x);
    SlValue { value, control }
}

/// Nodal values `v[k][i]` of the discrete value function.
#[derive(Clone, Debug)]
pub struct ValueField {
    pub grid: UniformGrid,
    pub dt: f64,
    pub slices: Vec<Vec<f64>>,
    /// Boundary completion used for interpolation and differencing.
    pub extension: Extension,
    /// Largest `|a*| / R` over all interior nodes and steps.
    pub max_control_ratio: f64,
}

impl ValueField {
    pub fn n_steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }

    /// `v_Delta(t, x) = I[v_{floor(t/dt)}](x)`.
    pub fn value_at(&self, t: f64, x: Point) -> f64 {
        let k = slice_index(t, self.dt, self.n_steps());
        interpolate(&self.slices[k], x, &self.grid, self.extension)
    }

    /// Fourth-order nodal gradient of slice `k`.
    pub fn gradient(&self, k: usize) -> Vec<Point> {
        numerical_gradient(&self.slices[k], &self.grid, self.extension)
    }
}

/// Index of the time slice containing `t` (`floor(t/dt)`, robust to rounding).
#[inline]
pub fn slice_index(t: f64, dt: f64, n_steps: usize) -> usize {
    let s = t / dt;
    let k = (s + 1e-9 * (1.0 + s)).floor();
    (k.max(0.0) as usize).min(n_steps)
}

/// Data of one backward sweep.
pub struct HjbProblem<'a> {
    pub grid: &'a UniformGrid,
    pub sigma: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub controls: &'a ControlSet,
    pub coupling: &'a Coupling,
    /// `G(x_i, mu(T))` at every node.
    pub terminal: Vec<f64>,
    pub boundary: HjbBoundary,
}

/// Backward sweep `v_k = S[mu](v_{k+1}, k, .)` from `v_N = G`.
pub fn hjb_solve(problem: &HjbProblem<'_>) -> Result<ValueField> {
    let grid = problem.grid;
    if problem.terminal.len() != grid.len() {
        return Err(Error::Shape(format!(
            "terminal data of length {} on {} nodes",
            problem.terminal.len(),
            grid.len()
        )));
    }
    let stencil = build_stencil(grid.dim())?;
    let extension = problem.boundary.extension();
    let scheme = SlScheme {
        grid,
        dt: problem.dt,
        sigma: problem.sigma,
        stencil: &stencil,
        controls: problem.controls,
        coupling: problem.coupling,
        extension,
    };
    let n = problem.n_steps;
    let mut slices = vec![Vec::new(); n + 1];
    slices[n] = problem.terminal.clone();
    let mut max_ratio: f64 = 0.0;
    for k in (0..n).rev() {
        let t_k = k as f64 * problem.dt;
        let next = &slices[k + 1];
        let results: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| match &problem.boundary {
                HjbBoundary::Dirichlet(g) if grid.is_boundary(i) => (g(t_k, grid.node(i)), 0.0),
                _ => {
                    let r = sl_operator(next, k, i, &scheme);
                    (r.value, r.control[0].hypot(r.control[1]))
                }
            })
            .collect();
        let radius = problem.controls.radius;
        slices[k] = results
            .iter()
            .map(|&(v, a)| {
                max_ratio = max_ratio.max(a / radius);
                v
            })
            .collect();
    }
    Ok(ValueField {
        grid: grid.clone(),
        dt: problem.dt,
        slices,
        extension,
        max_control_ratio: max_ratio,
    })
}

/// Fourth-order finite-difference gradient at every node.
///
/// Interior nodes use the centred five-point stencil. The two outer nodes on
/// each side use one-sided fourth-order stencils, except under reflection
/// where the even ghost values are used.
pub fn numerical_gradient(v: &[f64], grid: &UniformGrid, ext: Extension) -> Vec<Point> {
    let n = grid.nodes_per_axis();
    let h12 = 12.0 * grid.dx();
    let mut out = vec![[0.0; 2]; grid.len()];
    let lines = if grid.dim() == 1 { 1 } else { n };
    let mut line = vec![0.0; n];
    for axis in 0..grid.dim() {
        for l in 0..lines {
            let at = |i: usize| if axis == 0 { i + n * l } else { l + n * i };
            for (i, f) in line.iter_mut().enumerate() {
                *f = v[at(i)];
            }
            for i in 0..n {
                out[at(i)][axis] = line_derivative(&line, i, ext) / h12;
            }
        }
    }
    out
}

/// `12 h f'(x_i)` along one line.
#[inline]
fn line_derivative(f: &[f64], i: usize, ext: Extension) -> f64 {
    let n = f.len();
    let reflect = ext == Extension::Reflect;
    let get = |j: isize| -> f64 {
        let last = n as isize - 1;
        let j = if j < 0 {
            -j
        } else if j > last {
            2 * last - j
        } else {
            j
        };
        f[j as usize]
    };
    if (i >= 2 && i + 2 < n) || reflect {
        let i = i as isize;
        return -get(i + 2) + 8.0 * get(i + 1) - 8.0 * get(i - 1) + get(i - 2);
    }
    match i {
        0 => -25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4],
        1 => -3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4],
        _ if i == n - 1 => {
            25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]
        }
        _ => 3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5],
    }
}
