//! Fast invariant checks behind `mfglg verify`.

use crate::basis::{interpolate, reference_basis_eval, Extension};
use crate::characteristics::{build_stencil, cn_step, CnSolver, FnDrift, ZeroDrift};
use crate::fp::{assemble_transport, FpBoundary, FpMode};
use crate::grid::UniformGrid;
use crate::harness::metrics::{error_metrics, rates};
use crate::hjb::{numerical_gradient, sl_operator, ControlSet, Coupling, SlScheme};
use crate::oracle::{riccati_pi, LqParameters};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check {
        name,
        passed: value <= bound,
        detail: format!("{value:.3e} <= {bound:.0e}"),
    }
}

fn basis_checks() -> Vec<Check> {
    let card = (-3..=3)
        .map(|k| (reference_basis_eval(k as f64) - if k == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let g = UniformGrid::new(2, -1.0, 1.0, 0.125).unwrap();
    let ones = vec![1.0; g.len()];
    let cubic = g.sample(|x| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 0.5);
    let mut pou: f64 = 0.0;
    let mut repro: f64 = 0.0;
    for a in 0..40 {
        for b in 0..40 {
            let x = [-0.9 + 0.0451 * a as f64, -0.9 + 0.0449 * b as f64];
            pou = pou.max((interpolate(&ones, x, &g, Extension::Clamp) - 1.0).abs());
            let exact = x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 0.5;
            repro = repro.max((interpolate(&cubic, x, &g, Extension::Clamp) - exact).abs());
        }
    }
    vec![
        check("basis cardinality", card, 1e-15),
        check("partition of unity", pou, 1e-13),
        check("cubic reproduction", repro, 1e-12),
    ]
}

fn stencil_checks() -> Vec<Check> {
    let s = build_stencil(2).unwrap();
    let gauss = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0];
    let worst = (0..2)
        .flat_map(|axis| (0..6).map(move |p| (axis, p)))
        .map(|(axis, p)| (s.moment(axis, p as i32) - gauss[p]).abs())
        .fold(0.0, f64::max);
    let weights = (s.weights().iter().sum::<f64>() - 1.0).abs();
    vec![
        check("stencil Gaussian moments", worst, 1e-13),
        check("stencil weights sum", weights, 1e-15),
    ]
}

fn characteristic_checks() -> Vec<Check> {
    let solver = CnSolver::default();
    let (dt, sigma) = (0.01, 0.3);
    let e = [3f64.sqrt(), 0.0];
    let y = cn_step(&ZeroDrift, 0.0, dt, sigma, [0.2, 0.0], e, &solver).unwrap();
    let zero = (y[0] - (0.2 + dt.sqrt() * sigma * e[0])).abs();
    let b = 0.7;
    let lin = FnDrift::new(move |_t, x: crate::Point| [-b * x[0], 0.0]);
    let y = cn_step(&lin, 0.0, dt, sigma, [0.5, 0.0], e, &solver).unwrap();
    let exact = ((1.0 - 0.5 * dt * b) * 0.5 + dt.sqrt() * sigma * e[0]) / (1.0 + 0.5 * dt * b);
    vec![
        check("cn_step zero drift", zero, 1e-15),
        check("cn_step linear drift", (y[0] - exact).abs(), 1e-11),
    ]
}

fn transport_checks() -> Vec<Check> {
    let g = UniformGrid::new(1, 0.0, 1.0, 0.05).unwrap();
    let s = build_stencil(1).unwrap();
    let drift = FnDrift::new(|_t, x: crate::Point| [0.5 - x[0], 0.0]);
    let b = assemble_transport(
        &drift,
        0,
        &s,
        &g,
        0.01,
        0.3,
        FpMode::Simpson,
        FpBoundary::Neumann,
        &CnSolver::default(),
    )
    .unwrap();
    let worst = b
        .iter()
        .flat_map(|m| (0..g.len()).map(move |j| (m.column_sum(j) - 1.0).abs()))
        .fold(0.0, f64::max);
    vec![check("transport column sums", worst, 1e-13)]
}

fn hjb_checks() -> Vec<Check> {
    let g = UniformGrid::new(1, -1.0, 1.0, 0.1).unwrap();
    let s = build_stencil(1).unwrap();
    let c = ControlSet::default();
    let dt = 0.01;
    let scheme = SlScheme {
        grid: &g,
        dt,
        sigma: 0.0,
        stencil: &s,
        controls: &c,
        coupling: &Coupling::Zero,
        extension: Extension::Clamp,
    };
    let f = vec![0.4; g.len()];
    let r = sl_operator(&f, 0, 10, &scheme);
    let trivial = (r.value - 0.4).abs() + r.control[0].abs();
    let f = g.sample(|x| 0.6 * x[0]);
    let r = sl_operator(&f, 0, 10, &scheme);
    let affine = (r.value - (f[10] - 0.5 * dt * 0.36)).abs();
    let q = g.sample(|x| x[0].powi(4));
    let d = numerical_gradient(&q, &g, Extension::Clamp);
    let grad = (0..g.len())
        .map(|i| (d[i][0] - 4.0 * g.coord(i).powi(3)).abs())
        .fold(0.0, f64::max);
    vec![
        check("sl_operator constant data", trivial, 1e-14),
        check("sl_operator affine data", affine, 1e-10),
        check("gradient exact on quartics", grad, 1e-11),
    ]
}

fn metric_checks() -> Vec<Check> {
    let g = UniformGrid::new(1, 0.0, 1.0, 0.1).unwrap();
    let t = g.sample(|x| 1.0 + x[0]);
    let two: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
    let e = error_metrics(&two, &t, &g).unwrap();
    let dxs = [0.4, 0.2, 0.1, 0.05];
    let errs: Vec<f64> = dxs.iter().map(|h: &f64| 3.0 * h.powf(2.5)).collect();
    let worst = rates(&errs, &dxs)
        .iter()
        .flatten()
        .map(|p| (p - 2.5).abs())
        .fold(0.0, f64::max);
    vec![
        check("doubled field has unit error", (e.e_inf - 1.0).abs().max((e.e_2 - 1.0).abs()), 1e-14),
        check("rate formula", worst, 1e-10),
    ]
}

fn oracle_checks() -> Vec<Check> {
    let h = 1e-5;
    let mut ode: f64 = 0.0;
    for k in 1..25 {
        let t = 0.01 * k as f64;
        let d = (riccati_pi(t + h, 0.25) - riccati_pi(t - h, 0.25)) / (2.0 * h);
        ode = ode.max((-d + riccati_pi(t, 0.25).powi(2) - 1.0).abs());
    }
    let p = LqParameters::new(0.25, 0.1f64.sqrt(), 1, [0.0; 2], [0.1; 2]);
    let g = UniformGrid::new(1, -3.0, 3.0, 0.01).unwrap();
    let mass = crate::quadrature::simpson_integrate(&g.sample(|x| p.exact_density(0.25, x)), &g);
    vec![
        check("Riccati residual", ode, 1e-6),
        check("exact density mass", (mass - 1.0).abs(), 1e-8),
    ]
}

/// Runs every check; cheap enough for interactive use.
pub fn run_checks() -> Vec<Check> {
    [
        basis_checks(),
        stencil_checks(),
        characteristic_checks(),
        transport_checks(),
        hjb_checks(),
        metric_checks(),
        oracle_checks(),
    ]
    .concat()
}
