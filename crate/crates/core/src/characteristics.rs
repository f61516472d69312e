//! Discrete stochastic characteristics.
//!
//! Brownian increments are replaced by a three-point random variable per
//! axis (`0` with probability 2/3, `±sqrt(3)` with probability 1/6 each),
//! which matches the Gaussian moments up to order five. The deterministic
//! part of the characteristic is advanced by an implicit Crank-Nicolson step
//! solved by Picard iteration.

use crate::error::{Error, Result};
use crate::grid::{Point, UniformGrid};

/// Tensor-product three-point stencil approximating a standard Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticStencil {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

const NODES_1D: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
const WEIGHTS_1D: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

impl StochasticStencil {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// `sum_l w_l (e^l_axis)^power`.
    pub fn moment(&self, axis: usize, power: i32) -> f64 {
        self.iter().map(|(e, w)| w * e[axis].powi(power)).sum()
    }
}

/// Builds the `3^d`-point stencil. Index `l = l0 + 3 l1`.
pub fn build_stencil(dim: usize) -> Result<StochasticStencil> {
    match dim {
        1 => Ok(StochasticStencil {
            dim,
            points: NODES_1D.iter().map(|&e| [e, 0.0]).collect(),
            weights: WEIGHTS_1D.to_vec(),
        }),
        2 => {
            let mut points = Vec::with_capacity(9);
            let mut weights = Vec::with_capacity(9);
            for (e1, w1) in NODES_1D.iter().zip(WEIGHTS_1D) {
                for (e0, w0) in NODES_1D.iter().zip(WEIGHTS_1D) {
                    points.push([*e0, *e1]);
                    weights.push(w0 * w1);
                }
            }
            Ok(StochasticStencil { dim, points, weights })
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Drift field `b(t, x)` of the characteristics.
pub trait Drift: Sync {
    fn eval(&self, t: f64, x: Point) -> Point;

    /// Lipschitz constant in `x`, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Identically zero drift.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn eval(&self, _t: f64, _x: Point) -> Point {
        [0.0; 2]
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Drift given by a closure.
pub struct FnDrift<F> {
    f: F,
    lipschitz: Option<f64>,
}

impl<F: Fn(f64, Point) -> Point + Sync> FnDrift<F> {
    pub fn new(f: F) -> Self {
        Self { f, lipschitz: None }
    }

    pub fn with_lipschitz(f: F, c: f64) -> Self {
        Self { f, lipschitz: Some(c) }
    }
}

impl<F: Fn(f64, Point) -> Point + Sync> Drift for FnDrift<F> {
    fn eval(&self, t: f64, x: Point) -> Point {
        (self.f)(t, x)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Evaluates the inner drift at the projection of `x` onto the grid box.
pub struct Clamped<'a> {
    pub inner: &'a dyn Drift,
    pub grid: &'a UniformGrid,
}

impl Drift for Clamped<'_> {
    fn eval(&self, t: f64, x: Point) -> Point {
        self.inner.eval(t, self.grid.clamp(x))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz()
    }
}

/// Stopping rule of the implicit step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CnSolver {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CnSolver {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

#[inline]
fn picard(b: &dyn Drift, t_next: f64, half_dt: f64, anchor: Point, y: Point) -> Point {
    let by = b.eval(t_next, y);
    [anchor[0] + half_dt * by[0], anchor[1] + half_dt * by[1]]
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// One Crank-Nicolson step of the characteristic started at `x` with noise
/// realisation `e`: the solution `y` of
/// `y = x + dt/2 (b(t_k, x) + b(t_k + dt, y)) + sqrt(dt) sigma e`.
///
/// Picard iteration from the explicit Euler predictor; returns the first
/// iterate whose residual is at most `solver.tol`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn cn_step(
    b: &dyn Drift,
    t_k: f64,
    dt: f64,
    sigma: f64,
    x: Point,
    e: Point,
    solver: &CnSolver,
) -> Result<Point> {
    let bx = b.eval(t_k, x);
    let noise = dt.sqrt() * sigma;
    let half = 0.5 * dt;
    let anchor = [
        x[0] + half * bx[0] + noise * e[0],
        x[1] + half * bx[1] + noise * e[1],
    ];
    let mut y = [x[0] + dt * bx[0] + noise * e[0], x[1] + dt * bx[1] + noise * e[1]];
    let t_next = t_k + dt;
    let mut residual = f64::INFINITY;
    for _ in 0..=solver.max_iter {
        let next = picard(b, t_next, half, anchor, y);
        residual = dist(next, y);
        if residual <= solver.tol {
            return Ok(y);
        }
        y = next;
    }
    Err(Error::CharacteristicNonConvergence {
        point: x,
        iterations: solver.max_iter,
        residual,
    })
}

/// The first `n` Picard iterates of [`cn_step`] (predictor included).
pub fn cn_iterates(b: &dyn Drift, t_k: f64, dt: f64, sigma: f64, x: Point, e: Point, n: usize) -> Vec<Point> {
    let bx = b.eval(t_k, x);
    let noise = dt.sqrt() * sigma;
    let half = 0.5 * dt;
    let anchor = [x[0] + half * bx[0] + noise * e[0], x[1] + half * bx[1] + noise * e[1]];
    let mut y = [x[0] + dt * bx[0] + noise * e[0], x[1] + dt * bx[1] + noise * e[1]];
    let mut out = vec![y];
    for _ in 1..n {
        y = picard(b, t_k + dt, half, anchor, y);
        out.push(y);
    }
    out
}

/// One-step weak functional `sum_l w_l phi(y^l)`.
#[allow(clippy::too_many_arguments)]
pub fn weak_expectation(
    b: &dyn Drift,
    t_k: f64,
    dt: f64,
    sigma: f64,
    x: Point,
    phi: impl Fn(Point) -> f64,
    stencil: &StochasticStencil,
    solver: &CnSolver,
) -> Result<f64> {
    let mut acc = 0.0;
    for (e, w) in stencil.iter() {
        acc += w * phi(cn_step(b, t_k, dt, sigma, x, e, solver)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_points_and_weights() {
        let s = build_stencil(1).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s.points()[0][0] + 3f64.sqrt()).abs() < 1e-15);
        assert!((s.points()[2][0] - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.weights(), &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
        let s2 = build_stencil(2).unwrap();
        assert_eq!(s2.len(), 9);
        assert_eq!(s2.points()[4], [0.0, 0.0]);
        assert!((s2.weights()[4] - 4.0 / 9.0).abs() < 1e-15);
        assert!(build_stencil(3).is_err());
    }

    #[test]
    fn stencil_moments_match_gaussian() {
        let gaussian = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0];
        for d in 1..=2 {
            let s = build_stencil(d).unwrap();
            for axis in 0..d {
                for (p, g) in gaussian.iter().enumerate() {
                    assert!((s.moment(axis, p as i32) - g).abs() < 1e-14, "d={d} p={p}");
                }
            }
            if d == 2 {
                let cross: f64 = s.iter().map(|(e, w)| w * e[0] * e[1]).sum();
                assert!(cross.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_and_constant_drift_closed_forms() {
        let solver = CnSolver::default();
        let (dt, sigma) = (0.01, 0.3);
        let e = [3f64.sqrt(), 0.0];
        let y = cn_step(&ZeroDrift, 0.0, dt, sigma, [0.4, 0.0], e, &solver).unwrap();
        assert_eq!(y[0], 0.4 + dt.sqrt() * sigma * e[0]);
        let c = FnDrift::new(|_, _| [0.7, -0.2]);
        let y = cn_step(&c, 0.0, dt, sigma, [0.4, 0.1], [0.0, -3f64.sqrt()], &solver).unwrap();
        assert!((y[0] - (0.4 + dt * 0.7)).abs() < 1e-15);
        assert!((y[1] - (0.1 - dt * 0.2 - dt.sqrt() * sigma * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn linear_drift_matches_closed_form() {
        let solver = CnSolver::default();
        let a = -1.3;
        let b = FnDrift::new(move |_, x| [a * x[0], 0.0]);
        for (dt, x, e) in [(0.05, 0.8, 3f64.sqrt()), (0.2, -1.1, 0.0), (0.01, 0.3, -3f64.sqrt())] {
            let sigma = 0.4;
            let y = cn_step(&b, 0.0, dt, sigma, [x, 0.0], [e, 0.0], &solver).unwrap();
            let exact = (x + 0.5 * dt * a * x + dt.sqrt() * sigma * e) / (1.0 - 0.5 * a * dt);
            assert!((y[0] - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn picard_contracts_at_lipschitz_rate() {
        let lip = 2.0;
        let b = FnDrift::with_lipschitz(|_, x| [lip * x[0].sin(), 0.0], lip);
        let dt = 0.1;
        let it = cn_iterates(&b, 0.0, dt, 0.5, [0.3, 0.0], [3f64.sqrt(), 0.0], 8);
        for w in it.windows(3) {
            let d1 = dist(w[1], w[0]);
            let d2 = dist(w[2], w[1]);
            if d1 > 1e-14 {
                assert!(d2 <= lip * dt / 2.0 * d1 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        let b = FnDrift::new(|_, x| [50.0 * x[0], 0.0]);
        let r = cn_step(&b, 0.0, 0.5, 0.0, [1.0, 0.0], [0.0; 2], &CnSolver::default());
        assert!(matches!(r, Err(Error::CharacteristicNonConvergence { .. })));
    }

    #[test]
    fn weak_expectation_identities() {
        let s = build_stencil(1).unwrap();
        let solver = CnSolver::default();
        let one = weak_expectation(&ZeroDrift, 0.0, 0.1, 0.7, [0.2, 0.0], |_| 1.0, &s, &solver).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        let dt = 0.04;
        let m2 = weak_expectation(&ZeroDrift, 0.0, dt, 0.7, [0.0; 2], |y| y[0] * y[0], &s, &solver).unwrap();
        assert!((m2 - 0.49 * dt).abs() < 1e-15);
        let m4 = weak_expectation(&ZeroDrift, 0.0, dt, 1.0, [0.0; 2], |y| y[0].powi(4), &s, &solver).unwrap();
        assert!((m4 - 3.0 * dt * dt).abs() < 1e-15);
    }

    #[test]
    fn weak_one_step_order_on_ornstein_uhlenbeck() {
        let s = build_stencil(1).unwrap();
        let solver = CnSolver::default();
        let b = FnDrift::new(|_, x| [-x[0], 0.0]);
        let (x0, sigma) = (0.7, 0.5);
        let exact = |dt: f64, p: i32| {
            let m = x0 * (-dt).exp();
            let v = sigma * sigma * (1.0 - (-2.0 * dt).exp()) / 2.0;
            match p {
                1 => m,
                2 => m * m + v,
                _ => m * m * m + 3.0 * m * v,
            }
        };
        for p in 1..=3 {
            let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
                .iter()
                .map(|&dt| {
                    let approx =
                        weak_expectation(&b, 0.0, dt, sigma, [x0, 0.0], |y| y[0].powi(p), &s, &solver)
                            .unwrap();
                    (approx - exact(dt, p)).abs()
                })
                .collect();
            let order = (errs[2] / errs[3]).log2();
            assert!(order >= 2.7, "phi=x^{p}: order {order} ({errs:?})");
        }
    }
}
