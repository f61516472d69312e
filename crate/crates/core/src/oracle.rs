//! Closed-form solutions used as ground truth.
//!
//! [`LqParameters`] describes the linear-quadratic game with running cost
//! `|x - E[X_t]|^2 / 2`, zero terminal cost and Gaussian initial law with
//! diagonal covariance. [`OuProcess`] is a linear Fokker-Planck problem.

use std::f64::consts::PI;

use crate::grid::Point;

/// Scalar factor of the Riccati solution `Pi(t) = tanh(T - t) I`.
pub fn riccati_pi(t: f64, horizon: f64) -> f64 {
    let a = (2.0 * horizon - t).exp();
    let b = t.exp();
    (a - b) / (a + b)
}

/// Data of the linear-quadratic problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LqParameters {
    pub horizon: f64,
    pub sigma: f64,
    pub dim: usize,
    pub mean0: Point,
    /// Diagonal of the initial covariance.
    pub var0: Point,
}

impl LqParameters {
    pub fn new(horizon: f64, sigma: f64, dim: usize, mean0: Point, var0: Point) -> Self {
        let mut p = Self {
            horizon,
            sigma,
            dim,
            mean0,
            var0,
        };
        if dim == 1 {
            p.mean0[1] = 0.0;
            p.var0[1] = 1.0;
        }
        p
    }

    pub fn pi(&self, t: f64) -> f64 {
        riccati_pi(t, self.horizon)
    }

    /// Linear coefficient `s(t) = -Pi(t) mu0`.
    pub fn s(&self, t: f64) -> Point {
        let p = self.pi(t);
        [-p * self.mean0[0], -p * self.mean0[1]]
    }

    fn mean_sq(&self) -> f64 {
        (0..self.dim).map(|a| self.mean0[a] * self.mean0[a]).sum()
    }

    /// Constant term `c(t)`.
    pub fn c(&self, t: f64) -> f64 {
        let big_t = self.horizon;
        let log = (2.0 * big_t.exp() / ((2.0 * big_t - t).exp() + t.exp())).ln();
        0.5 * self.pi(t) * self.mean_sq() - 0.5 * self.sigma * self.sigma * self.dim as f64 * log
    }

    /// Mean of the population, constant in time.
    pub fn mean(&self, _t: f64) -> Point {
        self.mean0
    }

    /// Diagonal entry `axis` of the covariance at time `t`.
    pub fn variance(&self, t: f64, axis: usize) -> f64 {
        let big_t = self.horizon;
        let s2 = self.sigma * self.sigma;
        let e2t = (2.0 * big_t).exp();
        let second_moment = self.var0[axis] + self.mean0[axis] * self.mean0[axis];
        let mu2 = self.mean0[axis] * self.mean0[axis];
        let pref = ((2.0 * big_t - t).exp() + t.exp()).powi(2);
        let a = (2.0 * second_moment - 2.0 * mu2 + s2 * (e2t + 1.0)) / (2.0 * (e2t + 1.0).powi(2));
        let b = s2 / (2.0 * (e2t + (2.0 * t).exp()));
        pref * (a - b)
    }

    pub fn exact_value(&self, t: f64, x: Point) -> f64 {
        let p = self.pi(t);
        let s = self.s(t);
        let mut v = self.c(t);
        for a in 0..self.dim {
            v += 0.5 * p * x[a] * x[a] + s[a] * x[a];
        }
        v
    }

    /// `grad v*(t, x) = Pi(t) x + s(t)`; the optimal control.
    pub fn exact_gradient(&self, t: f64, x: Point) -> Point {
        let p = self.pi(t);
        let s = self.s(t);
        let mut g = [0.0; 2];
        for a in 0..self.dim {
            g[a] = p * x[a] + s[a];
        }
        g
    }

    pub fn exact_density(&self, t: f64, x: Point) -> f64 {
        (0..self.dim)
            .map(|a| gaussian(x[a], self.mean0[a], self.variance(t, a)))
            .product()
    }

    pub fn initial_density(&self, x: Point) -> f64 {
        self.exact_density(0.0, x)
    }

    /// Running cost `F(x, m(t)) = |x - mean|^2 / 2`.
    pub fn running_cost(&self, t: f64, x: Point) -> f64 {
        let m = self.mean(t);
        (0..self.dim).map(|a| 0.5 * (x[a] - m[a]).powi(2)).sum()
    }
}

/// Normal density with mean `mean` and variance `var`.
pub fn gaussian(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `dX = -theta (X - centre) dt + sigma dW` with Gaussian initial law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuProcess {
    pub theta: f64,
    pub centre: f64,
    pub sigma: f64,
    pub mean0: f64,
    pub var0: f64,
}

impl OuProcess {
    pub fn drift(&self, x: f64) -> f64 {
        -self.theta * (x - self.centre)
    }

    pub fn mean(&self, t: f64) -> f64 {
        self.centre + (self.mean0 - self.centre) * (-self.theta * t).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        let e = (-2.0 * self.theta * t).exp();
        self.var0 * e + self.sigma * self.sigma / (2.0 * self.theta) * (1.0 - e)
    }

    /// Density at time `t` (one dimension, `x[0]`).
    pub fn density(&self, t: f64, x: Point) -> f64 {
        gaussian(x[0], self.mean(t), self.variance(t))
    }
}
