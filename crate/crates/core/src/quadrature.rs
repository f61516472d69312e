//! Composite Simpson rule on grids and Gauss-Legendre rules on cells.

use crate::grid::UniformGrid;

/// Composite Simpson weights `dx/3 * (1, 4, 2, 4, ..., 4, 1)` for `n` nodes.
pub fn simpson_weights_1d(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count, got {n}");
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * dx / 3.0
        })
        .collect()
}

/// Composite Simpson approximation of the integral of the nodal field over
/// the grid box, tensorised in two dimensions.
pub fn simpson_integrate(f_nodes: &[f64], grid: &UniformGrid) -> f64 {
    assert_eq!(f_nodes.len(), grid.len(), "nodal array does not match grid");
    let n = grid.nodes_per_axis();
    let w = simpson_weights_1d(n, grid.dx());
    match grid.dim() {
        1 => f_nodes.iter().zip(&w).map(|(f, w)| f * w).sum(),
        _ => f_nodes
            .chunks_exact(n)
            .zip(&w)
            .map(|(row, wy)| wy * row.iter().zip(&w).map(|(f, wx)| f * wx).sum::<f64>())
            .sum(),
    }
}

/// Simpson integral of `g(f_i)` without allocating the mapped array.
pub fn simpson_integrate_map(f_nodes: &[f64], grid: &UniformGrid, g: impl Fn(f64) -> f64) -> f64 {
    let n = grid.nodes_per_axis();
    let w = simpson_weights_1d(n, grid.dx());
    (0..grid.len())
        .map(|k| {
            let idx = grid.multi_index(k);
            let wk = if grid.dim() == 1 { w[idx[0]] } else { w[idx[0]] * w[idx[1]] };
            wk * g(f_nodes[k])
        })
        .sum()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev initial guess, Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule mapped to `[a, b]`.
pub fn gauss_on_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(x, w)| (m + h * x, h * w)).collect()
}
