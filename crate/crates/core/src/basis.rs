//! Symmetric cubic Lagrange basis and nodal interpolation.
//!
//! The reference function is piecewise cubic on `[-2, 2]`, cardinal on the
//! integers and even. Tensor products give the nodal basis on a
//! [`UniformGrid`]; on each cell the interpolant is the cubic Lagrange
//! polynomial through the symmetric four-node stencil around the cell.

use crate::grid::{Point, UniformGrid};

/// Odd-order parameter `p` of the symmetric basis (`q = 2p + 1`).
pub const ORDER_P: usize = 1;
/// Polynomial degree `q` of the basis.
pub const DEGREE: usize = 2 * ORDER_P + 1;
/// Support radius of the reference function, in cells.
pub const SUPPORT_RADIUS: f64 = (ORDER_P + 1) as f64;

/// Reference basis function, evaluated in cell units.
#[inline]
pub fn reference_basis_eval(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        (a + 1.0) * (1.0 - a) * (2.0 - a) * 0.5
    } else if a <= 2.0 {
        (a - 1.0) * (a - 2.0) * (a - 3.0) / -6.0
    } else {
        0.0
    }
}

/// How a stencil that overlaps the boundary of the grid is completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extension {
    /// Nodes outside the grid carry zero coefficients (densities).
    ZeroPad,
    /// Use the nearest four-node stencil lying inside the grid; points outside
    /// the box are extrapolated by that cubic (value functions under
    /// Dirichlet data).
    Clamp,
    /// Even reflection across the boundary nodes (homogeneous Neumann data).
    Reflect,
}

/// Interpolation weights along one axis: up to four `(node, weight)` pairs.
#[derive(Clone, Copy, Debug, Default)]
pub struct AxisWeights {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl AxisWeights {
    #[inline]
    fn push(&mut self, i: usize, w: f64) {
        self.idx[self.len] = i;
        self.w[self.len] = w;
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }

    pub fn sum(&self) -> f64 {
        self.w[..self.len].iter().sum()
    }
}

/// Cubic Lagrange weights for nodes `0, 1, 2, 3` evaluated at `u`.
#[inline]
fn lagrange4(u: f64) -> [f64; 4] {
    let (a, b, c, d) = (u, u - 1.0, u - 2.0, u - 3.0);
    [-b * c * d / 6.0, a * c * d * 0.5, -a * b * d * 0.5, a * b * c / 6.0]
}

#[inline]
fn reflect_coord(mut s: f64, last: f64) -> f64 {
    // at most a couple of passes for any foot point the schemes produce
    for _ in 0..8 {
        if s < 0.0 {
            s = -s;
        } else if s > last {
            s = 2.0 * last - s;
        } else {
            break;
        }
    }
    s.clamp(0.0, last)
}

/// Weights along one axis for the fractional grid coordinate `s` on an axis
/// with `n` nodes.
#[inline]
pub fn axis_weights(s: f64, n: usize, ext: Extension) -> AxisWeights {
    let last = (n - 1) as isize;
    let mut out = AxisWeights::default();
    match ext {
        Extension::ZeroPad => {
            let base = s.floor();
            let start = base as isize - 1;
            if start > last || start + 3 < 0 || !s.is_finite() {
                return out;
            }
            let w = lagrange4(s - base + 1.0);
            for (m, wm) in w.iter().enumerate() {
                let i = start + m as isize;
                if (0..=last).contains(&i) {
                    out.push(i as usize, *wm);
                }
            }
        }
        Extension::Clamp => {
            let start = (s.floor() as isize - 1).clamp(0, last - 3);
            let w = lagrange4(s - start as f64);
            for (m, wm) in w.iter().enumerate() {
                out.push((start + m as isize) as usize, *wm);
            }
        }
        Extension::Reflect => {
            let s = reflect_coord(s, last as f64);
            let base = s.floor();
            let start = base as isize - 1;
            let w = lagrange4(s - base + 1.0);
            for (m, wm) in w.iter().enumerate() {
                let mut i = start + m as isize;
                if i < 0 {
                    i = -i;
                } else if i > last {
                    i = 2 * last - i;
                }
                out.push(i as usize, *wm);
            }
        }
    }
    out
}

/// Per-axis weights of `x` on `grid`.
#[inline]
pub fn point_weights(x: Point, grid: &UniformGrid, ext: Extension) -> [AxisWeights; 2] {
    let n = grid.nodes_per_axis();
    let w0 = axis_weights(grid.grid_coord(x[0], 0), n, ext);
    let w1 = if grid.dim() == 2 {
        axis_weights(grid.grid_coord(x[1], 1), n, ext)
    } else {
        AxisWeights::default()
    };
    [w0, w1]
}

/// Calls `visit(node, weight)` for every node contributing to the value at `x`.
#[inline]
pub fn for_each_weight(x: Point, grid: &UniformGrid, ext: Extension, mut visit: impl FnMut(usize, f64)) {
    let [w0, w1] = point_weights(x, grid, ext);
    if grid.dim() == 1 {
        for (i, w) in w0.iter() {
            visit(i, w);
        }
    } else {
        let n = grid.nodes_per_axis();
        for (j, wj) in w1.iter() {
            for (i, wi) in w0.iter() {
                visit(i + n * j, wi * wj);
            }
        }
    }
}

/// Value of the nodal basis function with (possibly out-of-grid) multi-index
/// `i` at `x`.
pub fn basis_eval(i: [isize; 2], x: Point, grid: &UniformGrid) -> f64 {
    (0..grid.dim())
        .map(|axis| reference_basis_eval(grid.grid_coord(x[axis], axis) - i[axis] as f64))
        .product()
}

/// Interpolant `sum_i f_i beta_i(x)` using only the nodes whose support
/// contains `x`, completed at the boundary according to `ext`.
#[inline]
pub fn interpolate(f_nodes: &[f64], x: Point, grid: &UniformGrid, ext: Extension) -> f64 {
    debug_assert_eq!(f_nodes.len(), grid.len());
    let [w0, w1] = point_weights(x, grid, ext);
    if grid.dim() == 1 {
        let mut acc = 0.0;
        for k in 0..w0.len {
            acc += f_nodes[w0.idx[k]] * w0.w[k];
        }
        acc
    } else {
        let n = grid.nodes_per_axis();
        let mut acc = 0.0;
        for kj in 0..w1.len {
            let row = n * w1.idx[kj];
            let mut inner = 0.0;
            for ki in 0..w0.len {
                inner += f_nodes[row + w0.idx[ki]] * w0.w[ki];
            }
            acc += inner * w1.w[kj];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert_eq!(reference_basis_eval(0.0), 1.0);
        assert_eq!(reference_basis_eval(1.0), 0.0);
        assert_eq!(reference_basis_eval(2.0), 0.0);
        assert_eq!(reference_basis_eval(-1.0), 0.0);
        assert!((reference_basis_eval(0.5) - 0.5625).abs() < 1e-15);
        assert!((reference_basis_eval(1.5) + 0.0625).abs() < 1e-15);
        assert!((reference_basis_eval(-1.5) + 0.0625).abs() < 1e-15);
        assert_eq!(reference_basis_eval(2.5), 0.0);
    }

    #[test]
    fn reference_is_the_product_form() {
        // direct product formulas over the stencil offsets
        for k in 0..=200 {
            let xi = k as f64 / 100.0;
            let direct: f64 = if xi <= 1.0 {
                [-1.0f64, 1.0, 2.0].iter().map(|&m| (xi - m) / -m).product()
            } else {
                [1.0f64, 2.0, 3.0].iter().map(|&m| (xi - m) / -m).product()
            };
            assert!((reference_basis_eval(xi) - direct).abs() < 1e-14, "xi={xi}");
        }
    }

    #[test]
    fn tensor_value_at_cell_center() {
        let g = UniformGrid::new(2, 0.0, 1.0, 0.125).unwrap();
        let x = [g.coord(3) + 0.5 * g.dx(), g.coord(4) + 0.5 * g.dx()];
        assert!((basis_eval([3, 4], x, &g) - 0.31640625).abs() < 1e-14);
        assert_eq!(basis_eval([0, 0], x, &g), 0.0);
    }

    #[test]
    fn cardinality() {
        for dim in 1..=2 {
            let g = UniformGrid::new(dim, -1.0, 1.0, 0.25).unwrap();
            for i in 0..g.len() {
                let mi = g.multi_index(i);
                for j in 0..g.len() {
                    let v = basis_eval([mi[0] as isize, mi[1] as isize], g.node(j), &g);
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn polynomial_reproduction_all_policies_inside() {
        let g = UniformGrid::new(1, -2.0, 2.0, 0.1).unwrap();
        let p = |x: f64| 0.3 - 1.2 * x + 0.7 * x * x - 0.25 * x * x * x;
        let f = g.sample(|x| p(x[0]));
        for ext in [Extension::ZeroPad, Extension::Clamp] {
            for k in 0..400 {
                let x = -1.8 + 3.6 * k as f64 / 399.0;
                let v = interpolate(&f, [x, 0.0], &g, ext);
                assert!((v - p(x)).abs() <= 1e-12 * (1.0 + p(x).abs()));
            }
        }
        // one-sided stencils keep cubic exactness up to and beyond the boundary
        for x in [-2.05, -2.0, -1.97, 1.93, 2.0, 2.04] {
            let v = interpolate(&f, [x, 0.0], &g, Extension::Clamp);
            assert!((v - p(x)).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn reflect_is_even_extension() {
        let g = UniformGrid::new(1, 0.0, 1.0, 0.05).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).cos());
        for x in [0.01, 0.03, 0.07, 0.5, 0.96] {
            let inside = interpolate(&f, [x, 0.0], &g, Extension::Reflect);
            let mirrored = interpolate(&f, [-x, 0.0], &g, Extension::Reflect);
            assert!((inside - mirrored).abs() < 1e-14);
            let mirrored_hi = interpolate(&f, [2.0 - x, 0.0], &g, Extension::Reflect);
            assert!((inside - mirrored_hi).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_order_on_sine() {
        // observed order of the max interior error under dx halving
        let mut errs = vec![];
        for cells in [40usize, 80, 160, 320] {
            let g = UniformGrid::with_cells(1, -2.0, 2.0, cells).unwrap();
            let f = g.sample(|x| (2.0 * std::f64::consts::PI * x[0]).sin());
            let mut e: f64 = 0.0;
            for k in 0..2000 {
                let x = -1.5 + 3.0 * (k as f64 + 0.37) / 2000.0;
                let v = interpolate(&f, [x, 0.0], &g, Extension::ZeroPad);
                e = e.max((v - (2.0 * std::f64::consts::PI * x).sin()).abs());
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!(p >= 3.8, "observed order {p}");
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in -1.5f64..1.5, y in -1.5f64..1.5) {
            let g = UniformGrid::new(2, -2.0, 2.0, 0.2).unwrap();
            let mut s = 0.0;
            for_each_weight([x, y], &g, Extension::ZeroPad, |_, w| s += w);
            prop_assert!((s - 1.0).abs() <= 1e-12);
            let ones = vec![1.0; g.len()];
            for ext in [Extension::ZeroPad, Extension::Clamp, Extension::Reflect] {
                prop_assert!((interpolate(&ones, [x, y], &g, ext) - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn compact_support(i in 0usize..21, x in -2.0f64..2.0) {
            let g = UniformGrid::new(1, -2.0, 2.0, 0.2).unwrap();
            let xi = g.coord(i);
            if (x - xi).abs() > 2.0 * g.dx() + 1e-12 {
                prop_assert_eq!(basis_eval([i as isize, 0], [x, 0.0], &g), 0.0);
            }
        }

        #[test]
        fn cubic_reproduction_2d(x in -1.5f64..1.5, y in -1.5f64..1.5,
                                  c in proptest::array::uniform10(-1.0f64..1.0)) {
            let g = UniformGrid::new(2, -2.0, 2.0, 0.25).unwrap();
            let p = |x: f64, y: f64| c[0] + c[1]*x + c[2]*y + c[3]*x*x + c[4]*x*y + c[5]*y*y
                + c[6]*x*x*x + c[7]*x*x*y + c[8]*x*y*y + c[9]*y*y*y;
            let f = g.sample(|q| p(q[0], q[1]));
            let v = interpolate(&f, [x, y], &g, Extension::Clamp);
            let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!((v - p(x, y)).abs() <= 1e-12 * scale);
        }
    }
}
