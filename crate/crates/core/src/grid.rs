//! Uniform tensor-product grids over square boxes in one or two dimensions.

use crate::error::{Error, Result};

/// A point of the ambient space. Only the first `dim` components are used.
pub type Point = [f64; 2];

/// Minimum number of nodes per axis: the cubic stencil needs four nodes and
/// composite Simpson needs an even number of cells.
pub const MIN_NODES_PER_AXIS: usize = 5;

/// Uniform mesh with `2N + 1` nodes per axis, anchored at the lower corner
/// of the box. Nodes are stored with axis 0 varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid {
    dim: usize,
    dx: f64,
    nodes_per_axis: usize,
    lower: Point,
}

impl UniformGrid {
    /// Grid over `[lower, upper]^dim` with mesh width `dx`.
    ///
    /// The box length must be an even multiple of `dx` (relative tolerance
    /// `1e-9`); the stored `dx` is recomputed from the exact cell count.
    pub fn new(dim: usize, lower: f64, upper: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("mesh width must be positive, got {dx}")));
        }
        if !(upper > lower) {
            return Err(Error::InvalidGrid(format!("empty interval [{lower}, {upper}]")));
        }
        let length = upper - lower;
        let cells = (length / dx).round();
        if (cells * dx - length).abs() > 1e-9 * length {
            return Err(Error::InvalidGrid(format!(
                "dx = {dx} does not divide the interval length {length}"
            )));
        }
        Self::with_cells(dim, lower, upper, cells as usize)
    }

    /// Grid over `[lower, upper]^dim` split into `cells` cells per axis.
    pub fn with_cells(dim: usize, lower: f64, upper: f64, cells: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if cells % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "cell count per axis must be even for composite Simpson, got {cells}"
            )));
        }
        if cells + 1 < MIN_NODES_PER_AXIS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES_PER_AXIS} nodes per axis, got {}",
                cells + 1
            )));
        }
        if !(upper > lower) {
            return Err(Error::InvalidGrid(format!("empty interval [{lower}, {upper}]")));
        }
        Ok(Self {
            dim,
            dx: (upper - lower) / cells as f64,
            nodes_per_axis: cells + 1,
            lower: [lower; 2],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn cells_per_axis(&self) -> usize {
        self.nodes_per_axis - 1
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> f64 {
        self.lower[0]
    }

    pub fn upper(&self) -> f64 {
        self.lower[0] + self.dx * (self.nodes_per_axis - 1) as f64
    }

    /// Coordinate of node `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.lower[0] + i as f64 * self.dx
    }

    /// Per-axis index of flat node `flat`.
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat % self.nodes_per_axis, flat / self.nodes_per_axis]
        }
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] + self.nodes_per_axis * idx[1]
        }
    }

    /// Coordinates of flat node `flat`.
    #[inline]
    pub fn node(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 2];
        for (axis, c) in p.iter_mut().enumerate().take(self.dim) {
            *c = self.coord(idx[axis]);
        }
        p
    }

    /// Inverse of [`UniformGrid::node`]: the flat index of the node located at
    /// `p`, if `p` is a node up to a relative tolerance of `1e-9` cells.
    pub fn index_of(&self, p: Point) -> Option<usize> {
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            let s = (p[axis] - self.lower[axis]) / self.dx;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r > (self.nodes_per_axis - 1) as f64 {
                return None;
            }
            idx[axis] = r as usize;
        }
        Some(self.flat_index(idx))
    }

    /// Fractional grid coordinate of `x` along `axis` (node `i` sits at `i`).
    /// Values within `1e-10` of an integer are snapped to it so that nodes
    /// map to exact indices despite rounding.
    #[inline]
    pub fn grid_coord(&self, x: f64, axis: usize) -> f64 {
        let s = (x - self.lower[axis]) / self.dx;
        let r = s.round();
        if (s - r).abs() < 1e-10 {
            r
        } else {
            s
        }
    }

    /// True when the node lies on the boundary of the box.
    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        let last = self.nodes_per_axis - 1;
        idx[..self.dim].iter().any(|&i| i == 0 || i == last)
    }

    /// Projection onto the closed box.
    #[inline]
    pub fn clamp(&self, p: Point) -> Point {
        let (lo, hi) = (self.lower(), self.upper());
        let mut q = p;
        for c in q.iter_mut().take(self.dim) {
            *c = c.clamp(lo, hi);
        }
        q
    }

    pub fn contains(&self, p: Point) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        p[..self.dim].iter().all(|&c| c >= lo && c <= hi)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.node(i))).collect()
    }

    /// Coordinates of all nodes along one axis.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.nodes_per_axis).map(|i| self.coord(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_cell_counts_and_small_grids() {
        assert!(UniformGrid::new(1, 0.0, 1.0, 1.0 / 3.0).is_err());
        assert!(UniformGrid::new(1, 0.0, 1.0, 0.5).is_err());
        assert!(UniformGrid::new(1, 0.0, 1.0, 0.3).is_err());
        assert!(UniformGrid::new(3, 0.0, 1.0, 0.25).is_err());
        assert!(UniformGrid::new(1, 0.0, 1.0, 0.25).is_ok());
    }

    #[test]
    fn node_index_round_trip() {
        for dim in 1..=2 {
            let g = UniformGrid::new(dim, -2.0, 2.0, 0.2).unwrap();
            assert_eq!(g.nodes_per_axis(), 21);
            for i in 0..g.len() {
                assert_eq!(g.index_of(g.node(i)), Some(i));
            }
        }
    }

    #[test]
    fn boundary_nodes_2d() {
        let g = UniformGrid::new(2, 0.0, 1.0, 0.25).unwrap();
        let count = (0..g.len()).filter(|&i| g.is_boundary(i)).count();
        assert_eq!(count, 16);
    }
}
