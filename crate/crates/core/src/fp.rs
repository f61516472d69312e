//! Conservative Lagrange-Galerkin scheme for the Fokker-Planck equation
//! `dm/dt - (sigma^2/2) Lap m + div(b m) = 0`.
//!
//! Each step pushes the nodal coefficients forward along the discrete
//! stochastic characteristics: column `j` of the transport matrix holds the
//! basis weights at the foot points `y^l_k(x_j)`, so every column sums to one
//! and the nodal sum is conserved exactly (up to mass leaving the box under
//! Dirichlet conditions, which is tracked separately).
//!
//! Two variants are provided: the lumped scheme in which Simpson's rule is
//! applied to the mass and transport integrals (fully explicit), and an
//! "exact" scheme in which both integrals are computed with per-cell Gauss
//! rules and the banded mass matrix is inverted by Cholesky.

use rayon::prelude::*;

use crate::banded::{BandedCholesky, BandedSym};
use crate::basis::{for_each_weight, reference_basis_eval, Extension};
use crate::characteristics::{build_stencil, cn_step, Clamped, CnSolver, Drift, StochasticStencil};
use crate::error::{Error, Result};
use crate::grid::{Point, UniformGrid};
use crate::quadrature::{gauss_on_interval, simpson_integrate, simpson_integrate_map};

/// Gauss points per axis for the exact transport integrals.
pub const EXACT_TRANSPORT_POINTS: usize = 6;
/// Gauss points per axis for the exact mass matrix (exact for degree 6).
pub const EXACT_MASS_POINTS: usize = 4;

/// Quadrature used for the Galerkin integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FpMode {
    /// Simpson on the elements `[x_j - 2dx, x_j]`, `[x_j, x_j + 2dx]`.
    Simpson,
    /// Per-cell Gauss with `points` nodes per axis for the transport matrices.
    ExactGauss { points: usize },
}

impl FpMode {
    pub fn exact() -> Self {
        FpMode::ExactGauss {
            points: EXACT_TRANSPORT_POINTS,
        }
    }
}

/// Boundary treatment of the density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FpBoundary {
    /// Homogeneous Dirichlet: weights of nodes outside the box are dropped.
    Dirichlet,
    /// Homogeneous Neumann: foot points and stencils are reflected.
    Neumann,
}

impl FpBoundary {
    pub fn extension(self) -> Extension {
        match self {
            FpBoundary::Dirichlet => Extension::ZeroPad,
            FpBoundary::Neumann => Extension::Reflect,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassQuadrature {
    Simpson,
    Gauss(usize),
}

/// Galerkin mass matrix `A_ij = int beta_i beta_j`.
#[derive(Clone, Debug)]
pub enum MassMatrix {
    /// Simpson lumping: `(2 dx / 3)^d` times the identity.
    Lumped { dim: usize, value: f64 },
    /// Exact one-dimensional factor `A1`; in two dimensions `A = A1 (x) A1`.
    Banded {
        dim: usize,
        one_d: BandedSym,
        factor: BandedCholesky,
    },
}

impl MassMatrix {
    /// Entry `A_ij` for flat indices on `grid`.
    pub fn entry(&self, i: usize, j: usize, grid: &UniformGrid) -> f64 {
        match self {
            MassMatrix::Lumped { value, .. } => {
                if i == j {
                    *value
                } else {
                    0.0
                }
            }
            MassMatrix::Banded { one_d, dim, .. } => {
                let (a, b) = (grid.multi_index(i), grid.multi_index(j));
                (0..*dim).map(|ax| one_d.get(a[ax], b[ax])).product()
            }
        }
    }

    pub fn is_lumped(&self) -> bool {
        matches!(self, MassMatrix::Lumped { .. })
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64], grid: &UniformGrid) {
        match self {
            MassMatrix::Lumped { value, .. } => rhs.iter_mut().for_each(|v| *v /= value),
            MassMatrix::Banded { dim, factor, .. } => {
                let n = grid.nodes_per_axis();
                if *dim == 1 {
                    factor.solve_in_place(rhs);
                } else {
                    // (A1 (x) A1)^-1 = A1^-1 (x) A1^-1, applied axis by axis
                    for row in rhs.chunks_exact_mut(n) {
                        factor.solve_in_place(row);
                    }
                    let mut col = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            col[j] = rhs[i + n * j];
                        }
                        factor.solve_in_place(&mut col);
                        for j in 0..n {
                            rhs[i + n * j] = col[j];
                        }
                    }
                }
            }
        }
    }
}

/// Assembles the mass matrix over the grid box.
pub fn assemble_mass_matrix(grid: &UniformGrid, quadrature: MassQuadrature) -> Result<MassMatrix> {
    let dim = grid.dim();
    match quadrature {
        MassQuadrature::Simpson => Ok(MassMatrix::Lumped {
            dim,
            value: (2.0 * grid.dx() / 3.0).powi(dim as i32),
        }),
        MassQuadrature::Gauss(points) => {
            let n = grid.nodes_per_axis();
            let mut a = BandedSym::zeros(n, 3);
            for cell in 0..n - 1 {
                for (x, w) in gauss_on_interval(points, grid.coord(cell), grid.coord(cell + 1)) {
                    let s = grid.grid_coord(x, 0);
                    let lo = cell.saturating_sub(1);
                    let hi = (cell + 2).min(n - 1);
                    for i in lo..=hi {
                        let bi = reference_basis_eval(s - i as f64);
                        for j in lo..=i {
                            let bj = reference_basis_eval(s - j as f64);
                            a.add(i, j, w * bi * bj);
                        }
                    }
                }
            }
            let factor = BandedCholesky::factor(&a)?;
            Ok(MassMatrix::Banded { dim, one_d: a, factor })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    /// Entries `beta_i(y(x_j))`; the common factor `(2 dx / 3)^d` is
    /// cancelled against the lumped mass matrix.
    Simpson,
    /// Entries `int beta_i(y(x)) beta_j(x) dx`.
    Exact,
}

/// Sparse transport matrix in compressed-column form.
#[derive(Clone, Debug)]
pub struct TransportMatrix {
    n: usize,
    kind: TransportKind,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl TransportMatrix {
    fn from_columns(n: usize, kind: TransportKind, cols: Vec<Vec<(usize, f64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        let nnz = cols.iter().map(Vec::len).sum();
        let mut rows = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in cols {
            for (i, v) in col {
                rows.push(i);
                vals.push(v);
            }
            col_ptr.push(rows.len());
        }
        Self {
            n,
            kind,
            col_ptr,
            rows,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TransportKind {
        self.kind
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn column_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.column(j).map(|(_, v)| v).sum()
    }

    /// Entry `(i, j)` (sums duplicate entries).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j).filter(|(r, _)| *r == i).map(|(_, v)| v).sum()
    }

    /// `out += scale * B x`.
    pub fn apply_add(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let s = scale * xj;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.rows[k]] += s * self.vals[k];
            }
        }
    }
}

/// Transport matrices `B^l_k`, one per stencil point, for the step starting
/// at `t_k = k dt`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_transport(
    drift: &dyn Drift,
    k: usize,
    stencil: &StochasticStencil,
    grid: &UniformGrid,
    dt: f64,
    sigma: f64,
    mode: FpMode,
    boundary: FpBoundary,
    solver: &CnSolver,
) -> Result<Vec<TransportMatrix>> {
    let t_k = k as f64 * dt;
    let ext = boundary.extension();
    let n = grid.len();
    let foot = |x: Point, e: Point| -> Result<Point> {
        let y = cn_step(drift, t_k, dt, sigma, x, e, solver)?;
        Ok(match boundary {
            FpBoundary::Dirichlet => y,
            FpBoundary::Neumann => reflect_point(y, grid),
        })
    };
    stencil
        .points()
        .iter()
        .map(|&e| match mode {
            FpMode::Simpson => {
                let cols = (0..n)
                    .into_par_iter()
                    .map(|j| {
                        let y = foot(grid.node(j), e)?;
                        let mut col = Vec::with_capacity(16);
                        for_each_weight(y, grid, ext, |i, w| col.push((i, w)));
                        Ok(col)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TransportMatrix::from_columns(n, TransportKind::Simpson, cols))
            }
            FpMode::ExactGauss { points } => assemble_exact(grid, points, ext, |x| foot(x, e)),
        })
        .collect()
}

fn reflect_point(y: Point, grid: &UniformGrid) -> Point {
    let (lo, hi) = (grid.lower(), grid.upper());
    let mut out = y;
    for c in out.iter_mut().take(grid.dim()) {
        for _ in 0..8 {
            if *c < lo {
                *c = 2.0 * lo - *c;
            } else if *c > hi {
                *c = 2.0 * hi - *c;
            } else {
                break;
            }
        }
    }
    out
}

/// Quadrature points `(x, w)` of the tensor Gauss rule on every cell.
fn cell_quadrature(grid: &UniformGrid, points: usize) -> Vec<(Point, f64)> {
    let cells = grid.cells_per_axis();
    let per_cell: Vec<Vec<(f64, f64)>> = (0..cells)
        .map(|c| gauss_on_interval(points, grid.coord(c), grid.coord(c + 1)))
        .collect();
    let mut out = Vec::new();
    if grid.dim() == 1 {
        for rule in &per_cell {
            out.extend(rule.iter().map(|&(x, w)| ([x, 0.0], w)));
        }
    } else {
        for ry in &per_cell {
            for &(y, wy) in ry {
                for rx in &per_cell {
                    out.extend(rx.iter().map(|&(x, wx)| ([x, y], wx * wy)));
                }
            }
        }
    }
    out
}

fn assemble_exact(
    grid: &UniformGrid,
    points: usize,
    ext: Extension,
    foot: impl Fn(Point) -> Result<Point> + Sync,
) -> Result<TransportMatrix> {
    let n = grid.len();
    let quad = cell_quadrature(grid, points);
    let triplets = quad
        .par_iter()
        .map(|&(x, w)| {
            let y = foot(x)?;
            let mut rows = Vec::with_capacity(16);
            for_each_weight(y, grid, ext, |i, bi| rows.push((i, bi)));
            let mut out = Vec::with_capacity(256);
            for_each_weight(x, grid, Extension::ZeroPad, |j, bj| {
                for &(i, bi) in &rows {
                    out.push((j, i, w * bi * bj));
                }
            });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<(usize, usize, f64)> = triplets.into_iter().flatten().collect();
    all.sort_by_key(|&(j, i, _)| (j, i));
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (j, i, v) in all {
        match cols[j].last_mut() {
            Some((r, acc)) if *r == i => *acc += v,
            _ => cols[j].push((i, v)),
        }
    }
    Ok(TransportMatrix::from_columns(n, TransportKind::Exact, cols))
}

/// One step `A m_{k+1} = sum_l w_l B^l_k m_k`.
pub fn fp_step(
    m_k: &[f64],
    transports: &[TransportMatrix],
    mass: &MassMatrix,
    stencil: &StochasticStencil,
    grid: &UniformGrid,
) -> Result<Vec<f64>> {
    if transports.len() != stencil.len() {
        return Err(Error::Shape(format!(
            "{} transport matrices for a {}-point stencil",
            transports.len(),
            stencil.len()
        )));
    }
    let mut next = vec![0.0; m_k.len()];
    for (b, w) in transports.iter().zip(stencil.weights()) {
        if b.n() != m_k.len() {
            return Err(Error::Shape(format!("transport of size {} for {} nodes", b.n(), m_k.len())));
        }
        match (b.kind(), mass.is_lumped()) {
            (TransportKind::Simpson, true) | (TransportKind::Exact, false) => {}
            _ => return Err(Error::Shape("transport and mass matrix use different quadratures".into())),
        }
        b.apply_add(m_k, *w, &mut next);
    }
    if !mass.is_lumped() {
        mass.solve_in_place(&mut next, grid);
    }
    Ok(next)
}

/// Nodal coefficients `m[k][i]` of the discrete density at every time step.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub grid: UniformGrid,
    pub dt: f64,
    pub slices: Vec<Vec<f64>>,
    /// Nodal mass removed through the boundary during step `k -> k+1`.
    pub lost_mass: Vec<f64>,
}

impl DensityField {
    pub fn n_steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }

    pub fn last(&self) -> &[f64] {
        self.slices.last().expect("density field has at least one slice")
    }

    /// `m_Delta(t_k, x)`, zero outside the box.
    pub fn value_at(&self, k: usize, x: Point) -> f64 {
        if !self.grid.contains(x) {
            return 0.0;
        }
        crate::basis::interpolate(&self.slices[k], x, &self.grid, Extension::ZeroPad)
    }

    pub fn nodal_sum(&self, k: usize) -> f64 {
        self.slices[k].iter().sum()
    }

    pub fn simpson_mass(&self, k: usize) -> f64 {
        simpson_integrate(&self.slices[k], &self.grid)
    }

    /// Discrete L2 norm (Simpson quadrature of the nodal values squared).
    pub fn l2_norm(&self, k: usize) -> f64 {
        simpson_integrate_map(&self.slices[k], &self.grid, |v| v * v).sqrt()
    }

    /// `max_k |sum_i m[k][i] - sum_i m[0][i]| / |sum_i m[0][i]|`.
    pub fn max_relative_mass_drift(&self) -> f64 {
        let m0 = self.nodal_sum(0);
        (0..self.slices.len())
            .map(|k| (self.nodal_sum(k) - m0).abs() / m0.abs())
            .fold(0.0, f64::max)
    }

    /// Same as [`DensityField::max_relative_mass_drift`] after adding back the
    /// mass that left through the boundary.
    pub fn max_relative_balance_error(&self) -> f64 {
        let m0 = self.nodal_sum(0);
        let mut lost = 0.0;
        let mut worst: f64 = 0.0;
        for k in 0..self.slices.len() {
            if k > 0 {
                lost += self.lost_mass[k - 1];
            }
            worst = worst.max((self.nodal_sum(k) + lost - m0).abs() / m0.abs());
        }
        worst
    }
}

/// Data of a linear Fokker-Planck solve.
pub struct FpProblem<'a> {
    pub grid: &'a UniformGrid,
    pub sigma: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub drift: &'a dyn Drift,
    pub initial: &'a (dyn Fn(Point) -> f64 + Sync),
    pub mode: FpMode,
    pub boundary: FpBoundary,
    pub solver: CnSolver,
}

/// Initial coefficients: nodal sampling (Simpson) or L2 projection (exact).
pub fn initial_coefficients(
    grid: &UniformGrid,
    initial: &(dyn Fn(Point) -> f64 + Sync),
    mode: FpMode,
    mass: &MassMatrix,
) -> Vec<f64> {
    match mode {
        FpMode::Simpson => grid.sample(initial),
        FpMode::ExactGauss { points } => {
            let mut rhs = vec![0.0; grid.len()];
            for (x, w) in cell_quadrature(grid, points) {
                let f = initial(x);
                for_each_weight(x, grid, Extension::ZeroPad, |i, b| rhs[i] += w * f * b);
            }
            mass.solve_in_place(&mut rhs, grid);
            rhs
        }
    }
}

/// Runs the scheme over all time steps.
pub fn fp_solve(problem: &FpProblem<'_>) -> Result<DensityField> {
    let grid = problem.grid;
    let stencil = build_stencil(grid.dim())?;
    let mass = assemble_mass_matrix(
        grid,
        match problem.mode {
            FpMode::Simpson => MassQuadrature::Simpson,
            FpMode::ExactGauss { .. } => MassQuadrature::Gauss(EXACT_MASS_POINTS),
        },
    )?;
    let m0 = initial_coefficients(grid, problem.initial, problem.mode, &mass);
    fp_solve_from(problem, &stencil, &mass, m0)
}

/// [`fp_solve`] starting from given initial coefficients.
pub fn fp_solve_from(
    problem: &FpProblem<'_>,
    stencil: &StochasticStencil,
    mass: &MassMatrix,
    m0: Vec<f64>,
) -> Result<DensityField> {
    let grid = problem.grid;
    if m0.len() != grid.len() {
        return Err(Error::Shape(format!("initial data of length {} on {} nodes", m0.len(), grid.len())));
    }
    let drift = Clamped {
        inner: problem.drift,
        grid,
    };
    let mut slices = Vec::with_capacity(problem.n_steps + 1);
    let mut lost_mass = Vec::with_capacity(problem.n_steps);
    slices.push(m0);
    for k in 0..problem.n_steps {
        let transports = assemble_transport(
            &drift,
            k,
            stencil,
            grid,
            problem.dt,
            problem.sigma,
            problem.mode,
            problem.boundary,
            &problem.solver,
        )?;
        let current = &slices[k];
        let next = fp_step(current, &transports, mass, stencil, grid)?;
        let lost = if mass.is_lumped() {
            // mass that no retained basis function received
            transports
                .iter()
                .zip(stencil.weights())
                .map(|(b, w)| {
                    w * current
                        .iter()
                        .enumerate()
                        .map(|(j, m)| m * (1.0 - b.column_sum(j)))
                        .sum::<f64>()
                })
                .sum()
        } else {
            current.iter().sum::<f64>() - next.iter().sum::<f64>()
        };
        lost_mass.push(lost);
        slices.push(next);
    }
    Ok(DensityField {
        grid: grid.clone(),
        dt: problem.dt,
        slices,
        lost_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{FnDrift, ZeroDrift};
    use crate::test_util::gaussian_1d;

    fn grid1(dx: f64) -> UniformGrid {
        UniformGrid::new(1, -2.0, 2.0, dx).unwrap()
    }

    #[test]
    fn lumped_mass_value() {
        let g = grid1(0.1);
        let a = assemble_mass_matrix(&g, MassQuadrature::Simpson).unwrap();
        assert!((a.entry(3, 3, &g) - 2.0 * 0.1 / 3.0).abs() < 1e-15);
        assert_eq!(a.entry(3, 4, &g), 0.0);
        let g2 = UniformGrid::new(2, -2.0, 2.0, 0.25).unwrap();
        let a2 = assemble_mass_matrix(&g2, MassQuadrature::Simpson).unwrap();
        assert!((a2.entry(7, 7, &g2) - (2.0 * 0.25 / 3.0f64).powi(2)).abs() < 1e-15);
    }

    /// `int beta(s) beta(s - d) ds` by brute-force 10-point Gauss on unit
    /// sub-intervals, independent of the grid machinery.
    fn band_oracle(d: i32) -> f64 {
        let mut acc = 0.0;
        for c in -3..3 {
            for (s, w) in gauss_on_interval(10, c as f64, c as f64 + 1.0) {
                acc += w * reference_basis_eval(s) * reference_basis_eval(s - d as f64);
            }
        }
        acc
    }

    #[test]
    fn exact_mass_interior_band_and_row_sums() {
        // frozen oracle values (dimensionless, multiply by dx)
        // exact values 733/945, 257/1680, -3/70, 31/15120 (symbolic integration)
        let frozen = [
            733.0 / 945.0,
            257.0 / 1680.0,
            -3.0 / 70.0,
            31.0 / 15120.0,
        ];
        for (d, f) in frozen.iter().enumerate() {
            assert!((band_oracle(d as i32) - f).abs() < 1e-14, "d={d}: {}", band_oracle(d as i32));
        }
        let g = grid1(0.1);
        let a = assemble_mass_matrix(&g, MassQuadrature::Gauss(4)).unwrap();
        let i = 20;
        for (d, f) in frozen.iter().enumerate() {
            assert!((a.entry(i, i + d, &g) - f * g.dx()).abs() < 1e-14);
            assert!((a.entry(i, i - d, &g) - f * g.dx()).abs() < 1e-14);
        }
        for j in 4..g.len() - 4 {
            let row: f64 = (0..g.len()).map(|i| a.entry(i, j, &g)).sum();
            assert!((row - g.dx()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_drift_no_noise_is_identity() {
        let g = UniformGrid::new(2, -1.0, 1.0, 0.25).unwrap();
        let s = build_stencil(2).unwrap();
        let bs = assemble_transport(&ZeroDrift, 0, &s, &g, 0.01, 0.0, FpMode::Simpson, FpBoundary::Dirichlet, &CnSolver::default()).unwrap();
        for b in &bs {
            for j in 0..g.len() {
                for (i, v) in b.column(j) {
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        let m: Vec<f64> = (0..g.len()).map(|i| (i as f64).sqrt()).collect();
        let a = assemble_mass_matrix(&g, MassQuadrature::Simpson).unwrap();
        let next = fp_step(&m, &bs, &a, &s, &g).unwrap();
        for (x, y) in next.iter().zip(&m) {
            assert!((x - y).abs() <= 1e-15 * y.max(1.0));
        }
    }

    #[test]
    fn constant_drift_one_cell_shift() {
        let g = grid1(0.1);
        let s = build_stencil(1).unwrap();
        let dt = 0.05;
        let c = g.dx() / dt;
        let b = FnDrift::new(move |_, _| [c, 0.0]);
        let bs = assemble_transport(&b, 0, &s, &g, dt, 0.0, FpMode::Simpson, FpBoundary::Dirichlet, &CnSolver::default()).unwrap();
        for j in 0..g.len() - 1 {
            assert!((bs[1].get(j + 1, j) - 1.0).abs() < 1e-12);
            for i in 0..g.len() {
                if i != j + 1 {
                    assert!(bs[1].get(i, j).abs() < 1e-12);
                }
            }
        }
        assert!(bs[1].column_sum(g.len() - 1).abs() < 1e-12);
    }

    #[test]
    fn columns_sum_to_one_with_reflection() {
        let g = UniformGrid::new(2, 0.0, 1.0, 0.05).unwrap();
        let s = build_stencil(2).unwrap();
        let b = FnDrift::new(|t, x| [(3.0 * x[1] + t).sin(), x[0] * x[0] - 0.5]);
        let bs = assemble_transport(&b, 3, &s, &g, 0.01, 0.4, FpMode::Simpson, FpBoundary::Neumann, &CnSolver::default()).unwrap();
        for b in &bs {
            for j in 0..g.len() {
                assert!((b.column_sum(j) - 1.0).abs() < 1e-12);
                assert!(b.column_nnz(j) <= 16);
            }
        }
    }

    #[test]
    fn exact_mode_transport_columns_integrate_basis() {
        // column sums equal int beta_j for interior j
        let g = grid1(0.1);
        let s = build_stencil(1).unwrap();
        let b = FnDrift::new(|_, x| [-x[0], 0.0]);
        let bs = assemble_transport(&b, 0, &s, &g, 0.01, 0.3, FpMode::exact(), FpBoundary::Dirichlet, &CnSolver::default()).unwrap();
        for j in 6..g.len() - 6 {
            assert!((bs[0].column_sum(j) - g.dx()).abs() < 1e-13);
        }
    }

    fn ou_problem<'a>(
        g: &'a UniformGrid,
        drift: &'a dyn Drift,
        init: &'a (dyn Fn(Point) -> f64 + Sync),
        dt: f64,
        n: usize,
        mode: FpMode,
    ) -> FpProblem<'a> {
        FpProblem {
            grid: g,
            sigma: 0.1f64.sqrt(),
            dt,
            n_steps: n,
            drift,
            initial: init,
            mode,
            boundary: FpBoundary::Dirichlet,
            solver: CnSolver::default(),
        }
    }

    #[test]
    fn nodal_sum_is_conserved() {
        let g = grid1(0.05);
        let b = FnDrift::new(|_, x| [-x[0], 0.0]);
        let init = |x: Point| gaussian_1d(x[0], 0.3, 0.05);
        let sol = fp_solve(&ou_problem(&g, &b, &init, 0.01, 50, FpMode::Simpson)).unwrap();
        assert!(sol.max_relative_mass_drift() <= 1e-12);
        assert!((sol.simpson_mass(0) - 1.0).abs() < 1e-8);
        // lumped transport keeps the nodal sum, not the Simpson integral;
        // the odd/even weight pattern leaves a small wobble
        for k in 0..=sol.n_steps() {
            assert!((sol.simpson_mass(k) - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn ou_second_moment_tracks_variance_ode() {
        let g = grid1(0.05);
        let b = FnDrift::new(|_, x| [-x[0], 0.0]);
        let (v0, sigma2) = (0.05, 0.1);
        let init = move |x: Point| gaussian_1d(x[0], 0.0, v0);
        let dt = 0.01;
        let sol = fp_solve(&ou_problem(&g, &b, &init, dt, 50, FpMode::Simpson)).unwrap();
        for k in [10, 25, 50] {
            let t = k as f64 * dt;
            let exact = v0 * (-2.0 * t).exp() + sigma2 / 2.0 * (1.0 - (-2.0 * t).exp());
            let xs = g.sample(|x| x[0] * x[0]);
            let m2: Vec<f64> = sol.slice(k).iter().zip(&xs).map(|(m, x)| m * x).collect();
            let approx = simpson_integrate(&m2, &g);
            assert!((approx - exact).abs() < 2e-4, "t={t}: {approx} vs {exact}");
        }
    }

    #[test]
    fn both_modes_track_ou_density() {
        let b = FnDrift::new(|_, x| [-x[0], 0.0]);
        let ou = crate::oracle::OuProcess {
            theta: 1.0,
            centre: 0.0,
            sigma: 0.1f64.sqrt(),
            mean0: 0.2,
            var0: 0.08,
        };
        let init = move |x: Point| ou.density(0.0, x);
        let g = grid1(0.05);
        let (dt, n) = (0.01, 30);
        let truth = g.sample(|x| ou.density(dt * n as f64, x));
        let err = |mode| {
            let sol = fp_solve(&ou_problem(&g, &b, &init, dt, n, mode)).unwrap();
            let d: Vec<f64> = sol.last().iter().zip(&truth).map(|(x, y)| x - y).collect();
            simpson_integrate_map(&d, &g, |v| v * v).sqrt()
        };
        let (lumped, exact) = (err(FpMode::Simpson), err(FpMode::exact()));
        assert!(lumped < 2e-2, "{lumped}");
        assert!(exact < lumped, "{exact} vs {lumped}");
    }
}
