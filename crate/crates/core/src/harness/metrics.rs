//! Relative error norms, positivity error and observed rates.

use crate::error::{Error, Result};
use crate::fp::DensityField;
use crate::grid::UniformGrid;
use crate::quadrature::simpson_integrate_map;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorPair {
    pub e_inf: f64,
    pub e_2: f64,
    /// Set when the truth vanishes and the norms are absolute.
    pub absolute: bool,
}

/// Relative sup-norm over the nodes and relative L2 norm by Simpson.
pub fn error_metrics(approx: &[f64], truth: &[f64], grid: &UniformGrid) -> Result<ErrorPair> {
    if approx.len() != truth.len() || truth.len() != grid.len() {
        return Err(Error::Shape(format!(
            "error metrics on arrays of length {} and {} over {} nodes",
            approx.len(),
            truth.len(),
            grid.len()
        )));
    }
    let diff: Vec<f64> = approx.iter().zip(truth).map(|(a, b)| a - b).collect();
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = |f: &[f64]| simpson_integrate_map(f, grid, |v| v * v).sqrt();
    let (num_inf, num_2) = (sup(&diff), l2(&diff));
    let (den_inf, den_2) = (sup(truth), l2(truth));
    if den_inf == 0.0 || den_2 == 0.0 {
        return Ok(ErrorPair {
            e_inf: num_inf,
            e_2: num_2,
            absolute: true,
        });
    }
    Ok(ErrorPair {
        e_inf: num_inf / den_inf,
        e_2: num_2 / den_2,
        absolute: false,
    })
}

/// `max_{k,i} max(0, -m[k][i])`.
pub fn positivity_error(m: &DensityField) -> f64 {
    positivity_error_of(&m.slices)
}

pub fn positivity_error_of(slices: &[Vec<f64>]) -> f64 {
    slices.iter().flatten().fold(0.0, |acc, &v| acc.max(-v))
}

/// Observed order between consecutive refinements,
/// `log(E_coarse / E_fine) / log(dx_coarse / dx_fine)`; `log2` of the error
/// ratio under halving.
pub fn rate(e_coarse: f64, e_fine: f64, dx_coarse: f64, dx_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (dx_coarse / dx_fine).ln()
}

/// Rates for a refinement sequence; the first entry is always `None`.
pub fn rates(errors: &[f64], dxs: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|i| {
            (i > 0 && errors[i].is_finite() && errors[i - 1].is_finite())
                .then(|| rate(errors[i - 1], errors[i], dxs[i - 1], dxs[i]))
        })
        .collect()
}
