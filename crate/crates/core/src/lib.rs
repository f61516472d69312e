//! High-order Lagrange-Galerkin / semi-Lagrangian solver for second-order
//! mean field game systems with quadratic Hamiltonian.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`], [`basis`], [`quadrature`]: uniform tensor grids, the symmetric
//!   cubic Lagrange basis and composite Simpson / Gauss quadrature.
//! - [`characteristics`]: the three-point stochastic stencil and the
//!   Crank-Nicolson foot-point solver.
//! - [`fp`]: the conservative Lagrange-Galerkin Fokker-Planck solver.
//! - [`hjb`]: the semi-Lagrangian HJB scheme.
//! - [`mfg`]: the forward-backward fixed-point driver.
//! - [`oracle`]: closed-form linear-quadratic and Ornstein-Uhlenbeck solutions.
//! - [`harness`]: convergence studies, error metrics and report emission.

pub mod banded;
pub mod basis;
pub mod characteristics;
pub mod error;
pub mod fp;
pub mod grid;
pub mod harness;
pub mod hjb;
pub mod mfg;
pub mod oracle;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Point, UniformGrid};

#[cfg(test)]
pub(crate) mod test_util;
