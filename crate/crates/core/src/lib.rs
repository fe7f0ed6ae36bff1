//! Volume potentials with Riesz, logarithmic, log-Riesz and Bessel kernels over implicit
//! domains, and a numerical moving-plane method that tests whether a constant boundary
//! profile forces the domain to be a ball.
//!
//! Everything numeric is generic over `f32`/`f64` through [`Real`].

pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod movingplane;
pub mod potentials;
pub mod quadrature;
mod scalar;

pub use error::{Error, Result};
pub use geometry::{Domain, Hyperplane};
pub use kernels::{KernelKind, KernelSpec};
pub use movingplane::{characterize, sweep, SweepConfig, SweepResult, Verdict, VerdictKind};
pub use potentials::{boundary_profile, eval_gradient, eval_potential, PotentialSpec};
pub use quadrature::{IntegralEstimate, QuadratureConfig};
pub use scalar::Real;
