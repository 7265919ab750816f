//! Riemannian block majorization-minimization.
//!
//! The crate is `no_std` and only needs `alloc`. Points and tangent vectors are
//! dense matrices in ambient coordinates; each block of a problem carries a
//! [`Manifold`] descriptor and an optional ball [`Constraint`].
//!
//! ```
//! use rbmm::apps::quadratic::QuadraticProblem;
//! use rbmm::driver::{run_rbmm, SolverConfig};
//! use rbmm::surrogates::{Schedule, SurrogateFamily, SurrogateSpec};
//!
//! let problem = QuadraticProblem::demo();
//! let spec = SurrogateSpec::new(SurrogateFamily::EuclideanProximal(Schedule::Constant(1.0)));
//! let config = SolverConfig::new(200, vec![spec.clone(), spec]);
//! let out = run_rbmm(&problem, &config, &problem.zero_init()).unwrap();
//! let theta = out.final_state.blocks[1].data[(0, 0)];
//! assert!((theta - 2.0).abs() < 1e-8);
//! ```

#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod apps;
pub mod diagnostics;
pub mod driver;
mod error;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod surrogates;

pub use error::{Error, Result};
pub use geometry::{Manifold, Point, ProductPoint, TangentVector};
pub use surrogates::Constraint;

/// Dense column-major matrix used for every point and tangent vector.
pub type Mat = nalgebra::DMatrix<f64>;
