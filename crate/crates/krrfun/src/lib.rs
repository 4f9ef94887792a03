//! Kernel ridge regression with exact finite-sample variances and
//! asymptotically valid confidence intervals for linear functionals.
//!
//! The pipeline: fit a Matern-kernel ridge regression ([`krr`]), describe a
//! linear functional of the regression function -- a point value, a
//! derivative, or an L2 inner product ([`functional`]) -- and read off its
//! plug-in estimate, exact conditional variance, and normal interval. The
//! minimizer of the regression function gets the same treatment through a
//! linearized sandwich interval ([`optimum`]). [`testbed`] and [`simlab`]
//! hold the benchmark functions and the deterministic replication engine
//! used to validate coverage, normality, and convergence rates.
//!
//! Numerical cores are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`, which the simulation layers use throughout.

pub mod bessel;
pub mod domain;
pub mod functional;
pub mod kernel;
pub mod krr;
pub mod linalg;
pub mod optimum;
pub mod quadrature;
pub mod scalar;
pub mod simlab;
pub mod special;
pub mod testbed;

pub use domain::Rect;
pub use functional::{BoundFunctional, Functional, KernelExpansion, NoiselessKrr};
pub use kernel::MaternKernel;
pub use krr::{select_hyperparams, Dataset, HyperGrid, KrrFit};
pub use optimum::{estimate_optimum, optimum_ci, OptimumResult};
pub use simlab::{run_scenario, Scenario};
pub use testbed::TestFunction;

/// `f64` aliases for the generic cores.
pub type MaternKernel64 = kernel::MaternKernel<f64>;
pub type Dataset64 = krr::Dataset<f64>;
pub type KrrFit64 = krr::KrrFit<f64>;
pub type Functional64 = functional::Functional<f64>;
pub type BoundFunctional64 = functional::BoundFunctional<f64>;
pub type OptimumResult64 = optimum::OptimumResult<f64>;
pub type Rect64 = domain::Rect<f64>;
