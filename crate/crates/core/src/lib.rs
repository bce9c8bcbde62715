//! Numerical laboratory for the L4 decay rate of the degenerate oscillatory
//! integral operator
//!
//! ```text
//!     T_lambda f(x, y) = integral over t of  e^{i lambda (x^2 t + y t^2)} psi(x,y,t) f(t) dt
//! ```
//!
//! The crate evaluates the operator on grids, decomposes test functions into
//! caps, checks the rescaling and bilinear change-of-variables identities
//! numerically, estimates lower bounds for the L4 -> L4 operator norm, and
//! fits the decay exponent (the sharp rate is lambda^{-3/8}).
//!
//! Modules mirror the pipeline: [`phase`] and [`amplitude`] define the
//! integrand, [`quadrature`] integrates it, [`operator`] builds grid fields
//! and norms, [`decomp`] holds the cap/broad-narrow machinery, and
//! [`analytics`] runs sweeps and regressions. [`cli`] is the front end used
//! by the `oscint` binary.

pub mod amplitude;
pub mod analytics;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod operator;
pub mod pairwise;
pub mod phase;
pub mod quadrature;

pub use error::{Error, Result};
