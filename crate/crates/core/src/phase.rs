//! The cubic oscillatory phase, in canonical and generalized form.
//!
//! The canonical phase is S(x,y,t) = x^2 t + y t^2. The general form
//! S(x,y,t) = (ax + by) t^2 + (cx + dy)^2 t reduces to the canonical one by
//! the linear change of output coordinates (X, Y) = (cx + dy, ax + by),
//! provided ad - bc != 0.

use serde::Serialize;

use crate::error::{Error, Result};

/// Determinant threshold below which the (a,b,c,d) matrix counts as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Phase {
    Canonical,
    General { a: f64, b: f64, c: f64, d: f64 },
}

impl Phase {
    /// General phase with coefficient check `|ad - bc| >= SINGULARITY_TOL`.
    pub fn general(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if det.abs() < SINGULARITY_TOL {
            return Err(Error::SingularMatrix {
                det_abs: det.abs(),
                tol: SINGULARITY_TOL,
            });
        }
        Ok(Phase::General { a, b, c, d })
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match *self {
            Phase::Canonical => x * x * t + y * t * t,
            Phase::General { a, b, c, d } => {
                let lin_quad = a * x + b * y;
                let lin_lin = c * x + d * y;
                lin_quad * t * t + lin_lin * lin_lin * t
            }
        }
    }

    /// sup over `t` in `[t_lo, t_hi]` of |dS/dt| at fixed (x, y).
    ///
    /// dS/dt is affine in t for both forms, so the sup sits at an endpoint.
    pub fn t_rate_bound(&self, x: f64, y: f64, t_lo: f64, t_hi: f64) -> f64 {
        let dt = |t: f64| -> f64 {
            match *self {
                Phase::Canonical => x * x + 2.0 * y * t,
                Phase::General { a, b, c, d } => {
                    let lin_lin = c * x + d * y;
                    2.0 * (a * x + b * y) * t + lin_lin * lin_lin
                }
            }
        };
        dt(t_lo).abs().max(dt(t_hi).abs())
    }

    /// Reduce a general phase to canonical coordinates.
    ///
    /// Returns the output-plane change (X, Y) = (cx + dy, ax + by) and the
    /// canonical phase, so that eval(general, x, y, t) equals
    /// eval(canonical, X, Y, t) identically.
    pub fn reduce(&self) -> Result<(LinearChange, Phase)> {
        match *self {
            Phase::Canonical => Ok((LinearChange::identity(), Phase::Canonical)),
            Phase::General { a, b, c, d } => {
                let change = LinearChange::new([[c, d], [a, b]])?;
                Ok((change, Phase::Canonical))
            }
        }
    }
}

/// An invertible linear change of the output (x, y) plane.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearChange {
    pub matrix: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
}

impl LinearChange {
    pub fn new(matrix: [[f64; 2]; 2]) -> Result<Self> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det.abs() < SINGULARITY_TOL {
            return Err(Error::SingularMatrix {
                det_abs: det.abs(),
                tol: SINGULARITY_TOL,
            });
        }
        let inverse = [
            [matrix[1][1] / det, -matrix[0][1] / det],
            [-matrix[1][0] / det, matrix[0][0] / det],
        ];
        Ok(Self { matrix, inverse })
    }

    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            inverse: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.matrix[0][0] * x + self.matrix[0][1] * y,
            self.matrix[1][0] * x + self.matrix[1][1] * y,
        )
    }

    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.inverse[0][0] * x + self.inverse[0][1] * y,
            self.inverse[1][0] * x + self.inverse[1][1] * y,
        )
    }
}
