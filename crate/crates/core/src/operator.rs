//! The oscillatory operator on grids:
//!
//! ```text
//!     T f(x, y) = integral e^{i lambda S(x,y,t)} psi(x,y,t) f(t) dt
//! ```
//!
//! evaluated node by node over rectangular (x, y) grids, plus grid L^p norms
//! (trapezoid tensor weights) and 1-d norms of test functions.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::amplitude::{Cutoff, TestFunction};
use crate::error::{Error, Result};
use crate::pairwise;
use crate::phase::Phase;
use crate::quadrature::{integrate_oscillatory, QuadratureConfig};

/// Default cap on grid nodes per axis for full-square norms. The spacing rule
/// min(1/32, 1/(4 lambda)) is applied up to this cap; beyond it the field is
/// undersampled relative to its fastest oscillation, which the norm sweeps
/// tolerate (they compare octaves against a 10x band, not percent-level
/// values). Uncapped rule grids at lambda = 2^10 would need 8193^2 nodes.
pub const DEFAULT_GRID_CAP: usize = 257;

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub lambda: f64,
    pub phase: Phase,
    pub cutoff: Cutoff,
    pub f: TestFunction,
}

impl OperatorSpec {
    pub fn new(lambda: f64, phase: Phase, cutoff: Cutoff, f: TestFunction) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!(
                "operator needs lambda > 0, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            phase,
            cutoff,
            f,
        })
    }

    pub fn with_f(&self, f: TestFunction) -> Self {
        Self { f, ..self.clone() }
    }
}

/// Uniform rectangular grid; nodes include both range endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "grid needs nx, ny >= 2, got {nx} x {ny}"
            )));
        }
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(Error::Config("grid ranges must be increasing".into()));
        }
        Ok(Self {
            x_lo: x_range.0,
            x_hi: x_range.1,
            y_lo: y_range.0,
            y_hi: y_range.1,
            nx,
            ny,
        })
    }

    /// Grid over [-1, 1]^2 with spacing min(1/32, 1/(4 lambda)), capped at
    /// `max_nodes_per_axis` nodes per axis.
    pub fn full_square(lambda: f64, max_nodes_per_axis: usize) -> Self {
        let spacing = (1.0 / 32.0f64).min(1.0 / (4.0 * lambda));
        let n = ((2.0 / spacing).ceil() as usize + 1)
            .min(max_nodes_per_axis)
            .max(2);
        Self {
            x_lo: -1.0,
            x_hi: 1.0,
            y_lo: -1.0,
            y_hi: 1.0,
            nx: n,
            ny: n,
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_hi - self.y_lo) / (self.ny - 1) as f64
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_lo + ix as f64 * self.dx()
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        self.y_lo + iy as f64 * self.dy()
    }

    /// Total node count; never zero (nx, ny >= 2).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major index: x varies in the outer loop.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }
}

/// Complex samples of T f over a grid. `values[ix * ny + iy]`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// CSV dump: header `x,y,re,im`, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,re,im")?;
        for ix in 0..self.grid.nx {
            let x = self.grid.x_at(ix);
            for iy in 0..self.grid.ny {
                let y = self.grid.y_at(iy);
                let v = self.at(ix, iy);
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", x, y, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// The inner t-integral of the operator at one output point.
pub fn inner_integral(
    spec: &OperatorSpec,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let (f_lo, f_hi) = spec.f.support();
    let (lo, hi) = match spec.cutoff.t_support() {
        Some((c_lo, c_hi)) => (f_lo.max(c_lo), f_hi.min(c_hi)),
        None => (f_lo, f_hi),
    };
    if !(hi > lo) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let xy = spec.cutoff.xy_factor(x, y);
    if xy == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rate = spec.lambda * spec.phase.t_rate_bound(x, y, lo, hi)
        + spec.f.phase_rate_bound(lo, hi)
        + spec.cutoff.t_rate_bound(y);
    let lambda = spec.lambda;
    let phase = spec.phase;
    let cutoff = &spec.cutoff;
    let f = &spec.f;
    let g = move |t: f64| {
        Complex64::new(0.0, lambda * phase.eval(x, y, t)).exp() * cutoff.t_factor(y, t) * f.eval(t)
    };
    integrate_oscillatory(g, (lo, hi), rate, cfg).map(|v| v * xy)
}

/// Evaluate the field over all grid nodes. Nodes are independent, so the
/// computation parallelizes over disjoint slots and is thread-count
/// independent.
pub fn evaluate_field(
    spec: &OperatorSpec,
    grid: &Grid,
    cfg: &QuadratureConfig,
) -> Result<GridField> {
    let n = grid.len();
    let results: Vec<Result<Complex64>> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let ix = idx / grid.ny;
            let iy = idx % grid.ny;
            inner_integral(spec, grid.x_at(ix), grid.y_at(iy), cfg)
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    for r in results {
        values.push(r?);
    }
    Ok(GridField {
        grid: *grid,
        values,
    })
}

/// Trapezoid-rule L^p norm of the field over a sub-rectangle of the grid
/// (`None` means the full grid). The restriction keeps whole grid cells: all
/// nodes with coordinates inside the closed rectangle participate, boundary
/// nodes at half weight.
pub fn lp_norm(field: &GridField, p: f64, domain: Option<((f64, f64), (f64, f64))>) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Config(format!("lp_norm needs p >= 1, got {p}")));
    }
    let g = &field.grid;
    let eps_x = 1e-12 * g.dx();
    let eps_y = 1e-12 * g.dy();
    let ((x0, x1), (y0, y1)) = domain.unwrap_or(((g.x_lo, g.x_hi), (g.y_lo, g.y_hi)));
    let ix_lo = (0..g.nx).find(|&i| g.x_at(i) >= x0 - eps_x);
    let ix_hi = (0..g.nx).rev().find(|&i| g.x_at(i) <= x1 + eps_x);
    let iy_lo = (0..g.ny).find(|&i| g.y_at(i) >= y0 - eps_y);
    let iy_hi = (0..g.ny).rev().find(|&i| g.y_at(i) <= y1 + eps_y);
    let (Some(ix_lo), Some(ix_hi), Some(iy_lo), Some(iy_hi)) = (ix_lo, ix_hi, iy_lo, iy_hi) else {
        return Err(Error::EmptyDomain);
    };
    if ix_hi <= ix_lo || iy_hi <= iy_lo {
        return Err(Error::EmptyDomain);
    }
    let (mx, my) = (ix_hi - ix_lo + 1, iy_hi - iy_lo + 1);
    let cell = g.dx() * g.dy();
    let sum = pairwise::par_map_sum_f64(mx * my, |k| {
        let ix = ix_lo + k / my;
        let iy = iy_lo + k % my;
        let wx = if ix == ix_lo || ix == ix_hi { 0.5 } else { 1.0 };
        let wy = if iy == iy_lo || iy == iy_hi { 0.5 } else { 1.0 };
        field.at(ix, iy).norm().powf(p) * wx * wy
    });
    Ok((sum * cell).powf(1.0 / p))
}

/// Trapezoid L^p norm of a test function over its support, with at least
/// `MIN_NORM_NODES` nodes.
pub const MIN_NORM_NODES: usize = 10_001;

pub fn lp_norm_1d(f: &TestFunction, p: f64) -> f64 {
    let (lo, hi) = f.support();
    if !(hi > lo) {
        return 0.0;
    }
    let n = MIN_NORM_NODES;
    let h = (hi - lo) / (n - 1) as f64;
    let sum = pairwise::map_sum_f64(n, |i| {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        f.eval(lo + i as f64 * h).norm().powf(p) * w
    });
    (sum * h).powf(1.0 / p)
}

pub fn l2_norm_1d(f: &TestFunction) -> f64 {
    lp_norm_1d(f, 2.0)
}

pub fn l4_norm_1d(f: &TestFunction) -> f64 {
    lp_norm_1d(f, 4.0)
}
