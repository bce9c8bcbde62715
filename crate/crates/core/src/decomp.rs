//! Cap decomposition, broad-narrow split, the rescaling identity, and the
//! bilinear change of variables, each as a checkable numerical identity.
//!
//! Caps are sharp restrictions f_j = f * chi_[j/K, (j+1)/K), so the
//! reconstruction sum_j f_j = f holds exactly and the rescaling identity
//!
//! ```text
//!     |T_lambda f_j(x, y)| = (1/K) |T_{lambda/K}^{psi_j} f_{j,K}(x, y/K)|
//! ```
//!
//! is an equality of two independently quadratured integrals. In the
//! rescaled operator the output point (x, y/K) enters the phase, while the
//! modulated cutoff psi_j keeps the original (x, y) arguments, exactly as in
//! the substitution t = (s + j)/K that produces it.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::amplitude::{Cutoff, TestFunction};
use crate::error::{Error, Result};
use crate::operator::{evaluate_field, lp_norm, Grid, GridField, OperatorSpec};
use crate::quadrature::{integrate_2d, integrate_oscillatory, QuadratureConfig};

#[derive(Debug, Clone)]
pub struct CapDecomposition {
    pub k_parts: usize,
    pub caps: Vec<TestFunction>,
}

/// Split f into K sharp caps f_j = f * chi_[j/K, (j+1)/K).
pub fn cap_decompose(f: &TestFunction, k_parts: usize) -> Result<CapDecomposition> {
    if k_parts < 1 {
        return Err(Error::Config("cap decomposition needs K >= 1".into()));
    }
    let (lo, hi) = f.support();
    if lo < 0.0 || hi > 1.0 {
        return Err(Error::UnsupportedSupport(lo, hi));
    }
    let k = k_parts as f64;
    let caps = (0..k_parts)
        .map(|j| TestFunction::Restricted {
            base: Box::new(f.clone()),
            lo: j as f64 / k,
            hi: (j + 1) as f64 / k,
        })
        .collect();
    Ok(CapDecomposition { k_parts, caps })
}

/// alpha-broad / narrow classification of a field against its cap fields.
///
/// A node is broad when `max_j |T f_j| <= alpha |T f|` and `|T f| > 0`;
/// everything else (including zeros of the field) is narrow. `br_field`
/// carries |T f| at broad nodes (real part; imaginary part zero).
#[derive(Debug, Clone)]
pub struct BroadNarrowResult {
    pub alpha: f64,
    pub broad_mask: Vec<bool>,
    pub br_field: GridField,
}

pub fn broad_narrow(full: &GridField, caps: &[GridField], alpha: f64) -> Result<BroadNarrowResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "broad-narrow needs alpha in (0,1), got {alpha}"
        )));
    }
    for (j, c) in caps.iter().enumerate() {
        if c.grid != full.grid {
            return Err(Error::GridMismatch(format!(
                "cap field {j} does not share the full field's grid"
            )));
        }
    }
    let n = full.values.len();
    let mut broad_mask = vec![false; n];
    let mut br_values = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let tf = full.values[i].norm();
        if tf == 0.0 {
            continue;
        }
        let max_cap = caps
            .iter()
            .map(|c| c.values[i].norm())
            .fold(0.0f64, f64::max);
        if max_cap <= alpha * tf {
            broad_mask[i] = true;
            br_values[i] = Complex64::new(tf, 0.0);
        }
    }
    Ok(BroadNarrowResult {
        alpha,
        broad_mask,
        br_field: GridField {
            grid: full.grid,
            values: br_values,
        },
    })
}

/// Largest violation of the pointwise bound
/// |T f| <= Br_alpha + alpha^{-1} max_j |T f_j| over the grid.
pub fn pointwise_inequality_violation(
    full: &GridField,
    caps: &[GridField],
    split: &BroadNarrowResult,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..full.values.len() {
        let tf = full.values[i].norm();
        let max_cap = caps
            .iter()
            .map(|c| c.values[i].norm())
            .fold(0.0f64, f64::max);
        let rhs = split.br_field.values[i].re + max_cap / split.alpha;
        worst = worst.max(tf - rhs);
    }
    worst
}

/// Outcome of the exhaustive bilinear-domination search over broad nodes:
/// at each broad node some pair |j - k| >= 2 must satisfy
/// |T f| <= K |T f_j|^{1/2} |T f_k|^{1/2}.
#[derive(Debug, Clone, Copy)]
pub struct DominationOutcome {
    pub broad_nodes: usize,
    pub failing_nodes: usize,
}

pub fn bilinear_domination_check(
    full: &GridField,
    caps: &[GridField],
    split: &BroadNarrowResult,
) -> DominationOutcome {
    let k = caps.len();
    let kf = k as f64;
    let mut broad_nodes = 0;
    let mut failing_nodes = 0;
    for i in 0..full.values.len() {
        if !split.broad_mask[i] {
            continue;
        }
        broad_nodes += 1;
        let tf = full.values[i].norm();
        let mut dominated = false;
        'pairs: for j in 0..k {
            for l in 0..k {
                if j.abs_diff(l) < 2 {
                    continue;
                }
                let prod = caps[j].values[i].norm() * caps[l].values[i].norm();
                if tf <= kf * prod.sqrt() + 1e-12 {
                    dominated = true;
                    break 'pairs;
                }
            }
        }
        if !dominated {
            failing_nodes += 1;
        }
    }
    DominationOutcome {
        broad_nodes,
        failing_nodes,
    }
}

/// Both sides of the rescaling identity as modulus fields over `grid`:
/// left  = |T_lambda f_j|,
/// right = (1/K) |T_{lambda/K}^{psi_j} f_{j,K}| with the output point
///         (x, y/K) in the phase.
///
/// The two sides run through independent quadratures (different intervals,
/// rates and panelizations), so their agreement is a genuine check of the
/// identity.
pub fn rescale_cap(
    spec: &OperatorSpec,
    j: usize,
    k_parts: usize,
    grid: &Grid,
    cfg: &QuadratureConfig,
) -> Result<(GridField, GridField)> {
    let decomp = cap_decompose(&spec.f, k_parts)?;
    let left_complex = evaluate_field(&spec.with_f(decomp.caps[j].clone()), grid, cfg)?;
    let left = GridField {
        grid: *grid,
        values: left_complex
            .values
            .iter()
            .map(|v| Complex64::new(v.norm(), 0.0))
            .collect(),
    };

    let psi_j = Cutoff::modulated_rescaled(spec.cutoff.clone(), j, k_parts, spec.lambda)?;
    let f_jk = TestFunction::CapRescaled {
        base: Box::new(spec.f.clone()),
        j,
        k_parts,
    };
    let k = k_parts as f64;
    let lam = spec.lambda;
    let results: Vec<Result<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x = grid.x_at(idx / grid.ny);
            let y = grid.y_at(idx % grid.ny);
            let xy = psi_j.xy_factor(x, y);
            if xy == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            // Phase of T_{lambda/K} at output point (x, y/K).
            let lam_k = lam / k;
            let y_resc = y / k;
            let rate = lam_k * (x * x + 2.0 * y_resc.abs())
                + psi_j.t_rate_bound(y)
                + f_jk.phase_rate_bound(0.0, 1.0);
            let psi = &psi_j;
            let f = &f_jk;
            integrate_oscillatory(
                move |s| {
                    Complex64::new(0.0, lam_k * (x * x * s + y_resc * s * s)).exp()
                        * psi.t_factor(y, s)
                        * f.eval(s)
                },
                (0.0, 1.0),
                rate,
                cfg,
            )
            .map(|v| v * xy)
        })
        .collect();
    let mut right_values = Vec::with_capacity(grid.len());
    for r in results {
        right_values.push(Complex64::new(r?.norm() / k, 0.0));
    }
    Ok((
        left,
        GridField {
            grid: *grid,
            values: right_values,
        },
    ))
}

/// The change of variables u = t + s, v = t^2 + s^2 on cap_j x cap_k.
///
/// With t in cap_j and s in cap_k, |j - k| >= 2, the map is injective
/// (t - s keeps a fixed sign) and 2v - u^2 = (t - s)^2 stays bounded away
/// from zero, so the weight 1 / (2|t - s|) is bounded by K/2.
#[derive(Debug, Clone, Copy)]
pub struct BilinearMap {
    pub j: usize,
    pub k: usize,
    pub t_cap: (f64, f64),
    pub s_cap: (f64, f64),
    /// +1 when j > k (t > s), -1 when j < k.
    pub sign: f64,
}

impl BilinearMap {
    pub fn new(k_parts: usize, j: usize, k: usize) -> Result<Self> {
        if j.abs_diff(k) < 2 {
            return Err(Error::CapsTooClose { j, k });
        }
        if j >= k_parts || k >= k_parts {
            return Err(Error::Config(format!(
                "cap indices {j}, {k} out of range for K = {k_parts}"
            )));
        }
        let kp = k_parts as f64;
        Ok(Self {
            j,
            k,
            t_cap: (j as f64 / kp, (j + 1) as f64 / kp),
            s_cap: (k as f64 / kp, (k + 1) as f64 / kp),
            sign: if j > k { 1.0 } else { -1.0 },
        })
    }

    pub fn u_range(&self) -> (f64, f64) {
        (self.t_cap.0 + self.s_cap.0, self.t_cap.1 + self.s_cap.1)
    }

    /// u-values where the admissible d-interval changes its active
    /// constraint; the (u, v) domain boundary kinks there.
    pub fn u_breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![
            self.t_cap.0 + self.s_cap.0,
            self.t_cap.0 + self.s_cap.1,
            self.t_cap.1 + self.s_cap.0,
            self.t_cap.1 + self.s_cap.1,
        ];
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        pts
    }

    /// Interval of d = t - s compatible with both caps at given u = t + s;
    /// empty intervals give None.
    pub fn d_range_at(&self, u: f64) -> Option<(f64, f64)> {
        let lo = (2.0 * self.t_cap.0 - u).max(u - 2.0 * self.s_cap.1);
        let hi = (2.0 * self.t_cap.1 - u).min(u - 2.0 * self.s_cap.0);
        if hi > lo {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// v-interval at given u; v = (u^2 + d^2) / 2 is monotone in |d|.
    pub fn v_range_at(&self, u: f64) -> Option<(f64, f64)> {
        let (d_lo, d_hi) = self.d_range_at(u)?;
        let (a_lo, a_hi) = if self.sign > 0.0 {
            (d_lo, d_hi)
        } else {
            (-d_hi, -d_lo)
        };
        debug_assert!(a_lo > 0.0);
        Some(((u * u + a_lo * a_lo) / 2.0, (u * u + a_hi * a_hi) / 2.0))
    }

    /// Invert (u, v) -> (t, s). Requires 2v - u^2 >= 0.
    pub fn invert(&self, u: f64, v: f64) -> (f64, f64) {
        let disc = (2.0 * v - u * u).max(0.0);
        let d = self.sign * disc.sqrt();
        ((u + d) / 2.0, (u - d) / 2.0)
    }
}

/// Direct and transformed bilinear integrals of the cap pair at each node:
///
/// direct(x,y)      = double integral over cap_j x cap_k of
///                    e^{i lambda (x^2 (t+s) + y (t^2+s^2))} psi psi f_j f_k,
/// transformed(x,y) = the same integral in (u, v), with the measure
///                    du dv / (2 |t - s|).
pub fn bilinear_change_of_vars(
    spec: &OperatorSpec,
    decomp: &CapDecomposition,
    j: usize,
    k: usize,
    nodes: &[(f64, f64)],
    cfg: &QuadratureConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let map = BilinearMap::new(decomp.k_parts, j, k)?;
    let f_j = &decomp.caps[j];
    let f_k = &decomp.caps[k];
    let lam = spec.lambda;
    let cutoff = &spec.cutoff;
    let t_max = map.t_cap.1.abs().max(map.s_cap.1.abs());

    let results: Vec<Result<(Complex64, Complex64)>> = nodes
        .par_iter()
        .map(|&(x, y)| {
            let xy2 = cutoff.xy_factor(x, y).powi(2);
            let rate_t = lam * (x * x + 2.0 * y.abs() * t_max)
                + f_j.phase_rate_bound(map.t_cap.0, map.t_cap.1);
            let rate_s = lam * (x * x + 2.0 * y.abs() * t_max)
                + f_k.phase_rate_bound(map.s_cap.0, map.s_cap.1);
            let direct = integrate_2d(
                |t, s| {
                    Complex64::new(0.0, lam * (x * x * (t + s) + y * (t * t + s * s))).exp()
                        * cutoff.t_factor(y, t)
                        * cutoff.t_factor(y, s)
                        * f_j.eval(t)
                        * f_k.eval(s)
                },
                (map.t_cap, map.s_cap),
                (rate_t, rate_s),
                cfg,
            )? * xy2;

            let transformed =
                transformed_bilinear(&map, lam, x, y, cutoff, f_j, f_k, rate_t, cfg)? * xy2;
            Ok((direct, transformed))
        })
        .collect();

    let mut direct = Vec::with_capacity(nodes.len());
    let mut transformed = Vec::with_capacity(nodes.len());
    for r in results {
        let (d, t) = r?;
        direct.push(d);
        transformed.push(t);
    }
    Ok((direct, transformed))
}

/// The (u, v) side: outer integral in u (split at the domain's corner
/// breakpoints), inner integral in v over [v_lo(u), v_hi(u)].
#[allow(clippy::too_many_arguments)]
fn transformed_bilinear(
    map: &BilinearMap,
    lam: f64,
    x: f64,
    y: f64,
    cutoff: &Cutoff,
    f_j: &TestFunction,
    f_k: &TestFunction,
    rate_u: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let rate_v = lam * y.abs();
    let break_pts = map.u_breakpoints();
    let mut total = Complex64::new(0.0, 0.0);
    for seg in break_pts.windows(2) {
        let inner = |u: f64| -> Complex64 {
            let Some((v_lo, v_hi)) = map.v_range_at(u) else {
                return Complex64::new(0.0, 0.0);
            };
            integrate_oscillatory(
                |v| {
                    let (t, s) = map.invert(u, v);
                    let d = (t - s).abs();
                    Complex64::new(0.0, lam * (x * x * u + y * v)).exp()
                        * cutoff.t_factor(y, t)
                        * cutoff.t_factor(y, s)
                        * (f_j.eval(t) * f_k.eval(s) / (2.0 * d))
                },
                (v_lo, v_hi),
                rate_v,
                cfg,
            )
            // Cannot propagate Result from inside the outer integrand;
            // poison loudly instead of silently dropping the panel.
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        total += integrate_oscillatory(inner, (seg[0], seg[1]), rate_u, cfg)?;
    }
    Ok(total)
}

/// L^2(du dv) norm squared of F_{j,k}(u,v) = f_j f_k / (2 |t - s|), computed
/// on the (u, v) side.
pub fn cap_pair_l2_squared(
    decomp: &CapDecomposition,
    j: usize,
    k: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let map = BilinearMap::new(decomp.k_parts, j, k)?;
    let f_j = &decomp.caps[j];
    let f_k = &decomp.caps[k];
    let break_pts = map.u_breakpoints();
    let mut total = 0.0;
    for seg in break_pts.windows(2) {
        let inner = |u: f64| -> Complex64 {
            let Some((v_lo, v_hi)) = map.v_range_at(u) else {
                return Complex64::new(0.0, 0.0);
            };
            integrate_oscillatory(
                |v| {
                    let (t, s) = map.invert(u, v);
                    let d = (t - s).abs();
                    let fval = (f_j.eval(t) * f_k.eval(s)).norm() / (2.0 * d);
                    Complex64::new(fval * fval, 0.0)
                },
                (v_lo, v_hi),
                0.0,
                cfg,
            )
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        total += integrate_oscillatory(inner, (seg[0], seg[1]), 0.0, cfg)?.re;
    }
    Ok(total)
}

/// Broad-part L^4 mass against the bilinear right-hand side
/// rhs_core = lambda^{-3/2} K^4 sum_{|j-k|>=2} ||F_{j,k}||^2_{L^2}.
///
/// The proportionality constant between the two is unknown, so the report
/// carries the ratio for boundedness tracking across sweeps; lhs = 0 gives
/// ratio 0 by convention.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BroadReport {
    pub lambda: f64,
    pub k_parts: usize,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs_core: f64,
    pub ratio: f64,
    pub broad_nodes: usize,
}

pub fn broad_l4_report(
    spec: &OperatorSpec,
    k_parts: usize,
    alpha: f64,
    grid: &Grid,
    cfg: &QuadratureConfig,
) -> Result<BroadReport> {
    let decomp = cap_decompose(&spec.f, k_parts)?;
    let full = evaluate_field(spec, grid, cfg)?;
    let cap_fields: Vec<GridField> = decomp
        .caps
        .iter()
        .map(|fj| evaluate_field(&spec.with_f(fj.clone()), grid, cfg))
        .collect::<Result<_>>()?;
    let split = broad_narrow(&full, &cap_fields, alpha)?;
    let lhs = lp_norm(&split.br_field, 4.0, None)?.powi(4);

    let mut rhs_sum = 0.0;
    for j in 0..k_parts {
        for k in 0..k_parts {
            if j.abs_diff(k) >= 2 {
                rhs_sum += cap_pair_l2_squared(&decomp, j, k, cfg)?;
            }
        }
    }
    let kf = k_parts as f64;
    let rhs_core = spec.lambda.powf(-1.5) * kf.powi(4) * rhs_sum;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs_core };
    Ok(BroadReport {
        lambda: spec.lambda,
        k_parts,
        alpha,
        lhs,
        rhs_core,
        ratio,
        broad_nodes: split.broad_mask.iter().filter(|&&b| b).count(),
    })
}
