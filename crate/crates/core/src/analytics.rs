//! Operator-norm lower bounds, the extremizer box bound, decay-exponent
//! regression, and the recursion diagnostic.
//!
//! Q4(lambda) is the sup of ||T f||_4 / ||f||_4 over all class cutoffs and
//! test functions; it is approximated from below by a finite family (the
//! indicator extremizer, Gaussian bumps, phase-matched chirps, seeded trig
//! polynomials) plus an optional coordinate ascent on a sampled function.
//! The extremizer lower bound integrates |T chi_[0,1]|^4 over the shrinking
//! box |x| <= c1 lambda^{-1/2}, |y| <= c2 lambda^{-1}, which scales exactly
//! like lambda^{-3/8} and pins the decay exponent.

use serde::Serialize;

use crate::amplitude::{Cutoff, TestFunction};
use crate::error::{Error, Result};
use crate::operator::{evaluate_field, l4_norm_1d, lp_norm, Grid, OperatorSpec};
use crate::phase::Phase;
use crate::quadrature::QuadratureConfig;

/// Least-squares fit of log2(value) against log2(lambda).
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Fitted exponent: value ~ c * lambda^slope.
    pub slope: f64,
    pub intercept: f64,
    /// Largest |log2 residual| over the fitted points.
    pub max_residual: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Config(
                "decay fit needs strictly increasing lambda".into(),
            ));
        }
    }
    for &(lambda, value) in points {
        if !(value > 0.0) {
            return Err(Error::NonPositiveValue { lambda, value });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0f64, f64::max);
    Ok(DecayFit {
        slope,
        intercept,
        max_residual,
        points: points.to_vec(),
    })
}

/// A lower-bound estimate of Q4 at one lambda.
#[derive(Debug, Clone, Serialize)]
pub struct QEstimate {
    pub lambda: f64,
    /// Best ratio ||T f||_4 / ||f||_4 found.
    pub value: f64,
    /// Which candidate achieved it.
    pub argmax: String,
    pub member_values: Vec<(String, f64)>,
}

/// Coordinate-ascent refinement on a sampled test function.
#[derive(Debug, Clone, Serialize)]
pub struct AscentConfig {
    pub nodes: usize,
    pub max_iters: usize,
    pub init_step: f64,
    pub min_step: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            nodes: 64,
            max_iters: 200,
            init_step: 0.25,
            min_step: 1e-3,
        }
    }
}

/// The default candidate family at a given lambda: the indicator extremizer,
/// four Gaussian bumps, three chirps with phase-matched frequencies, and
/// eight seeded trig polynomials.
pub fn default_family(lambda: f64, seed: u64) -> Vec<(String, TestFunction)> {
    let mut family: Vec<(String, TestFunction)> = Vec::new();
    family.push(("chi01".into(), TestFunction::characteristic(0.0, 1.0)));
    for e in 1..=4i32 {
        let width = 0.5f64.powi(e);
        family.push((
            format!("gauss_w{width}"),
            TestFunction::gauss_bump(0.5, width),
        ));
    }
    for (name, mu) in [
        ("chirp_quarter", lambda / 4.0),
        ("chirp_half", lambda / 2.0),
        ("chirp_full", lambda),
    ] {
        family.push((name.into(), TestFunction::chirp(mu, (0.0, 1.0))));
    }
    for i in 0..8u64 {
        family.push((
            format!("trig{i}"),
            TestFunction::trig_poly_seeded(seed.wrapping_add(i), 6, (0.0, 1.0)),
        ));
    }
    family
}

fn ratio_for(lambda: f64, f: &TestFunction, grid: &Grid, cfg: &QuadratureConfig) -> Result<f64> {
    let denom = l4_norm_1d(f);
    if !(denom > 0.0) {
        return Err(Error::Config(
            "family member has zero L4 norm; cannot form the ratio".into(),
        ));
    }
    let spec = OperatorSpec::new(
        lambda,
        Phase::Canonical,
        Cutoff::smooth_bump(0.5, 1.0)?,
        f.clone(),
    )?;
    let field = evaluate_field(&spec, grid, cfg)?;
    Ok(lp_norm(&field, 4.0, None)? / denom)
}

/// Lower-bound Q4 at `lambda` by the best ratio over the family, optionally
/// refined by coordinate ascent on a sampled function.
///
/// The returned value is the maximum over explicitly evaluated candidates,
/// so it never exceeds the discretized sup and never decreases when the
/// family grows.
pub fn estimate_q4_lower(
    lambda: f64,
    family: &[(String, TestFunction)],
    ascent: Option<&AscentConfig>,
    grid_cap: usize,
    cfg: &QuadratureConfig,
) -> Result<QEstimate> {
    if family.is_empty() {
        return Err(Error::Config("family must be nonempty".into()));
    }
    let grid = Grid::full_square(lambda, grid_cap);
    let mut member_values = Vec::with_capacity(family.len());
    let mut best = f64::NEG_INFINITY;
    let mut argmax = String::new();
    for (name, f) in family {
        let r = ratio_for(lambda, f, &grid, cfg)?;
        member_values.push((name.clone(), r));
        if r > best {
            best = r;
            argmax = name.clone();
        }
    }

    if let Some(acfg) = ascent {
        let start = family
            .iter()
            .find(|(name, _)| *name == argmax)
            .map(|(_, f)| f)
            .unwrap();
        let (value, trace) = coordinate_ascent(lambda, start, best, acfg, &grid, cfg)?;
        if value > best {
            best = value;
            argmax = trace;
        }
    }

    Ok(QEstimate {
        lambda,
        value: best,
        argmax,
        member_values,
    })
}

/// Greedy per-node ascent: perturb one sample at a time, keep improvements,
/// halve the step after a full unproductive sweep.
fn coordinate_ascent(
    lambda: f64,
    start: &TestFunction,
    start_value: f64,
    acfg: &AscentConfig,
    grid: &Grid,
    cfg: &QuadratureConfig,
) -> Result<(f64, String)> {
    let (lo, hi) = start.support();
    let n = acfg.nodes;
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            start.eval(t).norm()
        })
        .collect();
    let mut best = start_value;
    let mut step = acfg.init_step;
    let mut accepted = 0usize;
    let mut since_improvement = 0usize;
    for iter in 0..acfg.max_iters {
        let i = iter % n;
        let mut improved = false;
        for dir in [1.0, -1.0] {
            let mut trial = values.clone();
            trial[i] += dir * step;
            let f = TestFunction::sampled(lo, hi, trial.clone())?;
            let denom = l4_norm_1d(&f);
            if !(denom > 0.0) {
                continue;
            }
            let r = ratio_for(lambda, &f, grid, cfg)?;
            if r > best * (1.0 + 1e-12) {
                best = r;
                values = trial;
                accepted += 1;
                improved = true;
                break;
            }
        }
        if improved {
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= n {
                step *= 0.5;
                since_improvement = 0;
                if step < acfg.min_step {
                    break;
                }
            }
        }
    }
    Ok((best, format!("ascent({accepted} accepted steps)")))
}

/// Grid resolution of the extremizer box (fixed, in rescaled coordinates).
pub const EXTREMIZER_GRID: usize = 64;

/// L4 mass of T chi_[0,1] over the box |x| <= c1 lambda^{-1/2},
/// |y| <= c2 lambda^{-1}, on a fixed 64 x 64 grid.
///
/// In rescaled coordinates (X, Y) = (lambda^{1/2} x, lambda y) the phase is
/// lambda-independent and the bump factors are identically 1 on the box, so
/// the result scales exactly like lambda^{-3/8}.
pub fn extremizer_lower_bound(
    lambda: f64,
    c1: f64,
    c2: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(lambda >= 4.0) {
        return Err(Error::Config(format!(
            "extremizer bound needs lambda >= 4, got {lambda}"
        )));
    }
    if !(c1 > 0.0 && c1 <= 0.25 && c2 > 0.0 && c2 <= 0.25) {
        return Err(Error::Config(format!(
            "extremizer bound needs 0 < c1, c2 <= 1/4, got c1={c1}, c2={c2}"
        )));
    }
    let half_x = c1 * lambda.powf(-0.5);
    let half_y = c2 / lambda;
    let grid = Grid::new(
        (-half_x, half_x),
        (-half_y, half_y),
        EXTREMIZER_GRID,
        EXTREMIZER_GRID,
    )?;
    let spec = OperatorSpec::new(
        lambda,
        Phase::Canonical,
        Cutoff::smooth_bump(0.5, 1.0)?,
        TestFunction::characteristic(0.0, 1.0),
    )?;
    let field = evaluate_field(&spec, &grid, cfg)?;
    lp_norm(&field, 4.0, None)
}

/// Consistency monitor for the iteration inequality
/// Q4(lambda) <~ K lambda^{-3/8} + K^{-1/2} Q4(lambda / K).
#[derive(Debug, Clone, Serialize)]
pub struct RecursionReport {
    pub lambda_max: f64,
    pub k_parts: usize,
    pub q4_at_lambda: f64,
    pub q4_at_lambda_over_k: f64,
    /// K lambda^{-3/8} + K^{-1/2} Q4_hat(lambda / K).
    pub bound: f64,
    pub ratio: f64,
}

pub fn recursion_report(
    lambda_max: f64,
    k_parts: usize,
    seed: u64,
    grid_cap: usize,
    cfg: &QuadratureConfig,
) -> Result<RecursionReport> {
    if k_parts < 1 {
        return Err(Error::Config("recursion needs K >= 1".into()));
    }
    let k = k_parts as f64;
    let lambda_low = lambda_max / k;
    if !(lambda_low >= 4.0) {
        return Err(Error::Config(format!(
            "recursion needs lambda_max / K >= 4, got lambda_max/K = {lambda_low}"
        )));
    }
    let family_hi = default_family(lambda_max, seed);
    let family_lo = default_family(lambda_low, seed);
    let q_hi = estimate_q4_lower(lambda_max, &family_hi, None, grid_cap, cfg)?;
    let q_lo = estimate_q4_lower(lambda_low, &family_lo, None, grid_cap, cfg)?;
    let bound = k * lambda_max.powf(-0.375) + q_lo.value / k.sqrt();
    Ok(RecursionReport {
        lambda_max,
        k_parts,
        q4_at_lambda: q_hi.value,
        q4_at_lambda_over_k: q_lo.value,
        bound,
        ratio: q_hi.value / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law_recovers_slope() {
        let points: Vec<(f64, f64)> = (6..=16)
            .map(|e| {
                let l = (1u64 << e) as f64;
                (l, l.powf(-0.375))
            })
            .collect();
        let fit = fit_decay(&points).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.375, epsilon = 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let points = vec![(4.0, 2.5), (8.0, 2.5), (16.0, 2.5)];
        let fit = fit_decay(&points).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        assert!(matches!(
            fit_decay(&[(4.0, 1.0), (8.0, 1.0)]),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_decay(&[(4.0, 1.0), (8.0, 0.0), (16.0, 1.0)]),
            Err(Error::NonPositiveValue { .. })
        ));
        assert!(fit_decay(&[(8.0, 1.0), (4.0, 1.0), (16.0, 1.0)]).is_err());
    }

    #[test]
    fn scaling_by_a_power_of_two_shifts_only_the_intercept() {
        let points = vec![(4.0, 0.7), (8.0, 0.31), (16.0, 0.22), (32.0, 0.11)];
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(l, v)| (l, 8.0 * v)).collect();
        let a = fit_decay(&points).unwrap();
        let b = fit_decay(&scaled).unwrap();
        assert_abs_diff_eq!(a.slope, b.slope, epsilon = 1e-12);
        assert_abs_diff_eq!(b.intercept - a.intercept, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.max_residual, b.max_residual, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fit_is_affine_equivariant(c in 1e-3f64..1e3) {
            let points = vec![(4.0, 0.9), (8.0, 0.52), (16.0, 0.30), (32.0, 0.18)];
            let scaled: Vec<(f64, f64)> = points.iter().map(|&(l, v)| (l, c * v)).collect();
            let a = fit_decay(&points).unwrap();
            let b = fit_decay(&scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!(((b.intercept - a.intercept) - c.log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn extremizer_box_and_bound_chain() {
        let cfg = QuadratureConfig::default();
        let (c1, c2) = (0.125, 0.125);
        for &lambda in &[64.0, 1024.0] {
            let v = extremizer_lower_bound(lambda, c1, c2, &cfg).unwrap();
            // Box area is exactly 4 c1 c2 lambda^{-3/2}.
            let half_x = c1 * lambda.powf(-0.5);
            let half_y = c2 / lambda;
            let area = 4.0 * c1 * c2 * lambda.powf(-1.5);
            assert_abs_diff_eq!(
                (2.0 * half_x) * (2.0 * half_y),
                area,
                epsilon = 1e-18 * area.max(1.0)
            );
            // Elementary chain: |inner| >= 0.49 at every box node, so the
            // norm is at least 0.49 * area^{1/4}.
            let floor = 0.49 * area.powf(0.25);
            assert!(v >= floor, "lambda={lambda}: {v:e} < floor {floor:e}");
        }
    }

    #[test]
    fn extremizer_preconditions() {
        let cfg = QuadratureConfig::default();
        assert!(extremizer_lower_bound(2.0, 0.125, 0.125, &cfg).is_err());
        assert!(extremizer_lower_bound(64.0, 0.3, 0.125, &cfg).is_err());
        assert!(extremizer_lower_bound(64.0, 0.125, 0.0, &cfg).is_err());
    }

    #[test]
    fn extremizer_sweep_has_the_sharp_slope() {
        let cfg = QuadratureConfig::default();
        let points: Vec<(f64, f64)> = (6..=12)
            .map(|e| {
                let l = (1u64 << e) as f64;
                (l, extremizer_lower_bound(l, 0.125, 0.125, &cfg).unwrap())
            })
            .collect();
        let fit = fit_decay(&points).unwrap();
        assert!(
            (fit.slope + 0.375).abs() <= 0.02,
            "slope {} off -3/8",
            fit.slope
        );
        // Compensated values pinch into a narrow band.
        let comp: Vec<f64> = points.iter().map(|&(l, v)| v * l.powf(0.375)).collect();
        let (lo, hi) = comp
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo <= 1.5, "band [{lo}, {hi}]");
    }

    #[test]
    fn singleton_family_gives_that_ratio() {
        let cfg = QuadratureConfig::default();
        let family = vec![("chi01".to_string(), TestFunction::characteristic(0.0, 1.0))];
        let est = estimate_q4_lower(32.0, &family, None, 65, &cfg).unwrap();
        assert_eq!(est.argmax, "chi01");
        assert_eq!(est.member_values.len(), 1);
        assert_eq!(est.value, est.member_values[0].1);
        assert!(est.value > 0.0);
    }

    #[test]
    fn growing_the_family_never_decreases_the_estimate() {
        let cfg = QuadratureConfig::default();
        let small = vec![("chi01".to_string(), TestFunction::characteristic(0.0, 1.0))];
        let mut big = small.clone();
        big.push(("gauss".to_string(), TestFunction::gauss_bump(0.5, 0.125)));
        big.push(("chirp".to_string(), TestFunction::chirp(16.0, (0.0, 1.0))));
        let a = estimate_q4_lower(32.0, &small, None, 65, &cfg).unwrap();
        let b = estimate_q4_lower(32.0, &big, None, 65, &cfg).unwrap();
        assert!(b.value >= a.value);
        let member_max = b.member_values.iter().map(|m| m.1).fold(0.0, f64::max);
        assert!(b.value >= member_max - 1e-15);
    }

    #[test]
    fn q4_snapshot_band_at_lambda_256() {
        // Regression snapshot: value * lambda^{3/8} for the default family
        // at lambda = 2^8 on the 129-node grid, frozen at first verified run
        // (argmax was the width-1/2 Gaussian).
        const SNAPSHOT: f64 = 2.1850;
        let cfg = QuadratureConfig::default();
        let family = default_family(256.0, 7);
        let est = estimate_q4_lower(256.0, &family, None, 129, &cfg).unwrap();
        let compensated = est.value * 256.0f64.powf(0.375);
        assert!(
            (compensated - SNAPSHOT).abs() <= 0.2 * SNAPSHOT,
            "compensated {compensated} vs snapshot {SNAPSHOT}"
        );
    }

    #[test]
    fn ascent_never_loses_to_its_start() {
        let cfg = QuadratureConfig::default();
        let family = vec![("chi01".to_string(), TestFunction::characteristic(0.0, 1.0))];
        let plain = estimate_q4_lower(16.0, &family, None, 33, &cfg).unwrap();
        let acfg = AscentConfig {
            nodes: 16,
            max_iters: 24,
            init_step: 0.25,
            min_step: 1e-2,
        };
        let refined = estimate_q4_lower(16.0, &family, Some(&acfg), 33, &cfg).unwrap();
        assert!(refined.value >= plain.value);
        // Deterministic: same config, same result.
        let again = estimate_q4_lower(16.0, &family, Some(&acfg), 33, &cfg).unwrap();
        assert_eq!(refined.value, again.value);
    }

    #[test]
    fn recursion_report_is_well_defined() {
        let cfg = QuadratureConfig::default();
        let report = recursion_report(64.0, 8, 7, 65, &cfg).unwrap();
        assert!(report.q4_at_lambda > 0.0);
        assert!(report.q4_at_lambda_over_k > 0.0);
        assert!(report.bound > 0.0);
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!(recursion_report(16.0, 8, 7, 65, &cfg).is_err()); // 16/8 < 4
    }
}
