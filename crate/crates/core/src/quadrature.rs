//! Oscillation-aware panel quadrature and a slow Simpson oracle.
//!
//! The fast path splits the interval into panels short enough that the phase
//! advances at most `oscillation_budget` radians per panel (given a caller
//! supplied bound on the phase derivative) and applies a fixed Gauss-Legendre
//! rule on each panel. Panels are combined by deterministic pairwise
//! summation, so results are independent of evaluation order.
//!
//! `max_panel_width` additionally caps the panel size so that non-oscillatory
//! amplitude features (bump transitions, narrow Gaussians) are resolved even
//! when the phase is slow.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pairwise;

#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Gauss-Legendre points per panel.
    pub points_per_panel: usize,
    /// Maximum phase change per panel, in radians.
    pub oscillation_budget: f64,
    /// Panels are never narrower than this; intervals narrower than this
    /// integrate to zero.
    pub min_panel_width: f64,
    /// Panels are never wider than this, so smooth amplitude structure is
    /// resolved even at negligible phase rates.
    pub max_panel_width: f64,
    /// Target absolute accuracy (validated against the oracle, not adaptive).
    pub abs_tolerance: f64,
    /// Hard cap on the panel count per integral.
    pub max_panels: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            points_per_panel: 10,
            oscillation_budget: std::f64::consts::FRAC_PI_2,
            min_panel_width: 1e-6,
            max_panel_width: 1.0 / 32.0,
            abs_tolerance: 1e-10,
            max_panels: 100_000_000,
        }
    }
}

impl QuadratureConfig {
    /// Panel width for a given bound on |d(phase)/dt|.
    fn panel_width(&self, phase_rate_bound: f64) -> f64 {
        let by_phase = if phase_rate_bound > 0.0 {
            self.oscillation_budget / phase_rate_bound
        } else {
            f64::INFINITY
        };
        by_phase.min(self.max_panel_width).max(self.min_panel_width)
    }

    fn panel_count(&self, width: f64, phase_rate_bound: f64) -> Result<u64> {
        let target = self.panel_width(phase_rate_bound);
        let n = (width / target).ceil().max(1.0);
        if n > self.max_panels as f64 {
            return Err(Error::BudgetExceeded {
                panels: n as u64,
                limit: self.max_panels,
            });
        }
        Ok(n as u64)
    }
}

/// Nodes and weights of the `p`-point Gauss-Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence and cached.
pub fn gauss_legendre(p: usize) -> Arc<Vec<(f64, f64)>> {
    assert!(p >= 2, "Gauss-Legendre rule needs at least 2 points");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&p) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(p));
    cache.lock().unwrap().insert(p, rule.clone());
    rule
}

fn compute_gauss_legendre(p: usize) -> Vec<(f64, f64)> {
    let n = p as f64;
    let mut pairs = vec![(0.0, 0.0); p];
    // Roots come in +/- pairs; solve the positive half and mirror.
    for i in 0..(p + 1) / 2 {
        // Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        for _ in 0..100 {
            let (v, d) = legendre_and_derivative(p, x);
            let step = v / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(p, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pairs[i] = (-x, w);
        pairs[p - 1 - i] = (x, w);
    }
    if p % 2 == 1 {
        // Exact center node for odd rules.
        let (_, d) = legendre_and_derivative(p, 0.0);
        pairs[p / 2] = (0.0, 2.0 / (d * d));
    }
    pairs
}

/// Value and derivative of the Legendre polynomial P_p at x.
fn legendre_and_derivative(p: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = p as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate `g` over `interval` with panels sized for a phase whose
/// derivative is bounded by `phase_rate_bound`.
///
/// The bound must dominate the total oscillation rate of `g` (phase factor,
/// modulated cutoffs, chirped test functions); callers assemble it from the
/// pieces they multiply together.
pub fn integrate_oscillatory<G>(
    g: G,
    interval: (f64, f64),
    phase_rate_bound: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    let (lo, hi) = interval;
    let width = hi - lo;
    if width < cfg.min_panel_width {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let n_panels = cfg.panel_count(width, phase_rate_bound)?;
    let h = width / n_panels as f64;
    let rule = gauss_legendre(cfg.points_per_panel);
    let sum = pairwise::map_sum_complex(n_panels as usize, |k| {
        panel_value(&g, lo + k as f64 * h, h, &rule)
    });
    Ok(sum)
}

fn panel_value<G: Fn(f64) -> Complex64>(
    g: &G,
    panel_lo: f64,
    h: f64,
    rule: &[(f64, f64)],
) -> Complex64 {
    let half = 0.5 * h;
    let mid = panel_lo + half;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(x, w) in rule {
        acc += g(mid + half * x) * w;
    }
    acc * half
}

/// Composite Simpson rule with `n` nodes (odd, >= 3). Ground truth for the
/// fast engine; deliberately has no shared code with the panel path.
pub fn brute_force_oracle<G>(g: G, interval: (f64, f64), n: usize) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    if n < 3 || n % 2 == 0 {
        return Err(Error::Config(format!(
            "Simpson oracle needs an odd node count >= 3, got {n}"
        )));
    }
    let (lo, hi) = interval;
    let h = (hi - lo) / (n - 1) as f64;
    let sum = pairwise::map_sum_complex(n, |i| {
        let coeff = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        g(lo + i as f64 * h) * coeff
    });
    Ok(sum * (h / 3.0))
}

/// Composite Simpson on a rectangle with `n` nodes per axis (odd, >= 3).
pub fn brute_force_oracle_2d<G>(g: G, rect: ((f64, f64), (f64, f64)), n: usize) -> Result<Complex64>
where
    G: Fn(f64, f64) -> Complex64,
{
    if n < 3 || n % 2 == 0 {
        return Err(Error::Config(format!(
            "2-d Simpson oracle needs an odd node count >= 3, got {n}"
        )));
    }
    let ((t_lo, t_hi), (s_lo, s_hi)) = rect;
    let ht = (t_hi - t_lo) / (n - 1) as f64;
    let hs = (s_hi - s_lo) / (n - 1) as f64;
    let coeff = |i: usize| -> f64 {
        if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let sum = pairwise::map_sum_complex(n * n, |idx| {
        let i = idx / n;
        let j = idx % n;
        g(t_lo + i as f64 * ht, s_lo + j as f64 * hs) * (coeff(i) * coeff(j))
    });
    Ok(sum * (ht / 3.0) * (hs / 3.0))
}

/// Tensorized panel Gauss-Legendre over a rectangle, with per-axis phase rate
/// bounds `(rate_t, rate_s)`.
pub fn integrate_2d<G>(
    g: G,
    rect: ((f64, f64), (f64, f64)),
    phase_rate_bounds: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<Complex64>
where
    G: Fn(f64, f64) -> Complex64,
{
    let ((t_lo, t_hi), (s_lo, s_hi)) = rect;
    let wt = t_hi - t_lo;
    let ws = s_hi - s_lo;
    if wt < cfg.min_panel_width || ws < cfg.min_panel_width {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let nt = cfg.panel_count(wt, phase_rate_bounds.0)?;
    let ns = cfg.panel_count(ws, phase_rate_bounds.1)?;
    if nt.saturating_mul(ns) > cfg.max_panels {
        return Err(Error::BudgetExceeded {
            panels: nt.saturating_mul(ns),
            limit: cfg.max_panels,
        });
    }
    let ht = wt / nt as f64;
    let hs = ws / ns as f64;
    let rule = gauss_legendre(cfg.points_per_panel);
    let sum = pairwise::map_sum_complex((nt * ns) as usize, |idx| {
        let kt = idx as u64 / ns;
        let ks = idx as u64 % ns;
        panel_value_2d(
            &g,
            t_lo + kt as f64 * ht,
            ht,
            s_lo + ks as f64 * hs,
            hs,
            &rule,
        )
    });
    Ok(sum)
}

fn panel_value_2d<G: Fn(f64, f64) -> Complex64>(
    g: &G,
    t_lo: f64,
    ht: f64,
    s_lo: f64,
    hs: f64,
    rule: &[(f64, f64)],
) -> Complex64 {
    let half_t = 0.5 * ht;
    let half_s = 0.5 * hs;
    let mid_t = t_lo + half_t;
    let mid_s = s_lo + half_s;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(xt, wti) in rule {
        let t = mid_t + half_t * xt;
        let mut row = Complex64::new(0.0, 0.0);
        for &(xs, wsj) in rule {
            row += g(t, mid_s + half_s * xs) * wsj;
        }
        acc += row * wti;
    }
    acc * (half_t * half_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_phase(rate: f64) -> impl Fn(f64) -> Complex64 {
        move |t| Complex64::new(0.0, rate * t).exp()
    }

    #[test]
    fn gauss_legendre_integrates_monomials_exactly() {
        // p points are exact through degree 2p - 1.
        let rule = gauss_legendre(10);
        for k in 0..=19usize {
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let cfg = QuadratureConfig::default();
        let v =
            integrate_oscillatory(|_| Complex64::new(0.0, 0.0), (0.0, 1.0), 10.0, &cfg).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pure_exponential_matches_antiderivative() {
        // integral_0^1 e^{i lambda x^2 t} dt at lambda = 100, x = 0.5.
        let cfg = QuadratureConfig::default();
        let rate = 25.0;
        let v = integrate_oscillatory(unit_phase(rate), (0.0, 1.0), rate, &cfg).unwrap();
        let i_rate = Complex64::new(0.0, rate);
        let exact = ((i_rate).exp() - 1.0) / i_rate;
        assert!((v - exact).norm() < 1e-10);
    }

    #[test]
    fn simpson_is_exact_for_constants() {
        let v = brute_force_oracle(|_| Complex64::new(1.0, 0.0), (0.0, 1.0), 101).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn simpson_full_period_vanishes() {
        let v = brute_force_oracle(
            |t| Complex64::new(0.0, std::f64::consts::PI * t).exp(),
            (0.0, 2.0),
            10_001,
        )
        .unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn simpson_rejects_even_or_tiny_node_counts() {
        assert!(brute_force_oracle(|_| Complex64::new(1.0, 0.0), (0.0, 1.0), 100).is_err());
        assert!(brute_force_oracle(|_| Complex64::new(1.0, 0.0), (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn fast_engine_agrees_with_oracle_on_random_cubic_phases() {
        let cfg = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let lambda: f64 = rng.gen_range(16.0..512.0);
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let g = move |t: f64| {
                Complex64::new(0.0, lambda * (x * x * t + y * t * t)).exp() * (1.0 - t * t).max(0.0)
            };
            let rate = lambda * (x * x + 2.0 * y.abs());
            let fast = integrate_oscillatory(g, (0.0, 1.0), rate, &cfg).unwrap();
            let n = (100.0 * lambda).ceil() as usize;
            let n = n.max(100_000) | 1;
            let slow = brute_force_oracle(g, (0.0, 1.0), n).unwrap();
            assert!(
                (fast - slow).norm() < 1e-8,
                "lambda={lambda} x={x} y={y}: |fast-slow|={}",
                (fast - slow).norm()
            );
        }
    }

    #[test]
    fn halving_the_budget_is_converged() {
        let base = QuadratureConfig::default();
        let mut tight = QuadratureConfig::default();
        tight.oscillation_budget *= 0.5;
        for &(lambda, x, y) in &[(64.0, 0.3, -0.2), (256.0, 0.7, 0.5), (1024.0, -0.9, 0.1)] {
            let g = move |t: f64| {
                Complex64::new(0.0, lambda * (x * x * t + y * t * t)).exp() * (1.0 + 0.5 * t)
            };
            let rate = lambda * (x * x + 2.0 * f64::abs(y));
            let a = integrate_oscillatory(g, (0.0, 1.0), rate, &base).unwrap();
            let b = integrate_oscillatory(g, (0.0, 1.0), rate, &tight).unwrap();
            assert!((a - b).norm() < base.abs_tolerance);
        }
    }

    #[test]
    fn degenerate_interval_returns_zero() {
        let cfg = QuadratureConfig::default();
        let v = integrate_oscillatory(|_| Complex64::new(1.0, 0.0), (0.5, 0.5 + 1e-9), 1.0, &cfg)
            .unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn budget_exceeded_when_floor_is_disabled() {
        let mut cfg = QuadratureConfig::default();
        cfg.min_panel_width = 0.0;
        let res = integrate_oscillatory(|_| Complex64::new(1.0, 0.0), (0.0, 1.0), 1e12, &cfg);
        assert!(matches!(res, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn rect_of_ones_has_unit_integral() {
        let cfg = QuadratureConfig::default();
        let v = integrate_2d(
            |_, _| Complex64::new(1.0, 0.0),
            ((0.0, 1.0), (0.0, 1.0)),
            (0.0, 0.0),
            &cfg,
        )
        .unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn separable_integrand_factorizes() {
        let cfg = QuadratureConfig::default();
        let gt = |t: f64| Complex64::new(0.0, 40.0 * t).exp() * t;
        let hs = |s: f64| Complex64::new(0.0, -15.0 * s * s).exp();
        let two_d = integrate_2d(
            move |t, s| gt(t) * hs(s),
            ((0.0, 1.0), (0.25, 0.75)),
            (40.0, 15.0),
            &cfg,
        )
        .unwrap();
        let a = integrate_oscillatory(gt, (0.0, 1.0), 40.0, &cfg).unwrap();
        let b = integrate_oscillatory(hs, (0.25, 0.75), 15.0, &cfg).unwrap();
        assert!((two_d - a * b).norm() < 1e-10);
    }

    #[test]
    fn two_d_engine_matches_two_d_simpson() {
        let cfg = QuadratureConfig::default();
        let lambda = 96.0;
        let g = move |t: f64, s: f64| {
            Complex64::new(0.0, lambda * (0.09 * (t + s) - 0.2 * (t * t + s * s))).exp()
        };
        let rect = ((0.5, 0.625), (0.125, 0.25));
        let rate = lambda * (0.09 + 0.4);
        let fast = integrate_2d(g, rect, (rate, rate), &cfg).unwrap();
        let slow = brute_force_oracle_2d(g, rect, 801).unwrap();
        assert!((fast - slow).norm() < 1e-9);
    }
}
