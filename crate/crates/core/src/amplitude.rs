//! Cutoff functions psi and test functions f.
//!
//! The concrete cutoff is a tensor bump b(x) b(y) b(t) built from the
//! standard exp(-1/x) transition, equal to 1 on the inner cube and 0 outside
//! the outer cube. Derivative bounds in t are measured at construction by
//! sampling the analytic derivatives; the sup of |d/dt b| exceeds 1 for the
//! (1/2, 1) bump, so the bounds are recorded rather than asserted.
//!
//! `ModulatedRescaled` is the cutoff produced by the cap rescaling step,
//!
//! ```text
//!     psi_j(x, y, s) = e^{i 2 lambda j s y / K^2} psi(x, y, (s + j) / K).
//! ```

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Points used when sampling derivative bounds at construction.
const AUDIT_SAMPLES: usize = 10_000;

// ---------------------------------------------------------------------------
// smooth transition profile
// ---------------------------------------------------------------------------

/// Value and first three derivatives of the 1-d bump factor b at t.
///
/// b(t) = h(u) with u = (outer - |t|) / (outer - inner) and
/// h(u) = 1 / (1 + e^{w(u)}), w(u) = 1/u - 1/(1-u). h glues 0 to 1 with all
/// derivatives vanishing at both ends.
fn bump_derivatives(t: f64, inner: f64, outer: f64) -> [f64; 4] {
    let scale = 1.0 / (outer - inner);
    let u = (outer - t.abs()) * scale;
    if u >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    if u <= 0.0 {
        return [0.0, 0.0, 0.0, 0.0];
    }
    let v = 1.0 - u;
    let w = 1.0 / u - 1.0 / v;
    let w1 = -1.0 / (u * u) - 1.0 / (v * v);
    let w2 = 2.0 / (u * u * u) - 2.0 / (v * v * v);
    let w3 = -6.0 / (u * u * u * u) - 6.0 / (v * v * v * v);
    let h = 1.0 / (1.0 + w.exp());
    let p = h * (1.0 - h);
    let h1 = -p * w1;
    let p1 = h1 * (1.0 - 2.0 * h);
    let h2 = -(p1 * w1 + p * w2);
    let p2 = h2 * (1.0 - 2.0 * h) - 2.0 * h1 * h1;
    let h3 = -(p2 * w1 + 2.0 * p1 * w2 + p * w3);
    // d/dt u = -sign(t) * scale; chain rule powers of that factor.
    let du = -t.signum() * scale;
    [h, h1 * du, h2 * du * du, h3 * du * du * du]
}

fn bump_value(t: f64, inner: f64, outer: f64) -> f64 {
    let scale = 1.0 / (outer - inner);
    let u = (outer - t.abs()) * scale;
    if u >= 1.0 {
        1.0
    } else if u <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 + (1.0 / u - 1.0 / (1.0 - u)).exp())
    }
}

// ---------------------------------------------------------------------------
// cutoffs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Profile {
    /// Tensor bump b(x) b(y) b(t), equal to 1 on the inner cube and 0 outside
    /// the outer cube.
    SmoothBump { inner: f64, outer: f64 },
    /// Modulated and rescaled cutoff from the cap rescaling identity.
    ModulatedRescaled {
        base: Box<Cutoff>,
        j: usize,
        k_parts: usize,
        lambda: f64,
    },
    /// No cutoff at all (kernel tests only).
    One,
}

#[derive(Debug, Clone)]
pub struct Cutoff {
    pub profile: Profile,
    /// Measured sup of |d^m/dt^m| of the t-factor, m = 1, 2, 3.
    derivative_bounds: [f64; 3],
}

impl Cutoff {
    pub fn smooth_bump(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::InvalidProfile(format!(
                "smooth bump needs 0 < inner < outer, got inner={inner}, outer={outer}"
            )));
        }
        let mut bounds = [0.0f64; 3];
        for i in 0..AUDIT_SAMPLES {
            let t = -outer + 2.0 * outer * i as f64 / (AUDIT_SAMPLES - 1) as f64;
            let d = bump_derivatives(t, inner, outer);
            for m in 0..3 {
                bounds[m] = bounds[m].max(d[m + 1].abs());
            }
        }
        Ok(Self {
            profile: Profile::SmoothBump { inner, outer },
            derivative_bounds: bounds,
        })
    }

    pub fn one() -> Self {
        Self {
            profile: Profile::One,
            derivative_bounds: [0.0; 3],
        }
    }

    /// psi_j from the rescaling identity. `base` must not itself be modulated.
    pub fn modulated_rescaled(base: Cutoff, j: usize, k_parts: usize, lambda: f64) -> Result<Self> {
        if k_parts < 1 || j >= k_parts {
            return Err(Error::InvalidProfile(format!(
                "modulated cutoff needs 0 <= j < K, got j={j}, K={k_parts}"
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "modulated cutoff needs lambda > 0, got {lambda}"
            )));
        }
        if matches!(base.profile, Profile::ModulatedRescaled { .. }) {
            return Err(Error::InvalidProfile(
                "nested modulated cutoffs are not supported".into(),
            ));
        }
        let bounds = measure_modulated_bounds(&base, j, k_parts, lambda);
        Ok(Self {
            profile: Profile::ModulatedRescaled {
                base: Box::new(base),
                j,
                k_parts,
                lambda,
            },
            derivative_bounds: bounds,
        })
    }

    /// Measured sup of the m-th t-derivative of the t-factor, m = 1..3.
    pub fn derivative_bounds(&self) -> [f64; 3] {
        self.derivative_bounds
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> Complex64 {
        self.t_factor(y, t) * self.xy_factor(x, y)
    }

    /// The (x, y)-dependent factor, hoistable out of t-integrals.
    pub fn xy_factor(&self, x: f64, y: f64) -> f64 {
        match &self.profile {
            Profile::SmoothBump { inner, outer } => {
                bump_value(x, *inner, *outer) * bump_value(y, *inner, *outer)
            }
            Profile::ModulatedRescaled { base, .. } => base.xy_factor(x, y),
            Profile::One => 1.0,
        }
    }

    /// The t-dependent factor; `y` feeds the modulation frequency.
    pub fn t_factor(&self, y: f64, t: f64) -> Complex64 {
        match &self.profile {
            Profile::SmoothBump { inner, outer } => {
                Complex64::new(bump_value(t, *inner, *outer), 0.0)
            }
            Profile::ModulatedRescaled {
                base,
                j,
                k_parts,
                lambda,
            } => {
                let k = *k_parts as f64;
                let omega = 2.0 * lambda * *j as f64 * y / (k * k);
                let shifted = (t + *j as f64) / k;
                base.t_factor(y, shifted) * Complex64::new(0.0, omega * t).exp()
            }
            Profile::One => Complex64::new(1.0, 0.0),
        }
    }

    /// t-interval outside which the cutoff vanishes, if it has one.
    pub fn t_support(&self) -> Option<(f64, f64)> {
        match &self.profile {
            Profile::SmoothBump { outer, .. } => Some((-outer, *outer)),
            Profile::ModulatedRescaled {
                base, j, k_parts, ..
            } => {
                let k = *k_parts as f64;
                base.t_support()
                    .map(|(lo, hi)| (lo * k - *j as f64, hi * k - *j as f64))
            }
            Profile::One => None,
        }
    }

    /// Oscillation rate of the t-factor (the modulation), for panel sizing.
    pub fn t_rate_bound(&self, y: f64) -> f64 {
        match &self.profile {
            Profile::ModulatedRescaled {
                j, k_parts, lambda, ..
            } => {
                let k = *k_parts as f64;
                2.0 * lambda * *j as f64 * y.abs() / (k * k)
            }
            _ => 0.0,
        }
    }
}

/// Sup over sampled (y, s) of |d^m/ds^m psi_j| for m = 1..3, from the exact
/// Leibniz expansion of e^{i omega s} b((s + j)/K).
fn measure_modulated_bounds(base: &Cutoff, j: usize, k_parts: usize, lambda: f64) -> [f64; 3] {
    let (inner, outer) = match &base.profile {
        Profile::SmoothBump { inner, outer } => (*inner, *outer),
        _ => return [0.0; 3],
    };
    let k = k_parts as f64;
    let (s_lo, s_hi) = (-outer * k - j as f64, outer * k - j as f64);
    let n = 200;
    let mut bounds = [0.0f64; 3];
    for iy in 0..n {
        let y = -1.0 + 2.0 * iy as f64 / (n - 1) as f64;
        let y_cap = bump_value(y, inner, outer);
        if y_cap == 0.0 {
            continue;
        }
        let omega = 2.0 * lambda * j as f64 * y / (k * k);
        for is in 0..n {
            let s = s_lo + (s_hi - s_lo) * is as f64 / (n - 1) as f64;
            let d = bump_derivatives((s + j as f64) / k, inner, outer);
            // m-th derivative: sum_r C(m,r) (i omega)^{m-r} b^{(r)} K^{-r}.
            let b = [d[0], d[1] / k, d[2] / (k * k), d[3] / (k * k * k)];
            let binom: [&[f64]; 4] = [&[1.0], &[1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 3.0, 3.0, 1.0]];
            for m in 1..=3usize {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for (r, &c) in binom[m].iter().enumerate() {
                    let pow = m - r;
                    let mag = c * omega.powi(pow as i32) * b[r];
                    // i^pow cycles re/im.
                    match pow % 4 {
                        0 => re += mag,
                        1 => im += mag,
                        2 => re -= mag,
                        _ => im -= mag,
                    }
                }
                let modulus = (re * re + im * im).sqrt() * y_cap;
                bounds[m - 1] = bounds[m - 1].max(modulus);
            }
        }
    }
    bounds
}

// ---------------------------------------------------------------------------
// test functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum TestFunction {
    /// Indicator of [lo, hi).
    Characteristic { lo: f64, hi: f64 },
    /// exp(-((t - center)/width)^2), truncated at center +/- 4 width and
    /// clamped into [-1, 1].
    GaussBump {
        center: f64,
        width: f64,
        support: (f64, f64),
    },
    /// e^{i mu t^2} on its support.
    Chirp { mu: f64, support: (f64, f64) },
    /// sum_m a_m cos(2 pi m t) + b_m sin(2 pi m t) on its support.
    TrigPoly {
        coeffs: Vec<(f64, f64)>,
        support: (f64, f64),
    },
    /// Linear interpolation of real samples on a uniform grid over [lo, hi].
    Sampled { lo: f64, hi: f64, values: Vec<f64> },
    /// base restricted to [lo, hi) (caps).
    Restricted {
        base: Box<TestFunction>,
        lo: f64,
        hi: f64,
    },
    /// f_{j,K}(s) = chi_[0,1)(s) * base((s + j) / K).
    CapRescaled {
        base: Box<TestFunction>,
        j: usize,
        k_parts: usize,
    },
}

impl TestFunction {
    pub fn characteristic(lo: f64, hi: f64) -> Self {
        TestFunction::Characteristic { lo, hi }
    }

    /// The identically zero function (empty indicator).
    pub fn zero() -> Self {
        TestFunction::Characteristic { lo: 0.0, hi: 0.0 }
    }

    pub fn gauss_bump(center: f64, width: f64) -> Self {
        let lo = (center - 4.0 * width).max(-1.0);
        let hi = (center + 4.0 * width).min(1.0);
        TestFunction::GaussBump {
            center,
            width,
            support: (lo, hi),
        }
    }

    pub fn chirp(mu: f64, support: (f64, f64)) -> Self {
        TestFunction::Chirp { mu, support }
    }

    pub fn trig_poly_seeded(seed: u64, degree: usize, support: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..=degree)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        TestFunction::TrigPoly { coeffs, support }
    }

    pub fn sampled(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config(
                "sampled test function needs at least 2 nodes".into(),
            ));
        }
        if !(hi > lo) {
            return Err(Error::Config("sampled support must have hi > lo".into()));
        }
        Ok(TestFunction::Sampled { lo, hi, values })
    }

    /// Load a sampled test function from a two-column text file (t, value)
    /// on a uniform ascending grid. Lines starting with '#' are skipped.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Config(format!(
                    "table line {}: expected two columns",
                    lineno + 1
                )));
            };
            let t: f64 = a
                .parse()
                .map_err(|_| Error::Config(format!("table line {}: bad t", lineno + 1)))?;
            let v: f64 = b
                .parse()
                .map_err(|_| Error::Config(format!("table line {}: bad value", lineno + 1)))?;
            ts.push(t);
            vs.push(v);
        }
        if ts.len() < 2 {
            return Err(Error::Config("table needs at least 2 rows".into()));
        }
        let h = ts[1] - ts[0];
        if !(h > 0.0) {
            return Err(Error::Config("table grid must be ascending".into()));
        }
        for w in ts.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(Error::Config("table grid is not uniform".into()));
            }
        }
        Self::sampled(ts[0], *ts.last().unwrap(), vs)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            TestFunction::Characteristic { lo, hi } => {
                if t >= *lo && t < *hi {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            TestFunction::GaussBump {
                center,
                width,
                support,
            } => {
                if t < support.0 || t > support.1 {
                    return Complex64::new(0.0, 0.0);
                }
                let u = (t - center) / width;
                Complex64::new((-u * u).exp(), 0.0)
            }
            TestFunction::Chirp { mu, support } => {
                if t < support.0 || t > support.1 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new(0.0, mu * t * t).exp()
            }
            TestFunction::TrigPoly { coeffs, support } => {
                if t < support.0 || t > support.1 {
                    return Complex64::new(0.0, 0.0);
                }
                let mut v = 0.0;
                for (m, &(a, b)) in coeffs.iter().enumerate() {
                    let arg = 2.0 * PI * m as f64 * t;
                    v += a * arg.cos() + b * arg.sin();
                }
                Complex64::new(v, 0.0)
            }
            TestFunction::Sampled { lo, hi, values } => {
                if t < *lo || t > *hi {
                    return Complex64::new(0.0, 0.0);
                }
                let n = values.len();
                let pos = (t - lo) / (hi - lo) * (n - 1) as f64;
                let i = (pos.floor() as usize).min(n - 2);
                let frac = pos - i as f64;
                Complex64::new(values[i] * (1.0 - frac) + values[i + 1] * frac, 0.0)
            }
            TestFunction::Restricted { base, lo, hi } => {
                if t >= *lo && t < *hi {
                    base.eval(t)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            TestFunction::CapRescaled { base, j, k_parts } => {
                if (0.0..1.0).contains(&t) {
                    base.eval((t + *j as f64) / *k_parts as f64)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Characteristic { lo, hi } => (*lo, *hi),
            TestFunction::GaussBump { support, .. } => *support,
            TestFunction::Chirp { support, .. } => *support,
            TestFunction::TrigPoly { support, .. } => *support,
            TestFunction::Sampled { lo, hi, .. } => (*lo, *hi),
            TestFunction::Restricted { lo, hi, .. } => (*lo, *hi),
            TestFunction::CapRescaled { .. } => (0.0, 1.0),
        }
    }

    /// Bound on the oscillation/variation rate of f, used for panel sizing.
    pub fn phase_rate_bound(&self, t_lo: f64, t_hi: f64) -> f64 {
        match self {
            TestFunction::Characteristic { .. } => 0.0,
            TestFunction::GaussBump { width, .. } => 1.0 / width,
            TestFunction::Chirp { mu, .. } => 2.0 * mu.abs() * t_lo.abs().max(t_hi.abs()),
            TestFunction::TrigPoly { coeffs, .. } => coeffs
                .iter()
                .enumerate()
                .map(|(m, &(a, b))| 2.0 * PI * m as f64 * (a.abs() + b.abs()))
                .sum(),
            TestFunction::Sampled { lo, hi, values } => {
                let h = (hi - lo) / (values.len() - 1) as f64;
                values
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs() / h)
                    .fold(0.0, f64::max)
            }
            TestFunction::Restricted { base, .. } => base.phase_rate_bound(t_lo, t_hi),
            TestFunction::CapRescaled { base, j, k_parts } => {
                let k = *k_parts as f64;
                let lo = (t_lo + *j as f64) / k;
                let hi = (t_hi + *j as f64) / k;
                base.phase_rate_bound(lo, hi) / k
            }
        }
    }
}
