//! Command-line front end.
//!
//! Subcommands: `eval` (dump a field CSV), `decay` and `extremizer` (lambda
//! sweeps with log-log fits), `verify rescale|jacobian|broadnarrow|capbound`
//! (identity suites; exit 0 iff all checks pass), `recursion` (diagnostic)
//! and `bench` (quadrature timing table).
//!
//! Every run writes a `summary.json` with `{command, config, results, pass}`
//! into the output directory, plus the command's CSV. With a fixed seed the
//! output files are byte-identical regardless of thread count: all parallel
//! reductions are pairwise trees whose shape depends only on index ranges.
//!
//! Exit codes: 0 success / all checks pass, 1 verification failure,
//! 2 configuration error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::amplitude::{Cutoff, TestFunction};
use crate::analytics::{
    default_family, estimate_q4_lower, extremizer_lower_bound, fit_decay, recursion_report,
    AscentConfig,
};
use crate::decomp::{
    bilinear_change_of_vars, bilinear_domination_check, broad_narrow, cap_decompose,
    cap_pair_l2_squared, pointwise_inequality_violation, rescale_cap, BilinearMap,
};
use crate::error::{Error, Result};
use crate::operator::{
    evaluate_field, l2_norm_1d, lp_norm, Grid, GridField, OperatorSpec, DEFAULT_GRID_CAP,
};
use crate::phase::Phase;
use crate::quadrature::{brute_force_oracle, integrate_oscillatory, QuadratureConfig};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_C1: f64 = 0.125;
pub const DEFAULT_C2: f64 = 0.125;

#[derive(Parser, Debug)]
#[command(
    name = "oscint",
    version,
    about = "Oscillatory integral operator laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonOpts,
}

/// Options shared by all subcommands. Flags win over the config file, which
/// wins over built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonOpts {
    /// Optional key=value settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for CSV and JSON reports.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// RNG seed for seeded nodes and families.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: OSCINT_THREADS env, then hardware).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Cap on full-square grid nodes per axis.
    #[arg(long, global = true)]
    pub grid_cap: Option<usize>,

    /// Gauss-Legendre points per quadrature panel.
    #[arg(long, global = true)]
    pub points_per_panel: Option<usize>,

    /// Maximum phase change per panel, radians.
    #[arg(long, global = true)]
    pub osc_budget: Option<f64>,

    /// Target absolute quadrature tolerance.
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate T f over a grid and dump it as CSV.
    Eval {
        #[arg(long, default_value_t = 256.0)]
        lambda: f64,
        /// Grid nodes per axis (default: resolution rule with the cap).
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// General phase coefficients "a,b,c,d" (default: canonical).
        #[arg(long)]
        coeffs: Option<String>,
        /// Drop the cutoff (psi = 1).
        #[arg(long)]
        no_cutoff: bool,
        /// Load f from a two-column (t, value) table instead of chi_[0,1).
        #[arg(long)]
        f_table: Option<PathBuf>,
    },
    /// Dyadic lambda sweep of the Q4 lower bound and extremizer bound.
    Decay {
        #[arg(long, default_value_t = 64)]
        lmin: u64,
        #[arg(long, default_value_t = 1024)]
        lmax: u64,
        /// Refine each estimate by coordinate ascent.
        #[arg(long)]
        ascent: bool,
    },
    /// Dyadic sweep of the extremizer box bound and its fitted slope.
    Extremizer {
        #[arg(long, default_value_t = 64)]
        lmin: u64,
        #[arg(long, default_value_t = 65536)]
        lmax: u64,
        #[arg(long, default_value_t = DEFAULT_C1)]
        c1: f64,
        #[arg(long, default_value_t = DEFAULT_C2)]
        c2: f64,
    },
    /// Run one of the identity suites; exit 0 iff every check passes.
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
    /// Recursion-inequality diagnostic over dyadic lambda_max.
    Recursion {
        #[arg(long, default_value_t = 1024)]
        lmax: u64,
        #[arg(long)]
        lmin: Option<u64>,
        #[arg(long, alias = "K", default_value_t = 8)]
        k: usize,
    },
    /// Time the fast panel engine against the Simpson oracle.
    Bench {},
}

#[derive(Subcommand, Debug)]
pub enum VerifyCheck {
    /// Rescaling identity over the (K, lambda) matrix (default {4,8} x {64,256}).
    Rescale {
        #[arg(long, alias = "K")]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        max_rel_dev: f64,
    },
    /// Change-of-variables identity at seeded nodes for all separated pairs.
    Jacobian {
        #[arg(long, alias = "K", default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 256.0)]
        lambda: f64,
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-6)]
        max_rel_dev: f64,
    },
    /// Broad-narrow classification checks on one instance.
    Broadnarrow {
        #[arg(long, alias = "K", default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 256.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
    },
    /// Cap-separation bound for all pairs at K.
    Capbound {
        #[arg(long, alias = "K", default_value_t = 8)]
        k: usize,
    },
}

/// Resolved run settings after merging flags, config file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub grid_cap: usize,
    pub quad: QuadratureConfig,
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "config line {}: expected key=value, got {raw:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn get_parsed<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("config key {key}: cannot parse {raw:?}"))),
    }
}

impl Settings {
    pub fn resolve(opts: &CommonOpts) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => parse_config_file(path)?,
            None => HashMap::new(),
        };
        let threads = match opts.threads {
            Some(t) => t,
            None => match get_parsed::<usize>(&file, "threads")? {
                Some(t) => t,
                None => std::env::var("OSCINT_THREADS")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0),
            },
        };
        let mut quad = QuadratureConfig::default();
        if let Some(p) = opts
            .points_per_panel
            .or(get_parsed(&file, "points_per_panel")?)
        {
            if p < 2 {
                return Err(Error::Config("points_per_panel must be >= 2".into()));
            }
            quad.points_per_panel = p;
        }
        if let Some(b) = opts.osc_budget.or(get_parsed(&file, "osc_budget")?) {
            if !(b > 0.0) {
                return Err(Error::Config("osc_budget must be > 0".into()));
            }
            quad.oscillation_budget = b;
        }
        if let Some(t) = opts.abs_tol.or(get_parsed(&file, "abs_tol")?) {
            quad.abs_tolerance = t;
        }
        Ok(Self {
            out_dir: opts
                .out_dir
                .clone()
                .or(get_parsed::<String>(&file, "out_dir")?.map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out")),
            seed: opts
                .seed
                .or(get_parsed(&file, "seed")?)
                .unwrap_or(DEFAULT_SEED),
            threads,
            grid_cap: opts
                .grid_cap
                .or(get_parsed(&file, "grid_cap")?)
                .unwrap_or(DEFAULT_GRID_CAP),
            quad,
        })
    }

    fn config_json(&self) -> serde_json::Value {
        // Thread count is an execution detail, not part of the experiment
        // config: identical seeds must give identical files at any count.
        json!({
            "out_dir": self.out_dir.display().to_string(),
            "seed": self.seed,
            "grid_cap": self.grid_cap,
            "points_per_panel": self.quad.points_per_panel,
            "oscillation_budget": self.quad.oscillation_budget,
            "abs_tolerance": self.quad.abs_tolerance,
        })
    }
}

fn write_summary(
    settings: &Settings,
    command: &str,
    extra_config: serde_json::Value,
    results: serde_json::Value,
    pass: bool,
) -> Result<()> {
    let mut config = settings.config_json();
    if let (Some(obj), Some(extra)) = (config.as_object_mut(), extra_config.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    let summary = json!({
        "command": command,
        "config": config,
        "results": results,
        "pass": pass,
    });
    let path = settings.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(format!("summary serialization failed: {e}")))?;
    std::fs::write(&path, text)?;
    Ok(())
}

fn dyadic_range(lmin: u64, lmax: u64) -> Result<Vec<f64>> {
    if !lmin.is_power_of_two() || !lmax.is_power_of_two() {
        return Err(Error::Config(format!(
            "lambda bounds must be powers of two, got {lmin} and {lmax}"
        )));
    }
    if lmin > lmax {
        return Err(Error::Config(format!(
            "lambda_min {lmin} exceeds lambda_max {lmax}"
        )));
    }
    let mut out = Vec::new();
    let mut l = lmin;
    while l <= lmax {
        out.push(l as f64);
        if l > lmax / 2 {
            break;
        }
        l *= 2;
    }
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Entry point used by the binary. Returns whether all checks passed.
pub fn run(cli: Cli) -> Result<bool> {
    let settings = Settings::resolve(&cli.common)?;
    std::fs::create_dir_all(&settings.out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &settings))
}

fn dispatch(command: &Command, settings: &Settings) -> Result<bool> {
    match command {
        Command::Eval {
            lambda,
            nx,
            ny,
            coeffs,
            no_cutoff,
            f_table,
        } => cmd_eval(
            settings,
            *lambda,
            *nx,
            *ny,
            coeffs.as_deref(),
            *no_cutoff,
            f_table.as_deref(),
        ),
        Command::Decay { lmin, lmax, ascent } => cmd_decay(settings, *lmin, *lmax, *ascent),
        Command::Extremizer { lmin, lmax, c1, c2 } => {
            cmd_extremizer(settings, *lmin, *lmax, *c1, *c2)
        }
        Command::Verify { check } => match check {
            VerifyCheck::Rescale {
                k,
                lambda,
                max_rel_dev,
            } => cmd_verify_rescale(settings, *k, *lambda, *max_rel_dev),
            VerifyCheck::Jacobian {
                k,
                lambda,
                nodes,
                max_rel_dev,
            } => cmd_verify_jacobian(settings, *k, *lambda, *nodes, *max_rel_dev),
            VerifyCheck::Broadnarrow { k, lambda, alpha } => {
                cmd_verify_broadnarrow(settings, *k, *lambda, *alpha)
            }
            VerifyCheck::Capbound { k } => cmd_verify_capbound(settings, *k),
        },
        Command::Recursion { lmax, lmin, k } => {
            cmd_recursion(settings, lmin.unwrap_or(*lmax), *lmax, *k)
        }
        Command::Bench {} => cmd_bench(settings),
    }
}

fn default_spec(lambda: f64) -> Result<OperatorSpec> {
    OperatorSpec::new(
        lambda,
        Phase::Canonical,
        Cutoff::smooth_bump(0.5, 1.0)?,
        TestFunction::characteristic(0.0, 1.0),
    )
}

fn cmd_eval(
    settings: &Settings,
    lambda: f64,
    nx: Option<usize>,
    ny: Option<usize>,
    coeffs: Option<&str>,
    no_cutoff: bool,
    f_table: Option<&Path>,
) -> Result<bool> {
    let phase = match coeffs {
        None => Phase::Canonical,
        Some(raw) => {
            let parts: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("cannot parse coeffs {raw:?}")))?;
            if parts.len() != 4 {
                return Err(Error::Config("coeffs needs exactly a,b,c,d".into()));
            }
            Phase::general(parts[0], parts[1], parts[2], parts[3])?
        }
    };
    let cutoff = if no_cutoff {
        Cutoff::one()
    } else {
        Cutoff::smooth_bump(0.5, 1.0)?
    };
    let f = match f_table {
        Some(path) => TestFunction::from_table_file(path)?,
        None => TestFunction::characteristic(0.0, 1.0),
    };
    let spec = OperatorSpec::new(lambda, phase, cutoff, f)?;
    let rule = Grid::full_square(lambda, settings.grid_cap);
    let grid = Grid::new(
        (-1.0, 1.0),
        (-1.0, 1.0),
        nx.unwrap_or(rule.nx),
        ny.unwrap_or(rule.ny),
    )?;
    let field = evaluate_field(&spec, &grid, &settings.quad)?;
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    std::fs::write(settings.out_dir.join("field.csv"), &buf)?;
    let norm = lp_norm(&field, 4.0, None)?;
    write_summary(
        settings,
        "eval",
        json!({"lambda": lambda, "nx": grid.nx, "ny": grid.ny}),
        json!({"l4_norm": norm, "file": "field.csv"}),
        true,
    )?;
    println!(
        "eval: lambda={lambda} grid={}x{} l4={norm:.6e}",
        grid.nx, grid.ny
    );
    Ok(true)
}

fn cmd_decay(settings: &Settings, lmin: u64, lmax: u64, ascent: bool) -> Result<bool> {
    let lambdas = dyadic_range(lmin, lmax)?;
    if lambdas.len() < 3 {
        return Err(Error::Config(format!(
            "decay sweep needs at least 3 dyadic points, got {} (lmin={lmin}, lmax={lmax})",
            lambdas.len()
        )));
    }
    let acfg = AscentConfig::default();
    let mut rows = String::from("lambda,q4_lower,extremizer_lb,slope_running\n");
    let mut q_points: Vec<(f64, f64)> = Vec::new();
    let mut e_points: Vec<(f64, f64)> = Vec::new();
    for &lambda in &lambdas {
        let family = default_family(lambda, settings.seed);
        let est = estimate_q4_lower(
            lambda,
            &family,
            ascent.then_some(&acfg),
            settings.grid_cap,
            &settings.quad,
        )?;
        let ext = extremizer_lower_bound(lambda, DEFAULT_C1, DEFAULT_C2, &settings.quad)?;
        q_points.push((lambda, est.value));
        e_points.push((lambda, ext));
        let slope = if q_points.len() >= 3 {
            fit_decay(&q_points)?.slope
        } else {
            f64::NAN
        };
        let _ = writeln!(
            rows,
            "{},{},{},{}",
            lambda,
            num(est.value),
            num(ext),
            num(slope)
        );
        println!(
            "decay: lambda={lambda} q4_lower={:.6e} ({}) extremizer={:.6e}",
            est.value, est.argmax, ext
        );
    }
    std::fs::write(settings.out_dir.join("decay.csv"), rows)?;
    let q_fit = fit_decay(&q_points)?;
    let e_fit = fit_decay(&e_points)?;
    write_summary(
        settings,
        "decay",
        json!({"lmin": lmin, "lmax": lmax, "ascent": ascent}),
        json!({"q4_fit": q_fit, "extremizer_fit": e_fit, "file": "decay.csv"}),
        true,
    )?;
    println!(
        "decay: q4 slope {:.4} (max residual {:.3}), extremizer slope {:.4}",
        q_fit.slope, q_fit.max_residual, e_fit.slope
    );
    Ok(true)
}

fn cmd_extremizer(settings: &Settings, lmin: u64, lmax: u64, c1: f64, c2: f64) -> Result<bool> {
    let lambdas = dyadic_range(lmin, lmax)?;
    if lambdas.len() < 3 {
        return Err(Error::Config(
            "extremizer sweep needs at least 3 dyadic points".into(),
        ));
    }
    let mut rows = String::from("lambda,extremizer_lb,slope_running\n");
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &lambda in &lambdas {
        let v = extremizer_lower_bound(lambda, c1, c2, &settings.quad)?;
        points.push((lambda, v));
        let slope = if points.len() >= 3 {
            fit_decay(&points)?.slope
        } else {
            f64::NAN
        };
        let _ = writeln!(rows, "{},{},{}", lambda, num(v), num(slope));
    }
    std::fs::write(settings.out_dir.join("extremizer.csv"), rows)?;
    let fit = fit_decay(&points)?;
    write_summary(
        settings,
        "extremizer",
        json!({"lmin": lmin, "lmax": lmax, "c1": c1, "c2": c2}),
        json!({"fit": fit, "file": "extremizer.csv"}),
        true,
    )?;
    println!(
        "extremizer: slope {:.6} max residual {:.3e} over {} octaves",
        fit.slope,
        fit.max_residual,
        points.len() - 1
    );
    Ok(true)
}

fn cmd_verify_rescale(
    settings: &Settings,
    k: Option<usize>,
    lambda: Option<f64>,
    max_rel_dev: f64,
) -> Result<bool> {
    let ks = k.map(|v| vec![v]).unwrap_or_else(|| vec![4, 8]);
    let lambdas = lambda.map(|v| vec![v]).unwrap_or_else(|| vec![64.0, 256.0]);
    let grid = Grid::new((-1.0, 1.0), (-1.0, 1.0), 64, 64)?;
    let mut rows = String::from("K,lambda,j,scale,max_abs_dev,rel_dev\n");
    let mut worst = 0.0f64;
    let mut pass = true;
    for &kp in &ks {
        for &lam in &lambdas {
            let spec = default_spec(lam)?;
            for j in 0..kp {
                let (left, right) = rescale_cap(&spec, j, kp, &grid, &settings.quad)?;
                let scale = left.values.iter().map(|v| v.re).fold(0.0f64, f64::max);
                let dev = left
                    .values
                    .iter()
                    .zip(&right.values)
                    .map(|(a, b)| (a.re - b.re).abs())
                    .fold(0.0f64, f64::max);
                let rel = if scale > 0.0 { dev / scale } else { 0.0 };
                worst = worst.max(rel);
                if rel > max_rel_dev {
                    pass = false;
                }
                let _ = writeln!(
                    rows,
                    "{kp},{lam},{j},{},{},{}",
                    num(scale),
                    num(dev),
                    num(rel)
                );
            }
        }
    }
    std::fs::write(settings.out_dir.join("rescale.csv"), rows)?;
    write_summary(
        settings,
        "verify rescale",
        json!({"K": ks, "lambda": lambdas, "max_rel_dev": max_rel_dev}),
        json!({"worst_rel_dev": worst, "file": "rescale.csv"}),
        pass,
    )?;
    println!(
        "verify rescale: worst relative deviation {worst:.3e} (tolerance {max_rel_dev:.0e}) => {}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_verify_jacobian(
    settings: &Settings,
    k_parts: usize,
    lambda: f64,
    n_nodes: usize,
    max_rel_dev: f64,
) -> Result<bool> {
    let spec = default_spec(lambda)?;
    let decomp = cap_decompose(&spec.f, k_parts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let nodes: Vec<(f64, f64)> = (0..n_nodes)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut rows = String::from("j,k,scale,max_abs_dev,rel_dev\n");
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut domain_ok = true;
    for j in 0..k_parts {
        for k in 0..k_parts {
            if j.abs_diff(k) < 2 {
                continue;
            }
            // Domain invariants: positive Jacobian factor, injective branch.
            let map = BilinearMap::new(k_parts, j, k)?;
            let (u_lo, u_hi) = map.u_range();
            for i in 0..100 {
                let u = u_lo + (u_hi - u_lo) * i as f64 / 99.0;
                if let Some((v_lo, v_hi)) = map.v_range_at(u) {
                    for q in 0..10 {
                        let v = v_lo + (v_hi - v_lo) * q as f64 / 9.0;
                        let (t, s) = map.invert(u, v);
                        if 2.0 * v - u * u <= 0.0 || (map.sign > 0.0) != (t > s) {
                            domain_ok = false;
                        }
                    }
                }
            }
            let (direct, transformed) =
                bilinear_change_of_vars(&spec, &decomp, j, k, &nodes, &settings.quad)?;
            let scale = direct.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let dev = direct
                .iter()
                .zip(&transformed)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            let rel = if scale > 0.0 { dev / scale } else { 0.0 };
            worst = worst.max(rel);
            if rel > max_rel_dev {
                pass = false;
            }
            let _ = writeln!(rows, "{j},{k},{},{},{}", num(scale), num(dev), num(rel));
        }
    }
    pass = pass && domain_ok;
    std::fs::write(settings.out_dir.join("jacobian.csv"), rows)?;
    write_summary(
        settings,
        "verify jacobian",
        json!({"K": k_parts, "lambda": lambda, "nodes": n_nodes, "max_rel_dev": max_rel_dev}),
        json!({"worst_rel_dev": worst, "domain_ok": domain_ok, "file": "jacobian.csv"}),
        pass,
    )?;
    println!(
        "verify jacobian: worst relative deviation {worst:.3e}, domain {} => {}",
        if domain_ok { "ok" } else { "violated" },
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_verify_broadnarrow(
    settings: &Settings,
    k_parts: usize,
    lambda: f64,
    alpha: f64,
) -> Result<bool> {
    let spec = default_spec(lambda)?;
    let grid = Grid::full_square(lambda, settings.grid_cap);
    let decomp = cap_decompose(&spec.f, k_parts)?;
    let full = evaluate_field(&spec, &grid, &settings.quad)?;
    let caps: Vec<GridField> = decomp
        .caps
        .iter()
        .map(|c| evaluate_field(&spec.with_f(c.clone()), &grid, &settings.quad))
        .collect::<Result<_>>()?;
    let split = broad_narrow(&full, &caps, alpha)?;
    let violation = pointwise_inequality_violation(&full, &caps, &split);
    let domination = bilinear_domination_check(&full, &caps, &split);
    // Assemble the L4 report from the fields already in hand.
    let lhs = lp_norm(&split.br_field, 4.0, None)?.powi(4);
    let mut rhs_sum = 0.0;
    for j in 0..k_parts {
        for k in 0..k_parts {
            if j.abs_diff(k) >= 2 {
                rhs_sum += cap_pair_l2_squared(&decomp, j, k, &settings.quad)?;
            }
        }
    }
    let rhs_core = lambda.powf(-1.5) * (k_parts as f64).powi(4) * rhs_sum;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs_core };
    let report = crate::decomp::BroadReport {
        lambda,
        k_parts,
        alpha,
        lhs,
        rhs_core,
        ratio,
        broad_nodes: domination.broad_nodes,
    };
    let pass = violation <= 1e-12 && domination.failing_nodes == 0;

    let mut rows = String::from("lambda,K,alpha,lhs,rhs_core,ratio\n");
    let _ = writeln!(
        rows,
        "{},{},{},{},{},{}",
        lambda,
        k_parts,
        alpha,
        num(report.lhs),
        num(report.rhs_core),
        num(report.ratio)
    );
    std::fs::write(settings.out_dir.join("broadnarrow.csv"), rows)?;
    write_summary(
        settings,
        "verify broadnarrow",
        json!({"K": k_parts, "lambda": lambda, "alpha": alpha}),
        json!({
            "pointwise_violation": violation,
            "broad_nodes": domination.broad_nodes,
            "domination_failures": domination.failing_nodes,
            "report": report,
            "file": "broadnarrow.csv",
        }),
        pass,
    )?;
    println!(
        "verify broadnarrow: {} broad nodes, pointwise violation {violation:.3e}, {} domination failures => {}",
        domination.broad_nodes,
        domination.failing_nodes,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_verify_capbound(settings: &Settings, k_parts: usize) -> Result<bool> {
    let f = TestFunction::characteristic(0.0, 1.0);
    let decomp = cap_decompose(&f, k_parts)?;
    let norms: Vec<f64> = decomp.caps.iter().map(|c| l2_norm_1d(c).powi(2)).collect();
    let mut rows = String::from("j,k,norm_sq,bound\n");
    let mut pass = true;
    for j in 0..k_parts {
        for k in 0..k_parts {
            if j.abs_diff(k) < 2 {
                continue;
            }
            let got = cap_pair_l2_squared(&decomp, j, k, &settings.quad)?;
            let bound = 2.0 * k_parts as f64 / j.abs_diff(k) as f64 * norms[j] * norms[k];
            if got > bound {
                pass = false;
            }
            let _ = writeln!(rows, "{j},{k},{},{}", num(got), num(bound));
        }
    }
    std::fs::write(settings.out_dir.join("capbound.csv"), rows)?;
    write_summary(
        settings,
        "verify capbound",
        json!({"K": k_parts}),
        json!({"file": "capbound.csv"}),
        pass,
    )?;
    println!(
        "verify capbound: K={k_parts} => {}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_recursion(settings: &Settings, lmin: u64, lmax: u64, k_parts: usize) -> Result<bool> {
    let lambdas = dyadic_range(lmin, lmax)?;
    let mut rows = String::from("lambda_max,K,q4,q4_over_k,bound,ratio\n");
    let mut reports = Vec::new();
    for &lam in &lambdas {
        let r = recursion_report(
            lam,
            k_parts,
            settings.seed,
            settings.grid_cap,
            &settings.quad,
        )?;
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{}",
            lam,
            k_parts,
            num(r.q4_at_lambda),
            num(r.q4_at_lambda_over_k),
            num(r.bound),
            num(r.ratio)
        );
        println!(
            "recursion: lambda_max={lam} K={k_parts} ratio={:.4}",
            r.ratio
        );
        reports.push(r);
    }
    std::fs::write(settings.out_dir.join("recursion.csv"), rows)?;
    write_summary(
        settings,
        "recursion",
        json!({"lmin": lmin, "lmax": lmax, "K": k_parts}),
        json!({"reports": reports, "file": "recursion.csv"}),
        true,
    )?;
    Ok(true)
}

fn cmd_bench(settings: &Settings) -> Result<bool> {
    let cutoff = Cutoff::smooth_bump(0.5, 1.0)?;
    let mut rows = String::from("lambda,x,y,fast_re,fast_im,oracle_re,oracle_im,abs_dev\n");
    println!(
        "{:>8} {:>12} {:>12} {:>12}",
        "lambda", "fast", "oracle", "|dev|"
    );
    let mut pass = true;
    for &lambda in &[64.0f64, 256.0, 1024.0] {
        let (x, y) = (0.3f64, -0.2f64);
        let rate = lambda * (x * x + 2.0 * y.abs());
        let g = {
            let cutoff = cutoff.clone();
            move |t: f64| {
                num_complex::Complex64::new(0.0, lambda * (x * x * t + y * t * t)).exp()
                    * cutoff.eval(x, y, t)
            }
        };
        let t0 = std::time::Instant::now();
        let fast = integrate_oscillatory(&g, (0.0, 1.0), rate, &settings.quad)?;
        let fast_time = t0.elapsed();
        let n = ((100.0 * lambda) as usize).max(100_001) | 1;
        let t1 = std::time::Instant::now();
        let slow = brute_force_oracle(&g, (0.0, 1.0), n)?;
        let slow_time = t1.elapsed();
        let dev = (fast - slow).norm();
        if dev > 1e-8 {
            pass = false;
        }
        println!(
            "{:>8} {:>12.2?} {:>12.2?} {:>12.3e}",
            lambda, fast_time, slow_time, dev
        );
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{},{}",
            lambda,
            x,
            y,
            num(fast.re),
            num(fast.im),
            num(slow.re),
            num(slow.im),
            num(dev)
        );
    }
    std::fs::write(settings.out_dir.join("bench.csv"), rows)?;
    write_summary(
        settings,
        "bench",
        json!({}),
        json!({"file": "bench.csv"}),
        pass,
    )?;
    Ok(pass)
}
