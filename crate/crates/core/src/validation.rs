//! Independent oracles and statistical checks that tie the density
//! evaluators back to first principles.
//!
//! Every check draws from its own (seed, stream) pair, so a suite run is a
//! pure function of the seed and the configured sample sizes.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{Beta, ContinuousCDF, Gamma};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::densities::{
    beta1_pdf, beta2_pdf, bgb1_pdf, bgb2_pdf, bgb_special_pdf, special_case_zeros, transforms_m, BetaParams, Kind,
    Mode, TriParams,
};
use crate::error::{Error, Result};
use crate::invariant::haar::splitting_lhs;
use crate::invariant::table::{parts_key, split_product, InvariantTable, TableEvaluator};
use crate::invariant::{InvariantEntry, WordCache};
use crate::matrixkit::{inverse, log_det_spd, psd_sqrt, sym_eigenvalues, symmetrize, Mat};
use crate::sampling::{construct_beta1, construct_bgb1, sample_haar_orthogonal, sample_matgamma, Definition, RngHandle};
use crate::zonal::{build_zonal_table, zonal_eval, zonal_shell_eval};

/// How a statistic is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub pass: bool,
    pub sample_size: usize,
    pub seed: u64,
    pub stream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub details: BTreeMap<String, Value>,
}

impl CheckReport {
    fn new(name: &str, statistic: f64, comparison: Comparison, tolerance: f64, sample_size: usize) -> Self {
        let pass = match comparison {
            Comparison::AtMost => statistic <= tolerance,
            Comparison::AtLeast => statistic >= tolerance,
        };
        CheckReport {
            name: name.to_string(),
            statistic,
            comparison,
            tolerance,
            pass,
            sample_size,
            seed: 0,
            stream: 0,
            runtime_seconds: None,
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), v.into());
        self
    }
}

/// Sample sizes and caps for a suite run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub seed: u64,
    pub haar_draws: usize,
    pub sampler_draws: usize,
    pub importance_draws: usize,
    pub splitting_draws: usize,
    /// Spectral-norm cap on noncentralities in m ≥ 2 checks.
    pub omega_cap: f64,
    pub timings: bool,
}

impl ValidationConfig {
    pub fn new(seed: u64) -> Self {
        ValidationConfig {
            seed,
            haar_draws: 200_000,
            sampler_draws: 100_000,
            importance_draws: 20_000,
            splitting_draws: 20_000,
            omega_cap: 0.3,
            timings: false,
        }
    }
}

pub const SUITES: &[&str] = &["all", "oracle", "normalization", "symmetrisation", "calibration", "zonal", "sampler", "structural"];

type CheckFn = fn(&Ctx) -> Result<CheckReport>;

/// Every check in suite order; the suite is the name prefix.
const CHECKS: &[(&str, CheckFn)] = &[
    ("oracle/scalar_beta1", check_scalar_oracle),
    ("normalization/m1_beta1", |c| check_normalization_m1(c, Family::Beta1)),
    ("normalization/m1_beta2", |c| check_normalization_m1(c, Family::Beta2)),
    ("normalization/m1_bgb1", |c| check_normalization_m1(c, Family::Bgb1)),
    ("normalization/m1_bgb2", |c| check_normalization_m1(c, Family::Bgb2)),
    ("normalization/m2_bgb1_importance", check_normalization_importance),
    ("symmetrisation/m2_beta1", |c| check_symmetrisation(c, Family::Beta1)),
    ("symmetrisation/m2_bgb1", |c| check_symmetrisation(c, Family::Bgb1)),
    ("symmetrisation/m2_bgb2", |c| check_symmetrisation(c, Family::Bgb2)),
    ("calibration/restriction", check_restriction),
    ("calibration/exact_splitting", check_exact_splitting),
    ("calibration/haar_splitting_mcal", |c| check_haar_splitting(c, None)),
    ("calibration/haar_splitting_m2", |c| check_haar_splitting(c, Some(2))),
    ("calibration/m1_theta", check_m1_theta),
    ("zonal/normalization", check_zonal_normalization),
    ("sampler/matgamma_mean", check_matgamma_mean),
    ("sampler/matgamma_ks_m1", check_matgamma_ks),
    ("sampler/bgb1_central_marginals_ks_m1", check_central_marginals_ks),
    ("sampler/beta1_noncentral_ks_m1", check_noncentral_beta_ks),
    ("sampler/bgb1_moments_m2", check_sampler_moments),
    ("structural/special_cases", check_special_cases),
    ("structural/bgb1_marginal_m1", check_bimatrix_marginal),
    ("structural/change_of_variables", check_change_of_variables),
    ("structural/m_inverse", check_m_inverse),
];

pub fn check_names(suite: &str) -> Result<Vec<&'static str>> {
    if !SUITES.contains(&suite) {
        return Err(Error::Input(format!("unknown suite {suite:?}; expected one of {SUITES:?}")));
    }
    Ok(CHECKS
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| suite == "all" || n.split('/').next() == Some(suite))
        .collect())
}

struct Ctx<'a> {
    name: &'static str,
    cfg: &'a ValidationConfig,
    table: &'a InvariantTable,
    handle: RngHandle,
}

impl Ctx<'_> {
    fn rng(&self) -> ChaCha8Rng {
        self.handle.rng()
    }

    /// Independent sub-stream for chunk `i` of this check.
    fn sub_rng(&self, i: u64) -> ChaCha8Rng {
        RngHandle::new(self.handle.seed, (self.handle.stream << 20) + i + 1).rng()
    }
}

/// Runs the checks of `suite` in order. A check that errors is reported as
/// failed with the error in its details.
pub fn run_suite(suite: &str, cfg: &ValidationConfig, table: &InvariantTable) -> Result<Vec<CheckReport>> {
    run_checks(&check_names(suite)?, cfg, table)
}

/// Runs the named checks in suite order. Each keeps the stream it has in
/// the full suite, so results match a `run_suite("all", ..)` run.
pub fn run_checks(names: &[&str], cfg: &ValidationConfig, table: &InvariantTable) -> Result<Vec<CheckReport>> {
    if let Some(bad) = names.iter().find(|n| !CHECKS.iter().any(|(c, _)| c == *n)) {
        return Err(Error::Input(format!("unknown check {bad:?}")));
    }
    let mut out = Vec::new();
    for (i, (name, f)) in CHECKS.iter().enumerate() {
        if !names.contains(name) {
            continue;
        }
        let ctx = Ctx { name, cfg, table, handle: RngHandle::new(cfg.seed, i as u64) };
        let start = Instant::now();
        let mut r = match f(&ctx) {
            Ok(r) => r,
            Err(e) => CheckReport::new(name, f64::NAN, Comparison::AtMost, 0.0, 0)
                .detail("error_code", e.code())
                .detail("error", e.to_string()),
        };
        r.seed = cfg.seed;
        r.stream = i as u64;
        if cfg.timings {
            r.runtime_seconds = Some(start.elapsed().as_secs_f64());
        }
        out.push(r);
    }
    Ok(out)
}

// ---------------------------------------------------------------- oracles

/// Scalar doubly noncentral beta density
/// e^{−ω₁−ω₂} Σ_{k,l ≤ K} ω₁^k ω₂^l/(k! l!) u^{a+k−1}(1−u)^{b+l−1}/B(a+k, b+l).
pub fn scalar_dnc_beta_oracle(u: f64, a: f64, b: f64, w1: f64, w2: f64, k_max: usize) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Support(format!("u = {u} outside (0, 1)")));
    }
    if !(a > 0.0 && b > 0.0 && w1 >= 0.0 && w2 >= 0.0) {
        return Err(Error::Domain("oracle needs a, b > 0 and ω ≥ 0".into()));
    }
    let (lu, lv) = (u.ln(), (1.0 - u).ln());
    let mut total = 0.0;
    for k in 0..=k_max {
        if w1 == 0.0 && k > 0 {
            break;
        }
        for l in 0..=k_max {
            if w2 == 0.0 && l > 0 {
                break;
            }
            let (kf, lf) = (k as f64, l as f64);
            let mut lt = (a + kf - 1.0) * lu + (b + lf - 1.0) * lv - ln_beta(a + kf, b + lf);
            lt -= ln_gamma(kf + 1.0) + ln_gamma(lf + 1.0);
            if k > 0 {
                lt += kf * w1.ln();
            }
            if l > 0 {
                lt += lf * w2.ln();
            }
            total += lt.exp();
        }
    }
    Ok((-w1 - w2).exp() * total)
}

fn poisson_weights(w: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max)
        .map(|k| if w == 0.0 { if k == 0 { 1.0 } else { 0.0 } } else { (-w + k as f64 * w.ln() - ln_gamma(k as f64 + 1.0)).exp() })
        .collect()
}

/// CDF of the scalar doubly noncentral beta as a Poisson mixture of Beta
/// CDFs.
pub fn scalar_dnc_beta_cdf(u: f64, a: f64, b: f64, w1: f64, w2: f64, k_max: usize) -> f64 {
    let (p1, p2) = (poisson_weights(w1, k_max), poisson_weights(w2, k_max));
    let mut total = 0.0;
    for (k, &q1) in p1.iter().enumerate() {
        for (l, &q2) in p2.iter().enumerate() {
            // Poisson tails below 1e-18 cannot move a CDF value.
            if q1 * q2 < 1e-18 {
                continue;
            }
            let d = Beta::new(a + k as f64, b + l as f64).expect("positive shapes");
            total += q1 * q2 * d.cdf(u);
        }
    }
    total
}

/// CDF of the scalar noncentral gamma e^{−ω} Σ ω^k/k! Gamma(a+k, 1).
pub fn scalar_noncentral_gamma_cdf(x: f64, a: f64, w: f64, k_max: usize) -> f64 {
    poisson_weights(w, k_max)
        .iter()
        .enumerate()
        .filter(|(_, &q)| q > 0.0)
        .map(|(k, &q)| q * Gamma::new(a + k as f64, 1.0).expect("positive shape").cdf(x))
        .sum()
}

/// One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let t = d * (sn + 0.12 + 0.11 / sn);
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * t * t).exp();
        p += if k as usize % 2 == 1 { term } else { -term };
    }
    (d, p.clamp(0.0, 1.0))
}

/// Adaptive double-exponential quadrature on [a, b], always split at the
/// midpoint and bisected further where the error estimate is too large.
/// `tol` is relative to the magnitude of the integral once that exceeds 1.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let o = quadrature::integrate(f, a, b, tol);
        if o.error_estimate <= tol || depth == 0 {
            return o.integral;
        }
        let mid = 0.5 * (a + b);
        rec(f, a, mid, 0.5 * tol, depth - 1) + rec(f, mid, b, 0.5 * tol, depth - 1)
    }
    let coarse = quadrature::integrate(f, a, b, tol).integral;
    let tol = if coarse.is_finite() { tol * coarse.abs().max(1.0) } else { tol };
    let mid = 0.5 * (a + b);
    rec(f, a, mid, 0.5 * tol, 12) + rec(f, mid, b, 0.5 * tol, 12)
}

// ---------------------------------------------------------------- helpers

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Beta1,
    Beta2,
    Bgb1,
    Bgb2,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn se(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sumsq / n - self.mean().powi(2)).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

fn scalar(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let z = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    symmetrize(&(&z * z.transpose() / m as f64 + Mat::identity(m, m) * 0.1))
}

fn random_interval(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let a = random_spd(m, rng);
    let i = Mat::identity(m, m);
    symmetrize(&(&a * inverse(&(&a + &i)).expect("a + I is invertible")))
}

/// PSD matrix with spectral norm in [cap/2, cap].
fn random_omega(m: usize, cap: f64, rng: &mut ChaCha8Rng) -> Mat {
    let z = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let s = symmetrize(&(&z * z.transpose()));
    let top = sym_eigenvalues(&s).last().copied().unwrap_or(1.0).max(1e-12);
    let scale = cap * rng.random_range(0.5..1.0) / top;
    s * scale
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

fn matrix_json(x: &Mat) -> Value {
    json!(crate::matrixkit::to_rows(x))
}

// ---------------------------------------------------------------- oracle

fn check_scalar_oracle(ctx: &Ctx) -> Result<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut at = json!(null);
    let mut count = 0;
    for (a, b) in [(0.7, 1.3), (2.0, 3.0)] {
        for (w1, w2) in [(0.0, 0.0), (0.5, 1.5)] {
            for i in 1..=19 {
                let u = 0.05 * i as f64;
                let p = BetaParams { a, b, omega1: scalar(w1), omega2: scalar(w2) };
                let v = beta1_pdf(&scalar(u), &p, Mode::Nonsym, Some(30), ctx.table)?.value;
                let o = scalar_dnc_beta_oracle(u, a, b, w1, w2, 30)?;
                let r = rel(v, o);
                count += 1;
                if r > worst {
                    worst = r;
                    at = json!({ "u": u, "a": a, "b": b, "omega1": w1, "omega2": w2, "density": v, "oracle": o });
                }
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-8, count).detail("worst_point", at))
}

// ---------------------------------------------------------------- normalization

fn density_m1(family: Family, x: f64, y: f64, abc: [f64; 3], w: [f64; 3], table: &InvariantTable) -> Result<f64> {
    let v = match family {
        Family::Beta1 => {
            beta1_pdf(&scalar(x), &BetaParams { a: abc[0], b: abc[1], omega1: scalar(w[0]), omega2: scalar(w[1]) }, Mode::Nonsym, None, table)
        }
        Family::Beta2 => {
            beta2_pdf(&scalar(x), &BetaParams { a: abc[0], b: abc[1], omega1: scalar(w[0]), omega2: scalar(w[1]) }, Mode::Nonsym, None, table)
        }
        Family::Bgb1 | Family::Bgb2 => {
            let p = TriParams {
                a: abc[0],
                b: abc[1],
                c: abc[2],
                omega1: scalar(w[0]),
                omega2: scalar(w[1]),
                omega3: scalar(w[2]),
            };
            if family == Family::Bgb1 {
                bgb1_pdf(&scalar(x), &scalar(y), &p, Mode::Nonsym, None, table)
            } else {
                bgb2_pdf(&scalar(x), &scalar(y), &p, Mode::Nonsym, None, table)
            }
        }
    };
    match v {
        Ok(v) => Ok(v.value),
        // Quadrature nodes rounded onto the boundary.
        Err(Error::Support(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

fn check_normalization_m1(ctx: &Ctx, family: Family) -> Result<CheckReport> {
    let params: &[[f64; 3]] = &[[0.7, 1.3, 1.1], [2.0, 3.0, 1.5]];
    let two_dim = matches!(family, Family::Bgb1 | Family::Bgb2);
    // Every noncentrality on {0, ½, 1}; ω₃ stays 0 for the matrix beta.
    let levels = [0.0, 0.5, 1.0];
    let omegas: Vec<[f64; 3]> = (0..if two_dim { 27 } else { 9 })
        .map(|i| [levels[i % 3], levels[(i / 3) % 3], levels[i / 9]])
        .collect();
    let unbounded = matches!(family, Family::Beta2 | Family::Bgb2);
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for &abc in params {
        for &w in &omegas {
            let failure = std::cell::RefCell::new(None);
            let eval = |x: f64, y: f64| -> f64 {
                // Unbounded supports are mapped to (0, 1) by x = t/(1−t).
                let (mut px, mut py, mut jac) = (x, y, 1.0);
                if unbounded {
                    px = x / (1.0 - x);
                    jac /= (1.0 - x).powi(2);
                    if two_dim {
                        py = y / (1.0 - y);
                        jac /= (1.0 - y).powi(2);
                    }
                }
                if !(px.is_finite() && py.is_finite()) {
                    return 0.0;
                }
                match density_m1(family, px, py, abc, w, ctx.table) {
                    Ok(v) => v * jac,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            let total = if two_dim {
                let outer = |x: f64| integrate(&|y: f64| eval(x, y), 0.0, 1.0, 1e-9);
                integrate(&outer, 0.0, 1.0, 1e-8)
            } else {
                integrate(&|x: f64| eval(x, 0.5), 0.0, 1.0, 1e-10)
            };
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            let dev = (total - 1.0).abs();
            worst = worst.max(dev);
            cases.push(if two_dim {
                json!({ "a": abc[0], "b": abc[1], "c": abc[2], "omega": w, "integral": total })
            } else {
                json!({ "a": abc[0], "b": abc[1], "omega": &w[..2], "integral": total })
            });
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-5, cases.len()).detail("cases", cases))
}

/// E_q[f/q] with q the central bimatrix law sampled through the
/// construction and f the nonsymmetrised noncentral density.
fn check_normalization_importance(ctx: &Ctx) -> Result<CheckReport> {
    let m = 2;
    let (a, b, c) = (1.5, 2.0, 2.5);
    let mut rng = ctx.rng();
    let om: Vec<Mat> = (0..3).map(|_| random_omega(m, ctx.cfg.omega_cap, &mut rng)).collect();
    let p = TriParams { a, b, c, omega1: om[0].clone(), omega2: om[1].clone(), omega3: om[2].clone() };
    let zero = Mat::zeros(m, m);
    let central = TriParams::central(a, b, c, m);
    let mut acc = Moments::default();
    for _ in 0..ctx.cfg.importance_draws {
        let ga = sample_matgamma(a, &zero, &mut rng)?;
        let gb = sample_matgamma(b, &zero, &mut rng)?;
        let gc = sample_matgamma(c, &zero, &mut rng)?;
        let (u1, u2) = construct_bgb1(&ga, &gb, &gc)?;
        let f = bgb1_pdf(&u1, &u2, &p, Mode::Nonsym, None, ctx.table)?;
        let q = bgb1_pdf(&u1, &u2, &central, Mode::Nonsym, None, ctx.table)?;
        acc.push((f.log_value - q.log_value).exp());
    }
    let est = acc.mean();
    let tol = (3.0 * acc.se()).max(0.02);
    Ok(CheckReport::new(ctx.name, (est - 1.0).abs(), Comparison::AtMost, tol, acc.n)
        .detail("estimate", est)
        .detail("standard_error", acc.se())
        .detail("omegas", om.iter().map(matrix_json).collect::<Vec<_>>()))
}

// ---------------------------------------------------------------- symmetrisation

fn check_symmetrisation(ctx: &Ctx, family: Family) -> Result<CheckReport> {
    let m = 2;
    let mut rng = ctx.rng();
    let cap = ctx.cfg.omega_cap;
    let x1 = random_interval(m, &mut rng);
    let x2 = random_interval(m, &mut rng);
    let om: Vec<Mat> = (0..3).map(|_| random_omega(m, cap, &mut rng)).collect();
    let (a, b, c) = (1.5, 2.0, 2.5);
    let tri = TriParams { a, b, c, omega1: om[0].clone(), omega2: om[1].clone(), omega3: om[2].clone() };
    let pair = BetaParams { a, b, omega1: om[0].clone(), omega2: om[1].clone() };
    let d = 3;
    let eval = |mode: Mode, y1: &Mat, y2: &Mat| -> Result<f64> {
        Ok(match family {
            Family::Beta1 => beta1_pdf(y1, &pair, mode, Some(d), ctx.table)?.value,
            Family::Beta2 => beta2_pdf(y1, &pair, mode, Some(d), ctx.table)?.value,
            Family::Bgb1 => bgb1_pdf(y1, y2, &tri, mode, Some(d), ctx.table)?.value,
            Family::Bgb2 => bgb2_pdf(y1, y2, &tri, mode, Some(d), ctx.table)?.value,
        })
    };
    let sym = eval(Mode::Sym, &x1, &x2)?;
    let mut acc = Moments::default();
    let mut hr = ctx.sub_rng(0);
    for _ in 0..ctx.cfg.haar_draws {
        let h = sample_haar_orthogonal(m, &mut hr);
        let y1 = symmetrize(&(&h * &x1 * h.transpose()));
        let y2 = symmetrize(&(&h * &x2 * h.transpose()));
        acc.push(eval(Mode::Nonsym, &y1, &y2)?);
    }
    let avg = acc.mean();
    let tol = (3.0 * acc.se()).max(0.01 * sym.abs());
    Ok(CheckReport::new(ctx.name, (avg - sym).abs(), Comparison::AtMost, tol, acc.n)
        .detail("symmetrised", sym)
        .detail("haar_average", avg)
        .detail("standard_error", acc.se())
        .detail("truncation", d)
        .detail("point", vec![matrix_json(&x1), matrix_json(&x2)])
        .detail("omegas", om.iter().map(matrix_json).collect::<Vec<_>>()))
}

// ---------------------------------------------------------------- calibration

fn grouped(table: &InvariantTable) -> BTreeMap<String, Vec<&InvariantEntry>> {
    let mut g: BTreeMap<String, Vec<&InvariantEntry>> = BTreeMap::new();
    for e in table.entries.values() {
        g.entry(parts_key(&e.parts)).or_default().push(e);
    }
    g
}

fn check_restriction(ctx: &Ctx) -> Result<CheckReport> {
    let zonal = build_zonal_table(ctx.table.max_pair_degree.max(ctx.table.max_triple_degree));
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut worst_key = String::new();
    for (key, e) in &ctx.table.entries {
        for m in [e.m_cal, 2] {
            for _ in 0..5 {
                let x = random_spd(m, &mut rng);
                let basis = ctx.table.basis(&e.parts.iter().map(|p| p.weight()).collect::<Vec<_>>())?;
                let args: Vec<&Mat> = vec![&x; e.parts.len()];
                let b = basis.evaluate(&args, &mut WordCache::new())?;
                let cz = zonal_eval(&zonal, &e.phi, &sym_eigenvalues(&x))?;
                for c in &e.components {
                    let v: f64 = c.coefficients.iter().zip(&b).map(|(u, w)| u * w).sum();
                    let r = (v - c.theta * cz).abs() / cz.abs().max(1.0);
                    if r > worst {
                        worst = r;
                        worst_key = key.clone();
                    }
                }
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-9, ctx.table.entries.len())
        .detail("worst_key", worst_key))
}

fn split_rhs(entries: &[&InvariantEntry], a: &[Mat], x: &[Mat], table: &InvariantTable) -> Result<f64> {
    let mut ea = TableEvaluator::new(table, a.to_vec())?;
    let mut ex = TableEvaluator::new(table, x.to_vec())?;
    let m = a[0].nrows();
    let mut total = 0.0;
    for e in entries {
        if e.phi.len() > m {
            continue;
        }
        total += split_product(e, &mut ea, &mut ex)?;
    }
    Ok(total)
}

fn check_exact_splitting(ctx: &Ctx) -> Result<CheckReport> {
    let zonal = build_zonal_table(ctx.table.max_pair_degree.max(ctx.table.max_triple_degree));
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut worst_key = String::new();
    let groups = grouped(ctx.table);
    for (key, es) in &groups {
        let parts = &es[0].parts;
        let m = es[0].m_cal;
        let k = parts.len();
        for _ in 0..20 {
            let a: Vec<Mat> = (0..k).map(|_| random_spd(m, &mut rng)).collect();
            let x: Vec<Mat> = (0..k).map(|_| random_spd(m, &mut rng)).collect();
            let lhs = splitting_lhs(parts, &a, &x, &zonal)?;
            let rhs = split_rhs(es, &a, &x, ctx.table)?;
            let r = rel(rhs, lhs);
            if r > worst {
                worst = r;
                worst_key = key.clone();
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-8, groups.len() * 20).detail("worst_key", worst_key))
}

/// Monte Carlo estimate of ∫ ∏ C_κ(A_s H X_s H') (dH) against the stored
/// decomposition; the statistic is the largest |z| over argument tuples.
fn check_haar_splitting(ctx: &Ctx, fixed_m: Option<usize>) -> Result<CheckReport> {
    let zonal = build_zonal_table(ctx.table.max_pair_degree.max(ctx.table.max_triple_degree));
    let mut rng = ctx.rng();
    let n = ctx.cfg.splitting_draws;
    let mut worst: f64 = 0.0;
    let mut worst_key = String::new();
    let mut zs = BTreeMap::new();
    for (gi, (key, es)) in grouped(ctx.table).iter().enumerate() {
        let parts = &es[0].parts;
        let m = fixed_m.unwrap_or(es[0].m_cal);
        let k = parts.len();
        let a: Vec<Mat> = (0..k).map(|_| random_spd(m, &mut rng)).collect();
        let x: Vec<Mat> = (0..k).map(|_| random_spd(m, &mut rng)).collect();
        let roots: Vec<Mat> = a.iter().map(psd_sqrt).collect();
        let rhs = split_rhs(es, &a, &x, ctx.table)?;
        let mut acc = Moments::default();
        let mut hr = ctx.sub_rng(gi as u64);
        for _ in 0..n {
            let h = sample_haar_orthogonal(m, &mut hr);
            let mut prod = 1.0;
            for s in 0..k {
                // A^{1/2} H X H' A^{1/2} shares the spectrum of A H X H'.
                let y = symmetrize(&(&roots[s] * &h * &x[s] * h.transpose() * &roots[s]));
                prod *= zonal_eval(&zonal, &parts[s], &sym_eigenvalues(&y))?;
            }
            acc.push(prod);
        }
        // Constant integrands (e.g. a determinant at full length) have zero
        // sample variance; floor the error at rounding level.
        let se = acc.se().max(1e-10 * (acc.mean().abs() + rhs.abs()));
        let z = (acc.mean() - rhs) / se.max(f64::MIN_POSITIVE);
        zs.insert(key.clone(), json!((z * 1e3).round() / 1e3));
        if z.abs() > worst {
            worst = z.abs();
            worst_key = key.clone();
        }
    }
    let count = zs.len();
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 3.0, n * count)
        .detail("worst_key", worst_key)
        .detail("z_by_key", Value::Object(zs.into_iter().collect())))
}

fn check_m1_theta(ctx: &Ctx) -> Result<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut rng = ctx.rng();
    for e in ctx.table.entries.values() {
        if e.phi.len() > 1 || e.parts.iter().any(|p| p.len() > 1) {
            continue;
        }
        count += 1;
        let th = e.theta();
        worst = worst.max((th * th - 1.0).abs());
        // The one-by-one reduction: u'b(x_1, …) = θ ∏ x_s^{k_s}.
        let xs: Vec<Mat> = e.parts.iter().map(|_| scalar(rng.random_range(0.2..1.5))).collect();
        let mut ev = TableEvaluator::new(ctx.table, xs.clone())?;
        let lead = ev.component_values(e)?[0];
        let mono: f64 = xs.iter().zip(&e.parts).map(|(x, p)| x[(0, 0)].powi(p.weight() as i32)).product();
        worst = worst.max((lead - th * mono).abs() / mono);
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-10, count))
}

// ---------------------------------------------------------------- zonal

fn check_zonal_normalization(ctx: &Ctx) -> Result<CheckReport> {
    let zonal = build_zonal_table(8);
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for m in 1..=5 {
        for k in 0..=8 {
            for _ in 0..3 {
                let x = random_spd(m, &mut rng);
                let ev = sym_eigenvalues(&x);
                let sum: f64 = zonal_shell_eval(&zonal, k, &ev)?.iter().sum();
                let want = x.trace().powi(k as i32);
                worst = worst.max(rel(sum, want));
                count += 1;
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-12, count))
}

// ---------------------------------------------------------------- sampler

fn check_matgamma_mean(ctx: &Ctx) -> Result<CheckReport> {
    let m = 2;
    let a = 1.5;
    let omega = crate::matrixkit::from_rows(&[vec![0.5, 0.2], vec![0.2, 0.3]])?;
    let mut rng = ctx.rng();
    let mut acc = vec![Moments::default(); m * m];
    for _ in 0..ctx.cfg.sampler_draws {
        let x = sample_matgamma(a, &omega, &mut rng)?;
        for (i, v) in x.iter().enumerate() {
            acc[i].push(*v);
        }
    }
    let want = Mat::identity(m, m) * a + &omega;
    let worst = acc
        .iter()
        .zip(want.iter())
        .map(|(s, w)| ((s.mean() - w) / s.se()).abs())
        .fold(0.0, f64::max);
    let means: Vec<f64> = acc.iter().map(Moments::mean).collect();
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 4.0, ctx.cfg.sampler_draws).detail("means_column_major", means))
}

fn check_matgamma_ks(ctx: &Ctx) -> Result<CheckReport> {
    let (a, w) = (1.5, 0.8);
    let mut rng = ctx.rng();
    let xs: Vec<f64> =
        (0..ctx.cfg.sampler_draws).map(|_| sample_matgamma(a, &scalar(w), &mut rng).map(|x| x[(0, 0)])).collect::<Result<_>>()?;
    let (d, p) = ks_test(xs, |x| scalar_noncentral_gamma_cdf(x, a, w, 60));
    Ok(CheckReport::new(ctx.name, p, Comparison::AtLeast, 1e-3, ctx.cfg.sampler_draws).detail("ks_statistic", d))
}

fn check_central_marginals_ks(ctx: &Ctx) -> Result<CheckReport> {
    let (a, b, c) = (1.5, 2.0, 2.5);
    let z = Mat::zeros(1, 1);
    let mut rng = ctx.rng();
    let (mut u1s, mut u2s) = (Vec::new(), Vec::new());
    for _ in 0..ctx.cfg.sampler_draws {
        let ga = sample_matgamma(a, &z, &mut rng)?;
        let gb = sample_matgamma(b, &z, &mut rng)?;
        let gc = sample_matgamma(c, &z, &mut rng)?;
        let (u1, u2) = construct_bgb1(&ga, &gb, &gc)?;
        u1s.push(u1[(0, 0)]);
        u2s.push(u2[(0, 0)]);
    }
    let b1 = Beta::new(a, c).expect("positive shapes");
    let b2 = Beta::new(b, c).expect("positive shapes");
    let (d1, p1) = ks_test(u1s, |u| b1.cdf(u));
    let (d2, p2) = ks_test(u2s, |u| b2.cdf(u));
    Ok(CheckReport::new(ctx.name, p1.min(p2), Comparison::AtLeast, 1e-3, ctx.cfg.sampler_draws)
        .detail("p_u1", p1)
        .detail("p_u2", p2)
        .detail("ks_u1", d1)
        .detail("ks_u2", d2))
}

fn check_noncentral_beta_ks(ctx: &Ctx) -> Result<CheckReport> {
    let (a, b, w1, w2) = (1.5, 2.0, 0.5, 1.0);
    let mut rng = ctx.rng();
    let mut us = Vec::new();
    for _ in 0..ctx.cfg.sampler_draws {
        let ga = sample_matgamma(a, &scalar(w1), &mut rng)?;
        let gb = sample_matgamma(b, &scalar(w2), &mut rng)?;
        us.push(construct_beta1(&ga, &gb, Definition::One)?[(0, 0)]);
    }
    let (d, p) = ks_test(us, |u| scalar_dnc_beta_cdf(u, a, b, w1, w2, 40));
    Ok(CheckReport::new(ctx.name, p, Comparison::AtLeast, 1e-3, ctx.cfg.sampler_draws).detail("ks_statistic", d))
}

/// E[tr U₁] and E[tr U₁U₂] from the construction against importance
/// sampling of the symmetrised density; largest |z| of the differences.
fn check_sampler_moments(ctx: &Ctx) -> Result<CheckReport> {
    let m = 2;
    let (a, b, c) = (1.5, 2.0, 2.5);
    let mut rng = ctx.rng();
    let om: Vec<Mat> = (0..3).map(|_| random_omega(m, ctx.cfg.omega_cap, &mut rng)).collect();
    let p = TriParams { a, b, c, omega1: om[0].clone(), omega2: om[1].clone(), omega3: om[2].clone() };
    let central = TriParams::central(a, b, c, m);
    let zero = Mat::zeros(m, m);
    let n = ctx.cfg.importance_draws;
    let stats = |u1: &Mat, u2: &Mat| [u1.trace(), (u1 * u2).trace()];
    let mut direct = [Moments::default(); 2];
    let mut dr = ctx.sub_rng(0);
    for _ in 0..n {
        let ga = sample_matgamma(a, &om[0], &mut dr)?;
        let gb = sample_matgamma(b, &om[1], &mut dr)?;
        let gc = sample_matgamma(c, &om[2], &mut dr)?;
        let (u1, u2) = construct_bgb1(&ga, &gb, &gc)?;
        for (acc, v) in direct.iter_mut().zip(stats(&u1, &u2)) {
            acc.push(v);
        }
    }
    let mut weighted = [Moments::default(); 2];
    let mut ir = ctx.sub_rng(1);
    for _ in 0..n {
        let ga = sample_matgamma(a, &zero, &mut ir)?;
        let gb = sample_matgamma(b, &zero, &mut ir)?;
        let gc = sample_matgamma(c, &zero, &mut ir)?;
        let (u1, u2) = construct_bgb1(&ga, &gb, &gc)?;
        let f = bgb1_pdf(&u1, &u2, &p, Mode::Sym, None, ctx.table)?;
        let q = bgb1_pdf(&u1, &u2, &central, Mode::Sym, None, ctx.table)?;
        let w = (f.log_value - q.log_value).exp();
        for (acc, v) in weighted.iter_mut().zip(stats(&u1, &u2)) {
            acc.push(w * v);
        }
    }
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (name, (d, w)) in ["tr_u1", "tr_u1u2"].iter().zip(direct.iter().zip(&weighted)) {
        let z = (d.mean() - w.mean()) / (d.se().powi(2) + w.se().powi(2)).sqrt();
        worst = worst.max(z.abs());
        rows.push(json!({ "moment": name, "sample": d.mean(), "density": w.mean(), "z": z }));
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 4.0, 2 * n).detail("moments", rows))
}

// ---------------------------------------------------------------- structural

fn check_special_cases(ctx: &Ctx) -> Result<CheckReport> {
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut worst_case = json!(null);
    for kind in [Kind::I, Kind::II] {
        for m in [1usize, 2] {
            for _ in 0..3 {
                let (x1, x2) = match kind {
                    Kind::I => (random_interval(m, &mut rng), random_interval(m, &mut rng)),
                    Kind::II => (random_spd(m, &mut rng), random_spd(m, &mut rng)),
                };
                let om: Vec<Mat> = (0..3).map(|_| random_omega(m, ctx.cfg.omega_cap, &mut rng)).collect();
                for case in 1..=6u8 {
                    let zeros = special_case_zeros(case)?;
                    let pick = |i: usize| if zeros[i] { Mat::zeros(m, m) } else { om[i].clone() };
                    let p = TriParams { a: 1.5, b: 2.0, c: 2.5, omega1: pick(0), omega2: pick(1), omega3: pick(2) };
                    let full = match kind {
                        Kind::I => bgb1_pdf(&x1, &x2, &p, Mode::Nonsym, Some(3), ctx.table)?,
                        Kind::II => bgb2_pdf(&x1, &x2, &p, Mode::Nonsym, Some(3), ctx.table)?,
                    };
                    let special = bgb_special_pdf(kind, case, &x1, &x2, &p, Some(3), ctx.table)?;
                    let r = rel(special.value, full.value);
                    count += 1;
                    if r > worst {
                        worst = r;
                        worst_case = json!({ "kind": format!("{kind:?}"), "case": case, "m": m });
                    }
                }
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-12, count).detail("worst_case", worst_case))
}

/// At m = 1 the U₁ marginal of the bimatrix law is the scalar doubly
/// noncentral beta with (a, c, ω₁, ω₃).
fn check_bimatrix_marginal(ctx: &Ctx) -> Result<CheckReport> {
    let (a, b, c) = (1.5, 2.0, 2.5);
    let w = [0.6, 0.9, 0.4];
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for u1 in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let f = |u2: f64| density_m1(Family::Bgb1, u1, u2, [a, b, c], w, ctx.table).unwrap_or(f64::NAN);
        let marginal = integrate(&f, 0.0, 1.0, 1e-11);
        let oracle = scalar_dnc_beta_oracle(u1, a, c, w[0], w[2], 40)?;
        let r = rel(marginal, oracle);
        worst = worst.max(r);
        rows.push(json!({ "u1": u1, "marginal": marginal, "oracle": oracle }));
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-6, rows.len()).detail("points", rows))
}

fn check_change_of_variables(ctx: &Ctx) -> Result<CheckReport> {
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for m in [1usize, 2] {
        let i = Mat::identity(m, m);
        for _ in 0..5 {
            let f1 = random_spd(m, &mut rng) * 2.0;
            let f2 = random_spd(m, &mut rng) * 2.0;
            let u1 = symmetrize(&(&i - inverse(&(&i + &f1))?));
            let u2 = symmetrize(&(&i - inverse(&(&i + &f2))?));
            let om: Vec<Mat> = (0..3).map(|_| random_omega(m, ctx.cfg.omega_cap, &mut rng)).collect();
            let p = TriParams { a: 1.5, b: 2.0, c: 2.5, omega1: om[0].clone(), omega2: om[1].clone(), omega3: om[2].clone() };
            // dU_i = |I + F_i|^{-(m+1)} dF_i.
            let jac = -(m as f64 + 1.0) * (log_det_spd(&(&i + &f1))? + log_det_spd(&(&i + &f2))?);
            for mode in [Mode::Sym, Mode::Nonsym] {
                let v2 = bgb2_pdf(&f1, &f2, &p, mode, Some(3), ctx.table)?;
                let v1 = bgb1_pdf(&u1, &u2, &p, mode, Some(3), ctx.table)?;
                worst = worst.max(rel((v1.log_value + jac).exp(), v2.value));
                count += 1;
            }
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-10, count))
}

/// M⁻¹ = (I−U₁)⁻¹U₁ + (I−U₂)⁻¹U₂ + I against M = (I−U₂)(I−U₁U₂)⁻¹(I−U₁).
fn check_m_inverse(ctx: &Ctx) -> Result<CheckReport> {
    let mut rng = ctx.rng();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for m in 1..=4 {
        let i = Mat::identity(m, m);
        for _ in 0..10 {
            let u1 = random_interval(m, &mut rng);
            let u2 = random_interval(m, &mut rng);
            let direct = (&i - &u2) * inverse(&(&i - &u1 * &u2))? * (&i - &u1);
            let want = inverse(&(&i - &u1))? * &u1 + inverse(&(&i - &u2))? * &u2 + &i;
            let got = inverse(&direct)?;
            worst = worst.max((&got - &want).norm() / want.norm());
            let t = transforms_m(&u1, &u2)?;
            worst = worst.max((&t.m - &direct).norm() / direct.norm());
            count += 1;
        }
    }
    Ok(CheckReport::new(ctx.name, worst, Comparison::AtMost, 1e-10, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_reduces_to_central_beta() {
        for u in [0.1, 0.5, 0.8] {
            let v = scalar_dnc_beta_oracle(u, 2.0, 3.0, 0.0, 0.0, 30).unwrap();
            let want = 12.0 * u * (1.0 - u).powi(2);
            assert!((v - want).abs() < 1e-13);
        }
        assert!(matches!(scalar_dnc_beta_oracle(1.0, 1.0, 1.0, 0.0, 0.0, 5), Err(Error::Support(_))));
    }

    #[test]
    fn oracle_integrates_to_one() {
        for (a, b, w1, w2) in [(0.7, 1.3, 2.0, 0.5), (2.0, 3.0, 1.0, 2.0)] {
            let total = integrate(&|u| scalar_dnc_beta_oracle(u, a, b, w1, w2, 30).unwrap_or(0.0), 0.0, 1.0, 1e-11);
            assert!((total - 1.0).abs() < 1e-8, "{total}");
        }
    }

    #[test]
    fn oracle_cdf_matches_quadrature() {
        let (a, b, w1, w2) = (1.5, 2.0, 0.5, 1.0);
        let q = integrate(&|u| scalar_dnc_beta_oracle(u, a, b, w1, w2, 40).unwrap_or(0.0), 0.0, 0.4, 1e-12);
        assert!((q - scalar_dnc_beta_cdf(0.4, a, b, w1, w2, 40)).abs() < 1e-9);
    }

    #[test]
    fn ks_p_values() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_test(xs.clone(), |x| x).1 > 0.99);
        assert!(ks_test(xs, |x| x * x).1 < 1e-6);
    }

    #[test]
    fn suite_names() {
        assert_eq!(check_names("zonal").unwrap(), vec!["zonal/normalization"]);
        assert_eq!(check_names("all").unwrap().len(), CHECKS.len());
        assert!(check_names("nope").is_err());
    }
}
