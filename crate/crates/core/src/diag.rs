use num_bigint::BigUint;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

use crate::blocks::BlockSequence;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::GridKernel;
use crate::lacunar::{big_log, LacunarSpec};
use crate::mercer::MercerDecomposition;
use crate::modulus::kernel_modulus_profile;
use crate::rng;
use crate::trig::{vp_multiplier, vp_p, Spectrum2d, TrigPolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// Numerical evidence about an infinite series (or integral) from finitely many terms.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub criterion: String,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub tail_estimate: f64,
    pub verdict: Verdict,
    pub assumptions: Vec<String>,
}

impl ContinuityReport {
    fn from_terms(criterion: &str, terms: Vec<f64>, assumptions: Vec<String>) -> Self {
        let (verdict, tail_estimate) = classify_series(&terms);
        let mut acc = 0.0;
        let partial_sums = terms.iter().map(|t| { acc += t; acc }).collect();
        Self { criterion: criterion.into(), terms, partial_sums, tail_estimate, verdict, assumptions }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// Rows `index, term, partial_sum`.
    pub fn terms_csv(&self) -> String {
        let mut out = String::from("index,term,partial_sum\n");
        for (i, (t, s)) in self.terms.iter().zip(&self.partial_sums).enumerate() {
            out.push_str(&format!("{},{:e},{:e}\n", i + 1, t, s));
        }
        out
    }
}

/// Absorbs roundoff in fitted exponents of exactly `-1`.
const SLOPE_EPS: f64 = 1e-9;

/// Slope of the least-squares line through `(ln x, ln y)`.
fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Classifies non-negative series terms; returns the verdict and a tail estimate.
///
/// Rules, first match wins: exact zero last term; geometric decay with ratio at
/// most 0.9; non-decreasing recent terms; power-law integral test; negligible
/// tail relative to the partial sum.
pub fn classify_series(terms: &[f64]) -> (Verdict, f64) {
    let k = terms.len();
    if k == 0 {
        return (Verdict::Inconclusive, f64::NAN);
    }
    if terms.iter().any(|t| !t.is_finite()) {
        return (Verdict::Diverges, f64::INFINITY);
    }
    let last = terms[k - 1];
    if last == 0.0 {
        return (Verdict::Converges, 0.0);
    }
    if k < 3 {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let partial: f64 = terms.iter().sum();
    let w = 5.min(k - 1);
    if terms[k - 1 - w] > 0.0 {
        let r = (last / terms[k - 1 - w]).powf(1.0 / w as f64);
        if r <= 0.9 {
            return (Verdict::Converges, last * r / (1.0 - r));
        }
    }
    let w10 = 10.min(k - 1);
    if terms[k - 1 - w10..].windows(2).all(|p| p[1] >= p[0]) {
        return (Verdict::Diverges, f64::INFINITY);
    }
    let lo = k - 1 - w10;
    let window: Vec<(f64, f64)> =
        (lo..k).filter(|&i| terms[i] > 0.0).map(|i| ((i + 1) as f64, terms[i])).collect();
    let mut tail = f64::NAN;
    if window.len() >= 3 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = window.into_iter().unzip();
        let b = log_log_slope(&xs, &ys);
        if b >= -1.0 - SLOPE_EPS {
            return (Verdict::Diverges, f64::INFINITY);
        }
        tail = last * k as f64 / (-b - 1.0);
        if b < -1.1 {
            return (Verdict::Converges, tail);
        }
    }
    if tail.is_finite() && tail < 1e-6 * partial {
        return (Verdict::Converges, tail);
    }
    (Verdict::Inconclusive, tail)
}

/// Kernel input for [`sigma_e_series`].
#[derive(Debug, Clone, Copy)]
pub enum SeriesKernel<'a> {
    Lacunar(&'a LacunarSpec),
    Grid(&'a GridKernel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    L2_2d,
    SupLacunar,
}

/// `Σ_k E^{1/2}([n(k)/2], [n(k)/2]; R) sqrt(log n(k+1))` for `k ≤ k_max`.
pub fn sigma_e_series(
    kernel: SeriesKernel<'_>,
    blocks: &BlockSequence,
    mode: ErrorMode,
    k_max: usize,
) -> Result<ContinuityReport> {
    let k_max = k_max.min(blocks.len().saturating_sub(1));
    if k_max == 0 {
        return Err(Error::arg("need at least two block indices"));
    }
    let mut notes = vec!["measure: Lebesgue on [0, 2π]".to_string()];
    if !blocks.starts_at_one() {
        notes.push("block sequence does not start at 1; the first block is omitted from the sum".into());
    }
    let two = BigUint::from(2u32);
    let half = |k: usize| &blocks.indices[k - 1] / &two;
    let terms: Vec<f64> = match (mode, kernel) {
        (ErrorMode::SupLacunar, SeriesKernel::Lacunar(l)) => {
            notes.push("uniform best-approximation error of a lacunar series (exact)".into());
            if l.theta().is_none() {
                notes.push("coefficients beyond the explicit terms are zero".into());
            }
            (1..=k_max)
                .map(|k| l.tail_sum(l.nu(&half(k))).sqrt() * big_log(&blocks.indices[k]).sqrt())
                .collect()
        }
        (ErrorMode::L2_2d, SeriesKernel::Grid(gk)) => {
            notes.push("L2(T²) best-approximation error from the grid spectrum".into());
            let sp = Spectrum2d::new(gk)?;
            let mut out = Vec::new();
            for k in 1..=k_max {
                let n = half(k);
                match num_traits::ToPrimitive::to_usize(&n).filter(|n| *n <= sp.max_degree()) {
                    Some(n) => out.push(sp.l2_tail(n, n).sqrt() * big_log(&blocks.indices[k]).sqrt()),
                    None => {
                        notes.push(format!("stopped at k = {k}: degree {n} exceeds the grid resolution"));
                        break;
                    }
                }
            }
            out
        }
        (m, _) => return Err(Error::arg(format!("error mode {m:?} does not match the kernel input"))),
    };
    Ok(ContinuityReport::from_terms("sigma_e", terms, notes))
}

/// Largest `x` with `e^{-x²}` at least two grid spacings.
pub fn fernique_max_x(grid: &Grid) -> f64 {
    (-(2.0 * grid.weight()).ln()).max(0.0).sqrt()
}

pub const FERNIQUE_NODES: usize = 512;

/// Midpoint rule for `∫_0^{x_max} ω^{1/2}(R, e^{-x²}) dx` with the grid bivariate modulus.
pub fn fernique_integral(gk: &GridKernel, x_max: Option<f64>, n_quad: usize) -> Result<ContinuityReport> {
    let h = gk.grid.weight();
    let trust = fernique_max_x(&gk.grid);
    let x_max = x_max.unwrap_or(trust);
    if x_max > trust * (1.0 + 1e-12) {
        return Err(Error::Resolution {
            reason: format!("e^(-x²) drops below two grid spacings before x = {x_max}"),
            max_trustworthy: trust,
        });
    }
    if n_quad == 0 || !(x_max > 0.0) {
        return Err(Error::arg("need a positive range and at least one node"));
    }
    let max_steps = (1.0 / h).floor() as usize;
    let omega = kernel_modulus_profile(&gk.values, max_steps, gk.grid.is_trigonometric());
    let at = |delta: f64| omega[((delta / h) * (1.0 + 1e-12)).floor().min(max_steps as f64) as usize];
    let dx = x_max / n_quad as f64;
    let xs: Vec<f64> = (0..n_quad).map(|i| (i as f64 + 0.5) * dx).collect();
    let integrand: Vec<f64> = xs.iter().map(|x| at((-x * x).exp()).sqrt()).collect();
    let terms: Vec<f64> = integrand.iter().map(|g| g * dx).collect();
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = terms.iter().map(|t| { acc += t; acc }).collect();
    let mut notes = vec![
        format!("grid bivariate modulus, {} nodes on [0, {x_max:.6}]", n_quad),
        "tail fitted on the last resolvable decade, delta in [2h, 20h]".into(),
    ];
    let (verdict, tail_estimate) = if integrand.iter().all(|g| *g == 0.0) {
        (Verdict::Converges, 0.0)
    } else {
        let x_lo = (-(20.0 * h).ln()).max(0.0).sqrt();
        let fit: Vec<(f64, f64)> =
            xs.iter().zip(&integrand).filter(|(x, g)| **x >= x_lo && **g > 0.0).map(|(x, g)| (*x, *g)).collect();
        if fit.len() < 3 {
            notes.push("too few resolvable nodes for a tail fit".into());
            (Verdict::Inconclusive, f64::NAN)
        } else {
            let (fx, fy): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
            let b = log_log_slope(&fx, &fy);
            notes.push(format!("fitted power-law exponent of the integrand: {b:.4}"));
            let g_end = *fy.last().unwrap();
            if b >= -1.0 - SLOPE_EPS {
                (Verdict::Diverges, f64::INFINITY)
            } else if b < -1.1 {
                (Verdict::Converges, g_end * x_max / (-b - 1.0))
            } else {
                (Verdict::Inconclusive, g_end * x_max / (-b - 1.0))
            }
        }
    };
    Ok(ContinuityReport { criterion: "fernique".into(), terms, partial_sums, tail_estimate, verdict, assumptions: notes })
}

#[derive(Debug, Clone, Serialize)]
pub struct LacunarCriteria {
    /// `Σ |b_k|`.
    pub absolute_sum: ContinuityReport,
    /// `Σ_k sqrt(Σ_{m≥k} b_m²) sqrt(log n(k+1))`.
    pub tail_root: ContinuityReport,
}

/// The two lacunar continuity series evaluated over the explicit terms.
pub fn lacunar_criteria(spec: &LacunarSpec) -> LacunarCriteria {
    let k = spec.n_terms();
    let mut notes = vec![];
    if spec.theta().is_some() {
        notes.push("coefficients continue analytically past the explicit terms".to_string());
    }
    let abs_terms: Vec<f64> = (1..=k).map(|i| spec.coefficient(i).abs()).collect();
    let mut absolute_sum = ContinuityReport::from_terms("lacunar_absolute_sum", abs_terms, notes.clone());
    if spec.theta().is_some() {
        absolute_sum.tail_estimate = spec.tail_sum(k);
    } else {
        absolute_sum.verdict = Verdict::Converges;
        absolute_sum.tail_estimate = 0.0;
        absolute_sum.assumptions.push("finite series".into());
    }
    let root_terms: Vec<f64> = (1..k)
        .map(|i| spec.tail_sum_sq(i - 1).sqrt() * big_log(&spec.frequencies()[i]).sqrt())
        .collect();
    let mut tail_root = ContinuityReport::from_terms("lacunar_tail_root", root_terms, notes);
    if spec.theta().is_none() {
        tail_root.verdict = Verdict::Converges;
        tail_root.tail_estimate = 0.0;
        tail_root.assumptions.push("finite series".into());
    }
    LacunarCriteria { absolute_sum, tail_root }
}

/// Dyadic band `(2^n, 2^{n+1}]` holding frequency `f` (frequency 1 joins band 0).
fn band_of(f: &BigUint) -> usize {
    let m1 = f - 1u32;
    (m1.bits() as usize).saturating_sub(1)
}

/// Spectral band masses `s_n`, their monotone envelope `M(n) = max_{m≥n} s_m`, and `Σ M^{1/2}`.
pub fn watanabe_check(spec: &LacunarSpec) -> ContinuityReport {
    let last = band_of(spec.frequencies().last().unwrap());
    let mut s = vec![0.0; last + 1];
    for (k, f) in spec.frequencies().iter().enumerate() {
        s[band_of(f)] += spec.coefficient(k + 1).powi(2);
    }
    let mut env = s.clone();
    for n in (0..last).rev() {
        env[n] = env[n].max(env[n + 1]);
    }
    let mut terms: Vec<f64> = env.iter().map(|m| m.sqrt()).collect();
    let mut notes = vec!["bands (2^n, 2^(n+1)], masses b_k² at n_k".to_string()];
    if spec.theta().is_none() {
        terms.push(0.0);
        notes.push("spectral measure fully enumerated; envelope vanishes past the last band".into());
    }
    let mut r = ContinuityReport::from_terms("watanabe", terms, notes);
    r.partial_sums.shrink_to_fit();
    r
}

/// `Var Z(t)` for `Z = (V_{n(k+1)} - V_{n(k)}) ξ` built from the Mercer expansion.
pub fn block_variance(md: &MercerDecomposition, block: (usize, usize)) -> Result<Vec<f64>> {
    let grid = &md.grid;
    if !grid.is_trigonometric() {
        return Err(Error::Domain("block variance needs a grid on [0, 2π]".into()));
    }
    let (lo, hi) = block;
    if lo >= hi {
        return Err(Error::arg(format!("block ({lo}, {hi}) is not increasing")));
    }
    let n = grid.n_points();
    if 2 * hi >= n {
        return Err(Error::Aliasing { max_freq: hi, n_points: n });
    }
    let mult: Vec<f64> = (0..n)
        .map(|i| {
            let k = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
            vp_multiplier(hi, vp_p(hi), k) - vp_multiplier(lo, vp_p(lo), k)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut var = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..md.n_kept {
        for (b, p) in buf.iter_mut().zip(md.eigenfunctions.column(k).iter()) {
            *b = Complex64::new(*p, 0.0);
        }
        fwd.process(&mut buf);
        for (b, m) in buf.iter_mut().zip(&mult) {
            *b *= m / n as f64;
        }
        inv.process(&mut buf);
        for (v, b) in var.iter_mut().zip(&buf) {
            *v += md.eigenvalues[k] * b.re * b.re;
        }
    }
    Ok(var)
}

pub const PSI_EXP_LIMIT: f64 = 700.0;

/// `Ψ(λ) = (2π)^{-1} ∫ e^{λ² v(t) / 2} dt` for a tabulated variance on `[0, 2π]`.
pub fn psi_from_variance(v: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::arg("lambda must be positive"));
    }
    let vmax = v.iter().fold(0.0_f64, |a, b| a.max(*b));
    if lambda * lambda * vmax / 2.0 > PSI_EXP_LIMIT {
        return Err(Error::Range(format!(
            "exponent {:.1} exceeds {PSI_EXP_LIMIT}; use lambda below {:.4}",
            lambda * lambda * vmax / 2.0,
            (2.0 * PSI_EXP_LIMIT / vmax).sqrt()
        )));
    }
    Ok(v.iter().map(|x| (lambda * lambda * x / 2.0).exp()).sum::<f64>() / v.len() as f64)
}

pub fn psi_functional(md: &MercerDecomposition, block: (usize, usize), lambda: f64) -> Result<f64> {
    psi_from_variance(&block_variance(md, block)?, lambda)
}

fn log_psi(v: &[f64], lambda: f64) -> f64 {
    let a: Vec<f64> = v.iter().map(|x| lambda * lambda * x / 2.0).collect();
    let m = a.iter().fold(f64::NEG_INFINITY, |p, q| p.max(*q));
    m + (a.iter().map(|x| (x - m).exp()).sum::<f64>() / a.len() as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UResult {
    pub u: f64,
    pub lambda_star: f64,
    /// The minimizer sits at the edge of the search range.
    pub saturated: bool,
}

pub const U_LOG_LAMBDA_RANGE: (f64, f64) = (-12.0, 12.0);
pub const U_TOL: f64 = 1e-8;

/// `inf_λ (log N + log Ψ(λ)) / λ` by golden-section search over `log λ`.
pub fn u_from_variance(v: &[f64], big_n: f64, range: (f64, f64), tol: f64) -> Result<UResult> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Range("variance is not finite".into()));
    }
    let g = |s: f64| {
        let l = s.exp();
        (big_n.ln() + log_psi(v, l)) / l
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = range;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d);
        }
    }
    let s = 0.5 * (a + b);
    let u = g(s);
    if !u.is_finite() {
        return Err(Error::Range("Ψ is not finite over the search range".into()));
    }
    let saturated = (s - range.0) < 10.0 * tol || (range.1 - s) < 10.0 * tol;
    Ok(UResult { u, lambda_star: s.exp(), saturated })
}

pub fn u_functional(md: &MercerDecomposition, block: (usize, usize)) -> Result<UResult> {
    let v = block_variance(md, block)?;
    u_from_variance(&v, block.1 as f64, U_LOG_LAMBDA_RANGE, U_TOL)
}

/// `Σ_k U(n(k), n(k+1))` over consecutive blocks.
pub fn u_series(md: &MercerDecomposition, blocks: &BlockSequence) -> Result<ContinuityReport> {
    let terms = blocks
        .pairs_usize()?
        .into_iter()
        .map(|b| u_functional(md, b).map(|r| r.u))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContinuityReport::from_terms("u_series", terms, vec!["Gaussian closed form for Ψ".into()]))
}

pub const LEMMA61_GRID: usize = 1 << 14;

#[derive(Debug, Clone, Serialize)]
pub struct Lemma61Report {
    pub degree: usize,
    pub bound: f64,
    pub signed_measure: f64,
    pub abs_measure: f64,
    pub signed_holds: bool,
    pub abs_holds: bool,
    pub degenerate: bool,
}

/// Measures of `{B ≥ ||B||/2}` and `{|B| ≥ ||B||/2}` against `1/(2n)`.
pub fn lemma61_check(poly: &TrigPolynomial) -> Result<Lemma61Report> {
    if poly.degree == 0 {
        return Err(Error::arg("degree must be at least 1"));
    }
    let grid = Grid::periodic(LEMMA61_GRID)?;
    let vals = poly.sample(&grid)?.values;
    let h = grid.weight();
    let sup = vals.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let bound = 1.0 / (2.0 * poly.degree as f64);
    if sup == 0.0 {
        return Ok(Lemma61Report {
            degree: poly.degree,
            bound,
            signed_measure: 2.0 * PI,
            abs_measure: 2.0 * PI,
            signed_holds: true,
            abs_holds: true,
            degenerate: true,
        });
    }
    let signed_measure = vals.iter().filter(|v| **v >= 0.5 * sup).count() as f64 * h;
    let abs_measure = vals.iter().filter(|v| v.abs() >= 0.5 * sup).count() as f64 * h;
    Ok(Lemma61Report {
        degree: poly.degree,
        bound,
        signed_measure,
        abs_measure,
        signed_holds: signed_measure >= bound,
        abs_holds: abs_measure >= bound,
        degenerate: false,
    })
}

/// Random polynomial `i` of a sweep: degree in `1..=max_degree`, standard normal coefficients.
pub fn random_poly(seed: u64, i: u64, max_degree: usize) -> TrigPolynomial {
    let n = 1 + (rng::bits(seed, i, 0) % max_degree as u64) as usize;
    let a: Vec<f64> = (0..=n).map(|k| rng::normal(seed, i, 1 + k as u64)).collect();
    let mut b: Vec<f64> = (0..=n).map(|k| rng::normal(seed, i, 1000 + k as u64)).collect();
    b[0] = 0.0;
    let mut p = TrigPolynomial::from_cos_sin(&a, &b);
    p.degree = n;
    p
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma61Sweep {
    pub count: usize,
    pub max_degree: usize,
    pub seed: u64,
    pub abs_violations: usize,
    pub signed_violations: usize,
    /// Smallest `abs_measure · 2n`.
    pub min_abs_ratio: f64,
}

pub fn lemma61_sweep(count: usize, max_degree: usize, seed: u64) -> Result<Lemma61Sweep> {
    if max_degree == 0 || 2 * max_degree >= LEMMA61_GRID {
        return Err(Error::arg("max degree outside the resolvable range"));
    }
    let mut abs_violations = 0;
    let mut signed_violations = 0;
    let mut min_abs_ratio = f64::INFINITY;
    for i in 0..count as u64 {
        let r = lemma61_check(&random_poly(seed, i, max_degree))?;
        abs_violations += usize::from(!r.abs_holds);
        signed_violations += usize::from(!r.signed_holds);
        min_abs_ratio = min_abs_ratio.min(r.abs_measure / r.bound);
    }
    Ok(Lemma61Sweep { count, max_degree, seed, abs_violations, signed_violations, min_abs_ratio })
}
