use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::blocks::BlockSequence;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::lacunar::LacunarSpec;
use crate::lacunar_sup::{LacunarMaximizer, DEFAULT_MIN_STATES};
use crate::mercer::MercerDecomposition;
use crate::modulus::modulus_profile;
use crate::rng;

pub const MIN_TAU_SAMPLES: usize = 100;

/// A centered Gaussian series `Σ_k σ_k η_k g_k(t)` with independent standard normals.
///
/// Term `k` (1-based) of path `p` always consumes `rng::normal(seed, p, k)`, so
/// every block of every path sees the same underlying normals.
pub trait GaussianSeries: Sync {
    /// Number of terms with a non-zero scale; later terms contribute nothing.
    fn n_terms(&self) -> usize;

    /// `sup_t |Σ_{k=lo+1}^{hi} σ_k η_k g_k(t)|` with `normals[k - lo - 1] = η_k`.
    fn block_sup(&self, lo: usize, hi: usize, normals: &[f64]) -> f64;

    /// `max_t sqrt(Σ_{k=lo+1}^{hi} σ_k² g_k(t)²)`.
    fn block_max_std(&self, lo: usize, hi: usize) -> f64;

    /// `Σ_{k=lo+1}^{hi} σ_k sup_t |g_k(t)|`, an upper bound on every block sup divided by `max |η|`.
    fn block_envelope(&self, lo: usize, hi: usize) -> f64;
}

impl GaussianSeries for MercerDecomposition {
    fn n_terms(&self) -> usize {
        self.n_kept
    }

    fn block_sup(&self, lo: usize, hi: usize, normals: &[f64]) -> f64 {
        let hi = hi.min(self.n_kept);
        if hi <= lo {
            return 0.0;
        }
        let n = self.grid.n_points();
        let mut acc = vec![0.0; n];
        for k in lo..hi {
            let w = self.eigenvalues[k].sqrt() * normals[k - lo];
            for (a, p) in acc.iter_mut().zip(self.eigenfunctions.column(k).iter()) {
                *a += w * p;
            }
        }
        acc.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn block_max_std(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.n_kept);
        let n = self.grid.n_points();
        let mut var = vec![0.0; n];
        for k in lo..hi {
            for (v, p) in var.iter_mut().zip(self.eigenfunctions.column(k).iter()) {
                *v += self.eigenvalues[k] * p * p;
            }
        }
        var.iter().fold(0.0_f64, |m, v| m.max(*v)).sqrt()
    }

    fn block_envelope(&self, lo: usize, hi: usize) -> f64 {
        (lo..hi.min(self.n_kept)).map(|k| self.eigenvalues[k].sqrt() * self.eigenfunction_sup(k + 1)).sum()
    }
}

/// The process `Σ b_k η_k cos(n_k t)` for a lacunar spec with constant gap ratio.
pub struct LacunarProcess {
    spec: LacunarSpec,
    maximizer: LacunarMaximizer,
}

impl LacunarProcess {
    pub fn new(spec: LacunarSpec) -> Result<Self> {
        let q = match (spec.n_terms(), spec.constant_ratio()) {
            (1, _) => 5,
            (_, Some(q)) => q,
            _ => return Err(Error::arg("the lacunar sup recursion needs a constant gap ratio")),
        };
        Ok(Self { spec, maximizer: LacunarMaximizer::new(q, DEFAULT_MIN_STATES)? })
    }

    pub fn spec(&self) -> &LacunarSpec {
        &self.spec
    }

    /// Path values at grid nodes (exact, the phases are reduced modulo the grid size).
    pub fn sample_path(&self, grid: &Grid, normals: &[f64]) -> Result<GridFn> {
        if !grid.is_trigonometric() {
            return Err(Error::Domain("lacunar processes live on [0, 2π]".into()));
        }
        let n = grid.n_points();
        let mut vals = vec![0.0; n];
        for k in 1..=self.spec.n_terms() {
            let w = self.spec.coefficient(k) * normals[k - 1];
            for (i, v) in vals.iter_mut().enumerate() {
                *v += w * self.spec.node_cos(k, i, n);
            }
        }
        Ok(GridFn { grid: grid.clone(), values: vals })
    }
}

impl GaussianSeries for LacunarProcess {
    fn n_terms(&self) -> usize {
        self.spec.n_terms()
    }

    fn block_sup(&self, lo: usize, hi: usize, normals: &[f64]) -> f64 {
        let hi = hi.min(self.spec.n_terms());
        if hi <= lo {
            return 0.0;
        }
        let c: Vec<f64> = (lo + 1..=hi).map(|k| self.spec.coefficient(k) * normals[k - lo - 1]).collect();
        self.maximizer.sup_abs(&c)
    }

    fn block_max_std(&self, lo: usize, hi: usize) -> f64 {
        (lo + 1..=hi.min(self.spec.n_terms())).map(|k| self.spec.coefficient(k).powi(2)).sum::<f64>().sqrt()
    }

    fn block_envelope(&self, lo: usize, hi: usize) -> f64 {
        (lo + 1..=hi.min(self.spec.n_terms())).map(|k| self.spec.coefficient(k)).sum()
    }
}

/// Monte Carlo paths on a grid, one path per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: Grid,
    pub n_paths: usize,
    /// Row-major `n_paths × n_points`.
    pub paths: Vec<f64>,
    pub n_terms: usize,
    pub seed: u64,
    pub source: String,
}

impl PathEnsemble {
    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.grid.n_points();
        &self.paths[p * n..(p + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.paths.chunks(self.grid.n_points())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# source={} seed={} n_terms={} n_points={} domain_end={:.17}\n",
            self.source,
            self.seed,
            self.n_terms,
            self.grid.n_points(),
            self.grid.domain_end()
        );
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn collect_paths(grid: &Grid, m: usize, f: impl Fn(usize) -> Vec<f64> + Sync + Send) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..m).into_par_iter().map(f).collect();
    let mut out = Vec::with_capacity(m * grid.n_points());
    for r in rows {
        out.extend(r);
    }
    out
}

/// Karhunen-Loève partial sums `Σ_{k≤n_terms} √λ_k ζ_k φ_k`.
pub fn kl_simulate(md: &MercerDecomposition, n_terms: usize, m: usize, seed: u64) -> Result<PathEnsemble> {
    if n_terms > md.n_kept {
        return Err(Error::arg(format!("n_terms {n_terms} exceeds n_kept {}", md.n_kept)));
    }
    if m == 0 {
        return Err(Error::arg("need at least one path"));
    }
    if let Some(k) = md.eigenvalues[..n_terms].iter().position(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidDecomposition(format!("eigenvalue {} is negative", k + 1)));
    }
    let n = md.grid.n_points();
    let sq: Vec<f64> = md.eigenvalues[..n_terms].iter().map(|l| l.sqrt()).collect();
    let paths = collect_paths(&md.grid, m, |p| {
        let mut row = vec![0.0; n];
        for k in 0..n_terms {
            let w = sq[k] * rng::normal(seed, p as u64, (k + 1) as u64);
            for (r, phi) in row.iter_mut().zip(md.eigenfunctions.column(k).iter()) {
                *r += w * phi;
            }
        }
        row
    });
    Ok(PathEnsemble { grid: md.grid.clone(), n_paths: m, paths, n_terms, seed, source: "karhunen_loeve".into() })
}

/// Lacunar process paths at grid nodes.
pub fn lacunar_simulate(process: &LacunarProcess, grid: &Grid, m: usize, seed: u64) -> Result<PathEnsemble> {
    let k = process.n_terms();
    let probe = process.sample_path(grid, &vec![0.0; k])?;
    drop(probe);
    let paths = collect_paths(grid, m, |p| {
        let z = rng::normals(seed, p as u64, 1, k);
        process.sample_path(grid, &z).expect("grid checked above").values
    });
    Ok(PathEnsemble { grid: grid.clone(), n_paths: m, paths, n_terms: k, seed, source: "lacunar".into() })
}

/// Max z-score of the empirical second moments against `target` (zero-mean Gaussian standard errors).
pub fn covariance_zscore(ens: &PathEnsemble, target: &nalgebra::DMatrix<f64>) -> f64 {
    let n = ens.grid.n_points();
    let m = ens.n_paths as f64;
    let mut emp = nalgebra::DMatrix::<f64>::zeros(n, n);
    for p in ens.iter() {
        for j in 0..n {
            for i in 0..n {
                emp[(i, j)] += p[i] * p[j];
            }
        }
    }
    emp /= m;
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let var = target[(i, i)] * target[(j, j)] + target[(i, j)].powi(2);
            let d = (emp[(i, j)] - target[(i, j)]).abs();
            if var > 0.0 {
                worst = worst.max(d / (var / m).sqrt());
            } else if d > 0.0 {
                worst = f64::INFINITY;
            }
        }
    }
    worst
}

/// Monte Carlo estimate of `E ||Σ_{k=n+1}^m σ_k η_k g_k||_∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauEstimate {
    pub n: usize,
    pub m: usize,
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    (mean, (var / m).sqrt())
}

/// Per-path block sups, reusing each path's normals.
pub fn block_sups<S: GaussianSeries + ?Sized>(series: &S, n: usize, m: usize, samples: usize, seed: u64) -> Vec<f64> {
    let hi = m.min(series.n_terms());
    if hi <= n {
        return vec![0.0; samples];
    }
    (0..samples)
        .into_par_iter()
        .map(|p| {
            let z = rng::normals(seed, p as u64, (n + 1) as u64, hi - n);
            series.block_sup(n, hi, &z)
        })
        .collect()
}

pub fn tau_estimate<S: GaussianSeries + ?Sized>(
    series: &S,
    n: usize,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<TauEstimate> {
    if n >= m {
        return Err(Error::arg(format!("need n < m, got ({n}, {m})")));
    }
    if samples < MIN_TAU_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_TAU_SAMPLES, got: samples });
    }
    let sups = block_sups(series, n, m, samples, seed);
    let (mean, std_error) = mean_se(&sups);
    Ok(TauEstimate { n, m, mean, std_error, n_samples: samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileVerdict {
    CriterionConsistent,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauProfile {
    pub estimates: Vec<TauEstimate>,
    pub running_sup: Vec<f64>,
    /// Every step satisfies `τ_{i+1} ≤ τ_i + 3 se`.
    pub non_increasing: bool,
    pub verdict: ProfileVerdict,
}

/// Shared verdict rule for block profiles of expected sups.
pub(crate) fn profile_verdict(means: &[f64], ses: &[f64]) -> (bool, ProfileVerdict) {
    let non_increasing = means
        .windows(2)
        .zip(ses.windows(2))
        .all(|(m, s)| m[1] <= m[0] + 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    let max = means.iter().fold(0.0_f64, |a, b| a.max(*b));
    let last = *means.last().unwrap_or(&0.0);
    let verdict = if max == 0.0 || (non_increasing && last <= 0.25 * max) {
        ProfileVerdict::CriterionConsistent
    } else if last >= 0.5 * max {
        ProfileVerdict::Violated
    } else {
        ProfileVerdict::Inconclusive
    };
    (non_increasing, verdict)
}

/// τ over consecutive blocks `(n(k), n(k+1))`.
pub fn tau_profile<S: GaussianSeries + ?Sized>(
    series: &S,
    blocks: &BlockSequence,
    samples: usize,
    seed: u64,
) -> Result<TauProfile> {
    let pairs = blocks.pairs_usize()?;
    let estimates = pairs
        .iter()
        .map(|&(n, m)| tau_estimate(series, n, m, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut running = 0.0_f64;
    let running_sup = estimates.iter().map(|e| { running = running.max(e.mean); running }).collect();
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let ses: Vec<f64> = estimates.iter().map(|e| e.std_error).collect();
    let (non_increasing, verdict) = profile_verdict(&means, &ses);
    Ok(TauProfile { estimates, running_sup, non_increasing, verdict })
}

pub fn tau_profile_csv(p: &TauProfile) -> String {
    let mut out = String::from("n,m,mean,std_error\n");
    for e in &p.estimates {
        out.push_str(&format!("{},{},{:e},{:e}\n", e.n, e.m, e.mean, e.std_error));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub moment: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub mean_sup: f64,
    pub rows: Vec<MomentRow>,
    pub bound: f64,
    pub bounded: bool,
    pub degenerate: bool,
}

pub const MIN_MOMENT_SAMPLES: usize = 1000;

/// `(E||ξ||^p)^{1/p} / (E||ξ|| √p)` for each `p`.
pub fn sup_moment_growth(ens: &PathEnsemble, p_list: &[f64], bound: f64) -> Result<MomentReport> {
    if ens.n_paths < MIN_MOMENT_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_MOMENT_SAMPLES, got: ens.n_paths });
    }
    if let Some(p) = p_list.iter().find(|p| !(**p >= 1.0 && **p <= 32.0)) {
        return Err(Error::arg(format!("moment order {p} outside [1, 32]")));
    }
    let sups: Vec<f64> = ens.iter().map(|p| p.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).collect();
    let m = sups.len() as f64;
    let mean_sup = sups.iter().sum::<f64>() / m;
    let degenerate = mean_sup == 0.0;
    let rows: Vec<MomentRow> = p_list
        .iter()
        .map(|&p| {
            let moment = (sups.iter().map(|s| s.powf(p)).sum::<f64>() / m).powf(1.0 / p);
            let ratio = if degenerate { 0.0 } else { moment / (mean_sup * p.sqrt()) };
            MomentRow { p, moment, ratio }
        })
        .collect();
    let bounded = rows.iter().all(|r| r.ratio <= bound);
    Ok(MomentReport { mean_sup, rows, bound, bounded, degenerate })
}

/// Monte Carlo `E ω(ξ, δ)` for each δ.
pub fn expected_modulus(ens: &PathEnsemble, deltas: &[f64]) -> Result<Vec<f64>> {
    let h = ens.grid.weight();
    let n = ens.grid.n_points();
    let steps: Vec<usize> = deltas
        .iter()
        .map(|d| {
            if *d < h {
                Err(Error::Resolution { reason: format!("delta {d} below spacing"), max_trustworthy: h })
            } else {
                Ok(((d / h) * (1.0 + 1e-12)).floor().min((n / 2) as f64) as usize)
            }
        })
        .collect::<Result<_>>()?;
    let max_step = steps.iter().copied().max().unwrap_or(0);
    let mut acc = vec![0.0; deltas.len()];
    for p in ens.iter() {
        let prof = modulus_profile(p, max_step);
        for (a, s) in acc.iter_mut().zip(&steps) {
            *a += prof[*s];
        }
    }
    Ok(acc.into_iter().map(|a| a / ens.n_paths as f64).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct LilRow {
    pub eps: f64,
    /// Median over paths of `sup_{[ε, e^{-4}]} |β|`.
    pub median_sup: f64,
    /// Fraction of paths with that sup at most 2.5.
    pub frac_sup_le_2_5: f64,
    /// Median over paths of `max β - min β` on `[ε, 10ε]`.
    pub median_range: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LilReport {
    pub n_paths: usize,
    pub points_per_decade: usize,
    pub rows: Vec<LilRow>,
}

pub const LIL_T0: f64 = 0.018_315_638_888_734_18; // e^{-4}
pub const LIL_POINTS_PER_DECADE: usize = 200;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `β(t) = w(t) / sqrt(2 t log|log t|)` for Brownian `w` on a geometric grid down to `min(eps)`.
pub fn lil_example(m: usize, eps_list: &[f64], seed: u64) -> Result<LilReport> {
    if m == 0 || eps_list.is_empty() {
        return Err(Error::arg("need at least one path and one epsilon"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e <= LIL_T0 * (1.0 + 1e-12))) {
        return Err(Error::arg("every epsilon must lie in (0, e^-4]"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("epsilons must be decreasing"));
    }
    let eps_min = *eps_list.last().unwrap();
    let decades = (LIL_T0 / eps_min).log10();
    let n_pts = (decades * LIL_POINTS_PER_DECADE as f64).ceil() as usize + 1;
    // Ascending times ending exactly at T0.
    let times: Vec<f64> = (0..n_pts)
        .map(|i| {
            if n_pts == 1 {
                LIL_T0
            } else {
                LIL_T0 * (eps_min / LIL_T0).powf((n_pts - 1 - i) as f64 / (n_pts - 1) as f64)
            }
        })
        .collect();
    let norm: Vec<f64> = times.iter().map(|t| (2.0 * t * t.ln().abs().ln()).sqrt()).collect();
    let betas: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut w = 0.0;
            let mut prev = 0.0;
            times
                .iter()
                .zip(&norm)
                .enumerate()
                .map(|(i, (t, nm))| {
                    w += (t - prev).sqrt() * rng::normal(seed, p as u64, i as u64);
                    prev = *t;
                    w / nm
                })
                .collect()
        })
        .collect();
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let lo = times.partition_point(|t| *t < eps * (1.0 - 1e-12));
            let hi10 = times.partition_point(|t| *t <= (10.0 * eps).min(LIL_T0) * (1.0 + 1e-12));
            let sups: Vec<f64> = betas.iter().map(|b| b[lo..].iter().fold(0.0_f64, |a, x| a.max(x.abs()))).collect();
            let ranges: Vec<f64> = betas
                .iter()
                .map(|b| {
                    let w = &b[lo..hi10.max(lo + 1)];
                    let mx = w.iter().fold(f64::NEG_INFINITY, |a, x| a.max(*x));
                    let mn = w.iter().fold(f64::INFINITY, |a, x| a.min(*x));
                    mx - mn
                })
                .collect();
            let frac = sups.iter().filter(|s| **s <= 2.5).count() as f64 / m as f64;
            LilRow { eps, median_sup: median(sups), frac_sup_le_2_5: frac, median_range: median(ranges), n_points: times.len() - lo }
        })
        .collect();
    Ok(LilReport { n_paths: m, points_per_decade: LIL_POINTS_PER_DECADE, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma41Row {
    pub terms: usize,
    pub degree: f64,
    pub mean_sup: f64,
    pub std_error: f64,
    pub sigma: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma41Report {
    pub rows: Vec<Lemma41Row>,
    pub max_ratio: f64,
    pub bound: f64,
    pub bounded: bool,
}

/// `E||η_n||_∞ / (σ(n) sqrt(log n))` for lacunar truncations at `nus` terms.
pub fn lemma41_check(spec: &LacunarSpec, nus: &[usize], samples: usize, seed: u64, bound: f64) -> Result<Lemma41Report> {
    let mut rows = Vec::with_capacity(nus.len());
    for &nu in nus {
        let trunc = spec.truncated(nu)?;
        let degree = crate::lacunar::big_log(&trunc.frequencies()[nu - 1]).exp();
        if degree < 4.0 {
            return Err(Error::arg(format!("degree {degree} below 4")));
        }
        let proc = LacunarProcess::new(trunc)?;
        let sigma = proc.block_max_std(0, nu);
        let est = tau_estimate(&proc, 0, nu, samples, seed)?;
        let log_n = crate::lacunar::big_log(&spec.frequencies()[nu - 1]);
        let ratio = if sigma == 0.0 { 0.0 } else { est.mean / (sigma * log_n.sqrt()) };
        rows.push(Lemma41Row { terms: nu, degree, mean_sup: est.mean, std_error: est.std_error, sigma, ratio });
    }
    let max_ratio = rows.iter().fold(0.0_f64, |a, r| a.max(r.ratio));
    Ok(Lemma41Report { rows, max_ratio, bound, bounded: max_ratio <= bound })
}

/// `E|η|` for a standard normal.
pub fn mean_abs_normal() -> f64 {
    (2.0 / PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{sample_grid, GridKernel, KernelSpec};
    use crate::mercer::{nystrom_decompose, DEFAULT_DROP_TOL};

    fn bridge(n: usize) -> MercerDecomposition {
        let g = Grid::unit(n).unwrap();
        nystrom_decompose(&sample_grid(&KernelSpec::BrownianBridge, &g).unwrap(), DEFAULT_DROP_TOL).unwrap()
    }

    #[test]
    fn determinism() {
        let md = bridge(64);
        let a = kl_simulate(&md, 20, 50, 9).unwrap();
        let b = kl_simulate(&md, 20, 50, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.paths, kl_simulate(&md, 20, 50, 10).unwrap().paths);
    }

    #[test]
    fn covariance_of_finite_rank_kernel() {
        let g = Grid::periodic(32).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| (t - s).cos() + 0.5 * (2.0 * (t - s)).cos()).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        let ens = kl_simulate(&md, md.n_kept, 4000, 3).unwrap();
        let z = covariance_zscore(&ens, &gk.values);
        assert!(z < 5.0, "{z}");
    }

    #[test]
    fn rank_one_tau_is_mean_abs_normal() {
        let g = Grid::periodic(64).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| t.cos() * s.cos()).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        let est = tau_estimate(&md, 0, 1, 20_000, 1).unwrap();
        // sqrt(λ) max|φ| = sqrt(π) / sqrt(π) = 1.
        assert!((est.mean - mean_abs_normal()).abs() < 3.0 * est.std_error, "{est:?}");
        let zero = tau_estimate(&md, 1, 5, 200, 1).unwrap();
        assert_eq!(zero.mean, 0.0);
        assert!(tau_estimate(&md, 0, 1, 50, 1).is_err());
    }

    #[test]
    fn lacunar_process_grid_agrees_with_recursion() {
        let spec = LacunarSpec::theta_family(1.5, 5, 3).unwrap();
        let proc = LacunarProcess::new(spec).unwrap();
        let g = Grid::periodic(8192).unwrap();
        for p in 0..20u64 {
            let z = rng::normals(4, p, 1, 3);
            let grid_sup = proc.sample_path(&g, &z).unwrap().sup_norm();
            let dp = proc.block_sup(0, 3, &z);
            assert!((grid_sup - dp).abs() < 2e-3 * proc.block_envelope(0, 3) * 3.0, "{grid_sup} {dp}");
        }
    }

    #[test]
    fn moments_of_zero_ensemble() {
        let g = Grid::unit(8).unwrap();
        let ens = PathEnsemble { grid: g, n_paths: 1000, paths: vec![0.0; 8000], n_terms: 0, seed: 0, source: "zero".into() };
        let r = sup_moment_growth(&ens, &[1.0, 2.0], 3.0).unwrap();
        assert!(r.degenerate && r.rows.iter().all(|x| x.moment == 0.0));
    }

    #[test]
    fn lil_degenerate_window() {
        let r = lil_example(20, &[LIL_T0], 1).unwrap();
        assert_eq!(r.rows[0].n_points, 1);
        assert!(r.rows[0].median_sup.is_finite());
        assert!(lil_example(20, &[1e-3, 1e-2], 1).is_err());
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(profile_verdict(&[1.0, 0.5, 0.2], &[0.01; 3]).1, ProfileVerdict::CriterionConsistent);
        assert_eq!(profile_verdict(&[0.3, 0.4, 0.5], &[0.01; 3]).1, ProfileVerdict::Violated);
        assert_eq!(profile_verdict(&[1.0, 0.6, 0.4], &[0.01; 3]).1, ProfileVerdict::Inconclusive);
        assert_eq!(profile_verdict(&[0.0, 0.0], &[0.0; 2]).1, ProfileVerdict::CriterionConsistent);
    }
}
