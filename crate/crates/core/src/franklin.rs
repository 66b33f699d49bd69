use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::degenerate::weighted_qr;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::paths::{mean_se, PathEnsemble};
use crate::rng;

/// Minimum grid points per finest knot interval.
pub const POINTS_PER_KNOT: usize = 8;

/// Periodic Franklin functions on `[0, 2π]`, one column per function.
///
/// The inner product is `(f, g) = ∫ f g dt`, so `ζ_k = (ξ, f_k)` and
/// `Σ ζ_k f_k` reconstructs without extra factors.
#[derive(Debug, Clone)]
pub struct FranklinBasis {
    pub grid: Grid,
    pub count: usize,
    pub functions: DMatrix<f64>,
    /// Spacing of the finest knots used.
    pub knot_spacing: f64,
}

/// Periodic Schauder hat `k ≥ 1` (0-based after the constant): level `j`, position `i`.
fn hat(k: usize, t: f64) -> f64 {
    let j = usize::BITS - 1 - k.leading_zeros();
    let i = k - (1 << j);
    let w = PI / (1u64 << j) as f64;
    let c = (2 * i + 1) as f64 * w;
    let mut d = (t - c).abs() % (2.0 * PI);
    d = d.min(2.0 * PI - d);
    (1.0 - d / w).max(0.0)
}

/// Level of the finest hat among the first `m` functions, or `None` for `m = 1`.
fn finest_level(m: usize) -> Option<u32> {
    (m > 1).then(|| usize::BITS - 1 - (m - 1).leading_zeros())
}

pub fn franklin_basis(m: usize, grid: &Grid) -> Result<FranklinBasis> {
    if !grid.is_trigonometric() {
        return Err(Error::Domain("Franklin basis lives on [0, 2π]".into()));
    }
    if m == 0 {
        return Err(Error::arg("basis size must be positive"));
    }
    let n = grid.n_points();
    let knot_spacing = match finest_level(m) {
        None => 2.0 * PI,
        Some(j) => {
            let per_knot = n >> (j + 1);
            if per_knot < POINTS_PER_KNOT || n % (1 << (j + 1)) != 0 {
                return Err(Error::Resolution {
                    reason: format!("{m} functions need at least {} grid points", POINTS_PER_KNOT << (j + 1)),
                    max_trustworthy: ((n / POINTS_PER_KNOT) as f64).max(1.0),
                });
            }
            PI / (1u64 << j) as f64
        }
    };
    let pts = grid.points();
    let raw = DMatrix::from_fn(n, m, |r, c| if c == 0 { 1.0 } else { hat(c, pts[r]) });
    let (q, _) = weighted_qr(&raw, grid.weight())?;
    Ok(FranklinBasis { grid: grid.clone(), count: m, functions: q, knot_spacing })
}

impl FranklinBasis {
    pub fn function(&self, k: usize) -> GridFn {
        GridFn { grid: self.grid.clone(), values: self.functions.column(k - 1).iter().copied().collect() }
    }

    /// `max |(f_i, f_j) - δ_ij|`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.functions.transpose() * &self.functions * self.grid.weight();
        let mut dev: f64 = 0.0;
        for i in 0..self.count {
            for j in 0..self.count {
                dev = dev.max((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        dev
    }

    /// `Σ_{k=lo+1}^{hi} ζ_k f_k`, with `coeffs[k-1] = ζ_k`.
    pub fn reconstruct(&self, coeffs: &[f64], lo: usize, hi: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_points()];
        for k in lo..hi.min(coeffs.len()).min(self.count) {
            for (o, f) in out.iter_mut().zip(self.functions.column(k).iter()) {
                *o += coeffs[k] * f;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.count {
            out.push_str(&format!(",f{k}"));
        }
        out.push('\n');
        for (r, t) in self.grid.points().iter().enumerate() {
            out.push_str(&format!("{t:.17}"));
            for v in self.functions.row(r).iter() {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn ff_coeffs(path: &GridFn, basis: &FranklinBasis) -> Result<Vec<f64>> {
    path.grid.require_same(&basis.grid)?;
    Ok(coeffs_of(&path.values, basis))
}

fn coeffs_of(values: &[f64], basis: &FranklinBasis) -> Vec<f64> {
    let h = basis.grid.weight();
    (0..basis.count).map(|k| h * crate::grid::dot(values, basis.functions.column(k).as_slice())).collect()
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let (mean, std_error) = mean_se(xs);
        Self { mean, std_error, n_samples: xs.len() }
    }
}

/// `E arctan ||Σ_{k=n+1}^m ζ_k f_k||_∞` over the ensemble.
pub fn beta_estimate(ens: &PathEnsemble, basis: &FranklinBasis, n: usize, m: usize) -> Result<Estimate> {
    ens.grid.require_same(&basis.grid)?;
    if n >= m || m > basis.count {
        return Err(Error::arg(format!("need n < m <= {}, got ({n}, {m})", basis.count)));
    }
    if ens.n_paths == 0 {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    let vals: Vec<f64> = (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let z = coeffs_of(ens.path(p), basis);
            let block = basis.reconstruct(&z, n, m);
            block.iter().fold(0.0_f64, |a, b| a.max(b.abs())).atan()
        })
        .collect();
    Ok(Estimate::of(&vals))
}

/// β estimates over consecutive pairs `(n_i, m_i)`.
pub fn beta_profile(ens: &PathEnsemble, basis: &FranklinBasis, blocks: &[(usize, usize)]) -> Result<Vec<Estimate>> {
    blocks.iter().map(|&(n, m)| beta_estimate(ens, basis, n, m)).collect()
}

/// `E arctan |ξ - η|` from paired samples.
pub fn arctan_metric(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::arg("need equally many paired samples"));
    }
    let v: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - y).abs().atan()).collect();
    Ok(Estimate::of(&v))
}

/// Random sequences `ξ(n)`, `n ≥ 1`, driven by a per-path stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceSampler {
    Zero,
    /// `η / n`
    EtaOverN,
    /// `η`
    Eta,
    /// Independent standard normals.
    Iid,
    /// Random signs over `n`.
    SignOverN,
    /// `η (-1)^n`
    AlternatingEta,
}

impl SequenceSampler {
    pub const ALL: [SequenceSampler; 6] = [
        SequenceSampler::Zero,
        SequenceSampler::EtaOverN,
        SequenceSampler::Eta,
        SequenceSampler::Iid,
        SequenceSampler::SignOverN,
        SequenceSampler::AlternatingEta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::EtaOverN => "eta_over_n",
            Self::Eta => "eta",
            Self::Iid => "iid",
            Self::SignOverN => "sign_over_n",
            Self::AlternatingEta => "alternating_eta",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Self::Zero => "xi(n) = 0",
            Self::EtaOverN => "xi(n) = eta / n, eta ~ N(0,1)",
            Self::Eta => "xi(n) = eta, eta ~ N(0,1)",
            Self::Iid => "xi(n) iid N(0,1)",
            Self::SignOverN => "xi(n) = eps(n) / n, eps iid +-1",
            Self::AlternatingEta => "xi(n) = eta (-1)^n, eta ~ N(0,1)",
        }
    }

    /// Whether `ξ(n) → 0` almost surely.
    pub fn tends_to_zero(&self) -> bool {
        matches!(self, Self::Zero | Self::EtaOverN | Self::SignOverN)
    }

    pub fn sample(&self, seed: u64, path: u64, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::arg("sequence index starts at 1"));
        }
        let nf = n as f64;
        Ok(match self {
            Self::Zero => 0.0,
            Self::EtaOverN => rng::normal(seed, path, 0) / nf,
            Self::Eta => rng::normal(seed, path, 0),
            Self::Iid => rng::normal(seed, path, n as u64),
            Self::SignOverN => {
                if rng::bits(seed, path, n as u64) & 1 == 1 {
                    1.0 / nf
                } else {
                    -1.0 / nf
                }
            }
            Self::AlternatingEta => rng::normal(seed, path, 0) * if n % 2 == 0 { 1.0 } else { -1.0 },
        })
    }
}

impl fmt::Display for SequenceSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequenceSampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown sampler '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqMode {
    /// `max_{k=n}^m |ξ(k)|`
    Kappa,
    /// `max_{k=n}^m |ξ(k) - ξ(n)|`
    Gamma,
}

pub const MIN_SEQ_SAMPLES: usize = 100;

pub fn kappa_gamma(sampler: SequenceSampler, n: usize, m: usize, samples: usize, mode: SeqMode, seed: u64) -> Result<Estimate> {
    if n == 0 || n >= m {
        return Err(Error::arg(format!("need 1 <= n < m, got ({n}, {m})")));
    }
    if samples < MIN_SEQ_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SEQ_SAMPLES, got: samples });
    }
    let vals = (0..samples as u64)
        .into_par_iter()
        .map(|p| {
            let base = match mode {
                SeqMode::Kappa => 0.0,
                SeqMode::Gamma => sampler.sample(seed, p, n)?,
            };
            let mut mx: f64 = 0.0;
            for k in n..=m {
                mx = mx.max((sampler.sample(seed, p, k)? - base).abs());
            }
            Ok(mx.atan())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::of(&vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Decays,
    NoDecay,
    Inconclusive,
}

/// `Decays` when the last value is at most a tenth of the first, `NoDecay` at half or more.
pub fn decay_verdict(first: f64, last: f64) -> DecayVerdict {
    if first == 0.0 || last <= 0.1 * first {
        DecayVerdict::Decays
    } else if last >= 0.5 * first {
        DecayVerdict::NoDecay
    } else {
        DecayVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaProfile {
    pub sampler: SequenceSampler,
    pub blocks: Vec<(usize, usize)>,
    pub estimates: Vec<Estimate>,
    pub verdict: DecayVerdict,
}

/// κ over blocks `(2^j, 2^{j+1})`, `j = 0..levels`.
pub fn kappa_profile(sampler: SequenceSampler, levels: u32, samples: usize, seed: u64) -> Result<KappaProfile> {
    if levels < 2 {
        return Err(Error::arg("need at least two blocks"));
    }
    let blocks: Vec<(usize, usize)> = (0..levels).map(|j| (1usize << j, 2usize << j)).collect();
    let estimates = blocks
        .iter()
        .map(|&(n, m)| kappa_gamma(sampler, n, m, samples, SeqMode::Kappa, seed))
        .collect::<Result<Vec<_>>>()?;
    let verdict = decay_verdict(estimates[0].mean, estimates.last().unwrap().mean);
    Ok(KappaProfile { sampler, blocks, estimates, verdict })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneSupReport {
    pub sampler: SequenceSampler,
    pub n_max: usize,
    pub horizon: usize,
    /// `Ê η(n)` for `n = 1..=n_max`.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Every path's `η(n)` is non-increasing.
    pub monotone: bool,
    /// The supremum over `m ≥ n` is cut at the horizon, so `η(n)` is underestimated.
    pub truncated: bool,
    pub warnings: Vec<String>,
    pub verdict: DecayVerdict,
}

/// `η(n) = sup_{n ≤ m ≤ H} arctan |ξ(m)|`, estimated for `n ≤ n_max`.
pub fn monotone_sup_criterion(
    sampler: SequenceSampler,
    n_max: usize,
    samples: usize,
    seed: u64,
    horizon: Option<usize>,
) -> Result<MonotoneSupReport> {
    if n_max == 0 {
        return Err(Error::arg("n_max must be positive"));
    }
    if samples < MIN_SEQ_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SEQ_SAMPLES, got: samples });
    }
    let horizon = horizon.unwrap_or(4 * n_max);
    let mut warnings = vec![];
    if horizon < 4 * n_max {
        warnings.push(format!("horizon {horizon} is below 4 n_max = {}", 4 * n_max));
    }
    if horizon < n_max {
        return Err(Error::arg("horizon must reach n_max"));
    }
    let rows = (0..samples as u64)
        .into_par_iter()
        .map(|p| {
            let mut eta = vec![0.0; n_max];
            let mut run: f64 = 0.0;
            for k in (1..=horizon).rev() {
                run = run.max(sampler.sample(seed, p, k)?.abs().atan());
                if k <= n_max {
                    eta[k - 1] = run;
                }
            }
            Ok(eta)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let monotone = rows.iter().all(|r| r.windows(2).all(|w| w[1] <= w[0]));
    let (mean, std_error): (Vec<f64>, Vec<f64>) =
        (0..n_max).map(|i| mean_se(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).unzip();
    let verdict = decay_verdict(mean[0], mean[n_max - 1]);
    Ok(MonotoneSupReport { sampler, n_max, horizon, mean, std_error, monotone, truncated: true, warnings, verdict })
}

/// `E arctan |N(0,1)|`.
pub fn mean_arctan_abs_normal() -> f64 {
    // Midpoint rule on [0, 12] with its leading endpoint correction -h² f'(0) / 24.
    let n = 200_000;
    let h = 12.0 / n as f64;
    let c = (2.0 / PI).sqrt();
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            x.atan() * c * (-x * x / 2.0).exp()
        })
        .sum::<f64>()
        * h
        - h * h * c / 24.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_gram() {
        let g = Grid::periodic(512).unwrap();
        let b = franklin_basis(1, &g).unwrap();
        assert!(b.functions.iter().all(|v| (v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12));
        let b = franklin_basis(32, &g).unwrap();
        assert!(b.gram_deviation() <= 1e-8);
        for k in 2..=32 {
            let s: f64 = b.function(k).values.iter().sum::<f64>() * g.weight();
            assert!(s.abs() < 1e-8);
        }
        assert!(matches!(franklin_basis(64, &Grid::periodic(256).unwrap()), Err(Error::Resolution { .. })));
    }

    #[test]
    fn coefficients_of_basis_function() {
        let g = Grid::periodic(512).unwrap();
        let b = franklin_basis(16, &g).unwrap();
        let z = ff_coeffs(&b.function(3), &b).unwrap();
        for (k, c) in z.iter().enumerate() {
            assert!((c - if k == 2 { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
        let zero = GridFn::from_fn(&g, |_| 0.0);
        assert!(ff_coeffs(&zero, &b).unwrap().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn piecewise_linear_reconstructs() {
        let g = Grid::periodic(1024).unwrap();
        for m in [8usize, 16, 32, 64] {
            let b = franklin_basis(m, &g).unwrap();
            // Periodic PL interpolant of an arbitrary profile on knots of spacing 2π/m.
            let knots: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let f = GridFn::from_fn(&g, |t| {
                let u = t / (2.0 * PI / m as f64);
                let i = u.floor() as usize % m;
                let a = u - u.floor();
                knots[i] * (1.0 - a) + knots[(i + 1) % m] * a
            });
            let z = ff_coeffs(&f, &b).unwrap();
            let r = b.reconstruct(&z, 0, m);
            let err = r.iter().zip(&f.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "m={m} err={err}");
        }
    }

    #[test]
    fn arctan_metric_examples() {
        let x = vec![0.3, -1.2, 4.0];
        assert_eq!(arctan_metric(&x, &x).unwrap().mean, 0.0);
        let y: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
        assert!((arctan_metric(&x, &y).unwrap().mean - PI / 4.0).abs() < 1e-15);
        // Independent Monte Carlo oracle with 10^6 draws.
        let n = 1_000_000u64;
        let mc = (0..n).map(|i| rng::normal(99, 0, i).abs().atan()).sum::<f64>() / n as f64;
        assert!((mean_arctan_abs_normal() - mc).abs() < 2e-3);
        assert!((mean_arctan_abs_normal() - 0.585_070_653_851).abs() < 1e-10);
    }

    #[test]
    fn sequence_functionals() {
        let k = kappa_gamma(SequenceSampler::Zero, 3, 9, 100, SeqMode::Kappa, 1).unwrap();
        assert_eq!(k.mean, 0.0);
        let g = kappa_gamma(SequenceSampler::Eta, 5, 50, 200, SeqMode::Gamma, 1).unwrap();
        assert_eq!(g.mean, 0.0);
        let k = kappa_gamma(SequenceSampler::EtaOverN, 200, 400, 2000, SeqMode::Kappa, 3).unwrap();
        assert!(k.mean <= (2.0 / PI).sqrt() / 200.0 + 3.0 * k.std_error);
        assert!(kappa_gamma(SequenceSampler::Eta, 5, 50, 10, SeqMode::Kappa, 1).is_err());
        assert_eq!("sign_over_n".parse::<SequenceSampler>().unwrap(), SequenceSampler::SignOverN);
    }

    #[test]
    fn monotone_sup_examples() {
        let r = monotone_sup_criterion(SequenceSampler::EtaOverN, 64, 500, 5, None).unwrap();
        assert!(r.monotone);
        assert_eq!(r.verdict, DecayVerdict::Decays);
        for n in [1usize, 8, 64] {
            // sup over m ≥ n of arctan(|η|/m) is at m = n.
            let oracle: f64 = (0..500u64).map(|p| (rng::normal(5, p, 0).abs() / n as f64).atan()).sum::<f64>() / 500.0;
            assert!((r.mean[n - 1] - oracle).abs() < 1e-12);
        }
        let c = monotone_sup_criterion(SequenceSampler::Eta, 16, 400, 5, Some(16)).unwrap();
        assert_eq!(c.verdict, DecayVerdict::NoDecay);
        assert!(!c.warnings.is_empty());
        let z = monotone_sup_criterion(SequenceSampler::Zero, 8, 100, 5, None).unwrap();
        assert!(z.mean.iter().all(|v| *v == 0.0));
    }
}
