use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::kernel::GridKernel;
use crate::lacunar::LacunarSpec;
use crate::modulus::modulus_profile;

/// Relative size below which DFT output is treated as roundoff.
const DFT_NOISE: f64 = 64.0 * f64::EPSILON;

/// Coefficients `c_k = (2π)^{-1} ∫ f(x) e^{-ikx} dx` for `|k| ≤ max_freq`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    pub max_freq: usize,
    /// `coeffs[k + max_freq] = c_k`.
    pub coeffs: Vec<Complex64>,
}

impl FourierCoeffs {
    pub fn zeros(max_freq: usize) -> Self {
        Self { max_freq, coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_freq + 1] }
    }

    pub fn get(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.max_freq {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.max_freq as i64) as usize]
        }
    }

    pub fn set(&mut self, k: i64, c: Complex64) {
        let m = self.max_freq as i64;
        assert!(k.abs() <= m, "frequency {k} beyond {m}");
        self.coeffs[(k + m) as usize] = c;
    }

    /// Rows `k, Re c_k, Im c_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re,im\n");
        let m = self.max_freq as i64;
        for k in -m..=m {
            let c = self.get(k);
            out.push_str(&format!("{k},{:e},{:e}\n", c.re, c.im));
        }
        out
    }
}

/// Real trigonometric polynomial of degree `≤ degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub degree: usize,
    pub coeffs: FourierCoeffs,
}

impl TrigPolynomial {
    /// `a_0 + Σ_{k≥1} (a_k cos kt + b_k sin kt)`; `cos_coeffs[0]` is `a_0`, `sin_coeffs[0]` is ignored.
    pub fn from_cos_sin(cos_coeffs: &[f64], sin_coeffs: &[f64]) -> Self {
        let degree = cos_coeffs.len().max(sin_coeffs.len()).saturating_sub(1);
        let mut fc = FourierCoeffs::zeros(degree);
        fc.set(0, Complex64::new(cos_coeffs.first().copied().unwrap_or(0.0), 0.0));
        for k in 1..=degree {
            let a = cos_coeffs.get(k).copied().unwrap_or(0.0);
            let b = sin_coeffs.get(k).copied().unwrap_or(0.0);
            let c = Complex64::new(a / 2.0, -b / 2.0);
            fc.set(k as i64, c);
            fc.set(-(k as i64), c.conj());
        }
        Self { degree, coeffs: fc }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.coeffs.max_freq as i64;
        (-m..=m).map(|k| (self.coeffs.get(k) * Complex64::from_polar(1.0, k as f64 * t)).re).sum()
    }

    /// Values on `grid` by inverse DFT.
    pub fn sample(&self, grid: &Grid) -> Result<GridFn> {
        require_trig(grid)?;
        let n = grid.n_points();
        if 2 * self.coeffs.max_freq >= n {
            return Err(Error::Aliasing { max_freq: self.coeffs.max_freq, n_points: n });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let m = self.coeffs.max_freq as i64;
        for k in -m..=m {
            buf[k.rem_euclid(n as i64) as usize] = self.coeffs.get(k);
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        Ok(GridFn { grid: grid.clone(), values: buf.iter().map(|c| c.re).collect() })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.coeffs.iter().all(|c| c.norm() == 0.0)
    }
}

fn require_trig(grid: &Grid) -> Result<()> {
    if grid.is_trigonometric() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Fourier analysis needs a grid on [0, 2π], got [0, {}]",
            grid.domain_end()
        )))
    }
}

/// Full DFT `(1/N) Σ f_j e^{-2πi jk/N}` for `k = 0..N`, roundoff zeroed.
fn spectrum(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    clean(&mut buf, values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    buf
}

fn clean(buf: &mut [Complex64], scale: f64) {
    let cut = DFT_NOISE * scale;
    for c in buf.iter_mut() {
        if c.re.abs() <= cut {
            c.re = 0.0;
        }
        if c.im.abs() <= cut {
            c.im = 0.0;
        }
    }
}

fn signed(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Quadrature Fourier coefficients up to `max_freq`.
pub fn fourier_coeffs(f: &GridFn, max_freq: usize) -> Result<FourierCoeffs> {
    require_trig(&f.grid)?;
    let n = f.grid.n_points();
    if 2 * max_freq >= n {
        return Err(Error::Aliasing { max_freq, n_points: n });
    }
    let spec = spectrum(&f.values);
    let mut fc = FourierCoeffs::zeros(max_freq);
    for k in -(max_freq as i64)..=(max_freq as i64) {
        fc.set(k, spec[k.rem_euclid(n as i64) as usize]);
    }
    Ok(fc)
}

/// VP multiplier with `p = ⌊n/2⌋`: 1 up to `n - p`, linear down to 0 at `n + 1`.
pub fn vp_multiplier(n: usize, p: usize, k: i64) -> f64 {
    let a = k.unsigned_abs() as usize;
    if a <= n - p {
        1.0
    } else if a <= n {
        (n + 1 - a) as f64 / (p + 1) as f64
    } else {
        0.0
    }
}

/// Closed-form VP kernel, normalized so that `(1/π) ∫ K = 1`.
pub fn vp_kernel_eval(n: usize, p: usize, t: f64) -> f64 {
    assert!(p <= n, "p must not exceed n");
    let half = 0.5 * t;
    let s = half.sin();
    let (nf, pf) = (n as f64, p as f64);
    if s.abs() < 1e-8 {
        return (2.0 * nf + 1.0 - pf) / 2.0;
    }
    ((2.0 * nf + 1.0 - pf) * half).sin() * ((pf + 1.0) * half).sin() / (2.0 * (pf + 1.0) * s * s)
}

pub fn vp_p(n: usize) -> usize {
    n / 2
}

fn check_vp(grid: &Grid, n: usize) -> Result<()> {
    require_trig(grid)?;
    if n < 4 {
        return Err(Error::arg(format!("VP sums need n >= 4, got {n}")));
    }
    if 4 * n >= grid.n_points() {
        return Err(Error::Aliasing { max_freq: 2 * n, n_points: grid.n_points() });
    }
    Ok(())
}

/// `V_{n,⌊n/2⌋}[f]` computed in coefficient space.
pub fn vp_sum(f: &GridFn, n: usize) -> Result<TrigPolynomial> {
    check_vp(&f.grid, n)?;
    let p = vp_p(n);
    let mut fc = fourier_coeffs(f, n)?;
    for k in -(n as i64)..=(n as i64) {
        let c = fc.get(k) * vp_multiplier(n, p, k);
        fc.set(k, c);
    }
    Ok(TrigPolynomial { degree: n, coeffs: fc })
}

/// `V_{n,⌊n/2⌋}[f]` by direct periodic grid convolution `(h/π) Σ_j f_j K(t_i - t_j)`.
pub fn vp_sum_direct(f: &GridFn, n: usize) -> Result<GridFn> {
    check_vp(&f.grid, n)?;
    let p = vp_p(n);
    let g = &f.grid;
    let m = g.n_points();
    let kern: Vec<f64> = (0..m).map(|d| vp_kernel_eval(n, p, g.point(d))).collect();
    let scale = g.weight() / PI;
    let values = (0..m)
        .map(|i| scale * (0..m).map(|j| f.values[j] * kern[(i + m - j) % m]).sum::<f64>())
        .collect();
    Ok(GridFn { grid: g.clone(), values })
}

/// What a best-approximation error is computed for.
#[derive(Debug, Clone, Copy)]
pub enum ApproxTarget<'a> {
    Function(&'a GridFn),
    Kernel(&'a GridKernel),
    Lacunar(&'a LacunarSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BestErrorMode {
    /// Exact `L2` distance to `A(n)`.
    L2_1d,
    /// Exact `L2(T²)` distance to `A(n1, n2)`.
    L2_2d,
    /// Exact uniform error of a lacunar series.
    SupLacunar,
    /// Grid sup of `f - V_n[f]`, an upper estimate.
    SupVpUpper,
}

/// Best trigonometric approximation errors; 1-D modes read the degree from `n.0`.
pub fn best_error(target: ApproxTarget<'_>, n: (usize, usize), mode: BestErrorMode) -> Result<f64> {
    use ApproxTarget as T;
    use BestErrorMode as M;
    match (mode, target) {
        (M::L2_1d, T::Function(f)) => l2_tail_1d(f, n.0),
        (M::L2_2d, T::Kernel(k)) => Ok(Spectrum2d::new(k)?.l2_tail(n.0, n.1)),
        (M::SupLacunar, T::Lacunar(l)) => Ok(l.tail_sum(l.nu(&n.0.into()))),
        (M::SupVpUpper, T::Function(f)) => {
            let v = vp_sum(f, n.0)?.sample(&f.grid)?;
            Ok(f.values.iter().zip(&v.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
        }
        (m, _) => Err(Error::arg(format!("mode {m:?} does not apply to this input"))),
    }
}

fn l2_tail_1d(f: &GridFn, n: usize) -> Result<f64> {
    require_trig(&f.grid)?;
    let m = f.grid.n_points();
    let spec = spectrum(&f.values);
    let tail: f64 = spec
        .iter()
        .enumerate()
        .filter(|(k, _)| signed(*k, m).unsigned_abs() as usize > n)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    Ok((2.0 * PI * tail).sqrt())
}

/// 2-D DFT coefficients of a tabulated kernel on `[0, 2π]²`.
pub struct Spectrum2d {
    n: usize,
    /// `|c_{kl}|²`, row-major in DFT index order.
    power: Vec<f64>,
}

impl Spectrum2d {
    pub fn new(gk: &GridKernel) -> Result<Self> {
        require_trig(&gk.grid)?;
        let n = gk.n();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|idx| Complex64::new(gk.values[(idx / n, idx % n)], 0.0))
            .collect();
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            fft.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        let inv = 1.0 / (n * n) as f64;
        data.iter_mut().for_each(|c| *c *= inv);
        clean(&mut data, gk.values.amax());
        Ok(Self { n, power: data.iter().map(|c| c.norm_sqr()).collect() })
    }

    /// `2π sqrt(Σ_{|k|>n1 or |l|>n2} |c_kl|²)`.
    pub fn l2_tail(&self, n1: usize, n2: usize) -> f64 {
        let n = self.n;
        let mut tail = 0.0;
        for i in 0..n {
            let ki = signed(i, n).unsigned_abs() as usize;
            for j in 0..n {
                let lj = signed(j, n).unsigned_abs() as usize;
                if ki > n1 || lj > n2 {
                    tail += self.power[i * n + j];
                }
            }
        }
        2.0 * PI * tail.sqrt()
    }

    /// Largest degree that can be resolved on this grid.
    pub fn max_degree(&self) -> usize {
        self.n / 2 - 1
    }
}

/// `(1/n) Σ_{m=0}^n E_m`, the bound on `ω(f, 1/n)` with constant 1.
pub fn stechkin_modulus_bound(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::arg("need E_0..E_n with n >= 1"));
    }
    if errors.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::arg("errors must be finite and non-negative"));
    }
    if let Some(m) = errors.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::arg(format!("error sequence increases at m = {}", m + 1)));
    }
    let n = (errors.len() - 1) as f64;
    Ok(errors.iter().sum::<f64>() / n)
}

/// Constant carried alongside [`stechkin_modulus_bound`].
pub const STECHKIN_C: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct CoeffModulusReport {
    /// `(k, |c_k| / (0.5 ω(f, π/|k|)))` for `k = 1..=max_freq`.
    pub ratios: Vec<(usize, f64)>,
    pub max_ratio: f64,
    pub holds: bool,
}

/// Checks `|c_k| ≤ 0.5 ω(f, π/|k|)` for `1 ≤ |k| ≤ max_freq`.
pub fn coeff_modulus_check(fc: &FourierCoeffs, f: &GridFn) -> Result<CoeffModulusReport> {
    require_trig(&f.grid)?;
    let n = f.grid.n_points();
    let h = f.grid.weight();
    let prof = modulus_profile(&f.values, n / 2);
    let mut ratios = Vec::with_capacity(fc.max_freq);
    for k in 1..=fc.max_freq {
        let steps = (((PI / k as f64) / h) * (1.0 + 1e-12)).floor() as usize;
        let w = prof[steps.min(n / 2)];
        let c = fc.get(k as i64).norm().max(fc.get(-(k as i64)).norm());
        let r = if c == 0.0 {
            0.0
        } else if w == 0.0 {
            f64::INFINITY
        } else {
            c / (0.5 * w)
        };
        ratios.push((k, r));
    }
    let max_ratio = ratios.iter().fold(0.0_f64, |m, r| m.max(r.1));
    Ok(CoeffModulusReport { holds: max_ratio <= 1.0 + 1e-9, max_ratio, ratios })
}
