use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lacunar cosine series `Σ a_k cos(n_k t)` with gap ratios `n_{k+1}/n_k = 2p_k + 1`, `p_k ≥ 2`.
///
/// As a kernel it is `Σ a_k cos(n_k t) cos(n_k s)`; as a process it is
/// `Σ b_k ε_k cos(n_k t)` with independent standard normals. When `theta` is
/// set, coefficients beyond the explicit ones continue as `k^{-theta}` and
/// frequencies continue with the last ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LacunarSpec {
    coefficients: Vec<f64>,
    #[serde(with = "biguint_strings")]
    frequencies: Vec<BigUint>,
    theta: Option<f64>,
}

mod biguint_strings {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<BigUint>().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl LacunarSpec {
    pub fn new(coefficients: Vec<f64>, frequencies: Vec<BigUint>) -> Result<Self> {
        let spec = Self { coefficients, frequencies, theta: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_u64(coefficients: Vec<f64>, frequencies: Vec<u64>) -> Result<Self> {
        Self::new(coefficients, frequencies.into_iter().map(BigUint::from).collect())
    }

    /// `a_k = ratio^{-k}`-style series: coefficients `coef_base^{-k}`, frequencies `freq_ratio^k`.
    pub fn geometric(coef_base: f64, freq_ratio: u64, n_terms: usize) -> Result<Self> {
        if !(coef_base > 1.0) {
            return Err(Error::arg("coefficient base must exceed 1"));
        }
        let coeffs = (1..=n_terms).map(|k| coef_base.powi(-(k as i32))).collect();
        Self::new(coeffs, powers(freq_ratio, n_terms))
    }

    /// Family with `coefficient_k = k^{-theta}` and `n_k = ratio^k`, `n_terms` explicit terms.
    pub fn theta_family(theta: f64, ratio: u64, n_terms: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::arg(format!("theta must be positive, got {theta}")));
        }
        let coeffs = (1..=n_terms).map(|k| (k as f64).powf(-theta)).collect();
        let spec = Self { coefficients: coeffs, frequencies: powers(ratio, n_terms), theta: Some(theta) };
        spec.validate()?;
        Ok(spec)
    }

    /// Explicit coefficients `k^{-theta}` on arbitrary valid frequencies, with the analytic tail.
    pub fn theta_on(theta: f64, frequencies: Vec<BigUint>) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::arg(format!("theta must be positive, got {theta}")));
        }
        let coeffs = (1..=frequencies.len()).map(|k| (k as f64).powf(-theta)).collect();
        let spec = Self { coefficients: coeffs, frequencies, theta: Some(theta) };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::arg("lacunar series needs at least one term"));
        }
        if self.coefficients.len() != self.frequencies.len() {
            return Err(Error::arg(format!(
                "{} coefficients but {} frequencies",
                self.coefficients.len(),
                self.frequencies.len()
            )));
        }
        if let Some(c) = self.coefficients.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::arg(format!("coefficients must be positive and finite, got {c}")));
        }
        if self.frequencies[0].is_zero() {
            return Err(Error::arg("frequencies must be positive"));
        }
        for (k, w) in self.frequencies.windows(2).enumerate() {
            let (q, r) = (&w[1] / &w[0], &w[1] % &w[0]);
            let q5 = BigUint::from(5u32);
            if !r.is_zero() || q < q5 || (&q % 2u32).is_zero() {
                return Err(Error::arg(format!(
                    "gap condition fails between terms {} and {}: {} / {} is not an odd integer >= 5",
                    k + 1,
                    k + 2,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn n_terms(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn frequencies(&self) -> &[BigUint] {
        &self.frequencies
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Coefficient of term `k` (1-based), continuing analytically past the explicit terms.
    pub fn coefficient(&self, k: usize) -> f64 {
        assert!(k >= 1);
        match (self.coefficients.get(k - 1), self.theta) {
            (Some(c), _) => *c,
            (None, Some(th)) => (k as f64).powf(-th),
            (None, None) => 0.0,
        }
    }

    /// Frequency `k` as `u64` if it fits (explicit terms only).
    pub fn frequency_u64(&self, k: usize) -> Option<u64> {
        self.frequencies.get(k - 1).and_then(|f| f.to_u64())
    }

    /// Common ratio if every consecutive ratio is the same (single term reports `None`).
    pub fn constant_ratio(&self) -> Option<u64> {
        let mut it = self.frequencies.windows(2).map(|w| &w[1] / &w[0]);
        let first = it.next()?;
        if it.all(|q| q == first) {
            first.to_u64()
        } else {
            None
        }
    }

    /// Covariance kernel of the process `Σ b_k ε_k cos(n_k t)`: coefficients squared.
    pub fn covariance(&self) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|b| b * b).collect(),
            frequencies: self.frequencies.clone(),
            theta: self.theta.map(|t| 2.0 * t),
        }
    }

    /// Explicit-term truncation to the first `k` terms (drops the analytic continuation).
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_terms() {
            return Err(Error::arg(format!("truncation {k} outside 1..={}", self.n_terms())));
        }
        Ok(Self {
            coefficients: self.coefficients[..k].to_vec(),
            frequencies: self.frequencies[..k].to_vec(),
            theta: None,
        })
    }

    /// Number of frequencies `n_k ≤ n`, including the analytic continuation.
    pub fn nu(&self, n: &BigUint) -> usize {
        let explicit = self.frequencies.partition_point(|f| f <= n);
        if explicit < self.n_terms() || self.theta.is_none() {
            return explicit;
        }
        let last = self.frequencies.last().unwrap();
        let q = match self.last_ratio() {
            Some(q) => q,
            None => return explicit,
        };
        // Largest j with last * q^j <= n.
        let est = ((big_log(n) - big_log(last)) / (q as f64).ln()).floor().max(0.0) as u32;
        let mut j = est.saturating_sub(1);
        let qb = BigUint::from(q);
        while last * qb.pow(j + 1) <= *n {
            j += 1;
        }
        while j > 0 && last * qb.pow(j) > *n {
            j -= 1;
        }
        explicit + j as usize
    }

    fn last_ratio(&self) -> Option<u64> {
        let k = self.frequencies.len();
        if k < 2 {
            return None;
        }
        (&self.frequencies[k - 1] / &self.frequencies[k - 2]).to_u64()
    }

    /// `Σ_{k>nu} coefficient_k`, infinite when the continuation is not summable.
    pub fn tail_sum(&self, nu: usize) -> f64 {
        let k_exp = self.n_terms();
        let explicit: f64 = self.coefficients.iter().skip(nu).sum();
        match self.theta {
            None => explicit,
            Some(th) => explicit + zeta_tail(th, nu.max(k_exp)),
        }
    }

    /// Same as [`tail_sum`](Self::tail_sum) on squared coefficients.
    pub fn tail_sum_sq(&self, nu: usize) -> f64 {
        self.covariance().tail_sum(nu)
    }

    /// Total `Σ a_k`, the value of the kernel at `(0, 0)`.
    pub fn total(&self) -> f64 {
        self.tail_sum(0)
    }

    /// Explicit frequencies as `f64`, failing beyond 2^53 where phases lose meaning.
    pub fn frequencies_f64(&self) -> Result<Vec<f64>> {
        let lim = BigUint::one() << 53u32;
        self.frequencies
            .iter()
            .map(|f| {
                if *f > lim {
                    Err(Error::Range(format!(
                        "frequency {f} exceeds 2^53; evaluate on grid nodes or via the digit recursion"
                    )))
                } else {
                    Ok(f.to_f64().unwrap())
                }
            })
            .collect()
    }

    /// Kernel value `Σ a_k cos(n_k t) cos(n_k s)` over the explicit terms.
    pub fn eval_kernel(&self, t: f64, s: f64) -> Result<f64> {
        let fr = self.frequencies_f64()?;
        Ok(self.coefficients.iter().zip(&fr).map(|(a, n)| a * (n * t).cos() * (n * s).cos()).sum())
    }

    /// `cos(n_k t_i)` at node `i` of an `n_points` grid on `[0, 2π)`, exact in the phase.
    pub fn node_cos(&self, k: usize, i: usize, n_points: usize) -> f64 {
        let m = BigUint::from(n_points);
        let r = ((&self.frequencies[k - 1] % &m) * BigUint::from(i) % &m).to_u64().unwrap();
        (2.0 * PI * r as f64 / n_points as f64).cos()
    }

    /// Frequencies reduced modulo `n_points` (the aliased frequency on that grid).
    pub fn aliased(&self, n_points: usize) -> Vec<usize> {
        let m = BigUint::from(n_points);
        self.frequencies.iter().map(|f| (f % &m).to_usize().unwrap()).collect()
    }
}

fn powers(q: u64, n: usize) -> Vec<BigUint> {
    let qb = BigUint::from(q);
    let mut out = Vec::with_capacity(n);
    let mut cur = qb.clone();
    for _ in 0..n {
        out.push(cur.clone());
        cur *= &qb;
    }
    out
}

/// Natural logarithm of a big integer.
pub fn big_log(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().unwrap().ln()
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// `Σ_{k>n} k^{-s}`; infinite for `s ≤ 1`.
pub fn zeta_tail(s: f64, n: usize) -> f64 {
    if s <= 1.0 {
        return f64::INFINITY;
    }
    const DIRECT: usize = 32;
    let mut sum = 0.0;
    for k in (n + 1)..=(n + DIRECT) {
        sum += (k as f64).powf(-s);
    }
    // Euler-Maclaurin from m = n + DIRECT + 1.
    let m = (n + DIRECT + 1) as f64;
    sum + m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_gaps() {
        assert!(LacunarSpec::from_u64(vec![1.0, 1.0], vec![1, 3]).is_err());
        assert!(LacunarSpec::from_u64(vec![1.0, 1.0], vec![1, 6]).is_err());
        assert!(LacunarSpec::from_u64(vec![1.0, 1.0], vec![2, 11]).is_err());
        assert!(LacunarSpec::from_u64(vec![1.0, 1.0], vec![3, 21]).is_ok());
        assert!(LacunarSpec::from_u64(vec![1.0, -1.0], vec![1, 5]).is_err());
    }

    #[test]
    fn kernel_at_origin_is_coefficient_sum() {
        let s = LacunarSpec::geometric(4.0, 5, 20).unwrap();
        let v = s.eval_kernel(0.0, 0.0).unwrap();
        let direct: f64 = (1..=20).map(|k| 4f64.powi(-k)).sum();
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nu_counts_frequencies() {
        let s = LacunarSpec::geometric(4.0, 5, 6).unwrap();
        assert_eq!(s.nu(&BigUint::from(4u32)), 0);
        assert_eq!(s.nu(&BigUint::from(5u32)), 1);
        assert_eq!(s.nu(&BigUint::from(124u32)), 2);
        assert_eq!(s.nu(&BigUint::from(125u32)), 3);
        let t = LacunarSpec::theta_family(1.5, 5, 3).unwrap();
        assert_eq!(t.nu(&BigUint::from(5u32).pow(40)), 40);
        assert_eq!(t.nu(&(BigUint::from(5u32).pow(40) - 1u32)), 39);
    }

    #[test]
    fn zeta_tail_matches_direct_sum() {
        for &(s, n) in &[(1.5, 0usize), (2.0, 3), (3.0, 10), (1.2, 100)] {
            let direct: f64 = ((n + 1)..5_000_000).map(|k| (k as f64).powf(-s)).sum();
            let m = 5_000_000f64;
            let rest = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
            let z = zeta_tail(s, n);
            assert!(((direct + rest) - z).abs() < 1e-9 * z.max(1.0), "{s} {n} {z}");
        }
        assert!((zeta_tail(2.0, 0) - PI * PI / 6.0).abs() < 1e-12);
        assert!(zeta_tail(1.0, 5).is_infinite());
    }

    #[test]
    fn theta_tail_continues_past_explicit_terms() {
        let t = LacunarSpec::theta_family(1.5, 5, 4).unwrap();
        let z = zeta_tail(1.5, 0);
        assert!((t.tail_sum(0) - z).abs() < 1e-12);
        assert!((t.tail_sum(10) - zeta_tail(1.5, 10)).abs() < 1e-12);
        assert!(t.covariance().tail_sum(0) - zeta_tail(3.0, 0) < 1e-12);
        assert!(LacunarSpec::theta_family(0.75, 5, 4).unwrap().tail_sum(3).is_infinite());
    }

    #[test]
    fn node_phase_is_exact() {
        let s = LacunarSpec::geometric(4.0, 5, 30).unwrap();
        let n = 512;
        for k in 1..=5 {
            let f = 5f64.powi(k as i32);
            for i in [0usize, 1, 7, 100, 511] {
                let direct = (f * 2.0 * PI * i as f64 / n as f64).cos();
                assert!((s.node_cos(k, i, n) - direct).abs() < 1e-9);
            }
        }
        assert!(s.eval_kernel(0.1, 0.2).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = LacunarSpec::theta_family(1.5, 5, 40).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        let back: LacunarSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
    }
}
