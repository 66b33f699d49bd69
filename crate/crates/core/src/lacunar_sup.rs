//! Uniform norm of lacunar cosine sums with a constant integer gap ratio.
//!
//! For `f(y) = Σ_{j<m} c_j cos(2π q^j y)` the phase of term `j` is the base-`q`
//! expansion of `y` shifted by `j` digits. Approximating each phase by its next
//! `r` digits turns the maximization into a Viterbi recursion over the `q^r`
//! digit windows; the maximizing digit string is then evaluated exactly, so the
//! returned value is attained by `f` and never exceeds the true maximum.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default lower bound on the number of digit-window states.
pub const DEFAULT_MIN_STATES: usize = 3125;

#[derive(Debug, Clone, PartialEq)]
pub struct LacunarMax {
    /// `f(y*)` at the returned point.
    pub value: f64,
    /// `y* ∈ [0, 1)`.
    pub argmax: f64,
    /// Bound on `max f - value` from phase quantization.
    pub gap_bound: f64,
}

pub struct LacunarMaximizer {
    q: usize,
    r: usize,
    states: usize,
    cos_table: Vec<f64>,
}

impl LacunarMaximizer {
    pub fn new(q: u64, min_states: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::arg("gap ratio must be at least 2"));
        }
        let q = q as usize;
        let mut r = 1;
        let mut states = q;
        while states < min_states.max(q) {
            r += 1;
            states *= q;
        }
        let cos_table = (0..states).map(|s| (2.0 * PI * (s as f64 + 0.5) / states as f64).cos()).collect();
        Ok(Self { q, r, states, cos_table })
    }

    /// `max_y Σ c_j cos(2π q^j y)`.
    pub fn max(&self, c: &[f64]) -> LacunarMax {
        let m = c.len();
        if m == 0 {
            return LacunarMax { value: 0.0, argmax: 0.0, gap_bound: 0.0 };
        }
        let (q, s_n) = (self.q, self.states);
        let low = s_n / q;
        // choice[j][u]: best next digit given the low r-1 digits `u` of window j.
        let mut choice = vec![0u8; m.saturating_sub(1) * low];
        let mut v: Vec<f64> = self.cos_table.iter().map(|cs| c[m - 1] * cs).collect();
        let mut best = vec![0.0; low];
        for j in (0..m - 1).rev() {
            for u in 0..low {
                let base = u * q;
                let (mut bv, mut bd) = (v[base], 0u8);
                for d in 1..q {
                    if v[base + d] > bv {
                        bv = v[base + d];
                        bd = d as u8;
                    }
                }
                best[u] = bv;
                choice[j * low + u] = bd;
            }
            for s in 0..s_n {
                v[s] = c[j] * self.cos_table[s] + best[s % low];
            }
        }
        let (mut s0, mut top) = (0, f64::NEG_INFINITY);
        for (s, val) in v.iter().enumerate() {
            if *val > top {
                top = *val;
                s0 = s;
            }
        }
        // Digits d_1..d_{m-1+r}: window j holds d_{j+1}..d_{j+r}.
        let mut digits = Vec::with_capacity(m - 1 + self.r);
        let mut w = s0;
        let mut place = s_n / q;
        for _ in 0..self.r {
            digits.push((w / place) % q);
            place /= q.max(1);
            if place == 0 {
                break;
            }
        }
        for j in 0..m - 1 {
            let u = w % low;
            let d = choice[j * low + u] as usize;
            digits.push(d);
            w = u * q + d;
        }
        // Exact phases by Horner from the last window.
        let qf = q as f64;
        let mut phase = 0.0;
        for d in digits[m - 1..].iter().rev() {
            phase = (*d as f64 + phase) / qf;
        }
        let mut value = c[m - 1] * (2.0 * PI * phase).cos();
        for j in (0..m - 1).rev() {
            phase = (digits[j] as f64 + phase) / qf;
            value += c[j] * (2.0 * PI * phase).cos();
        }
        let gap_bound = 2.0 * PI / s_n as f64 * c.iter().map(|x| x.abs()).sum::<f64>();
        LacunarMax { value, argmax: phase, gap_bound }
    }

    /// `max_y |Σ c_j cos(2π q^j y)|`.
    pub fn sup_abs(&self, c: &[f64]) -> f64 {
        let plus = self.max(c).value;
        let neg: Vec<f64> = c.iter().map(|x| -x).collect();
        plus.max(self.max(&neg).value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_max(c: &[f64], q: u64, n: usize) -> f64 {
        (0..n)
            .map(|i| {
                let y = i as f64 / n as f64;
                let mut m = 1u64;
                let mut acc = 0.0;
                for cj in c {
                    acc += cj * (2.0 * PI * ((m as u128 * i as u128 % n as u128) as f64 / n as f64)).cos();
                    m *= q;
                }
                let _ = y;
                acc
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn agrees_with_fine_grid() {
        let mx = LacunarMaximizer::new(5, DEFAULT_MIN_STATES).unwrap();
        let cases: [&[f64]; 4] = [&[1.0], &[1.0, -0.7], &[0.3, -1.0, 0.5, 0.2], &[-0.4, 0.9, -0.8, 0.3, 0.6]];
        for c in cases {
            let g = grid_max(c, 5, 5usize.pow(5) * 64);
            let d = mx.max(c);
            // The grid is itself only a lower bound of the true maximum.
            assert!(d.value <= g + 1e-6, "{c:?}: {} > {}", d.value, g);
            assert!(g - d.value <= d.gap_bound, "{c:?}: {} vs {}", d.value, g);
            assert!(g - d.value < 2e-3 * c.iter().map(|x| x.abs()).sum::<f64>());
        }
    }

    #[test]
    fn all_positive_peaks_at_zero() {
        let mx = LacunarMaximizer::new(5, DEFAULT_MIN_STATES).unwrap();
        let c: Vec<f64> = (1..=40).map(|k| (k as f64).powf(-1.5)).collect();
        let total: f64 = c.iter().sum();
        let d = mx.max(&c);
        assert!(d.value <= total + 1e-12);
        assert!(total - d.value < 1e-3 * total);
    }

    #[test]
    fn odd_ratio_three() {
        let mx = LacunarMaximizer::new(3, 729).unwrap();
        let c = [0.5, -1.0, 0.25];
        let g = grid_max(&c, 3, 27 * 2048);
        assert!((mx.max(&c).value - g).abs() < 5e-3);
    }
}
