use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridFn;

/// `ω(f, δ) = max_{|h| ≤ δ} max_t |f(t + h) - f(t)|` over grid shifts, with periodic wraparound.
pub fn modulus_of_continuity(f: &GridFn, delta: f64) -> Result<f64> {
    let h = f.grid.weight();
    if !(delta > 0.0) || delta > f.grid.domain_end() + 1e-12 {
        return Err(Error::arg(format!("delta must lie in (0, {}], got {delta}", f.grid.domain_end())));
    }
    if delta < h * (1.0 - 1e-9) {
        return Err(Error::Resolution {
            reason: format!("delta {delta} is below the grid spacing {h}"),
            max_trustworthy: h,
        });
    }
    let n = f.values.len();
    // Shifts beyond n/2 repeat smaller negative shifts.
    let steps = (((delta / h) * (1.0 + 1e-12)).floor() as usize).min(n / 2);
    Ok(modulus_profile(&f.values, steps)[steps])
}

/// `ω` at every integer shift `0..=max_steps` (periodic).
pub fn modulus_profile(values: &[f64], max_steps: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(max_steps + 1);
    out.push(0.0);
    let mut running = 0.0_f64;
    for j in 1..=max_steps {
        let mut m = 0.0_f64;
        for i in 0..n {
            m = m.max((values[(i + j) % n] - values[i]).abs());
        }
        running = running.max(m);
        out.push(running);
    }
    out
}

/// Bivariate modulus `ω(R, j h)` for `j = 0..=max_steps` using box dilation and erosion.
///
/// With `periodic` the boxes wrap around; otherwise they are clipped at the edges.
pub fn kernel_modulus_profile(values: &DMatrix<f64>, max_steps: usize, periodic: bool) -> Vec<f64> {
    let mut hi = values.clone();
    let mut lo = values.clone();
    let mut out = Vec::with_capacity(max_steps + 1);
    out.push(0.0);
    for _ in 0..max_steps {
        hi = step3(&hi, periodic, f64::max);
        lo = step3(&lo, periodic, f64::min);
        let mut w = 0.0_f64;
        for ((a, b), r) in hi.iter().zip(lo.iter()).zip(values.iter()) {
            w = w.max(a - r).max(r - b);
        }
        out.push(w);
    }
    out
}

fn step3(m: &DMatrix<f64>, periodic: bool, op: fn(f64, f64) -> f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let idx = |i: usize, d: isize, n: usize| -> usize {
        let x = i as isize + d;
        if periodic {
            x.rem_euclid(n as isize) as usize
        } else {
            x.clamp(0, n as isize - 1) as usize
        }
    };
    let mut rows = DMatrix::zeros(r, c);
    for j in 0..c {
        for i in 0..r {
            rows[(i, j)] = op(op(m[(idx(i, -1, r), j)], m[(i, j)]), m[(idx(i, 1, r), j)]);
        }
    }
    let mut out = DMatrix::zeros(r, c);
    for j in 0..c {
        let (jl, jr) = (idx(j, -1, c), idx(j, 1, c));
        for i in 0..r {
            out[(i, j)] = op(op(rows[(i, jl)], rows[(i, j)]), rows[(i, jr)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn brute(values: &[f64], steps: usize) -> f64 {
        let n = values.len();
        let mut m = 0.0_f64;
        for i in 0..n {
            for j in 0..=steps {
                m = m.max((values[(i + j) % n] - values[i]).abs());
                m = m.max((values[(i + n - j % n) % n] - values[i]).abs());
            }
        }
        m
    }

    #[test]
    fn cos_closed_form() {
        let g = Grid::periodic(256).unwrap();
        let f = GridFn::from_fn(&g, f64::cos);
        let w = modulus_of_continuity(&f, PI).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
        let w = modulus_of_continuity(&f, PI / 2.0).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-12, "{w}");
        assert!((w - brute(&f.values, 64)).abs() < 1e-15);
    }

    #[test]
    fn constant_has_zero_modulus() {
        let g = Grid::periodic(64).unwrap();
        let f = GridFn::from_fn(&g, |_| 3.0);
        assert_eq!(modulus_of_continuity(&f, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn too_small_delta() {
        let g = Grid::periodic(64).unwrap();
        let f = GridFn::from_fn(&g, f64::sin);
        assert!(matches!(modulus_of_continuity(&f, 1e-4), Err(Error::Resolution { .. })));
    }

    #[test]
    fn bivariate_matches_brute_force() {
        let n = 16;
        let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 - (i as f64 * 0.3).sin());
        for &periodic in &[true, false] {
            let prof = kernel_modulus_profile(&m, 3, periodic);
            for (s, w) in prof.iter().enumerate() {
                let mut b = 0.0_f64;
                for i in 0..n {
                    for j in 0..n {
                        for di in -(s as isize)..=(s as isize) {
                            for dj in -(s as isize)..=(s as isize) {
                                let (a, c) = (i as isize + di, j as isize + dj);
                                let (a, c) = if periodic {
                                    (a.rem_euclid(n as isize), c.rem_euclid(n as isize))
                                } else if a < 0 || c < 0 || a >= n as isize || c >= n as isize {
                                    continue;
                                } else {
                                    (a, c)
                                };
                                b = b.max((m[(a as usize, c as usize)] - m[(i, j)]).abs());
                            }
                        }
                    }
                }
                assert!((b - w).abs() < 1e-12, "steps {s} periodic {periodic}: {b} vs {w}");
            }
        }
    }
}
