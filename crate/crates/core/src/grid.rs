use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform, left-closed periodic grid `t_i = i * h` on `[0, domain_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    domain_end: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(domain_end: f64, n_points: usize) -> Result<Self> {
        if !(domain_end.is_finite() && domain_end > 0.0) {
            return Err(Error::arg(format!("domain end must be positive, got {domain_end}")));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::arg(format!(
                "grid size must be a power of two >= 8, got {n_points}"
            )));
        }
        Ok(Self { domain_end, n_points })
    }

    /// Grid on the trigonometric period `[0, 2π)`.
    pub fn periodic(n_points: usize) -> Result<Self> {
        Self::new(2.0 * PI, n_points)
    }

    /// Grid on the unit interval used by the Brownian kernels.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(1.0, n_points)
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Spacing `h`, which is also the quadrature weight.
    pub fn weight(&self) -> f64 {
        self.domain_end / self.n_points as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.weight()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    pub fn is_trigonometric(&self) -> bool {
        (self.domain_end - 2.0 * PI).abs() < 1e-12
    }

    /// Index of `t` if it coincides with a node (up to rounding).
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = t / self.weight();
        let r = x.round();
        if (x - r).abs() > 1e-9 || r < 0.0 {
            return None;
        }
        let r = r as usize;
        if r < self.n_points {
            Some(r)
        } else if r == self.n_points {
            Some(0)
        } else {
            None
        }
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points && (self.domain_end - other.domain_end).abs() < 1e-12
    }

    pub(crate) fn require_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "grid mismatch: {} points on [0, {}] vs {} points on [0, {}]",
                self.n_points, self.domain_end, other.n_points, other.domain_end
            )))
        }
    }
}

/// Real function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::arg(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.point(i))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Quadrature inner product `h Σ f_i g_i`.
    pub fn inner(&self, other: &GridFn) -> f64 {
        self.grid.weight() * dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
