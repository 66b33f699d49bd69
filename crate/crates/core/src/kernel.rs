use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

use crate::degenerate::{DegenerateKernel, ScalarFn};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lacunar::LacunarSpec;

/// Stationary kernels `r(t - s)` on `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Stationary {
    /// `exp(kappa cos(t - s))`.
    VonMises { kappa: f64 },
    /// `variance cos(freq (t - s))`.
    Cosine { variance: f64, freq: f64 },
}

impl Stationary {
    fn eval(&self, d: f64) -> f64 {
        match self {
            Stationary::VonMises { kappa } => (kappa * d.cos()).exp(),
            Stationary::Cosine { variance, freq } => variance * (freq * d).cos(),
        }
    }
}

/// Symbolic covariance kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `min(t, s)` on `[0, 1]`.
    BrownianMotion,
    /// `min(t, s) - t s` on `[0, 1]`.
    BrownianBridge,
    Lacunar(LacunarSpec),
    Degenerate(DegenerateKernel),
    Tabulated(GridKernel),
    /// `f(t) f(s)`.
    RankOne { factor: ScalarFn, domain_end: f64 },
    Stationary(Stationary),
    /// A `[0, 1]` kernel carried to `[0, 2π]` by closing each path with a linear spline.
    Periodized(Box<KernelSpec>),
}

impl KernelSpec {
    pub fn domain_end(&self) -> f64 {
        match self {
            KernelSpec::BrownianMotion | KernelSpec::BrownianBridge => 1.0,
            KernelSpec::Lacunar(_) | KernelSpec::Stationary(_) | KernelSpec::Periodized(_) => 2.0 * PI,
            KernelSpec::Degenerate(d) => d.domain_end(),
            KernelSpec::Tabulated(g) => g.grid.domain_end(),
            KernelSpec::RankOne { domain_end, .. } => *domain_end,
        }
    }

    pub fn periodize(inner: KernelSpec) -> Result<KernelSpec> {
        if (inner.domain_end() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("only kernels on [0, 1] can be periodized".into()));
        }
        Ok(KernelSpec::Periodized(Box::new(inner)))
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        match self {
            KernelSpec::BrownianMotion => "brownian_motion".into(),
            KernelSpec::BrownianBridge => "brownian_bridge".into(),
            KernelSpec::Lacunar(l) => match l.theta() {
                Some(t) => format!("lacunar(theta={t})"),
                None => format!("lacunar({} terms)", l.n_terms()),
            },
            KernelSpec::Degenerate(d) => format!("degenerate{:?}", d.rank()),
            KernelSpec::Tabulated(g) => format!("tabulated({})", g.grid.n_points()),
            KernelSpec::RankOne { factor, .. } => format!("rank_one({factor})"),
            KernelSpec::Stationary(Stationary::VonMises { kappa }) => format!("von_mises({kappa})"),
            KernelSpec::Stationary(Stationary::Cosine { variance, freq }) => {
                format!("cosine({variance},{freq})")
            }
            KernelSpec::Periodized(k) => format!("periodized({})", k.label()),
        }
    }
}

/// Parses `brownian_motion`, `brownian_bridge`, `periodized_bridge`, `periodized_motion`,
/// `von_mises:K`, `cosine:VAR:FREQ`, `lacunar:THETA` (ratio 5, 64 terms) and `rank_one:EXPR`.
impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        if name == "rank_one" {
            return Ok(KernelSpec::RankOne { factor: rest.parse()?, domain_end: 2.0 * PI });
        }
        let nums = rest
            .split(':')
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{p}' in kernel '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        match (name, nums.as_slice()) {
            ("brownian_motion", []) => Ok(KernelSpec::BrownianMotion),
            ("brownian_bridge", []) => Ok(KernelSpec::BrownianBridge),
            ("periodized_bridge", []) => KernelSpec::periodize(KernelSpec::BrownianBridge),
            ("periodized_motion", []) => KernelSpec::periodize(KernelSpec::BrownianMotion),
            ("von_mises", [k]) => Ok(KernelSpec::Stationary(Stationary::VonMises { kappa: *k })),
            ("cosine", [v, f]) => Ok(KernelSpec::Stationary(Stationary::Cosine { variance: *v, freq: *f })),
            ("lacunar", [t]) => Ok(KernelSpec::Lacunar(LacunarSpec::theta_family(*t, 5, 64)?.covariance())),
            _ => Err(Error::Config(format!(
                "unknown kernel '{s}' (brownian_motion, brownian_bridge, periodized_bridge, periodized_motion, \
                 von_mises:K, cosine:VAR:FREQ, lacunar:THETA, rank_one:EXPR)"
            ))),
        }
    }
}

/// Periodic closure: value at `t ∈ [0, 2π]` as a combination of values at points of `[0, 1]`.
fn closure_weights(t: f64) -> [(f64, f64); 2] {
    if t <= 1.0 {
        [(t, 1.0), (0.0, 0.0)]
    } else {
        let a = (2.0 * PI - t) / (2.0 * PI - 1.0);
        [(1.0, a), (0.0, 1.0 - a)]
    }
}

/// `R(t, s)` for any point of the kernel's domain.
pub fn eval_kernel(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    let end = spec.domain_end();
    for x in [t, s] {
        if !(x >= -1e-12 && x <= end + 1e-12) {
            return Err(Error::Domain(format!("point {x} outside [0, {end}]")));
        }
    }
    match spec {
        KernelSpec::BrownianMotion => Ok(t.min(s)),
        KernelSpec::BrownianBridge => Ok(t.min(s) - t * s),
        KernelSpec::Lacunar(l) => l.eval_kernel(t, s),
        KernelSpec::Degenerate(d) => d.eval(t, s),
        KernelSpec::Tabulated(g) => {
            let i = g.grid.node_index(t);
            let j = g.grid.node_index(s);
            match (i, j) {
                (Some(i), Some(j)) => Ok(g.values[(i, j)]),
                _ => Err(Error::Domain(format!("tabulated kernel has no value at ({t}, {s})"))),
            }
        }
        KernelSpec::RankOne { factor, .. } => Ok(factor.eval(t) * factor.eval(s)),
        KernelSpec::Stationary(st) => Ok(st.eval(t - s)),
        KernelSpec::Periodized(inner) => {
            let mut acc = 0.0;
            for (u, a) in closure_weights(t) {
                for (v, b) in closure_weights(s) {
                    if a != 0.0 && b != 0.0 {
                        acc += a * b * eval_kernel(inner, u, v)?;
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Kernel values on grid nodes, `values[(i, j)] = R(t_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    pub grid: Grid,
    pub values: DMatrix<f64>,
}

impl GridKernel {
    pub fn new(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_points();
        if values.shape() != (n, n) {
            return Err(Error::arg(format!("kernel matrix must be {n}x{n}, got {:?}", values.shape())));
        }
        for j in 0..n {
            for i in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::Evaluation { i, j });
                }
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n_points();
        let pts = grid.points();
        Self::new(grid.clone(), DMatrix::from_fn(n, n, |i, j| f(pts[i], pts[j])))
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    /// Largest `|K_ij - K_ji|` relative to `max |K|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.amax();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.n();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-12
    }

    pub(crate) fn require_symmetric(&self) -> Result<()> {
        let a = self.asymmetry();
        if a > 1e-12 {
            Err(Error::arg(format!("kernel is not symmetric (relative asymmetry {a:.3e})")))
        } else {
            Ok(())
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diagonal().iter().copied().collect()
    }

    /// Quadrature trace `h Σ K_ii`.
    pub fn trace(&self) -> f64 {
        self.grid.weight() * self.values.trace()
    }

    pub fn sup(&self) -> f64 {
        self.values.amax()
    }

    /// CSV with a metadata header line and one row per grid node.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# grid n_points={} domain_end={:.17} weight={:.17} measure=lebesgue\n",
            self.n(),
            self.grid.domain_end(),
            self.grid.weight()
        );
        for i in 0..self.n() {
            let row: Vec<String> = self.values.row(i).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Tabulates `spec` on a grid of `n_points` covering its own domain.
pub fn sample_native(spec: &KernelSpec, n_points: usize) -> Result<GridKernel> {
    sample_grid(spec, &Grid::new(spec.domain_end(), n_points)?)
}

/// Tabulates `spec` on `grid`.
pub fn sample_grid(spec: &KernelSpec, grid: &Grid) -> Result<GridKernel> {
    if (spec.domain_end() - grid.domain_end()).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "kernel lives on [0, {}] but the grid covers [0, {}]",
            spec.domain_end(),
            grid.domain_end()
        )));
    }
    let n = grid.n_points();
    let pts = grid.points();
    let values = match spec {
        KernelSpec::Tabulated(g) => {
            g.grid.require_same(grid)?;
            g.values.clone()
        }
        KernelSpec::Lacunar(l) => {
            // Exact node phases so that huge frequencies alias correctly.
            let mut c = DMatrix::zeros(n, l.n_terms());
            for k in 1..=l.n_terms() {
                for i in 0..n {
                    c[(i, k - 1)] = l.node_cos(k, i, n);
                }
            }
            let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(l.coefficients()));
            &c * a * c.transpose()
        }
        KernelSpec::Degenerate(d) => d.sample(grid)?,
        _ => {
            let mut m = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    m[(i, j)] = eval_kernel(spec, pts[i], pts[j])?;
                }
            }
            m
        }
    };
    GridKernel::new(grid.clone(), values)
}

/// Result of a positive semidefiniteness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub is_psd: bool,
}

/// Dense eigensolve of the kernel matrix; PSD iff `λ_min ≥ -tol · λ_max`.
pub fn check_psd(gk: &GridKernel, tol: f64) -> Result<PsdReport> {
    gk.require_symmetric()?;
    let eig = gk
        .values
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    let scale = max.abs().max(min.abs());
    Ok(PsdReport { min_eigenvalue: min, max_eigenvalue: max, is_psd: min >= -tol * scale })
}

pub const DEFAULT_PSD_TOL: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kernel_names() {
        assert_eq!("brownian_bridge".parse::<KernelSpec>().unwrap(), KernelSpec::BrownianBridge);
        assert_eq!(
            "cosine:2:3".parse::<KernelSpec>().unwrap(),
            KernelSpec::Stationary(Stationary::Cosine { variance: 2.0, freq: 3.0 })
        );
        assert_eq!("periodized_bridge".parse::<KernelSpec>().unwrap().domain_end(), 2.0 * PI);
        assert!(matches!("rank_one:1 + 0.5*cos:2".parse::<KernelSpec>(), Ok(KernelSpec::RankOne { .. })));
        for bad in ["nope", "von_mises", "cosine:1", "von_mises:x", "brownian_bridge:1"] {
            assert!(bad.parse::<KernelSpec>().unwrap_err().is_config(), "{bad}");
        }
    }

    #[test]
    fn bridge_values() {
        assert_eq!(eval_kernel(&KernelSpec::BrownianBridge, 0.5, 0.5).unwrap(), 0.25);
        let g = Grid::unit(8).unwrap();
        let gk = sample_grid(&KernelSpec::BrownianBridge, &g).unwrap();
        // t = 0.25, s = 0.5 sit at nodes 2 and 4.
        assert!((gk.values[(2, 4)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn rank_one_cos() {
        let k = KernelSpec::RankOne { factor: ScalarFn::Cos(1.0), domain_end: 2.0 * PI };
        assert!((eval_kernel(&k, 0.0, PI).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_checks() {
        assert!(eval_kernel(&KernelSpec::BrownianBridge, 1.5, 0.2).is_err());
        let g = Grid::periodic(16).unwrap();
        assert!(sample_grid(&KernelSpec::BrownianBridge, &g).is_err());
        let tab = sample_grid(&KernelSpec::Stationary(Stationary::Cosine { variance: 1.0, freq: 1.0 }), &g).unwrap();
        let spec = KernelSpec::Tabulated(tab);
        assert!(eval_kernel(&spec, g.point(3), g.point(5)).is_ok());
        assert!(matches!(eval_kernel(&spec, 0.1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lacunar_sampling_agrees_with_pointwise() {
        let l = LacunarSpec::geometric(4.0, 5, 5).unwrap();
        let g = Grid::periodic(64).unwrap();
        let gk = sample_grid(&KernelSpec::Lacunar(l.clone()), &g).unwrap();
        for (i, j) in [(0, 0), (3, 7), (10, 50)] {
            let direct = l.eval_kernel(g.point(i), g.point(j)).unwrap();
            assert!((gk.values[(i, j)] - direct).abs() < 1e-9);
        }
        assert!((gk.sup() - l.total()).abs() < 1e-14);
    }

    #[test]
    fn periodized_bridge_is_continuous_and_zero_outside() {
        let k = KernelSpec::periodize(KernelSpec::BrownianBridge).unwrap();
        assert_eq!(eval_kernel(&k, 3.0, 0.5).unwrap(), 0.0);
        assert!((eval_kernel(&k, 0.5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let m = KernelSpec::periodize(KernelSpec::BrownianMotion).unwrap();
        let near = eval_kernel(&m, 2.0 * PI - 1e-9, 0.7).unwrap();
        let at0 = eval_kernel(&m, 0.0, 0.7).unwrap();
        assert!((near - at0).abs() < 1e-8);
        assert!((eval_kernel(&m, 1.0, 0.7).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn psd_examples() {
        let g = Grid::unit(64).unwrap();
        let bb = sample_grid(&KernelSpec::BrownianBridge, &g).unwrap();
        assert!(check_psd(&bb, DEFAULT_PSD_TOL).unwrap().is_psd);
        let gp = Grid::periodic(64).unwrap();
        let c = GridKernel::from_fn(&gp, |t, s| (t - s).cos()).unwrap();
        assert!(check_psd(&c, DEFAULT_PSD_TOL).unwrap().is_psd);
        let neg = GridKernel::from_fn(&gp, |t, s| -t.cos() * s.cos()).unwrap();
        let r = check_psd(&neg, DEFAULT_PSD_TOL).unwrap();
        assert!(!r.is_psd && r.min_eigenvalue < 0.0);
    }

    #[test]
    fn non_finite_entry_named() {
        let g = Grid::unit(8).unwrap();
        let r = GridKernel::from_fn(&g, |t, s| if t == 0.25 && s == 0.5 { f64::NAN } else { 0.0 });
        assert_eq!(r.unwrap_err(), Error::Evaluation { i: 2, j: 4 });
    }
}
