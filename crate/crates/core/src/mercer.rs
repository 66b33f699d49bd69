use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::degenerate::{DegenerateKernel, Factor};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::kernel::GridKernel;

pub const DEFAULT_DROP_TOL: f64 = 1e-12;
const NON_PSD_TOL: f64 = 1e-6;
const TIE_TOL: f64 = 1e-10;

/// Discrete eigen-expansion `K ≈ Σ λ_k φ_k(t) φ_k(s)` with `h Σ φ_k φ_l = δ_kl`.
#[derive(Debug, Clone)]
pub struct MercerDecomposition {
    pub grid: Grid,
    /// Kept eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `k` holds `φ_{k+1}` at the grid nodes.
    pub eigenfunctions: DMatrix<f64>,
    pub n_kept: usize,
    /// Quadrature trace minus the kept eigenvalues (dropped plus clipped spectrum).
    pub trace_residual: f64,
    /// Total magnitude of clipped negative eigenvalues.
    pub negative_mass: f64,
    /// 1-based `k` with `λ_k = λ_{k+1}` to within tolerance: truncation at `k` is not unique.
    pub ties: Vec<usize>,
    kernel: DMatrix<f64>,
}

/// Errors of a degenerate approximation of a given rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxError {
    pub rank: (usize, usize),
    pub err_l1: f64,
    pub err_l2: f64,
    pub err_sup: Option<f64>,
}

impl MercerDecomposition {
    pub fn eigenfunction(&self, k: usize) -> GridFn {
        GridFn { grid: self.grid.clone(), values: self.eigenfunctions.column(k - 1).iter().copied().collect() }
    }

    /// `max_t |φ_k(t)|`.
    pub fn eigenfunction_sup(&self, k: usize) -> f64 {
        self.eigenfunctions.column(k - 1).amax()
    }

    pub fn kernel_values(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// `Q(n; R)` on the grid.
    pub fn reconstruct(&self, n: usize) -> DMatrix<f64> {
        let phi = self.eigenfunctions.columns(0, n);
        let lam = DVector::from_column_slice(&self.eigenvalues[..n]);
        let scaled = DMatrix::from_fn(phi.nrows(), n, |i, k| phi[(i, k)] * lam[k]);
        scaled * phi.transpose()
    }

    pub fn is_minimizer_unique(&self, n: usize) -> bool {
        !self.ties.contains(&n)
    }

    /// One row per eigenpair: `k, λ_k, φ_k(t_0), ..., φ_k(t_{N-1})`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# n_points={} domain_end={:.17} measure=lebesgue trace_residual={:e} negative_mass={:e}\n",
            self.grid.n_points(),
            self.grid.domain_end(),
            self.trace_residual,
            self.negative_mass
        );
        for k in 0..self.n_kept {
            out.push_str(&format!("{},{:e}", k + 1, self.eigenvalues[k]));
            for v in self.eigenfunctions.column(k).iter() {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn sorted_desc(values: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Nyström discretization of `∫ R(t,s) φ(s) ds = λ φ(t)`.
pub fn nystrom_decompose(gk: &GridKernel, drop_tol: f64) -> Result<MercerDecomposition> {
    gk.require_symmetric()?;
    if !(drop_tol >= 0.0) {
        return Err(Error::arg(format!("drop_tol must be non-negative, got {drop_tol}")));
    }
    let h = gk.grid.weight();
    let a = (&gk.values + gk.values.transpose()) * (0.5 * h);
    let eig = a
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let order = sorted_desc(&eig.eigenvalues);
    let lam1 = eig.eigenvalues[order[0]];
    if !(lam1 > 0.0) {
        return Err(Error::DegenerateInput("all eigenvalues are non-positive".into()));
    }
    let lam_min = eig.eigenvalues[*order.last().unwrap()];
    if lam_min < -NON_PSD_TOL * lam1 {
        return Err(Error::NonPsd { min_eigenvalue: lam_min, max_eigenvalue: lam1 });
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&i| eig.eigenvalues[i] > 0.0 && eig.eigenvalues[i] >= drop_tol * lam1)
        .collect();
    let eigenvalues: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i]).collect();
    let negative_mass: f64 = eig.eigenvalues.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let trace = h * gk.values.trace();
    let trace_residual = trace - eigenvalues.iter().sum::<f64>();
    let n = gk.n();
    let inv = 1.0 / h.sqrt();
    let mut phi = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i) * inv;
        // Sign convention: first non-negligible entry positive.
        if let Some(v) = col.iter().find(|v| v.abs() > 1e-8 * inv) {
            if *v < 0.0 {
                col.neg_mut();
            }
        }
        phi.column_mut(c).copy_from(&col);
    }
    let ties = eigenvalues
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - w[1]).abs() <= TIE_TOL * lam1)
        .map(|(k, _)| k + 1)
        .collect();
    Ok(MercerDecomposition {
        grid: gk.grid.clone(),
        n_kept: eigenvalues.len(),
        eigenvalues,
        eigenfunctions: phi,
        trace_residual,
        negative_mass,
        ties,
        kernel: gk.values.clone(),
    })
}

fn check_rank(md: &MercerDecomposition, n: usize) -> Result<()> {
    if n == 0 || n > md.n_kept {
        return Err(Error::arg(format!("rank {n} outside 1..={}", md.n_kept)));
    }
    Ok(())
}

/// Optimal symmetric rank-`n` approximation `Σ_{k≤n} λ_k φ_k(t) φ_k(s)`.
pub fn mercer_truncate(md: &MercerDecomposition, n: usize) -> Result<DegenerateKernel> {
    check_rank(md, n)?;
    let factors = (1..=n).map(|k| Factor::Sampled(md.eigenfunction(k))).collect();
    Ok(DegenerateKernel::symmetric(&md.eigenvalues[..n], factors, md.grid.domain_end())?.with_flags(true, true))
}

/// Truncation errors of `Q(n; R)`.
pub fn tail_errors(md: &MercerDecomposition, n: usize) -> Result<ApproxError> {
    if n > md.n_kept {
        return Err(Error::arg(format!("rank {n} exceeds n_kept = {}", md.n_kept)));
    }
    let tail = &md.eigenvalues[n..];
    let err_l1 = tail.iter().sum::<f64>() + md.trace_residual;
    let err_l2 = tail.iter().map(|l| l * l).sum::<f64>().sqrt();
    let err_sup = if n == 0 { md.kernel.amax() } else { (&md.kernel - md.reconstruct(n)).amax() };
    Ok(ApproxError { rank: (n, n), err_l1, err_l2, err_sup: Some(err_sup) })
}

/// Singular values of the integral operator `h K`, non-increasing, with singular vectors.
pub struct OperatorSvd {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

pub fn operator_svd(gk: &GridKernel) -> Result<OperatorSvd> {
    let h = gk.grid.weight();
    let svd = (&gk.values * h)
        .try_svd(true, true, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD returned no left vectors".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD returned no right vectors".into()))?;
    let order = sorted_desc(&svd.singular_values);
    let n = order.len();
    let mut uu = DMatrix::zeros(u.nrows(), n);
    let mut vv = DMatrix::zeros(vt.ncols(), n);
    for (c, &i) in order.iter().enumerate() {
        uu.column_mut(c).copy_from(&u.column(i));
        vv.column_mut(c).copy_from(&vt.row(i).transpose());
    }
    Ok(OperatorSvd { singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(), u: uu, v: vv })
}

/// Best rank-`min(n1, n2)` approximation in `L2(T²)` at grid resolution.
///
/// `err_l1` reports the nuclear-norm tail `Σ σ_k` of the discarded part.
pub fn svd_degenerate_approx(gk: &GridKernel, n1: usize, n2: usize) -> Result<(DegenerateKernel, ApproxError)> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::arg("ranks must be at least 1"));
    }
    let svd = operator_svd(gk)?;
    Ok(svd_truncation(gk, &svd, n1, n2))
}

/// Truncation of a precomputed SVD, so rank sweeps share one factorization.
pub fn svd_truncation(gk: &GridKernel, svd: &OperatorSvd, n1: usize, n2: usize) -> (DegenerateKernel, ApproxError) {
    let r = n1.min(n2).min(svd.singular_values.len());
    let h = gk.grid.weight();
    let inv = 1.0 / h.sqrt();
    let col = |m: &DMatrix<f64>, k: usize| {
        Factor::Sampled(GridFn { grid: gk.grid.clone(), values: m.column(k).iter().map(|x| x * inv).collect() })
    };
    let left = (0..r).map(|k| col(&svd.u, k)).collect();
    let right = (0..r).map(|k| col(&svd.v, k)).collect();
    let coeff = DMatrix::from_diagonal(&DVector::from_iterator(r, svd.singular_values[..r].iter().copied()));
    let dk = DegenerateKernel::new(coeff, left, right, gk.grid.domain_end())
        .expect("shapes agree by construction")
        .with_flags(false, true);
    let tail = &svd.singular_values[r..];
    let approx = {
        let us = DMatrix::from_fn(svd.u.nrows(), r, |i, k| svd.u[(i, k)] * svd.singular_values[k]);
        us * svd.v.columns(0, r).transpose() / h
    };
    let err = ApproxError {
        rank: (n1, n2),
        err_l1: tail.iter().sum(),
        err_l2: tail.iter().map(|s| s * s).sum::<f64>().sqrt(),
        err_sup: Some((&gk.values - approx).amax()),
    };
    (dk, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{sample_grid, KernelSpec};
    use crate::lacunar::LacunarSpec;
    use std::f64::consts::PI;

    #[test]
    fn bridge_small_grid_orthonormal_and_trace() {
        let g = Grid::unit(256).unwrap();
        let gk = sample_grid(&KernelSpec::BrownianBridge, &g).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        let phi = md.eigenfunctions.columns(0, 20);
        let gram = phi.transpose() * phi * g.weight();
        assert!((gram - DMatrix::<f64>::identity(20, 20)).amax() < 1e-8);
        let total = md.eigenvalues.iter().sum::<f64>() + md.trace_residual;
        assert!((total - gk.trace()).abs() < 1e-10 * gk.trace());
        assert!(md.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!((md.eigenvalues[0] - 1.0 / (PI * PI)).abs() < 0.01 / (PI * PI));
    }

    #[test]
    fn lacunar_eigenvalues_are_pi_times_coefficients() {
        let l = LacunarSpec::geometric(4.0, 5, 8).unwrap();
        let g = Grid::periodic(256).unwrap();
        let gk = sample_grid(&KernelSpec::Lacunar(l.clone()), &g).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(md.n_kept, 8);
        for k in 1..=8 {
            assert!((md.eigenvalues[k - 1] - PI * l.coefficient(k)).abs() < 1e-12, "{k}");
        }
        for nu in 1..=7 {
            let e = tail_errors(&md, nu).unwrap();
            assert!((e.err_sup.unwrap() - l.tail_sum(nu)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_of_finite_rank_is_exact() {
        let g = Grid::periodic(64).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| t.cos() * s.cos() + 0.5 * (2.0 * t).sin() * (2.0 * s).sin()).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(md.n_kept, 2);
        let e = tail_errors(&md, 2).unwrap();
        assert!(e.err_l2 == 0.0 && e.err_sup.unwrap() < 1e-12);
        let dk = mercer_truncate(&md, 2).unwrap();
        assert!((dk.sample(&g).unwrap() - &gk.values).amax() < 1e-12);
        assert!(mercer_truncate(&md, 3).is_err());
    }

    #[test]
    fn svd_of_cos_sin_kernel() {
        let g = Grid::periodic(128).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| t.cos() * s.sin() + 0.5 * (2.0 * t).cos() * (2.0 * s).sin()).unwrap();
        let (_, e) = svd_degenerate_approx(&gk, 1, 1).unwrap();
        assert!((e.err_l2 - 0.5 * PI).abs() < 1e-10);
        let (dk, e2) = svd_degenerate_approx(&gk, 2, 3).unwrap();
        assert_eq!(dk.rank(), (2, 2));
        assert!(e2.err_l2 < 1e-10);
    }

    #[test]
    fn rejects_non_psd() {
        let g = Grid::periodic(32).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| t.cos() * s.cos() - (3.0 * t).sin() * (3.0 * s).sin()).unwrap();
        assert!(matches!(nystrom_decompose(&gk, DEFAULT_DROP_TOL), Err(Error::NonPsd { .. })));
        let z = GridKernel::from_fn(&g, |_, _| 0.0).unwrap();
        assert!(matches!(nystrom_decompose(&z, DEFAULT_DROP_TOL), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn ties_reported() {
        let g = Grid::periodic(64).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| (t - s).cos()).unwrap();
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(md.n_kept, 2);
        assert!(!md.is_minimizer_unique(1));
    }
}
