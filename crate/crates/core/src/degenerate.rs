use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};

/// Closed-form univariate function used as a kernel factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalarFn {
    Const(f64),
    Cos(f64),
    Sin(f64),
    AbsSin(f64),
    /// `Σ c_i f_i`.
    Sum(Vec<(f64, ScalarFn)>),
}

impl ScalarFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarFn::Const(c) => *c,
            ScalarFn::Cos(k) => (k * t).cos(),
            ScalarFn::Sin(k) => (k * t).sin(),
            ScalarFn::AbsSin(k) => (k * t).sin().abs(),
            ScalarFn::Sum(terms) => terms.iter().map(|(c, f)| c * f.eval(t)).sum(),
        }
    }

    pub fn sample(&self, grid: &Grid) -> GridFn {
        GridFn::from_fn(grid, |t| self.eval(t))
    }
}

/// Parses `cos:3`, `sin:1`, `abs_sin:1`, `const:2`, a bare number, and `+`-joined
/// terms with optional `c*` prefixes, e.g. `1 + 0.5*cos:2`.
impl FromStr for ScalarFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).filter(|p| !p.is_empty()).collect();
        if parts.is_empty() {
            return Err(Error::Config(format!("empty function expression '{s}'")));
        }
        let mut terms = Vec::with_capacity(parts.len());
        for p in parts {
            let (c, body) = match p.split_once('*') {
                Some((c, b)) => (parse_num(c)?, b.trim()),
                None => (1.0, p),
            };
            terms.push((c, parse_atom(body)?));
        }
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return Ok(terms.pop().unwrap().1);
        }
        Ok(ScalarFn::Sum(terms))
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("not a number: '{s}'")))
}

fn parse_atom(s: &str) -> Result<ScalarFn> {
    if let Ok(c) = s.parse::<f64>() {
        return Ok(ScalarFn::Const(c));
    }
    let (name, arg) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected name:arg, got '{s}'")))?;
    let a = parse_num(arg)?;
    match name.trim() {
        "cos" => Ok(ScalarFn::Cos(a)),
        "sin" => Ok(ScalarFn::Sin(a)),
        "abs_sin" => Ok(ScalarFn::AbsSin(a)),
        "const" => Ok(ScalarFn::Const(a)),
        other => Err(Error::Config(format!("unknown function '{other}'"))),
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Const(c) => write!(f, "{c}"),
            ScalarFn::Cos(k) => write!(f, "cos:{k}"),
            ScalarFn::Sin(k) => write!(f, "sin:{k}"),
            ScalarFn::AbsSin(k) => write!(f, "abs_sin:{k}"),
            ScalarFn::Sum(ts) => {
                for (i, (c, g)) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c}*{g}")?;
                }
                Ok(())
            }
        }
    }
}

/// A factor function: closed form, or values on grid nodes only.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Analytic(ScalarFn),
    Sampled(GridFn),
}

impl Factor {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Factor::Analytic(f) => Ok(f.eval(t)),
            Factor::Sampled(g) => g
                .grid
                .node_index(t)
                .map(|i| g.values[i])
                .ok_or_else(|| Error::Domain(format!("sampled factor has no value at off-grid t = {t}"))),
        }
    }

    pub fn on_grid(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Factor::Analytic(f) => Ok(f.sample(grid).values),
            Factor::Sampled(g) => {
                g.grid.require_same(grid)?;
                Ok(g.values.clone())
            }
        }
    }
}

/// Finite-rank kernel `Σ_{k,l} a_{k,l} φ_k(t) ψ_l(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateKernel {
    coeff: DMatrix<f64>,
    left: Vec<Factor>,
    right: Vec<Factor>,
    symmetric: bool,
    orthonormalized: bool,
    domain_end: f64,
}

impl DegenerateKernel {
    pub fn new(coeff: DMatrix<f64>, left: Vec<Factor>, right: Vec<Factor>, domain_end: f64) -> Result<Self> {
        if coeff.nrows() != left.len() || coeff.ncols() != right.len() {
            return Err(Error::arg(format!(
                "coefficient matrix is {}x{} but there are {} left and {} right factors",
                coeff.nrows(),
                coeff.ncols(),
                left.len(),
                right.len()
            )));
        }
        if coeff.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("non-finite coefficient"));
        }
        Ok(Self { coeff, left, right, symmetric: false, orthonormalized: false, domain_end })
    }

    /// `Σ_k a_k φ_k(t) φ_k(s)`.
    pub fn symmetric(diag: &[f64], factors: Vec<Factor>, domain_end: f64) -> Result<Self> {
        let coeff = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        let mut dk = Self::new(coeff, factors.clone(), factors, domain_end)?;
        dk.symmetric = true;
        Ok(dk)
    }

    pub(crate) fn with_flags(mut self, symmetric: bool, orthonormalized: bool) -> Self {
        self.symmetric = symmetric;
        self.orthonormalized = orthonormalized;
        self
    }

    pub fn coeff(&self) -> &DMatrix<f64> {
        &self.coeff
    }

    pub fn left(&self) -> &[Factor] {
        &self.left
    }

    pub fn right(&self) -> &[Factor] {
        &self.right
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.left.len(), self.right.len())
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_orthonormalized(&self) -> bool {
        self.orthonormalized
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        let phi: Vec<f64> = self.left.iter().map(|f| f.eval(t)).collect::<Result<_>>()?;
        let psi: Vec<f64> = self.right.iter().map(|f| f.eval(s)).collect::<Result<_>>()?;
        let mut acc = 0.0;
        for (k, p) in phi.iter().enumerate() {
            for (l, q) in psi.iter().enumerate() {
                acc += self.coeff[(k, l)] * p * q;
            }
        }
        Ok(acc)
    }

    /// Factor values as `n_points × rank` matrices.
    pub fn factor_matrices(&self, grid: &Grid) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((factor_matrix(&self.left, grid)?, factor_matrix(&self.right, grid)?))
    }

    /// Dense kernel values on the grid, `F A Gᵀ`.
    pub fn sample(&self, grid: &Grid) -> Result<DMatrix<f64>> {
        let (f, g) = self.factor_matrices(grid)?;
        Ok(&f * &self.coeff * g.transpose())
    }
}

fn factor_matrix(fs: &[Factor], grid: &Grid) -> Result<DMatrix<f64>> {
    let n = grid.n_points();
    let mut m = DMatrix::zeros(n, fs.len());
    for (k, f) in fs.iter().enumerate() {
        let v = f.on_grid(grid)?;
        m.column_mut(k).copy_from_slice(&v);
    }
    Ok(m)
}

/// Twice-applied modified Gram-Schmidt of the columns of `f` under `h Σ f g`.
///
/// Returns `(Q, R)` with `F = Q R`, `R` upper triangular with positive diagonal.
pub(crate) fn weighted_qr(f: &DMatrix<f64>, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, r) = f.shape();
    let mut q = f.clone();
    let mut rm = DMatrix::zeros(r, r);
    let lead = (0..r).map(|j| (h * f.column(j).norm_squared()).sqrt()).fold(0.0, f64::max);
    let mut rank = 0;
    let mut deficient = false;
    for j in 0..r {
        for _pass in 0..2 {
            for i in 0..j {
                let c = h * q.column(i).dot(&q.column(j));
                rm[(i, j)] += c;
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-c, &qi, 1.0);
            }
        }
        let nrm = (h * q.column(j).norm_squared()).sqrt();
        if !(nrm > 1e-12 * lead) || lead == 0.0 {
            deficient = true;
            q.column_mut(j).fill(0.0);
            continue;
        }
        rank += 1;
        rm[(j, j)] = nrm;
        q.column_mut(j).scale_mut(1.0 / nrm);
    }
    let _ = n;
    if deficient {
        return Err(Error::RankDeficient { rank, requested: r });
    }
    Ok((q, rm))
}

/// Orthonormalizes both factor families on `grid`, keeping the kernel unchanged.
///
/// Symmetric inputs stay in diagonal form: the transformed coefficient block is
/// re-diagonalized when Gram-Schmidt alone leaves off-diagonal mass.
pub fn orthonormalize_factors(dk: &DegenerateKernel, grid: &Grid) -> Result<DegenerateKernel> {
    if (grid.domain_end() - dk.domain_end).abs() > 1e-12 {
        return Err(Error::Domain("grid domain differs from kernel domain".into()));
    }
    let h = grid.weight();
    let (f, g) = dk.factor_matrices(grid)?;
    let (qf, rf) = weighted_qr(&f, h)?;
    let (qg, rg) = weighted_qr(&g, h)?;
    let coeff = &rf * &dk.coeff * rg.transpose();
    let sampled = |q: &DMatrix<f64>| -> Vec<Factor> {
        (0..q.ncols())
            .map(|j| Factor::Sampled(GridFn { grid: grid.clone(), values: q.column(j).iter().copied().collect() }))
            .collect()
    };
    if dk.symmetric {
        let off = coeff
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx % coeff.nrows() != idx / coeff.nrows())
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
        let scale = coeff.amax().max(f64::MIN_POSITIVE);
        if off > 1e-12 * scale {
            let sym = (&coeff + coeff.transpose()) * 0.5;
            let eig = sym.symmetric_eigen();
            let rot = &qf * &eig.eigenvectors;
            let out = DegenerateKernel::new(
                DMatrix::from_diagonal(&eig.eigenvalues),
                sampled(&rot),
                sampled(&rot),
                dk.domain_end,
            )?;
            return Ok(out.with_flags(true, true));
        }
        let out = DegenerateKernel::new(coeff, sampled(&qf), sampled(&qf), dk.domain_end)?;
        return Ok(out.with_flags(true, true));
    }
    Ok(DegenerateKernel::new(coeff, sampled(&qf), sampled(&qg), dk.domain_end)?.with_flags(false, true))
}

/// Max deviation of the quadrature Gram matrix of `fs` from the identity.
pub fn gram_deviation(fs: &[Factor], grid: &Grid) -> Result<f64> {
    let m = factor_matrix(fs, grid)?;
    let gram = m.transpose() * &m * grid.weight();
    let id = DMatrix::<f64>::identity(fs.len(), fs.len());
    Ok((gram - id).amax())
}
