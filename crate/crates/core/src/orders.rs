//! Orthant-induced partial orders and the vector, PSD and Gaussian relations
//! built on them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("covariance has eigenvalue {0:e} below -1e-9")]
    NotPsd(f64),
    #[error("invalid sign `{0}`; expected + or -")]
    BadSign(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl FromStr for Sign {
    type Err = OrderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" | "+1" | "1" => Ok(Sign::Plus),
            "-" | "-1" => Ok(Sign::Minus),
            other => Err(OrderError::BadSign(other.to_string())),
        }
    }
}

/// The order `x ⪯ y ⇔ T(y − x) ≥ 0` with `T = diag(eps)`, plus an input
/// order `T_u = diag(eps_u)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthantOrder {
    pub eps: Vec<Sign>,
    pub eps_u: Vec<Sign>,
}

impl OrthantOrder {
    /// State signs as given; input signs all `+`.
    pub fn new(eps: Vec<Sign>, m: usize) -> Self {
        Self {
            eps,
            eps_u: vec![Sign::Plus; m],
        }
    }

    pub fn with_inputs(eps: Vec<Sign>, eps_u: Vec<Sign>) -> Self {
        Self { eps, eps_u }
    }

    pub fn standard(n: usize, m: usize) -> Self {
        Self::new(vec![Sign::Plus; n], m)
    }

    /// Parses `"+,-"`; optional input signs follow a `;` as in `"+,-;+"`.
    pub fn parse(text: &str, m: usize) -> Result<Self, OrderError> {
        let (state, input) = match text.split_once(';') {
            Some((s, i)) => (s, Some(i)),
            None => (text, None),
        };
        let signs = |s: &str| s.split(',').map(str::parse).collect::<Result<Vec<Sign>, _>>();
        let eps = signs(state)?;
        let eps_u = match input {
            Some(i) if !i.trim().is_empty() => signs(i)?,
            _ => vec![Sign::Plus; m],
        };
        if eps_u.len() != m {
            return Err(OrderError::Dimension {
                expected: m,
                got: eps_u.len(),
            });
        }
        Ok(Self { eps, eps_u })
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn is_standard(&self) -> bool {
        self.eps.iter().chain(&self.eps_u).all(|s| *s == Sign::Plus)
    }

    /// `T·v` on states.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.eps).map(|(x, s)| x * s.value()).collect()
    }

    /// `T_u·v` on inputs.
    pub fn apply_input(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.eps_u).map(|(x, s)| x * s.value()).collect()
    }

    pub fn check_dims(&self, n: usize, m: usize) -> Result<(), OrderError> {
        if self.eps.len() != n {
            return Err(OrderError::Dimension {
                expected: n,
                got: self.eps.len(),
            });
        }
        if self.eps_u.len() != m {
            return Err(OrderError::Dimension {
                expected: m,
                got: self.eps_u.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for OrthantOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &[Sign]| {
            s.iter()
                .map(|s| if *s == Sign::Plus { "+" } else { "-" })
                .collect::<Vec<_>>()
                .join(",")
        };
        f.write_str(&join(&self.eps))?;
        if !self.eps_u.is_empty() {
            write!(f, ";{}", join(&self.eps_u))?;
        }
        Ok(())
    }
}

/// Smallest componentwise entry of `T(y − x)`; nonnegative iff `x ⪯ y`.
pub fn cone_margin(x: &[f64], y: &[f64], signs: &[Sign]) -> Result<f64, OrderError> {
    if x.len() != y.len() || x.len() != signs.len() {
        return Err(OrderError::Dimension {
            expected: signs.len(),
            got: if x.len() != signs.len() { x.len() } else { y.len() },
        });
    }
    Ok(x.iter()
        .zip(y)
        .zip(signs)
        .map(|((a, b), s)| s.value() * (b - a))
        .fold(f64::INFINITY, f64::min))
}

/// `x ⪯ y` in the state order, with slack `tol`.
pub fn leq_cone(x: &[f64], y: &[f64], order: &OrthantOrder, tol: f64) -> Result<bool, OrderError> {
    Ok(cone_margin(x, y, &order.eps)? >= -tol)
}

/// `u ⪯ v` in the input order.
pub fn leq_input(u: &[f64], v: &[f64], order: &OrthantOrder, tol: f64) -> Result<bool, OrderError> {
    if u.is_empty() && v.is_empty() && order.eps_u.is_empty() {
        return Ok(true);
    }
    Ok(cone_margin(u, v, &order.eps_u)? >= -tol)
}

const SYMMETRY_TOL: f64 = 1e-9;

fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).abs().max()
}

/// Smallest eigenvalue of `(a + aᵀ)/2`.
pub fn lambda_min_sym(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min()
}

/// Largest eigenvalue of `(a + aᵀ)/2`.
pub fn lambda_max_sym(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

/// `λ_min(sym(b − a))`, the margin of `a ⪯_psd b`.
pub fn psd_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, OrderError> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(OrderError::Dimension {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    for m in [a, b] {
        let asym = asymmetry(m);
        if asym > SYMMETRY_TOL {
            return Err(OrderError::Asymmetric(asym));
        }
    }
    Ok(lambda_min_sym(&(b - a)))
}

/// `a ⪯_psd b` up to an additive eigenvalue slack `tol`.
pub fn psd_leq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<bool, OrderError> {
    Ok(psd_margin(a, b)? >= -tol)
}

/// A Gaussian law `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianWire", into = "GaussianWire")]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianWire {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianWire> for GaussianState {
    type Error = OrderError;

    fn try_from(w: GaussianWire) -> Result<Self, Self::Error> {
        let n = w.mean.len();
        if w.cov.len() != n {
            return Err(OrderError::Dimension {
                expected: n,
                got: w.cov.len(),
            });
        }
        if let Some(row) = w.cov.iter().find(|r| r.len() != n) {
            return Err(OrderError::Dimension {
                expected: n,
                got: row.len(),
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| w.cov[i][j]);
        GaussianState::new(DVector::from_vec(w.mean), cov)
    }
}

impl From<GaussianState> for GaussianWire {
    fn from(g: GaussianState) -> Self {
        let n = g.dim();
        GaussianWire {
            mean: g.mean.iter().copied().collect(),
            cov: (0..n).map(|i| (0..n).map(|j| g.cov[(i, j)]).collect()).collect(),
        }
    }
}

impl GaussianState {
    /// Validates symmetry (to `1e-12` relative to the largest entry, minimum
    /// scale 1) and numerical PSD (`λ_min ≥ −1e-9`).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, OrderError> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(OrderError::Dimension {
                expected: n,
                got: cov.nrows(),
            });
        }
        let scale = cov.abs().max().max(1.0);
        let asym = asymmetry(&cov);
        if asym > 1e-12 * scale {
            return Err(OrderError::Asymmetric(asym));
        }
        let lmin = lambda_min_sym(&cov);
        if lmin < -1e-9 {
            return Err(OrderError::NotPsd(lmin));
        }
        Ok(Self { mean, cov })
    }

    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self, OrderError> {
        let n = mean.len();
        if cov_row_major.len() != n * n {
            return Err(OrderError::Dimension {
                expected: n * n,
                got: cov_row_major.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(n, n, cov_row_major),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

fn same_dim(a: &GaussianState, b: &GaussianState, order: &OrthantOrder) -> Result<(), OrderError> {
    for d in [b.dim(), order.dim()] {
        if d != a.dim() {
            return Err(OrderError::Dimension {
                expected: a.dim(),
                got: d,
            });
        }
    }
    Ok(())
}

/// Exact criterion for the increasing (F_d) order between Gaussians: ordered
/// means and equal covariances (max-entry difference at most `tol`).
pub fn gaussian_fd_leq(
    a: &GaussianState,
    b: &GaussianState,
    order: &OrthantOrder,
    tol: f64,
) -> Result<bool, OrderError> {
    same_dim(a, b, order)?;
    let means = leq_cone(a.mean.as_slice(), b.mean.as_slice(), order, tol)?;
    Ok(means && (&a.cov - &b.cov).abs().max() <= tol)
}

/// Sufficient criterion for the increasing-convex (F_icx) order between
/// Gaussians: ordered means and `cov_a ⪯_psd cov_b`. A `false` result does
/// not refute the order.
pub fn gaussian_icx_leq(
    a: &GaussianState,
    b: &GaussianState,
    order: &OrthantOrder,
    tol: f64,
) -> Result<bool, OrderError> {
    same_dim(a, b, order)?;
    let means = leq_cone(a.mean.as_slice(), b.mean.as_slice(), order, tol)?;
    Ok(means && psd_leq(&a.cov, &b.cov, tol)?)
}
