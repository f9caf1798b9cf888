//! Central finite differences over the joint coordinates `ξ = (x, u)`.

use nalgebra::DMatrix;
use thiserror::Error;

use super::{EvalError, SystemModel};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stencil point {point:?} is not evaluable: {source}")]
pub struct FdError {
    pub point: Vec<f64>,
    #[source]
    pub source: EvalError,
}

/// `h_j = max(1, |ξ_j|)·ε^{1/3}`, rounded so that `ξ_j ± h_j` is exact.
pub(crate) fn first_order_step(v: f64) -> f64 {
    exact_step(v, f64::EPSILON.cbrt())
}

/// `h_j = max(1, |ξ_j|)·ε^{1/4}`.
pub(crate) fn second_order_step(v: f64) -> f64 {
    exact_step(v, f64::EPSILON.powf(0.25))
}

fn exact_step(v: f64, rel: f64) -> f64 {
    let h = v.abs().max(1.0) * rel;
    (v + h) - v
}

fn split(xi: &[f64], n: usize) -> (&[f64], &[f64]) {
    xi.split_at(n)
}

fn eval_at(system: &SystemModel, comp: usize, xi: &[f64]) -> Result<f64, FdError> {
    let (x, u) = split(xi, system.n());
    system.eval_component(comp, x, u).map_err(|source| FdError {
        point: xi.to_vec(),
        source,
    })
}

/// Gradient of a scalar function of `ξ` by central differences.
pub(crate) fn gradient_with<E>(f: &impl Fn(&[f64]) -> Result<f64, E>, xi: &[f64]) -> Result<Vec<f64>, E> {
    let mut p = xi.to_vec();
    let mut out = Vec::with_capacity(xi.len());
    for j in 0..xi.len() {
        let h = first_order_step(xi[j]);
        p[j] = xi[j] + h;
        let fp = f(&p)?;
        p[j] = xi[j] - h;
        let fm = f(&p)?;
        p[j] = xi[j];
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Symmetrized central-difference Hessian of a scalar function of `ξ`.
pub(crate) fn hessian_with<E>(f: &impl Fn(&[f64]) -> Result<f64, E>, xi: &[f64]) -> Result<DMatrix<f64>, E> {
    let d = xi.len();
    let h: Vec<f64> = xi.iter().map(|&v| second_order_step(v)).collect();
    let mut p = xi.to_vec();
    let f0 = f(&p)?;
    let mut hess = DMatrix::zeros(d, d);
    for j in 0..d {
        p[j] = xi[j] + h[j];
        let fp = f(&p)?;
        p[j] = xi[j] - h[j];
        let fm = f(&p)?;
        p[j] = xi[j];
        hess[(j, j)] = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
        for k in 0..j {
            let mut corner = |sj: f64, sk: f64| {
                p[j] = xi[j] + sj * h[j];
                p[k] = xi[k] + sk * h[k];
                let v = f(&p);
                p[j] = xi[j];
                p[k] = xi[k];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[k]);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }
    Ok(hess)
}

/// `n × (n+m)` Jacobian of `f` at `(x, u)`; input columns follow the state columns.
pub fn jacobian_fd(system: &SystemModel, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>, FdError> {
    let xi: Vec<f64> = x.iter().chain(u).copied().collect();
    let mut jac = DMatrix::zeros(system.n(), xi.len());
    for i in 0..system.n() {
        let row = gradient_with(&|p: &[f64]| eval_at(system, i, p), &xi)?;
        for (j, v) in row.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// `(n+m) × (n+m)` Hessian of component `i` of `f` at `(x, u)`. Exactly symmetric.
pub fn hessian_fd(system: &SystemModel, i: usize, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>, FdError> {
    let xi: Vec<f64> = x.iter().chain(u).copied().collect();
    hessian_with(&|p: &[f64]| eval_at(system, i, p), &xi)
}
