//! Itô diffusions `dX = f(X)dt + σ(X)dW`: Euler–Maruyama ensembles, the
//! structural order-propagation conditions on `(f, c = σσᵀ)`, and empirical
//! stochastic-order tests on samples.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    check_convexity, check_jacobian_metzler, lerp_box, run_samples, transform_system, CheckConfig, ClassifyError,
    Curvature, OrderClass, Verdict, Witness,
};
use crate::expr::{
    gradient_with, parse_expression, EvalError, Expr, Interval, ParseError, Symbol, SystemError, SystemModel,
    SystemSpec,
};
use crate::flow::{fmt17, grid, guard_box, inside, FlowError};
use crate::orders::{psd_margin, GaussianState, OrderError, OrthantOrder, Sign};
use crate::sampling::trial_rng;

#[derive(Debug, Error)]
pub enum StochError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("diffusion spec has no dispersion matrix")]
    MissingDispersion,
    #[error("diffusions take no inputs, got m = {0}")]
    HasInputs(usize),
    #[error("dispersion row {row} has {got} entries, expected {expected}")]
    DispersionShape { row: usize, expected: usize, got: usize },
    #[error("dispersion entry ({row}, {col}): {source}")]
    DispersionParse {
        row: usize,
        col: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Grid(#[from] FlowError),
    #[error("path budget must be at least 1")]
    NoPaths,
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("empirical tests support F_d and F_icx, not {0}")]
    UnsupportedClass(OrderClass),
    #[error("function budget must be at least 1")]
    NoFunctions,
}

/// Drift as an input-free [`SystemModel`] plus an `n × d` dispersion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion {
    drift: SystemModel,
    sigma: Vec<Vec<Expr>>,
}

impl Diffusion {
    pub fn from_parts(drift: SystemModel, sigma: Vec<Vec<Expr>>) -> Result<Self, StochError> {
        if drift.m() != 0 {
            return Err(StochError::HasInputs(drift.m()));
        }
        if sigma.len() != drift.n() {
            return Err(StochError::Dimension {
                expected: drift.n(),
                got: sigma.len(),
            });
        }
        let d = sigma[0].len();
        for (row, r) in sigma.iter().enumerate() {
            if r.len() != d || d == 0 {
                return Err(StochError::DispersionShape {
                    row,
                    expected: d.max(1),
                    got: r.len(),
                });
            }
        }
        Ok(Self { drift, sigma })
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self, StochError> {
        let rows = spec.dispersion.as_ref().ok_or(StochError::MissingDispersion)?;
        let drift = SystemModel::from_spec(&SystemSpec {
            dispersion: None,
            ..spec.clone()
        })?;
        let sigma = rows
            .iter()
            .enumerate()
            .map(|(row, r)| {
                r.iter()
                    .enumerate()
                    .map(|(col, text)| {
                        parse_expression(text, drift.signature()).map_err(|source| StochError::DispersionParse {
                            row,
                            col,
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(drift, sigma)
    }

    pub fn from_json(text: &str) -> Result<Self, StochError> {
        let spec: SystemSpec = serde_json::from_str(text).map_err(SystemError::from)?;
        Self::from_spec(&spec)
    }

    /// Convenience constructor for drift and dispersion given as strings.
    pub fn parse(
        f: &[&str],
        sigma: &[&[&str]],
        params: &[(&str, f64)],
        domain: Vec<Interval>,
    ) -> Result<Self, StochError> {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self::from_spec(&SystemSpec {
            n: f.len(),
            m: 0,
            f: owned(f),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            domain,
            input_box: vec![],
            dispersion: Some(sigma.iter().map(|r| owned(r)).collect()),
        })
    }

    pub fn to_spec(&self) -> SystemSpec {
        let mut spec = self.drift.to_spec();
        spec.dispersion = Some(
            self.sigma
                .iter()
                .map(|r| r.iter().map(ToString::to_string).collect())
                .collect(),
        );
        spec
    }

    pub fn n(&self) -> usize {
        self.drift.n()
    }

    /// Number of driving Brownian motions.
    pub fn noise_dim(&self) -> usize {
        self.sigma[0].len()
    }

    pub fn drift(&self) -> &SystemModel {
        &self.drift
    }

    pub fn dispersion(&self) -> &[Vec<Expr>] {
        &self.sigma
    }

    pub fn sigma_at(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let p = self.drift.point(x, &[]);
        let mut s = DMatrix::zeros(self.n(), self.noise_dim());
        for (i, row) in self.sigma.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                s[(i, j)] = e.evaluate(&p)?;
            }
        }
        Ok(s)
    }

    /// `c(x) = σ(x)σ(x)ᵀ`.
    pub fn diffusion_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let s = self.sigma_at(x)?;
        Ok(&s * s.transpose())
    }

    /// The diffusion of `Y = T·X`: drift `T f(T y)`, dispersion `T σ(T y)`.
    pub fn transformed(&self, order: &OrthantOrder) -> Result<Diffusion, OrderError> {
        let drift = transform_system(&self.drift, order)?;
        if order.is_standard() {
            return Ok(Self {
                drift,
                sigma: self.sigma.clone(),
            });
        }
        let flip = |sym: &Symbol| match sym {
            Symbol::State(j) if order.eps[*j] == Sign::Minus => Expr::state(*j).negated(),
            _ => Expr::Sym(sym.clone()),
        };
        let sigma = self
            .sigma
            .iter()
            .zip(&order.eps)
            .map(|(row, s)| {
                row.iter()
                    .map(|e| {
                        let g = e.substitute(&flip);
                        match s {
                            Sign::Plus => g,
                            Sign::Minus => g.negated(),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { drift, sigma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Extra observation times, snapped to the step grid. The terminal time is
    /// always recorded.
    #[serde(default)]
    pub record: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PathStatus {
    Ok,
    BlowUp { time: f64 },
    NonFinite { time: f64 },
    EvalFailed { time: f64, message: String },
}

/// Sampled paths at the recorded times; aborted paths hold NaN after the abort.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// `states[time][path][coordinate]`.
    pub states: Vec<Vec<Vec<f64>>>,
    pub status: Vec<PathStatus>,
    pub seed: u64,
}

impl Ensemble {
    pub fn paths(&self) -> usize {
        self.status.len()
    }

    pub fn aborted(&self) -> usize {
        self.status.iter().filter(|s| **s != PathStatus::Ok).count()
    }

    /// States of the completed paths at record index `k`.
    pub fn completed_at(&self, k: usize) -> Vec<Vec<f64>> {
        self.states[k]
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| **s == PathStatus::Ok)
            .map(|(x, _)| x.clone())
            .collect()
    }

    pub fn terminal(&self) -> Vec<Vec<f64>> {
        self.completed_at(self.times.len() - 1)
    }

    /// CSV `path,t,x1..xn`, ordered by path then time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().and_then(|s| s.first()).map_or(0, Vec::len);
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        writeln!(w, "{}", header.join(","))?;
        for p in 0..self.paths() {
            for (k, t) in self.times.iter().enumerate() {
                write!(w, "{p},{}", fmt17(*t))?;
                for v in &self.states[k][p] {
                    write!(w, ",{}", fmt17(*v))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// `x_{k+1} = x_k + f(x_k)h + σ(x_k)·√h·ξ_k` with one ChaCha stream per path.
pub fn euler_maruyama(diff: &Diffusion, x0: &[f64], cfg: &EmConfig) -> Result<Ensemble, StochError> {
    let n = diff.n();
    if x0.len() != n {
        return Err(StochError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !diff.drift.in_domain(x0) {
        return Err(FlowError::OutsideDomain(x0.to_vec()).into());
    }
    if cfg.paths == 0 {
        return Err(StochError::NoPaths);
    }
    let (steps, h) = grid(cfg.horizon, cfg.dt)?;
    let mut marks: Vec<usize> = cfg
        .record
        .iter()
        .map(|t| ((t / h).round().max(0.0) as usize).min(steps))
        .chain([steps])
        .collect();
    marks.sort_unstable();
    marks.dedup();
    let guard = guard_box(diff.drift.domain());
    let sqrt_h = h.sqrt();
    let d = diff.noise_dim();

    let runs: Vec<(Vec<Vec<f64>>, PathStatus)> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = trial_rng(cfg.seed, p as u64);
            let mut x = x0.to_vec();
            let mut fx = vec![0.0; n];
            let mut xi = DVector::zeros(d);
            let mut rec = Vec::with_capacity(marks.len());
            let mut next = 0;
            if marks[0] == 0 {
                rec.push(x.clone());
                next = 1;
            }
            let mut status = PathStatus::Ok;
            for k in 0..steps {
                let t = k as f64 * h;
                let step = diff.drift.eval_into(&x, &[], &mut fx).and_then(|_| diff.sigma_at(&x));
                let s = match step {
                    Ok(s) => s,
                    Err(e) => {
                        status = PathStatus::EvalFailed {
                            time: t,
                            message: e.to_string(),
                        };
                        break;
                    }
                };
                for z in xi.iter_mut() {
                    *z = rng.sample::<f64, _>(StandardNormal);
                }
                let noise = s * &xi;
                for j in 0..n {
                    x[j] += fx[j] * h + noise[j] * sqrt_h;
                }
                let t_next = (k + 1) as f64 * h;
                if x.iter().any(|v| !v.is_finite()) {
                    status = PathStatus::NonFinite { time: t_next };
                    break;
                }
                if !inside(&guard, &x) {
                    status = PathStatus::BlowUp { time: t_next };
                    break;
                }
                if next < marks.len() && marks[next] == k + 1 {
                    rec.push(x.clone());
                    next += 1;
                }
            }
            rec.resize(marks.len(), vec![f64::NAN; n]);
            (rec, status)
        })
        .collect();

    let mut states = vec![Vec::with_capacity(cfg.paths); marks.len()];
    let mut status = Vec::with_capacity(cfg.paths);
    for (rec, s) in runs {
        for (k, x) in rec.into_iter().enumerate() {
            states[k].push(x);
        }
        status.push(s);
    }
    Ok(Ensemble {
        times: marks.iter().map(|k| *k as f64 * h).collect(),
        states,
        status,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVerdict {
    pub name: String,
    pub verdict: Verdict,
}

/// A conjunction of named sub-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub checks: Vec<NamedVerdict>,
}

impl ConditionReport {
    fn new(checks: Vec<(&str, Verdict)>) -> Self {
        Self {
            passed: checks.iter().all(|(_, v)| v.passed),
            checks: checks
                .into_iter()
                .map(|(name, verdict)| NamedVerdict {
                    name: name.into(),
                    verdict,
                })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.checks.iter().find(|c| c.name == name).map(|c| &c.verdict)
    }
}

fn c_entry(diff: &Diffusion, i: usize, j: usize, x: &[f64]) -> Result<f64, EvalError> {
    let p = diff.drift.point(x, &[]);
    let mut acc = 0.0;
    for (a, b) in diff.sigma[i].iter().zip(&diff.sigma[j]) {
        acc += a.evaluate(&p)? * b.evaluate(&p)?;
    }
    Ok(acc)
}

/// Drift off-diagonal monotonicity plus: every `c̃_ij` of the transformed
/// diffusion depends only on `x_i` and `x_j` (`|∂c̃_ij/∂x_k| ≤ tol`).
pub fn check_fd_diffusion_conditions(
    diff: &Diffusion,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<ConditionReport, ClassifyError> {
    let drift = check_jacobian_metzler(&diff.drift, order, cfg)?;
    let td = diff.transformed(order)?;
    let n = td.n();
    let dependence = run_samples(cfg, n, |k, r| {
        let x = lerp_box(td.drift.domain(), r);
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let grad = gradient_with(&|p: &[f64]| c_entry(&td, i, j, p), &x)
                    .map_err(|e| ClassifyError::eval(k, x.clone(), e))?;
                let worst = (0..n)
                    .filter(|&l| l != i && l != j)
                    .map(|l| (l, grad[l]))
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
                if let Some((l, g)) = worst {
                    if g.abs() > cfg.tol {
                        out.push(Witness {
                            sample: k,
                            component: i,
                            point: x.clone(),
                            pair: None,
                            quantity: format!("dc{}{}/dx{}", i + 1, j + 1, l + 1),
                            value: g,
                        });
                    }
                }
            }
        }
        Ok(out)
    })?;
    Ok(ConditionReport::new(vec![
        ("drift_monotone", drift),
        ("dispersion_dependence", dependence),
    ]))
}

/// Drift monotone and convex; `c̃ = σ̃σ̃ᵀ` increasing and midpoint-convex in
/// the PSD order.
pub fn check_icx_diffusion_conditions(
    diff: &Diffusion,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<ConditionReport, ClassifyError> {
    let monotone = check_jacobian_metzler(&diff.drift, order, cfg)?;
    let convex = check_convexity(&diff.drift, order, cfg, Curvature::Convex)?;
    let td = diff.transformed(order)?;
    let n = td.n();
    let dom = td.drift.domain();
    let c_at = |k: usize, x: &[f64]| {
        td.diffusion_matrix(x)
            .map_err(|e| ClassifyError::eval(k, x.to_vec(), e))
    };

    let increasing = run_samples(cfg, 2 * n, |k, r| {
        let x = lerp_box(dom, &r[..n]);
        let y: Vec<f64> = dom
            .iter()
            .zip(&x)
            .zip(&r[n..])
            .map(|((iv, xj), t)| (xj + t * (iv.hi - xj)).min(iv.hi))
            .collect();
        let margin = psd_margin(&c_at(k, &x)?, &c_at(k, &y)?)?;
        Ok(if margin < -cfg.tol {
            vec![Witness {
                sample: k,
                component: 0,
                point: x,
                pair: Some(y),
                quantity: "lambda_min(c(y) - c(x))".into(),
                value: margin,
            }]
        } else {
            Vec::new()
        })
    })?;

    let midpoint = run_samples(cfg, 2 * n, |k, r| {
        let a = lerp_box(dom, &r[..n]);
        let b = lerp_box(dom, &r[n..]);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        let chord = (c_at(k, &a)? + c_at(k, &b)?) * 0.5;
        let margin = psd_margin(&c_at(k, &mid)?, &chord)?;
        Ok(if margin < -cfg.tol {
            vec![Witness {
                sample: k,
                component: 0,
                point: a,
                pair: Some(b),
                quantity: "lambda_min((c(a) + c(b))/2 - c(mid))".into(),
                value: margin,
            }]
        } else {
            Vec::new()
        })
    })?;

    Ok(ConditionReport::new(vec![
        ("drift_monotone", monotone),
        ("drift_convex", convex),
        ("dispersion_psd_increasing", increasing),
        ("dispersion_psd_midpoint_convex", midpoint),
    ]))
}

/// Random increasing test functions of `T·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `max_k (a_k·y + b_k)` with `a_k ⪰ 0`: increasing and convex.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
    },
    /// `∏_j 1/(1 + exp(−s_j (y_j − c_j)))` over a subset of coordinates: increasing and bounded.
    SigmoidProduct {
        coords: Vec<usize>,
        slopes: Vec<f64>,
        centers: Vec<f64>,
    },
}

impl TestFunction {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            TestFunction::MaxAffine { slopes, intercepts } => slopes
                .iter()
                .zip(intercepts)
                .map(|(a, b)| a.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() + b)
                .fold(f64::NEG_INFINITY, f64::max),
            TestFunction::SigmoidProduct {
                coords,
                slopes,
                centers,
            } => coords
                .iter()
                .zip(slopes)
                .zip(centers)
                .map(|((&j, s), c)| 1.0 / (1.0 + (-s * (y[j] - c)).exp()))
                .product(),
        }
    }
}

pub const MAX_AFFINE_PIECES: usize = 5;

/// Spread of the pooled transformed samples, used to place sigmoid centres.
struct Spread {
    lo: Vec<f64>,
    hi: Vec<f64>,
    sd: Vec<f64>,
}

fn spread(samples: &[&[Vec<f64>]], n: usize) -> Spread {
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut count = 0.0;
    for set in samples {
        for y in set.iter() {
            for j in 0..n {
                lo[j] = lo[j].min(y[j]);
                hi[j] = hi[j].max(y[j]);
                sum[j] += y[j];
                sq[j] += y[j] * y[j];
            }
            count += 1.0;
        }
    }
    let sd = (0..n)
        .map(|j| {
            let mean = sum[j] / count;
            (sq[j] / count - mean * mean).max(0.0).sqrt()
        })
        .collect();
    Spread { lo, hi, sd }
}

fn draw_function(class: OrderClass, n: usize, spread: &Spread, seed: u64, index: usize) -> TestFunction {
    let mut rng = trial_rng(seed, index as u64);
    match class {
        OrderClass::Fd => {
            let mut coords: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
            if coords.is_empty() {
                coords.push(rng.random_range(0..n));
            }
            let mut slopes = Vec::with_capacity(coords.len());
            let mut centers = Vec::with_capacity(coords.len());
            for &j in &coords {
                let kappa = rng.random_range(0.5..4.0);
                let sd = if spread.sd[j] > 0.0 { spread.sd[j] } else { 1.0 };
                slopes.push(kappa / sd);
                let r = rng.random_range(0.2..0.8);
                centers.push(spread.lo[j] + r * (spread.hi[j] - spread.lo[j]));
            }
            TestFunction::SigmoidProduct {
                coords,
                slopes,
                centers,
            }
        }
        _ => TestFunction::MaxAffine {
            slopes: (0..MAX_AFFINE_PIECES)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect(),
            intercepts: (0..MAX_AFFINE_PIECES).map(|_| rng.random::<f64>()).collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionMargin {
    pub function: TestFunction,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Pooled standard error of `mean_b − mean_a`.
    pub se: f64,
    /// `mean_b − mean_a`.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVerdict {
    pub class: OrderClass,
    pub passed: bool,
    pub functions: usize,
    pub violations: usize,
    /// Index of the function with the smallest `margin + 3·se`.
    pub worst: usize,
    pub margins: Vec<FunctionMargin>,
}

/// Absolute slack when both samples are degenerate.
pub const DEGENERATE_TOL: f64 = 1e-9;

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Necessary-condition test of `A ≤ B` in `class`: draws `n_functions` test
/// functions and requires `mean g(B) − mean g(A) ≥ −3·SE` for each.
pub fn empirical_order_test(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    order: &OrthantOrder,
    class: OrderClass,
    n_functions: usize,
    seed: u64,
) -> Result<EmpiricalVerdict, StochError> {
    if !matches!(class, OrderClass::Fd | OrderClass::Icx) {
        return Err(StochError::UnsupportedClass(class));
    }
    if n_functions == 0 {
        return Err(StochError::NoFunctions);
    }
    if a.is_empty() || b.is_empty() {
        return Err(StochError::EmptyEnsemble);
    }
    let n = order.dim();
    for x in a.iter().chain(b) {
        if x.len() != n {
            return Err(StochError::Dimension {
                expected: n,
                got: x.len(),
            });
        }
    }
    let ta: Vec<Vec<f64>> = a.iter().map(|x| order.apply(x)).collect();
    let tb: Vec<Vec<f64>> = b.iter().map(|x| order.apply(x)).collect();
    let sp = spread(&[&ta, &tb], n);

    let margins: Vec<FunctionMargin> = (0..n_functions)
        .into_par_iter()
        .map(|idx| {
            let g = draw_function(class, n, &sp, seed, idx);
            let ga: Vec<f64> = ta.iter().map(|y| g.eval(y)).collect();
            let gb: Vec<f64> = tb.iter().map(|y| g.eval(y)).collect();
            let (mean_a, var_a) = mean_var(&ga);
            let (mean_b, var_b) = mean_var(&gb);
            let se = (var_a / ga.len() as f64 + var_b / gb.len() as f64).sqrt();
            let margin = mean_b - mean_a;
            let slack = if se > 0.0 { 3.0 * se } else { DEGENERATE_TOL };
            FunctionMargin {
                function: g,
                mean_a,
                mean_b,
                se,
                margin,
                passed: margin >= -slack,
            }
        })
        .collect();

    let violations = margins.iter().filter(|m| !m.passed).count();
    let worst = margins
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1.margin + 3.0 * x.1.se).total_cmp(&(y.1.margin + 3.0 * y.1.se)))
        .map_or(0, |(i, _)| i);
    Ok(EmpiricalVerdict {
        class,
        passed: violations == 0,
        functions: n_functions,
        violations,
        worst,
        margins,
    })
}

/// Draws `count` samples of `N(mean, cov)` through a symmetric square root of
/// `cov`. Sample `i` uses stream `i`, so two states sampled with one seed
/// share their standard-normal draws.
pub fn sample_gaussian(state: &GaussianState, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = state.dim();
    let eig = SymmetricEigen::new(state.cov().clone());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            (state.mean() + &root * z).iter().copied().collect()
        })
        .collect()
}
