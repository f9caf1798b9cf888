//! Reaction networks and their linear noise approximation.
//!
//! A network with stoichiometry `S` and rates `v(x)` has mean dynamics
//! `ẋ = S v(x)` and Gaussian fluctuations `dη = J(x)η dt + S V(x) dW` with
//! `V = diag(√v)`. The moments are propagated jointly:
//!
//! ```text
//! m' = S v(m)
//! Σ' = JΣ + ΣJᵀ + S diag(v(m)) Sᵀ
//! ```
//!
//! For unimolecular networks `S v(x) = A x` and `J = A`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::OrderClass;
use crate::expr::{
    jacobian_fd, parse_expression, BinOp, EvalError, Expr, FdError, Func, Interval, ParseError, Point, Signature,
    Symbol, SystemError, SystemModel,
};
use crate::flow::{fmt17, grid, FlowError};
use crate::orders::{
    cone_margin, gaussian_fd_leq, gaussian_icx_leq, psd_margin, GaussianState, OrderError, OrthantOrder,
};
use crate::sampling::Halton;
use crate::stoch::{Diffusion, StochError};

#[derive(Debug, Error)]
pub enum LnaError {
    #[error("invalid network JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network has no species")]
    NoSpecies,
    #[error("reaction {reaction}: change vector has {got} entries, expected {expected}")]
    ChangeLength {
        reaction: usize,
        expected: usize,
        got: usize,
    },
    #[error("reaction {reaction}: {source}")]
    Rate {
        reaction: usize,
        #[source]
        source: ParseError,
    },
    #[error("reaction {reaction}: rate is negative ({value}) at {point:?}")]
    NegativeRateAtLoad {
        reaction: usize,
        value: f64,
        point: Vec<f64>,
    },
    #[error("network is not unimolecular: {0}")]
    NotUnimolecular(String),
    #[error("initial mean {0:?} is outside the nonnegative orthant")]
    NegativeMean(Vec<f64>),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("reaction {reaction} has negative rate {value} at t = {time}")]
    NegativeRate { time: f64, reaction: usize, value: f64 },
    #[error("evaluation failed at t = {time}: {source}")]
    Evaluation {
        time: f64,
        #[source]
        source: EvalError,
    },
    #[error("jacobian failed at t = {time}: {source}")]
    Jacobian {
        time: f64,
        #[source]
        source: FdError,
    },
    #[error(transparent)]
    Grid(#[from] FlowError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Stoch(#[from] StochError),
    #[error("LNA comparisons support F_d and F_icx, not {0}")]
    UnsupportedClass(OrderClass),
}

/// Wire form: `{"species": [...], "reactions": [{"change": [...], "rate": "..."}], "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub species: Vec<String>,
    pub reactions: Vec<ReactionSpec>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    pub change: Vec<i64>,
    pub rate: String,
}

/// Shape of a reaction read off its change vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReactionKind {
    Degradation { species: usize },
    Conversion { from: usize, to: usize },
    Birth { species: usize },
    Other,
}

impl ReactionKind {
    fn of(change: &[i64]) -> Self {
        let nz: Vec<(usize, i64)> = change.iter().copied().enumerate().filter(|(_, c)| *c != 0).collect();
        match nz.as_slice() {
            [(i, -1)] => ReactionKind::Degradation { species: *i },
            [(i, 1)] => ReactionKind::Birth { species: *i },
            [(i, -1), (j, 1)] => ReactionKind::Conversion { from: *i, to: *j },
            [(j, 1), (i, -1)] => ReactionKind::Conversion { from: *i, to: *j },
            _ => ReactionKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub change: Vec<i64>,
    pub rate: Expr,
    pub kind: ReactionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    signature: Signature,
    param_values: Vec<f64>,
}

/// Sample points for the load-time rate check: `r/(1−r)` maps the unit cube
/// onto the nonnegative orthant across several orders of magnitude.
const RATE_CHECK_POINTS: u64 = 256;

impl ReactionNetwork {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, LnaError> {
        let n = spec.species.len();
        if n == 0 {
            return Err(LnaError::NoSpecies);
        }
        let signature = Signature::new(n, 0, spec.params.keys().cloned().collect());
        let reactions = spec
            .reactions
            .iter()
            .enumerate()
            .map(|(reaction, r)| {
                if r.change.len() != n {
                    return Err(LnaError::ChangeLength {
                        reaction,
                        expected: n,
                        got: r.change.len(),
                    });
                }
                let rate =
                    parse_expression(&r.rate, &signature).map_err(|source| LnaError::Rate { reaction, source })?;
                Ok(Reaction {
                    change: r.change.clone(),
                    rate,
                    kind: ReactionKind::of(&r.change),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let net = Self {
            species: spec.species.clone(),
            reactions,
            signature,
            param_values: spec.params.values().copied().collect(),
        };
        net.check_rates_nonnegative()?;
        Ok(net)
    }

    pub fn from_json(text: &str) -> Result<Self, LnaError> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            species: self.species.clone(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionSpec {
                    change: r.change.clone(),
                    rate: r.rate.to_string(),
                })
                .collect(),
            params: self
                .signature
                .params
                .iter()
                .cloned()
                .zip(self.param_values.iter().copied())
                .collect(),
        }
    }

    fn check_rates_nonnegative(&self) -> Result<(), LnaError> {
        let n = self.n();
        let halton = Halton::new(n.min(40), 0);
        let origin = std::iter::once(vec![0.0; n]);
        let cloud = (0..RATE_CHECK_POINTS).map(|k| {
            let p = halton.point(k);
            (0..n)
                .map(|i| {
                    let r = p[i % p.len()];
                    r / (1.0 - r)
                })
                .collect::<Vec<f64>>()
        });
        for x in origin.chain(cloud) {
            for (reaction, v) in self.reactions.iter().enumerate() {
                // Points where a rate is undefined are skipped; only finite
                // negative values are rejected.
                if let Ok(value) = v.rate.evaluate(&self.point(&x)) {
                    if value < 0.0 {
                        return Err(LnaError::NegativeRateAtLoad {
                            reaction,
                            value,
                            point: x,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn param_values(&self) -> &[f64] {
        &self.param_values
    }

    fn point<'a>(&'a self, x: &'a [f64]) -> Point<'a> {
        Point {
            x,
            u: &[],
            params: &self.param_values,
        }
    }

    /// `n × R` stoichiometry matrix.
    pub fn stoichiometry(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.reactions.len(), |i, j| {
            self.reactions[j].change[i] as f64
        })
    }

    pub fn rates(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let p = self.point(x);
        self.reactions.iter().map(|r| r.rate.evaluate(&p)).collect()
    }

    /// `S v(x)`.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let v = self.rates(x)?;
        Ok((0..self.n())
            .map(|i| {
                self.reactions
                    .iter()
                    .zip(&v)
                    .map(|(r, vj)| r.change[i] as f64 * vj)
                    .sum()
            })
            .collect())
    }

    fn drift_exprs(&self) -> Vec<Expr> {
        (0..self.n())
            .map(|i| {
                let terms: Vec<Expr> = self
                    .reactions
                    .iter()
                    .filter(|r| r.change[i] != 0)
                    .map(|r| scale(r.change[i] as f64, r.rate.clone()))
                    .collect();
                sum(terms)
            })
            .collect()
    }

    /// `ẋ = S v(x)` as a vector field on `domain`.
    pub fn drift_system(&self, domain: Vec<Interval>) -> Result<SystemModel, SystemError> {
        SystemModel::from_parts(
            self.signature.clone(),
            self.drift_exprs(),
            self.param_values.clone(),
            domain,
            vec![],
        )
    }

    /// `S diag(√v(x))`; a single zero column when there are no reactions.
    fn langevin_sigma(&self) -> Vec<Vec<Expr>> {
        if self.reactions.is_empty() {
            return vec![vec![Expr::num(0.0)]; self.n()];
        }
        (0..self.n())
            .map(|i| {
                self.reactions
                    .iter()
                    .map(|r| match r.change[i] {
                        0 => Expr::num(0.0),
                        c => scale(c as f64, Expr::Call(Func::Sqrt, Box::new(r.rate.clone()))),
                    })
                    .collect()
            })
            .collect()
    }

    /// The chemical Langevin structure: drift `S v(x)`, dispersion `S diag(√v(x))`.
    pub fn langevin_diffusion(&self, domain: Vec<Interval>) -> Result<Diffusion, LnaError> {
        Ok(Diffusion::from_parts(
            self.drift_system(domain)?,
            self.langevin_sigma(),
        )?)
    }

    /// The mean path and the fluctuation SDE as one diffusion in `(x, η)`:
    /// `dx = A x dt`, `dη = A η dt + S V(x) dW`. Unimolecular networks only.
    pub fn fluctuation_diffusion(&self, x_box: Vec<Interval>, eta_box: Vec<Interval>) -> Result<Diffusion, LnaError> {
        let a = build_a(self)?;
        let n = self.n();
        let signature = Signature::new(2 * n, 0, self.signature.params.clone());
        let linear = |offset: usize, i: usize| {
            sum((0..n)
                .filter(|&k| a[(i, k)] != 0.0)
                .map(|k| scale(a[(i, k)], Expr::state(offset + k)))
                .collect())
        };
        let f: Vec<Expr> = (0..n)
            .map(|i| linear(0, i))
            .chain((0..n).map(|i| linear(n, i)))
            .collect();
        let mut domain = x_box;
        domain.extend(eta_box);
        let drift = SystemModel::from_parts(signature, f, self.param_values.clone(), domain, vec![])?;
        let eta_rows = self.langevin_sigma();
        let mut sigma = vec![vec![Expr::num(0.0); eta_rows[0].len()]; n];
        sigma.extend(eta_rows);
        Ok(Diffusion::from_parts(drift, sigma)?)
    }
}

fn scale(c: f64, e: Expr) -> Expr {
    if c == 1.0 {
        e
    } else if c == -1.0 {
        e.negated()
    } else {
        Expr::bin(BinOp::Mul, Expr::num(c), e)
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|acc, t| Expr::bin(BinOp::Add, acc, t))
        .unwrap_or(Expr::num(0.0))
}

/// If `e` is a constant times a single state variable, returns both.
fn linear_monomial(e: &Expr, params: &Point<'_>) -> Option<(usize, f64)> {
    let constant = |e: &Expr| {
        if e.is_constant() {
            e.evaluate(params).ok()
        } else {
            None
        }
    };
    match e {
        Expr::Sym(Symbol::State(i)) => Some((*i, 1.0)),
        Expr::Neg(inner) => linear_monomial(inner, params).map(|(i, c)| (i, -c)),
        Expr::Bin(BinOp::Mul, a, b) => {
            if let Some(c) = constant(a) {
                linear_monomial(b, params).map(|(i, k)| (i, c * k))
            } else {
                let c = constant(b)?;
                linear_monomial(a, params).map(|(i, k)| (i, c * k))
            }
        }
        Expr::Bin(BinOp::Div, a, b) => {
            let c = constant(b)?;
            linear_monomial(a, params).map(|(i, k)| (i, k / c))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub holds: bool,
    pub reason: String,
}

/// Rate constant of every reaction, or the reason the network is not unimolecular.
fn unimolecular_constants(net: &ReactionNetwork) -> Result<Vec<f64>, String> {
    let zeros = vec![0.0; net.n()];
    let p = net.point(&zeros);
    net.reactions
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let consumed = match r.kind {
                ReactionKind::Degradation { species } => species,
                ReactionKind::Conversion { from, .. } => from,
                ReactionKind::Birth { .. } => return Err(format!("reaction {j} is a birth reaction")),
                ReactionKind::Other => return Err(format!("reaction {j} is neither a degradation nor a conversion")),
            };
            match linear_monomial(&r.rate, &p) {
                Some((i, k)) if i == consumed && k > 0.0 => Ok(k),
                Some((i, _)) if i != consumed => Err(format!(
                    "reaction {j} consumes x{} but its rate is proportional to x{}",
                    consumed + 1,
                    i + 1
                )),
                Some((_, k)) => Err(format!("reaction {j} has non-positive rate constant {k}")),
                None => Err(format!(
                    "reaction {j} rate `{}` is not a constant times x{}",
                    r.rate,
                    consumed + 1
                )),
            }
        })
        .collect()
}

/// True iff every reaction is a degradation or a conversion whose rate is a
/// positive constant times the consumed species.
pub fn is_unimolecular(net: &ReactionNetwork) -> StructureCheck {
    match unimolecular_constants(net) {
        Ok(_) => StructureCheck {
            holds: true,
            reason: format!("all {} reactions are unimolecular", net.reactions.len()),
        },
        Err(reason) => StructureCheck { holds: false, reason },
    }
}

/// The matrix `A` with `S v(x) = A x`.
pub fn build_a(net: &ReactionNetwork) -> Result<DMatrix<f64>, LnaError> {
    let ks = unimolecular_constants(net).map_err(LnaError::NotUnimolecular)?;
    let mut a = DMatrix::zeros(net.n(), net.n());
    for (r, k) in net.reactions.iter().zip(ks) {
        match r.kind {
            ReactionKind::Degradation { species } => a[(species, species)] -= k,
            ReactionKind::Conversion { from, to } => {
                a[(from, from)] -= k;
                a[(to, from)] += k;
            }
            _ => unreachable!("checked by unimolecular_constants"),
        }
    }
    Ok(a)
}

/// True iff every reaction's rate depends only on the species it changes
/// (at most one), i.e. `S v(x) = w(x)` with `w_i` a function of `x_i`.
/// The order is only validated against the network dimension.
pub fn check_birth_death_structure(net: &ReactionNetwork, order: &OrthantOrder) -> Result<StructureCheck, LnaError> {
    order.check_dims(net.n(), 0)?;
    for (j, r) in net.reactions.iter().enumerate() {
        let deps = r.rate.state_dependencies();
        for (i, c) in r.change.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            if let Some(k) = deps.iter().find(|&&k| k != i) {
                return Ok(StructureCheck {
                    holds: false,
                    reason: format!("reaction {j} changes x{} but its rate depends on x{}", i + 1, k + 1),
                });
            }
        }
    }
    Ok(StructureCheck {
        holds: true,
        reason: "every rate depends only on the species it changes".into(),
    })
}

/// Mean and covariance on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTrajectory {
    pub times: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

impl GaussianTrajectory {
    pub fn state(&self, k: usize) -> Result<GaussianState, OrderError> {
        GaussianState::new(self.means[k].clone(), self.covs[k].clone())
    }

    /// CSV `t,m1..mn,S11,S12,...,Snn` with the full covariance in row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.means.first().map_or(0, |m| m.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("m{i}")));
        for i in 1..=n {
            header.extend((1..=n).map(|j| format!("S{i}{j}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for ((t, m), s) in self.times.iter().zip(&self.means).zip(&self.covs) {
            write!(w, "{}", fmt17(*t))?;
            for v in m.iter() {
                write!(w, ",{}", fmt17(*v))?;
            }
            for i in 0..n {
                for j in 0..n {
                    write!(w, ",{}", fmt17(s[(i, j)]))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct MomentField<'a> {
    net: &'a ReactionNetwork,
    s: DMatrix<f64>,
    a: Option<DMatrix<f64>>,
    drift_sys: SystemModel,
}

impl MomentField<'_> {
    fn rhs(&self, t: f64, m: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), LnaError> {
        let v = self
            .net
            .rates(m.as_slice())
            .map_err(|source| LnaError::Evaluation { time: t, source })?;
        if let Some((reaction, value)) = v.iter().copied().enumerate().find(|(_, v)| *v < 0.0) {
            return Err(LnaError::NegativeRate {
                time: t,
                reaction,
                value,
            });
        }
        let v = DVector::from_vec(v);
        let dm = &self.s * &v;
        let j = match &self.a {
            Some(a) => a.clone(),
            None => jacobian_fd(&self.drift_sys, m.as_slice(), &[])
                .map_err(|source| LnaError::Jacobian { time: t, source })?,
        };
        let noise = &self.s * DMatrix::from_diagonal(&v) * self.s.transpose();
        let dcov = &j * cov + cov * j.transpose() + noise;
        Ok((dm, dcov))
    }
}

/// RK4 on the joint moment equations. The covariance is re-symmetrized after
/// every step.
pub fn lna_moments(
    net: &ReactionNetwork,
    initial: &GaussianState,
    horizon: f64,
    dt: f64,
) -> Result<GaussianTrajectory, LnaError> {
    let n = net.n();
    if initial.dim() != n {
        return Err(LnaError::Dimension {
            expected: n,
            got: initial.dim(),
        });
    }
    if initial.mean().iter().any(|v| *v < 0.0) {
        return Err(LnaError::NegativeMean(initial.mean().iter().copied().collect()));
    }
    let (steps, h) = grid(horizon, dt)?;
    let field = MomentField {
        net,
        s: net.stoichiometry(),
        a: build_a(net).ok(),
        drift_sys: net.drift_system(vec![Interval::new(0.0, 1.0); n])?,
    };

    let mut m = initial.mean().clone();
    let mut cov = initial.cov().clone();
    let mut out = GaussianTrajectory {
        times: vec![0.0],
        means: vec![m.clone()],
        covs: vec![cov.clone()],
    };
    for step in 0..steps {
        let t = step as f64 * h;
        let (k1m, k1c) = field.rhs(t, &m, &cov)?;
        let (k2m, k2c) = field.rhs(t + 0.5 * h, &(&m + &k1m * (0.5 * h)), &(&cov + &k1c * (0.5 * h)))?;
        let (k3m, k3c) = field.rhs(t + 0.5 * h, &(&m + &k2m * (0.5 * h)), &(&cov + &k2c * (0.5 * h)))?;
        let (k4m, k4c) = field.rhs(t + h, &(&m + &k3m * h), &(&cov + &k3c * h))?;
        m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
        cov += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (h / 6.0);
        cov = (&cov + cov.transpose()) * 0.5;
        out.times.push((step + 1) as f64 * h);
        out.means.push(m.clone());
        out.covs.push(cov.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    /// The network is of a type for which the class is known to propagate.
    WithinGuarantee,
    OutsideGuarantee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub t: f64,
    /// `min_i T_i (m_b − m_a)_i`.
    pub mean_margin: f64,
    /// `λ_min(Σ_b − Σ_a)` for F_icx, `−max|Σ_b − Σ_a|` for F_d.
    pub cov_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnaVerdict {
    pub class: OrderClass,
    pub guarantee: Guarantee,
    pub reason: String,
    pub passed: bool,
    pub tol: f64,
    pub first_violation: Option<f64>,
    pub trace: Vec<ComparisonPoint>,
}

#[derive(Debug, Clone)]
pub struct LnaComparison {
    pub verdict: LnaVerdict,
    pub a: GaussianTrajectory,
    pub b: GaussianTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnaConfig {
    pub horizon: f64,
    pub dt: f64,
    pub tol: f64,
}

impl Default for LnaConfig {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            dt: 5e-3,
            tol: 1e-8,
        }
    }
}

/// Propagates both initial laws and applies the Gaussian criterion of `class`
/// at every grid time.
pub fn compare_lna(
    net: &ReactionNetwork,
    a: &GaussianState,
    b: &GaussianState,
    order: &OrthantOrder,
    class: OrderClass,
    cfg: &LnaConfig,
) -> Result<LnaComparison, LnaError> {
    order.check_dims(net.n(), 0)?;
    let (guarantee, reason) = match class {
        OrderClass::Icx => {
            let u = is_unimolecular(net);
            (
                if u.holds {
                    Guarantee::WithinGuarantee
                } else {
                    Guarantee::OutsideGuarantee
                },
                u.reason,
            )
        }
        OrderClass::Fd => {
            let bd = check_birth_death_structure(net, order)?;
            (
                if bd.holds {
                    Guarantee::WithinGuarantee
                } else {
                    Guarantee::OutsideGuarantee
                },
                bd.reason,
            )
        }
        other => return Err(LnaError::UnsupportedClass(other)),
    };
    let (tol, horizon, dt) = (cfg.tol, cfg.horizon, cfg.dt);
    let ta = lna_moments(net, a, horizon, dt)?;
    let tb = lna_moments(net, b, horizon, dt)?;

    let mut trace = Vec::with_capacity(ta.times.len());
    let mut first_violation = None;
    for k in 0..ta.times.len() {
        let (sa, sb) = (ta.state(k)?, tb.state(k)?);
        let mean_margin = cone_margin(sa.mean().as_slice(), sb.mean().as_slice(), &order.eps)?;
        let (cov_margin, passed) = match class {
            OrderClass::Icx => (psd_margin(sa.cov(), sb.cov())?, gaussian_icx_leq(&sa, &sb, order, tol)?),
            _ => (
                -(sb.cov() - sa.cov()).abs().max(),
                gaussian_fd_leq(&sa, &sb, order, tol)?,
            ),
        };
        if !passed && first_violation.is_none() {
            first_violation = Some(ta.times[k]);
        }
        trace.push(ComparisonPoint {
            t: ta.times[k],
            mean_margin,
            cov_margin,
            passed,
        });
    }
    Ok(LnaComparison {
        verdict: LnaVerdict {
            class,
            guarantee,
            reason,
            passed: first_violation.is_none(),
            tol,
            first_violation,
            trace,
        },
        a: ta,
        b: tb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::CheckConfig;
    use crate::orders::lambda_min_sym;
    use crate::stoch::check_fd_diffusion_conditions;
    use proptest::prelude::*;

    fn chain(k: f64, k1: f64, k2: f64) -> ReactionNetwork {
        let text = format!(
            r#"{{"species":["X1","X2"],"reactions":[
                {{"change":[-1,0],"rate":"k1*x1"}},
                {{"change":[-1,1],"rate":"k*x1"}},
                {{"change":[0,-1],"rate":"k2*x2"}}],
              "params":{{"k":{k},"k1":{k1},"k2":{k2}}}}}"#
        );
        ReactionNetwork::from_json(&text).unwrap()
    }

    fn birth_death_pair() -> ReactionNetwork {
        ReactionNetwork::from_json(
            r#"{"species":["X1","X2"],"reactions":[
                {"change":[1,0],"rate":"b1"},{"change":[-1,0],"rate":"d1*x1"},
                {"change":[0,1],"rate":"b2"},{"change":[0,-1],"rate":"d2*x2"}],
              "params":{"b1":2,"d1":1,"b2":1,"d2":0.5}}"#,
        )
        .unwrap()
    }

    fn net(reactions: &str, n: usize) -> Result<ReactionNetwork, LnaError> {
        let species: Vec<String> = (1..=n).map(|i| format!("\"X{i}\"")).collect();
        ReactionNetwork::from_json(&format!(
            r#"{{"species":[{}],"reactions":[{reactions}],"params":{{"k":2}}}}"#,
            species.join(",")
        ))
    }

    fn short() -> LnaConfig {
        LnaConfig {
            horizon: 1.0,
            dt: 1e-2,
            ..LnaConfig::default()
        }
    }

    fn std2() -> OrthantOrder {
        OrthantOrder::standard(2, 0)
    }

    fn point_mass(mean: &[f64]) -> GaussianState {
        let n = mean.len();
        GaussianState::from_slices(mean, &vec![0.0; n * n]).unwrap()
    }

    #[test]
    fn unimolecular_examples() {
        assert!(is_unimolecular(&chain(1.0, 0.5, 0.3)).holds);
        let bi = net(r#"{"change":[-1,-1,1],"rate":"k*x1*x2"}"#, 3).unwrap();
        assert!(!is_unimolecular(&bi).holds);
        let quad = net(r#"{"change":[-1],"rate":"k*x1^2"}"#, 1).unwrap();
        let u = is_unimolecular(&quad);
        assert!(!u.holds);
        assert!(u.reason.contains("not a constant times x1"), "{}", u.reason);
        let wrong = net(r#"{"change":[-1,1],"rate":"k*x2"}"#, 2).unwrap();
        assert!(!is_unimolecular(&wrong).holds);
        assert!(!is_unimolecular(&birth_death_pair()).holds);
        let scaled = net(r#"{"change":[-1,1],"rate":"x1*k/4"}"#, 2).unwrap();
        assert!(is_unimolecular(&scaled).holds);
        assert_eq!(build_a(&scaled).unwrap()[(1, 0)], 0.5);
    }

    #[test]
    fn chain_matrix() {
        let a = build_a(&chain(1.5, 0.5, 0.3)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 1.5, -0.3]);
        assert_eq!(a, expected);
    }

    #[test]
    fn empty_and_pure_degradation_matrices() {
        let empty = net("", 2).unwrap();
        assert_eq!(build_a(&empty).unwrap(), DMatrix::zeros(2, 2));
        let deg = net(r#"{"change":[-1,0],"rate":"k*x1"},{"change":[0,-1],"rate":"3*x2"}"#, 2).unwrap();
        assert_eq!(
            build_a(&deg).unwrap(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -3.0]))
        );
        assert!(matches!(
            build_a(&birth_death_pair()),
            Err(LnaError::NotUnimolecular(_))
        ));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            net(r#"{"change":[-1],"rate":"k*x1"}"#, 2),
            Err(LnaError::ChangeLength { .. })
        ));
        assert!(matches!(
            net(r#"{"change":[-1,0],"rate":"k*x3"}"#, 2),
            Err(LnaError::Rate { .. })
        ));
        assert!(matches!(
            net(r#"{"change":[-1,0],"rate":"x1 - 1"}"#, 2),
            Err(LnaError::NegativeRateAtLoad { .. })
        ));
        assert!(matches!(ReactionNetwork::from_json("{"), Err(LnaError::Json(_))));
        assert!(matches!(
            ReactionNetwork::from_json(r#"{"species":[],"reactions":[]}"#),
            Err(LnaError::NoSpecies)
        ));
    }

    #[test]
    fn spec_round_trip() {
        let c = chain(1.0, 0.5, 0.3);
        assert_eq!(ReactionNetwork::from_spec(&c.to_spec()).unwrap(), c);
    }

    #[test]
    fn pure_death_closed_form() {
        let death = net(r#"{"change":[-1],"rate":"x1"}"#, 1).unwrap();
        let tr = lna_moments(&death, &point_mass(&[10.0]), 2.0, 1e-4).unwrap();
        for (k, t) in tr.times.iter().enumerate().step_by(1000) {
            let e = (-t).exp();
            assert!((tr.means[k][0] - 10.0 * e).abs() < 1e-6);
            assert!((tr.covs[k][(0, 0)] - 10.0 * e * (1.0 - e)).abs() < 1e-6);
        }
    }

    #[test]
    fn static_network_is_constant() {
        let zero = net(r#"{"change":[-1,1],"rate":"0*x1"}"#, 2).unwrap();
        let start = GaussianState::from_slices(&[0.0, 0.0], &[1.0, 0.2, 0.2, 0.5]).unwrap();
        let tr = lna_moments(&zero, &start, 1.0, 0.1).unwrap();
        assert_eq!(tr.means.last().unwrap(), start.mean());
        assert_eq!(tr.covs.last().unwrap(), start.cov());
    }

    #[test]
    fn bimolecular_uses_numerical_jacobian() {
        // X1 + X2 → ∅ at rate k x1 x2, x1 = x2 = m: m' = −2m², so m(1) = 1/3.
        let bi = net(r#"{"change":[-1,-1],"rate":"k*x1*x2"}"#, 2).unwrap();
        let tr = lna_moments(&bi, &point_mass(&[1.0, 1.0]), 1.0, 1e-3).unwrap();
        assert!((tr.means.last().unwrap()[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!(lambda_min_sym(tr.covs.last().unwrap()) >= -1e-8);
    }

    #[test]
    fn moment_errors() {
        let c = chain(1.0, 0.5, 0.3);
        assert!(matches!(
            lna_moments(&c, &point_mass(&[-1.0, 0.0]), 1.0, 0.1),
            Err(LnaError::NegativeMean(_))
        ));
        assert!(matches!(
            lna_moments(&c, &point_mass(&[1.0]), 1.0, 0.1),
            Err(LnaError::Dimension { .. })
        ));
        assert!(matches!(
            lna_moments(&c, &point_mass(&[1.0, 0.0]), 1.0, 0.0),
            Err(LnaError::Grid(_))
        ));
    }

    #[test]
    fn negative_rate_along_path() {
        // Zero-order removal drives the mean below zero at t = 0.5, where k·x1 turns negative.
        let drain = net(r#"{"change":[-1],"rate":"1"},{"change":[-1],"rate":"k*x1"}"#, 1).unwrap();
        match lna_moments(&drain, &point_mass(&[0.5]), 2.0, 1e-3) {
            Err(LnaError::NegativeRate { time, reaction, value }) => {
                assert_eq!(reaction, 1);
                assert!(value < 0.0);
                assert!(time > 0.2 && time < 0.5, "{time}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_icx_comparison_passes() {
        let c = chain(1.0, 0.5, 0.3);
        let r = compare_lna(
            &c,
            &point_mass(&[1.0, 0.0]),
            &point_mass(&[2.0, 1.0]),
            &std2(),
            OrderClass::Icx,
            &LnaConfig::default(),
        )
        .unwrap();
        assert!(r.verdict.passed);
        assert_eq!(r.verdict.guarantee, Guarantee::WithinGuarantee);
        assert!(r
            .verdict
            .trace
            .iter()
            .all(|p| p.mean_margin >= -1e-8 && p.cov_margin >= -1e-8));
    }

    #[test]
    fn chain_fd_comparison_fails_immediately() {
        let c = chain(1.0, 0.5, 0.3);
        let r = compare_lna(
            &c,
            &point_mass(&[1.0, 0.0]),
            &point_mass(&[2.0, 1.0]),
            &std2(),
            OrderClass::Fd,
            &LnaConfig::default(),
        )
        .unwrap();
        assert!(!r.verdict.passed);
        assert_eq!(r.verdict.first_violation, Some(r.a.times[1]));
        assert!(r.verdict.trace[0].passed);
        assert_eq!(r.verdict.guarantee, Guarantee::OutsideGuarantee);
    }

    #[test]
    fn identical_laws_pass_both_classes() {
        let c = chain(1.0, 0.5, 0.3);
        let s = GaussianState::from_slices(&[3.0, 1.0], &[0.5, 0.1, 0.1, 0.4]).unwrap();
        for class in [OrderClass::Fd, OrderClass::Icx] {
            assert!(
                compare_lna(&c, &s, &s, &std2(), class, &short())
                    .unwrap()
                    .verdict
                    .passed
            );
        }
        assert!(matches!(
            compare_lna(&c, &s, &s, &std2(), OrderClass::Icv, &short()),
            Err(LnaError::UnsupportedClass(_))
        ));
    }

    #[test]
    fn bimolecular_icx_is_labelled_outside() {
        let bi = net(r#"{"change":[-1,-1],"rate":"k*x1*x2"}"#, 2).unwrap();
        let r = compare_lna(
            &bi,
            &point_mass(&[1.0, 1.0]),
            &point_mass(&[1.0, 1.0]),
            &std2(),
            OrderClass::Icx,
            &short(),
        )
        .unwrap();
        assert_eq!(r.verdict.guarantee, Guarantee::OutsideGuarantee);
    }

    #[test]
    fn birth_death_structure() {
        assert!(check_birth_death_structure(&birth_death_pair(), &std2()).unwrap().holds);
        let c = check_birth_death_structure(&chain(1.0, 0.5, 0.3), &std2()).unwrap();
        assert!(!c.holds);
        assert!(c.reason.contains("changes x2"), "{}", c.reason);
        assert!(
            check_birth_death_structure(&net("", 2).unwrap(), &std2())
                .unwrap()
                .holds
        );
        assert!(check_birth_death_structure(&birth_death_pair(), &OrthantOrder::standard(3, 0)).is_err());
    }

    #[test]
    fn structure_agrees_with_diffusion_check() {
        let cfg = CheckConfig {
            samples: 300,
            ..CheckConfig::default()
        };
        for network in [birth_death_pair(), chain(1.0, 0.5, 0.3)] {
            let diff = network.langevin_diffusion(vec![Interval::new(0.1, 10.0); 2]).unwrap();
            let structural = check_birth_death_structure(&network, &std2()).unwrap().holds;
            let sampled = check_fd_diffusion_conditions(&diff, &std2(), &cfg).unwrap().passed;
            assert_eq!(structural, sampled);
        }
    }

    #[test]
    fn csv_layout() {
        let c = chain(1.0, 0.5, 0.3);
        let tr = lna_moments(&c, &point_mass(&[1.0, 0.0]), 0.1, 0.1).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,m1,m2,S11,S12,S21,S22");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').count(), 7);
    }

    #[test]
    fn fluctuation_diffusion_shape() {
        let c = chain(1.0, 0.5, 0.3);
        let d = c
            .fluctuation_diffusion(vec![Interval::new(0.0, 5.0); 2], vec![Interval::new(-5.0, 5.0); 2])
            .unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.noise_dim(), 3);
        let f = d.drift().eval(&[1.0, 2.0, 0.5, -0.5], &[]).unwrap();
        // A = [[−1.5, 0], [1, −0.3]].
        let expected = [-1.5, 1.0 - 0.6, -0.75, 0.5 + 0.15];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let s = d.sigma_at(&[1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert!((s[(3, 1)] - 1.0).abs() < 1e-15);
        assert!((s[(3, 2)] + 0.6f64.sqrt()).abs() < 1e-15);
    }

    fn random_unimolecular(n: usize, ks: &[f64]) -> ReactionNetwork {
        let mut reactions = Vec::new();
        let mut params = BTreeMap::new();
        let mut idx = 0;
        for i in 0..n {
            for j in 0..n {
                let k = ks[idx % ks.len()];
                idx += 1;
                let mut change = vec![0; n];
                change[i] = -1;
                if i != j {
                    change[j] = 1;
                }
                let name = format!("k{i}{j}");
                params.insert(name.clone(), k);
                reactions.push(ReactionSpec {
                    change,
                    rate: format!("{name}*x{}", i + 1),
                });
            }
        }
        ReactionNetwork::from_spec(&NetworkSpec {
            species: (1..=n).map(|i| format!("X{i}")).collect(),
            reactions,
            params,
        })
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn a_reproduces_drift(
            ks in proptest::collection::vec(0.01f64..5.0, 9),
            xs in proptest::collection::vec(proptest::collection::vec(0.0f64..100.0, 3), 1..16),
        ) {
            let net = random_unimolecular(3, &ks);
            let a = build_a(&net).unwrap();
            for x in xs {
                let sv = net.drift(&x).unwrap();
                let ax = &a * DVector::from_vec(x.clone());
                let scale = sv.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for i in 0..3 {
                    prop_assert!((sv[i] - ax[i]).abs() <= 1e-9 * scale);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        prop_assert!(a[(i, j)] >= 0.0);
                    }
                }
                prop_assert!(a.column(i).sum() <= 1e-12);
            }
        }

        #[test]
        fn covariance_stays_psd(
            ks in proptest::collection::vec(0.01f64..3.0, 4),
            m0 in proptest::collection::vec(0.0f64..10.0, 2),
            l in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let net = random_unimolecular(2, &ks);
            let chol = [l[0], 0.0, l[1], l[2]];
            let cov: Vec<f64> = (0..4)
                .map(|ij| {
                    let (i, j) = (ij / 2, ij % 2);
                    (0..2).map(|k| chol[i * 2 + k] * chol[j * 2 + k]).sum()
                })
                .collect();
            let start = GaussianState::from_slices(&m0, &cov).unwrap();
            let tr = lna_moments(&net, &start, 3.0, 1e-2).unwrap();
            for s in &tr.covs {
                prop_assert!(lambda_min_sym(s) >= -1e-8);
            }
        }
    }
}
