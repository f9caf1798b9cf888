//! Sampling certificates for the infinitesimal order-propagation conditions.
//!
//! Every check first maps the system into the standard orthant order with
//! [`transform_system`] and then samples the transformed state and input
//! boxes with a shifted Halton sequence. A verdict is a statement "no
//! violation found at `samples` points with slack `tol`", never a proof.
//! Witness coordinates are reported in the transformed frame.
//!
//! | condition on `f̃`                          | order propagated |
//! |-------------------------------------------|------------------|
//! | Kamke / Metzler Jacobian                  | F_d              |
//! | monotone + every component convex         | F_icx            |
//! | monotone + every component concave        | F_icv            |
//! | monotone + all second partials `≥ 0`      | F_idcx           |

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{hessian_fd, jacobian_fd, EvalError, Expr, FdError, Interval, Symbol, SystemModel};
use crate::orders::{lambda_max_sym, lambda_min_sym, OrderError, OrthantOrder, Sign};
use crate::sampling::UnitSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrderClass {
    #[serde(rename = "F_d")]
    Fd,
    #[serde(rename = "F_icx")]
    Icx,
    #[serde(rename = "F_icv")]
    Icv,
    #[serde(rename = "F_idcx")]
    Idcx,
}

impl fmt::Display for OrderClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderClass::Fd => "F_d",
            OrderClass::Icx => "F_icx",
            OrderClass::Icv => "F_icv",
            OrderClass::Idcx => "F_idcx",
        })
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("sample {sample}: {source}")]
    Evaluation {
        sample: usize,
        #[source]
        source: FdError,
    },
    #[error("sample budget must be at least 1")]
    EmptyBudget,
}

impl ClassifyError {
    pub(crate) fn eval(sample: usize, point: Vec<f64>, source: EvalError) -> Self {
        ClassifyError::Evaluation {
            sample,
            source: FdError { point, source },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_witnesses: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            tol: 1e-6,
            seed: 42,
            max_witnesses: 16,
        }
    }
}

/// A sampled point at which a condition failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: usize,
    pub component: usize,
    /// `(x, u)` in transformed coordinates.
    pub point: Vec<f64>,
    /// Second point of a pair or chord test, when there is one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pair: Option<Vec<f64>>,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub samples: usize,
    pub tol: f64,
    /// Number of violating (sample, component, test) triples.
    pub violations: usize,
    /// The first `max_witnesses` violations in sample order.
    pub witnesses: Vec<Witness>,
}

impl Verdict {
    /// Conjunction; witnesses are concatenated and capped.
    pub fn and(&self, other: &Verdict, max_witnesses: usize) -> Verdict {
        let mut witnesses = self.witnesses.clone();
        witnesses.extend(other.witnesses.iter().cloned());
        witnesses.truncate(max_witnesses.max(self.witnesses.len()));
        Verdict {
            passed: self.passed && other.passed,
            samples: self.samples.max(other.samples),
            tol: self.tol,
            violations: self.violations + other.violations,
            witnesses,
        }
    }

    fn label(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Jacobian and Kamke checks combined; both must pass.
    pub monotone: Verdict,
    pub jacobian: Verdict,
    pub kamke: Verdict,
    pub convex: Verdict,
    pub concave: Verdict,
    pub directionally_convex: Verdict,
    pub propagates: BTreeSet<OrderClass>,
}

impl ClassificationReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let rows = [
            ("monotone (Jacobian)", &self.jacobian),
            ("monotone (Kamke)", &self.kamke),
            ("monotone", &self.monotone),
            ("convex", &self.convex),
            ("concave", &self.concave),
            ("directionally convex", &self.directionally_convex),
        ];
        for (name, v) in rows {
            let _ = writeln!(
                s,
                "{name:<22} {}  ({} samples, tol {:e}, {} violations)",
                v.label(),
                v.samples,
                v.tol,
                v.violations
            );
        }
        let classes: Vec<String> = self.propagates.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "propagates: {{{}}}", classes.join(", "));
        for (name, v) in rows.iter().skip(2) {
            for w in v.witnesses.iter().take(3) {
                let _ = writeln!(
                    s,
                    "  {name} witness: sample {} component {} {} = {:.6e} at {:?}",
                    w.sample,
                    w.component + 1,
                    w.quantity,
                    w.value,
                    w.point
                );
            }
        }
        s
    }
}

/// `f̃(y, w) = T·f(T·y, T_u·w)` with the boxes mapped through `T`, `T_u`.
/// Checking `f̃` in the standard order is checking `f` in `order`.
pub fn transform_system(system: &SystemModel, order: &OrthantOrder) -> Result<SystemModel, OrderError> {
    order.check_dims(system.n(), system.m())?;
    if order.is_standard() {
        return Ok(system.clone());
    }
    let flip = |sym: &Symbol| {
        let (sign, e) = match sym {
            Symbol::State(j) => (order.eps[*j], Expr::state(*j)),
            Symbol::Input(j) => (order.eps_u[*j], Expr::input(*j)),
            Symbol::Param { .. } => (Sign::Plus, Expr::Sym(sym.clone())),
        };
        match sign {
            Sign::Plus => e,
            Sign::Minus => e.negated(),
        }
    };
    let f = system
        .components()
        .iter()
        .zip(&order.eps)
        .map(|(fi, s)| {
            let g = fi.substitute(&flip);
            match s {
                Sign::Plus => g,
                Sign::Minus => g.negated(),
            }
        })
        .collect();
    let map_box = |bx: &[Interval], signs: &[Sign]| {
        bx.iter()
            .zip(signs)
            .map(|(iv, s)| iv.scaled(s.value()))
            .collect::<Vec<_>>()
    };
    Ok(system.with_parts(
        f,
        map_box(system.domain(), &order.eps),
        map_box(system.input_box(), &order.eps_u),
    ))
}

pub(crate) fn lerp_box(bx: &[Interval], r: &[f64]) -> Vec<f64> {
    bx.iter().zip(r).map(|(iv, t)| iv.lerp(*t)).collect()
}

/// Runs `per_sample` on every sample index and folds the results in index
/// order, so the verdict does not depend on the thread count.
pub(crate) fn run_samples<F>(cfg: &CheckConfig, dim: usize, per_sample: F) -> Result<Verdict, ClassifyError>
where
    F: Fn(usize, &[f64]) -> Result<Vec<Witness>, ClassifyError> + Sync,
{
    if cfg.samples == 0 {
        return Err(ClassifyError::EmptyBudget);
    }
    let sampler = UnitSampler::new(dim, cfg.seed);
    let results: Vec<_> = (0..cfg.samples)
        .into_par_iter()
        .map(|k| per_sample(k, &sampler.point(k as u64)))
        .collect();
    let mut violations = 0;
    let mut witnesses = Vec::new();
    for r in results {
        for w in r? {
            violations += 1;
            if witnesses.len() < cfg.max_witnesses {
                witnesses.push(w);
            }
        }
    }
    Ok(Verdict {
        passed: violations == 0,
        samples: cfg.samples,
        tol: cfg.tol,
        violations,
        witnesses,
    })
}

fn var_name(j: usize, n: usize) -> String {
    if j < n {
        format!("x{}", j + 1)
    } else {
        format!("u{}", j - n + 1)
    }
}

/// Off-diagonal state entries and all input entries of the transformed
/// Jacobian must be `≥ −tol`. One witness per violating component, carrying
/// its most negative entry.
pub fn check_jacobian_metzler(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<Verdict, ClassifyError> {
    let sys = transform_system(system, order)?;
    let (n, m) = (sys.n(), sys.m());
    run_samples(cfg, n + m, |k, r| {
        let x = lerp_box(sys.domain(), &r[..n]);
        let u = lerp_box(sys.input_box(), &r[n..]);
        let jac = jacobian_fd(&sys, &x, &u).map_err(|source| ClassifyError::Evaluation { sample: k, source })?;
        let mut out = Vec::new();
        for i in 0..n {
            let worst = (0..n + m)
                .filter(|&j| j != i)
                .map(|j| (j, jac[(i, j)]))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, v)) = worst {
                if v < -cfg.tol {
                    out.push(Witness {
                        sample: k,
                        component: i,
                        point: x.iter().chain(&u).copied().collect(),
                        pair: None,
                        quantity: format!("df{}/d{}", i + 1, var_name(j, n)),
                        value: v,
                    });
                }
            }
        }
        Ok(out)
    })
}

/// Direct Kamke test: for `x`, every face index `i`, `y ⪰ x` with `y_i = x_i`
/// and inputs `u ⪯ v`, requires `f̃_i(x, u) ≤ f̃_i(y, v) + tol`.
pub fn check_kamke_sampled(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<Verdict, ClassifyError> {
    let sys = transform_system(system, order)?;
    let (n, m) = (sys.n(), sys.m());
    run_samples(cfg, 2 * (n + m), |k, r| {
        let x = lerp_box(sys.domain(), &r[..n]);
        let up: Vec<f64> = sys
            .domain()
            .iter()
            .zip(&x)
            .zip(&r[n..2 * n])
            .map(|((iv, xj), t)| xj + t * (iv.hi - xj))
            .collect();
        let u = lerp_box(sys.input_box(), &r[2 * n..2 * n + m]);
        let v: Vec<f64> = sys
            .input_box()
            .iter()
            .zip(&u)
            .zip(&r[2 * n + m..])
            .map(|((iv, uj), t)| uj + t * (iv.hi - uj))
            .collect();
        let mut out = Vec::new();
        for i in 0..n {
            let mut y = up.clone();
            y[i] = x[i];
            let fx = sys
                .eval_component(i, &x, &u)
                .map_err(|e| ClassifyError::eval(k, x.iter().chain(&u).copied().collect(), e))?;
            let fy = sys
                .eval_component(i, &y, &v)
                .map_err(|e| ClassifyError::eval(k, y.iter().chain(&v).copied().collect(), e))?;
            let gap = fx - fy;
            if gap > cfg.tol {
                out.push(Witness {
                    sample: k,
                    component: i,
                    point: x.iter().chain(&u).copied().collect(),
                    pair: Some(y.iter().chain(&v).copied().collect()),
                    quantity: format!("f{0}(x,u) - f{0}(y,v)", i + 1),
                    value: gap,
                });
            }
        }
        Ok(out)
    })
}

/// Hessian eigenvalue test on every transformed component (`λ_min ≥ −tol`
/// for convex, `λ_max ≤ tol` for concave), corroborated by a midpoint secant
/// test on a sampled chord.
pub fn check_convexity(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &CheckConfig,
    direction: Curvature,
) -> Result<Verdict, ClassifyError> {
    let sys = transform_system(system, order)?;
    let (n, m) = (sys.n(), sys.m());
    let d = n + m;
    let sign = match direction {
        Curvature::Convex => 1.0,
        Curvature::Concave => -1.0,
    };
    run_samples(cfg, 3 * d, |k, r| {
        let point = |off: usize| {
            let mut p = lerp_box(sys.domain(), &r[off..off + n]);
            p.extend(lerp_box(sys.input_box(), &r[off + n..off + d]));
            p
        };
        let xi = point(0);
        let a = point(d);
        let b = point(2 * d);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        let eval = |i: usize, p: &[f64]| {
            sys.eval_component(i, &p[..n], &p[n..])
                .map_err(|e| ClassifyError::eval(k, p.to_vec(), e))
        };
        let mut out = Vec::new();
        for i in 0..n {
            let h = hessian_fd(&sys, i, &xi[..n], &xi[n..])
                .map_err(|source| ClassifyError::Evaluation { sample: k, source })?;
            let (quantity, value, bad) = match direction {
                Curvature::Convex => {
                    let l = lambda_min_sym(&h);
                    ("lambda_min(H)", l, l < -cfg.tol)
                }
                Curvature::Concave => {
                    let l = lambda_max_sym(&h);
                    ("lambda_max(H)", l, l > cfg.tol)
                }
            };
            if bad {
                out.push(Witness {
                    sample: k,
                    component: i,
                    point: xi.clone(),
                    pair: None,
                    quantity: quantity.into(),
                    value,
                });
            }
            // Positive gap means the midpoint lies on the wrong side of the chord.
            let gap = sign * (eval(i, &mid)? - 0.5 * (eval(i, &a)? + eval(i, &b)?));
            if gap > cfg.tol {
                out.push(Witness {
                    sample: k,
                    component: i,
                    point: a.clone(),
                    pair: Some(b.clone()),
                    quantity: "secant midpoint gap".into(),
                    value: gap,
                });
            }
        }
        Ok(out)
    })
}

/// Every entry of every transformed-component Hessian must be `≥ −tol`.
pub fn check_directional_convexity(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<Verdict, ClassifyError> {
    let sys = transform_system(system, order)?;
    let (n, m) = (sys.n(), sys.m());
    run_samples(cfg, n + m, |k, r| {
        let x = lerp_box(sys.domain(), &r[..n]);
        let u = lerp_box(sys.input_box(), &r[n..]);
        let mut out = Vec::new();
        for i in 0..n {
            let h = hessian_fd(&sys, i, &x, &u).map_err(|source| ClassifyError::Evaluation { sample: k, source })?;
            let (mut worst, mut at) = (f64::INFINITY, (0, 0));
            for a in 0..n + m {
                for b in a..n + m {
                    if h[(a, b)] < worst {
                        worst = h[(a, b)];
                        at = (a, b);
                    }
                }
            }
            if worst < -cfg.tol {
                out.push(Witness {
                    sample: k,
                    component: i,
                    point: x.iter().chain(&u).copied().collect(),
                    pair: None,
                    quantity: format!("d2f{}/d{}d{}", i + 1, var_name(at.0, n), var_name(at.1, n)),
                    value: worst,
                });
            }
        }
        Ok(out)
    })
}

/// Runs every check and derives the set of propagated orders.
pub fn classify_system(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &CheckConfig,
) -> Result<ClassificationReport, ClassifyError> {
    let sys = transform_system(system, order)?;
    let std = OrthantOrder::standard(sys.n(), sys.m());
    let jacobian = check_jacobian_metzler(&sys, &std, cfg)?;
    let kamke = check_kamke_sampled(&sys, &std, cfg)?;
    let convex = check_convexity(&sys, &std, cfg, Curvature::Convex)?;
    let concave = check_convexity(&sys, &std, cfg, Curvature::Concave)?;
    let directionally_convex = check_directional_convexity(&sys, &std, cfg)?;
    let monotone = jacobian.and(&kamke, cfg.max_witnesses);

    let mut propagates = BTreeSet::new();
    if monotone.passed {
        propagates.insert(OrderClass::Fd);
        if convex.passed {
            propagates.insert(OrderClass::Icx);
        }
        if concave.passed {
            propagates.insert(OrderClass::Icv);
        }
        if directionally_convex.passed {
            propagates.insert(OrderClass::Idcx);
        }
    }
    Ok(ClassificationReport {
        monotone,
        jacobian,
        kamke,
        convex,
        concave,
        directionally_convex,
        propagates,
    })
}
