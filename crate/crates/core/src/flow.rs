//! Fixed-step flow integration and empirical certificates for the flow-level
//! statements: order preservation, convexity and directional convexity of
//! `(x, u) ↦ φ(t; x, u)`.
//!
//! All three tests work on transformed coordinates `T·φ`, draw their initial
//! points inside the (transformed) domain box, use constant inputs, and
//! compare trajectories on one shared time grid. Trials whose trajectories
//! leave the guard box are counted as inconclusive rather than failed.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Interval, SystemModel};
use crate::orders::{OrderError, OrthantOrder, Sign};
use crate::sampling::trial_rng;

/// Guard box: the domain grown about its centre by this factor.
pub const BLOW_UP_FACTOR: f64 = 10.0;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("initial state {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("trajectory left the guard box at t = {time}: {state:?}")]
    BlowUp { time: f64, state: Vec<f64> },
    #[error("evaluation failed at t = {time}: {source}")]
    Evaluation {
        time: f64,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("trial budget must be at least 1")]
    EmptyBudget,
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<FlowError>,
    },
}

/// Piecewise-constant input `u(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSignal {
    Constant(Vec<f64>),
    /// Value `values[k]` from `starts[k]` until the next start.
    Piecewise {
        starts: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSignal {
    pub fn none() -> Self {
        InputSignal::Constant(Vec::new())
    }

    pub fn at(&self, t: f64) -> &[f64] {
        match self {
            InputSignal::Constant(v) => v,
            InputSignal::Piecewise { starts, values } => {
                let k = starts.partition_point(|s| *s <= t).saturating_sub(1);
                &values[k]
            }
        }
    }

    fn dims_ok(&self, m: usize) -> bool {
        match self {
            InputSignal::Constant(v) => v.len() == m,
            InputSignal::Piecewise { starts, values } => {
                !starts.is_empty() && starts.len() == values.len() && values.iter().all(|v| v.len() == m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub input: InputSignal,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one point")
    }

    /// CSV with header `t,x1..xn` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt17(*t))?;
            for v in x {
                write!(w, ",{}", fmt17(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Number of steps and the uniform step that lands exactly on `horizon`.
pub fn grid(horizon: f64, dt: f64) -> Result<(usize, f64), FlowError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlowError::BadStep(dt));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FlowError::BadHorizon(horizon));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, horizon / steps as f64))
}

pub(crate) fn guard_box(domain: &[Interval]) -> Vec<Interval> {
    domain.iter().map(|iv| iv.expanded(BLOW_UP_FACTOR)).collect()
}

pub(crate) fn inside(guard: &[Interval], x: &[f64]) -> bool {
    guard.iter().zip(x).all(|(iv, v)| v.is_finite() && iv.contains(*v))
}

/// Classical fourth-order Runge–Kutta with a fixed step. The step is shrunk
/// slightly when `dt` does not divide `horizon`. The input is held at its
/// value at the start of each step.
pub fn integrate_rk4(
    system: &SystemModel,
    x0: &[f64],
    input: &InputSignal,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory, FlowError> {
    let n = system.n();
    if x0.len() != n {
        return Err(FlowError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !input.dims_ok(system.m()) {
        return Err(FlowError::Dimension {
            expected: system.m(),
            got: input.at(0.0).len(),
        });
    }
    if !system.in_domain(x0) {
        return Err(FlowError::OutsideDomain(x0.to_vec()));
    }
    let (steps, h) = grid(horizon, dt)?;
    let guard = guard_box(system.domain());

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut x = x0.to_vec();
    for step in 0..steps {
        let t = step as f64 * h;
        let u = input.at(t);
        let f = |x: &[f64], out: &mut [f64]| {
            system
                .eval_into(x, u, out)
                .map_err(|source| FlowError::Evaluation { time: t, source })
        };
        f(&x, &mut k1)?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        f(&tmp, &mut k2)?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        f(&tmp, &mut k3)?;
        for j in 0..n {
            tmp[j] = x[j] + h * k3[j];
        }
        f(&tmp, &mut k4)?;
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t_next = (step + 1) as f64 * h;
        if !inside(&guard, &x) {
            return Err(FlowError::BlowUp { time: t_next, state: x });
        }
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        input: input.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub trials: usize,
    pub horizon: f64,
    /// Defaults to `1e-3 · horizon`.
    pub dt: Option<f64>,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            horizon: 10.0,
            dt: None,
            tol: 1e-7,
            seed: 42,
        }
    }
}

impl FlowConfig {
    pub fn step(&self) -> f64 {
        self.dt.unwrap_or(1e-3 * self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowProperty {
    Order,
    Convexity,
    DirectionalConvexity,
}

/// Initial data of one trial; `lambda` only for convexity triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCase {
    pub trial: usize,
    pub starts: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub property: FlowProperty,
    pub passed: bool,
    pub trials: usize,
    pub inconclusive: usize,
    pub tol: f64,
    /// Smallest margin over all conclusive trials, grid times and components;
    /// the property holds with slack `tol` iff this is `≥ −tol`.
    pub worst_margin: f64,
    pub worst_time: f64,
    pub worst_component: usize,
    pub worst_case: Option<TrialCase>,
}

/// A verdict plus the trajectories of its worst trial.
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub verdict: FlowVerdict,
    pub worst_trajectories: Vec<Trajectory>,
}

/// `(margin, time, component)` of the smallest margin in a trace.
type Worst = (f64, f64, usize);

/// Per-time worst margin plus the argmin location.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTrace {
    pub times: Vec<f64>,
    /// `min_j` of the transformed margin at each grid time.
    pub margins: Vec<f64>,
    pub worst: Worst,
}

fn margin_trace(trajs: &[Trajectory], signs: &[Sign], margin: impl Fn(&[&[f64]], usize) -> f64) -> MarginTrace {
    let times = trajs[0].times.clone();
    let mut margins = Vec::with_capacity(times.len());
    let mut worst = (f64::INFINITY, 0.0, 0);
    for (k, t) in times.iter().enumerate() {
        let states: Vec<&[f64]> = trajs.iter().map(|tr| tr.states[k].as_slice()).collect();
        let mut m_t = f64::INFINITY;
        for (j, s) in signs.iter().enumerate() {
            let m = s.value() * margin(&states, j);
            if m < m_t {
                m_t = m;
            }
            if m < worst.0 {
                worst = (m, *t, j);
            }
        }
        margins.push(m_t);
    }
    MarginTrace { times, margins, worst }
}

fn integrate_all(
    system: &SystemModel,
    starts: &[Vec<f64>],
    inputs: &[Vec<f64>],
    horizon: f64,
    dt: f64,
) -> Result<Vec<Trajectory>, FlowError> {
    starts
        .iter()
        .zip(inputs)
        .map(|(x, u)| integrate_rk4(system, x, &InputSignal::Constant(u.clone()), horizon, dt))
        .collect()
}

/// Margin of `φ(t; x, u) ⪯ φ(t; y, v)` at each grid time.
pub fn order_margins(
    system: &SystemModel,
    order: &OrthantOrder,
    (x, u): (&[f64], &[f64]),
    (y, v): (&[f64], &[f64]),
    horizon: f64,
    dt: f64,
) -> Result<(MarginTrace, Vec<Trajectory>), FlowError> {
    order.check_dims(system.n(), system.m())?;
    let trajs = integrate_all(
        system,
        &[x.to_vec(), y.to_vec()],
        &[u.to_vec(), v.to_vec()],
        horizon,
        dt,
    )?;
    let trace = margin_trace(&trajs, &order.eps, |s, j| s[1][j] - s[0][j]);
    Ok((trace, trajs))
}

/// Margin of `φ(t; x^λ, u^λ) ⪯ λφ(t; x, u) + (1−λ)φ(t; y, v)` at each grid time.
#[allow(clippy::too_many_arguments)]
pub fn convexity_margins(
    system: &SystemModel,
    order: &OrthantOrder,
    (x, u): (&[f64], &[f64]),
    (y, v): (&[f64], &[f64]),
    lambda: f64,
    horizon: f64,
    dt: f64,
) -> Result<(MarginTrace, Vec<Trajectory>), FlowError> {
    order.check_dims(system.n(), system.m())?;
    let mix =
        |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| lambda * p + (1.0 - lambda) * q).collect() };
    let starts = [x.to_vec(), y.to_vec(), clamp_into(system.domain(), mix(x, y))];
    let inputs = [u.to_vec(), v.to_vec(), clamp_into(system.input_box(), mix(u, v))];
    let trajs = integrate_all(system, &starts, &inputs, horizon, dt)?;
    let trace = margin_trace(&trajs, &order.eps, |s, j| {
        lambda * s[0][j] + (1.0 - lambda) * s[1][j] - s[2][j]
    });
    Ok((trace, trajs))
}

/// Margin of `φ₂ + φ₃ ⪯ φ₁ + φ₄` for a lattice quadruple at each grid time.
pub fn directional_margins(
    system: &SystemModel,
    order: &OrthantOrder,
    starts: &[Vec<f64>; 4],
    inputs: &[Vec<f64>; 4],
    horizon: f64,
    dt: f64,
) -> Result<(MarginTrace, Vec<Trajectory>), FlowError> {
    order.check_dims(system.n(), system.m())?;
    let trajs = integrate_all(system, starts, inputs, horizon, dt)?;
    let trace = margin_trace(&trajs, &order.eps, |s, j| s[0][j] + s[3][j] - s[1][j] - s[2][j]);
    Ok((trace, trajs))
}

fn transformed_box(bx: &[Interval], signs: &[Sign]) -> Vec<Interval> {
    bx.iter().zip(signs).map(|(iv, s)| iv.scaled(s.value())).collect()
}

fn draw_in(bx: &[Interval], rng: &mut ChaCha8Rng) -> Vec<f64> {
    bx.iter().map(|iv| iv.lerp(rng.random::<f64>())).collect()
}

/// Nonnegative increment keeping `base + inc` inside the box, scaled by `frac`.
fn draw_increment(bx: &[Interval], base: &[f64], frac: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    bx.iter()
        .zip(base)
        .map(|(iv, b)| frac * rng.random::<f64>() * (iv.hi - b))
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

fn unflip(v: &[f64], signs: &[Sign]) -> Vec<f64> {
    v.iter().zip(signs).map(|(x, s)| x * s.value()).collect()
}

/// Removes ulp-level excursions left by sums and convex combinations.
fn clamp_into(bx: &[Interval], v: Vec<f64>) -> Vec<f64> {
    v.into_iter().zip(bx).map(|(x, iv)| x.clamp(iv.lo, iv.hi)).collect()
}

/// Draws the initial data of one trial in original coordinates.
fn draw_case(property: FlowProperty, system: &SystemModel, order: &OrthantOrder, trial: usize, seed: u64) -> TrialCase {
    let mut rng = trial_rng(seed, trial as u64);
    let xb = transformed_box(system.domain(), &order.eps);
    let ub = transformed_box(system.input_box(), &order.eps_u);
    let (xs, us, lambda) = match property {
        FlowProperty::Order => {
            let x = draw_in(&xb, &mut rng);
            let y = add(&x, &draw_increment(&xb, &x, 1.0, &mut rng));
            let u = draw_in(&ub, &mut rng);
            let v = add(&u, &draw_increment(&ub, &u, 1.0, &mut rng));
            (vec![x, y], vec![u, v], None)
        }
        FlowProperty::Convexity => {
            let x = draw_in(&xb, &mut rng);
            let y = draw_in(&xb, &mut rng);
            let u = draw_in(&ub, &mut rng);
            let v = draw_in(&ub, &mut rng);
            let lambda = rng.random::<f64>();
            (vec![x, y], vec![u, v], Some(lambda))
        }
        FlowProperty::DirectionalConvexity => {
            let quad = |bx: &[Interval], rng: &mut ChaCha8Rng| {
                let x1 = draw_in(bx, rng);
                let a = draw_increment(bx, &x1, 0.5, rng);
                let b = draw_increment(bx, &x1, 0.5, rng);
                let x2 = add(&x1, &a);
                let x3 = add(&x1, &b);
                let x4 = add(&x2, &b);
                vec![x1, x2, x3, x4]
            };
            let xs = quad(&xb, &mut rng);
            let us = quad(&ub, &mut rng);
            (xs, us, None)
        }
    };
    TrialCase {
        trial,
        starts: xs
            .iter()
            .map(|x| clamp_into(system.domain(), unflip(x, &order.eps)))
            .collect(),
        inputs: us
            .iter()
            .map(|u| clamp_into(system.input_box(), unflip(u, &order.eps_u)))
            .collect(),
        lambda,
    }
}

fn evaluate_case(
    property: FlowProperty,
    system: &SystemModel,
    order: &OrthantOrder,
    case: &TrialCase,
    horizon: f64,
    dt: f64,
) -> Result<(MarginTrace, Vec<Trajectory>), FlowError> {
    let (s, u) = (&case.starts, &case.inputs);
    match property {
        FlowProperty::Order => order_margins(system, order, (&s[0], &u[0]), (&s[1], &u[1]), horizon, dt),
        FlowProperty::Convexity => convexity_margins(
            system,
            order,
            (&s[0], &u[0]),
            (&s[1], &u[1]),
            case.lambda.unwrap_or(0.5),
            horizon,
            dt,
        ),
        FlowProperty::DirectionalConvexity => {
            let starts = [s[0].clone(), s[1].clone(), s[2].clone(), s[3].clone()];
            let inputs = [u[0].clone(), u[1].clone(), u[2].clone(), u[3].clone()];
            directional_margins(system, order, &starts, &inputs, horizon, dt)
        }
    }
}

/// Runs `cfg.trials` randomized trials of `property`.
pub fn test_flow_property(
    property: FlowProperty,
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &FlowConfig,
) -> Result<FlowReport, FlowError> {
    order.check_dims(system.n(), system.m())?;
    if cfg.trials == 0 {
        return Err(FlowError::EmptyBudget);
    }
    let dt = cfg.step();
    grid(cfg.horizon, dt)?;

    // Some(worst) for conclusive trials, None for blow-ups.
    let results: Vec<Result<Option<Worst>, FlowError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let case = draw_case(property, system, order, trial, cfg.seed);
            match evaluate_case(property, system, order, &case, cfg.horizon, dt) {
                Ok((trace, _)) => Ok(Some(trace.worst)),
                Err(FlowError::BlowUp { .. }) => Ok(None),
                Err(e) => Err(FlowError::Trial {
                    trial,
                    source: Box::new(e),
                }),
            }
        })
        .collect();

    let mut inconclusive = 0;
    let mut worst: Option<(usize, Worst)> = None;
    for (trial, r) in results.into_iter().enumerate() {
        match r? {
            None => inconclusive += 1,
            Some(w) => {
                if worst.is_none_or(|(_, cur)| w.0 < cur.0) {
                    worst = Some((trial, w));
                }
            }
        }
    }

    let (worst_case, worst_trajectories, (worst_margin, worst_time, worst_component)) = match worst {
        Some((trial, w)) => {
            let case = draw_case(property, system, order, trial, cfg.seed);
            let (_, trajs) = evaluate_case(property, system, order, &case, cfg.horizon, dt)?;
            (Some(case), trajs, w)
        }
        None => (None, Vec::new(), (f64::NAN, f64::NAN, 0)),
    };
    Ok(FlowReport {
        verdict: FlowVerdict {
            property,
            passed: worst.is_some() && worst_margin >= -cfg.tol,
            trials: cfg.trials,
            inconclusive,
            tol: cfg.tol,
            worst_margin,
            worst_time,
            worst_component,
            worst_case,
        },
        worst_trajectories,
    })
}

/// Ordered pairs `x ⪯ y`, `u ⪯ v`; passes iff `φ(t;x,u) ⪯ φ(t;y,v)` at every grid time.
pub fn test_order_preservation(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &FlowConfig,
) -> Result<FlowReport, FlowError> {
    test_flow_property(FlowProperty::Order, system, order, cfg)
}

/// Random triples `(x, y, λ)`; passes iff the transformed flow is midpoint-convex along them.
pub fn test_flow_convexity(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &FlowConfig,
) -> Result<FlowReport, FlowError> {
    test_flow_property(FlowProperty::Convexity, system, order, cfg)
}

/// Lattice quadruples `x₁ ⪯ {x₂, x₃} ⪯ x₄`, `x₁ + x₄ = x₂ + x₃`.
pub fn test_flow_directional_convexity(
    system: &SystemModel,
    order: &OrthantOrder,
    cfg: &FlowConfig,
) -> Result<FlowReport, FlowError> {
    test_flow_property(FlowProperty::DirectionalConvexity, system, order, cfg)
}
