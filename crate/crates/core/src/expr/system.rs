use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_expression, EvalError, Expr, ParseError, Point, Signature};

/// Closed interval `[lo, hi]`; serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Maps `r ∈ [0, 1]` onto the interval.
    pub fn lerp(&self, r: f64) -> f64 {
        self.lo + r * (self.hi - self.lo)
    }

    /// Image of the interval under `v ↦ sign·v`.
    pub fn scaled(&self, sign: f64) -> Self {
        if sign < 0.0 {
            Self::new(-self.hi, -self.lo)
        } else {
            *self
        }
    }

    /// The interval grown about its centre by `factor`.
    pub fn expanded(&self, factor: f64) -> Self {
        let c = 0.5 * (self.lo + self.hi);
        let h = 0.5 * self.width() * factor;
        Self::new(c - h, c + h)
    }

    fn is_proper(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("f has {got} components but n = {n}")]
    ComponentCount { n: usize, got: usize },
    #[error("{which} has {got} intervals, expected {expected}")]
    BoxDimension {
        which: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{which} axis {axis} is degenerate or non-finite: [{lo}, {hi}]")]
    DegenerateBox {
        which: &'static str,
        axis: usize,
        lo: f64,
        hi: f64,
    },
    #[error("component {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("n must be at least 1")]
    EmptyState,
    #[error("invalid system JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Wire form of a system file:
/// `{"n":2, "m":1, "f":[...], "params":{...}, "domain":[[lo,hi],...], "input_box":[[lo,hi],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub f: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub domain: Vec<Interval>,
    #[serde(default)]
    pub input_box: Vec<Interval>,
    /// Only meaningful for diffusions; `n` rows of expression strings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<Vec<Vec<String>>>,
}

/// A controlled vector field `ẋ = f(x, u)` on a state box and an input box.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    n: usize,
    m: usize,
    f: Vec<Expr>,
    signature: Signature,
    param_values: Vec<f64>,
    domain: Vec<Interval>,
    input_box: Vec<Interval>,
}

impl SystemModel {
    /// Parses and validates a system. Parameters are ordered by name.
    pub fn new(
        n: usize,
        m: usize,
        f: &[&str],
        params: &[(&str, f64)],
        domain: Vec<Interval>,
        input_box: Vec<Interval>,
    ) -> Result<Self, SystemError> {
        let params: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::from_spec(&SystemSpec {
            n,
            m,
            f: f.iter().map(|s| s.to_string()).collect(),
            params,
            domain,
            input_box,
            dispersion: None,
        })
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self, SystemError> {
        let signature = Signature::new(spec.n, spec.m, spec.params.keys().cloned().collect());
        let f = spec
            .f
            .iter()
            .enumerate()
            .map(|(index, text)| {
                parse_expression(text, &signature).map_err(|source| SystemError::Parse { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(
            signature,
            f,
            spec.params.values().copied().collect(),
            spec.domain.clone(),
            spec.input_box.clone(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let spec: SystemSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub(crate) fn from_parts(
        signature: Signature,
        f: Vec<Expr>,
        param_values: Vec<f64>,
        domain: Vec<Interval>,
        input_box: Vec<Interval>,
    ) -> Result<Self, SystemError> {
        let (n, m) = (signature.n_states, signature.n_inputs);
        if n == 0 {
            return Err(SystemError::EmptyState);
        }
        if f.len() != n {
            return Err(SystemError::ComponentCount { n, got: f.len() });
        }
        for (which, bx, expected) in [("domain", &domain, n), ("input_box", &input_box, m)] {
            if bx.len() != expected {
                return Err(SystemError::BoxDimension {
                    which,
                    expected,
                    got: bx.len(),
                });
            }
            if let Some((axis, iv)) = bx.iter().enumerate().find(|(_, iv)| !iv.is_proper()) {
                return Err(SystemError::DegenerateBox {
                    which,
                    axis,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(Self {
            n,
            m,
            f,
            signature,
            param_values,
            domain,
            input_box,
        })
    }

    /// Back to the wire form, with expressions in canonical printed form.
    pub fn to_spec(&self) -> SystemSpec {
        SystemSpec {
            n: self.n,
            m: self.m,
            f: self.f.iter().map(ToString::to_string).collect(),
            params: self
                .signature
                .params
                .iter()
                .cloned()
                .zip(self.param_values.iter().copied())
                .collect(),
            domain: self.domain.clone(),
            input_box: self.input_box.clone(),
            dispersion: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &[Expr] {
        &self.f
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn param_values(&self) -> &[f64] {
        &self.param_values
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn input_box(&self) -> &[Interval] {
        &self.input_box
    }

    /// Replaces the component expressions and boxes, keeping the parameters.
    pub(crate) fn with_parts(&self, f: Vec<Expr>, domain: Vec<Interval>, input_box: Vec<Interval>) -> Self {
        Self {
            f,
            domain,
            input_box,
            ..self.clone()
        }
    }

    pub fn point<'a>(&'a self, x: &'a [f64], u: &'a [f64]) -> Point<'a> {
        Point {
            x,
            u,
            params: &self.param_values,
        }
    }

    pub fn eval_component(&self, i: usize, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
        self.f[i].evaluate(&self.point(x, u))
    }

    pub fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let p = self.point(x, u);
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = e.evaluate(&p)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.n];
        self.eval_into(x, u, &mut out)?;
        Ok(out)
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.n && self.domain.iter().zip(x).all(|(iv, v)| iv.contains(*v))
    }
}
