//! A small arithmetic expression language for vector fields and reaction rates.
//!
//! Expressions are built from numeric literals, state variables `x1..xn`,
//! input variables `u1..um`, named parameters, the binary operators
//! `+ - * / ^`, unary minus, parentheses and the functions `exp`, `log` and
//! `sqrt`. Symbols are resolved against a [`Signature`] at parse time, so an
//! [`Expr`] that exists can always be evaluated once its symbols are bound.

mod diff;
mod parse;
mod system;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub(crate) use diff::gradient_with;
pub use diff::{hessian_fd, jacobian_fd, FdError};
pub use parse::{parse_expression, ParseError};
pub use system::{Interval, SystemError, SystemModel, SystemSpec};

/// Symbols an expression is allowed to reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub n_states: usize,
    pub n_inputs: usize,
    pub params: Vec<String>,
}

impl Signature {
    pub fn new(n_states: usize, n_inputs: usize, params: Vec<String>) -> Self {
        Self {
            n_states,
            n_inputs,
            params,
        }
    }

    /// Resolves an identifier. Parameters shadow nothing: `x3` is always a
    /// state reference and is rejected if `n_states < 3`.
    pub fn resolve(&self, name: &str) -> Option<Symbol> {
        if let Some(idx) = indexed(name, 'x') {
            return (idx < self.n_states).then_some(Symbol::State(idx));
        }
        if let Some(idx) = indexed(name, 'u') {
            return (idx < self.n_inputs).then_some(Symbol::Input(idx));
        }
        self.params.iter().position(|p| p == name).map(|slot| Symbol::Param {
            slot,
            name: name.to_string(),
        })
    }
}

/// Parses `x12` / `u3` style names into a zero-based index.
fn indexed(name: &str, prefix: char) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse::<usize>().ok().map(|i| i - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    State(usize),
    Input(usize),
    Param { slot: usize, name: String },
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::State(i) => write!(f, "x{}", i + 1),
            Symbol::Input(i) => write!(f, "u{}", i + 1),
            Symbol::Param { name, .. } => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn as_str(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(Symbol),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainErrorKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    PowUndefined,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::LogNonPositive => "log of non-positive value",
            DomainErrorKind::SqrtNegative => "sqrt of negative value",
            DomainErrorKind::PowUndefined => "undefined power",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{kind} in `{subexpr}`")]
    Domain { kind: DomainErrorKind, subexpr: String },
    #[error("symbol `{0}` is not bound")]
    Unbound(String),
}

/// Supplies values for symbols during evaluation.
pub trait Scope {
    fn value(&self, sym: &Symbol) -> Option<f64>;
}

/// Positional bindings: states, inputs, and parameter values by slot.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub x: &'a [f64],
    pub u: &'a [f64],
    pub params: &'a [f64],
}

impl Scope for Point<'_> {
    #[inline]
    fn value(&self, sym: &Symbol) -> Option<f64> {
        match sym {
            Symbol::State(i) => self.x.get(*i).copied(),
            Symbol::Input(i) => self.u.get(*i).copied(),
            Symbol::Param { slot, .. } => self.params.get(*slot).copied(),
        }
    }
}

/// Bindings by printed name (`x1`, `u2`, `k`).
impl<S: std::hash::BuildHasher> Scope for std::collections::HashMap<String, f64, S> {
    fn value(&self, sym: &Symbol) -> Option<f64> {
        self.get(&sym.to_string()).copied()
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn state(i: usize) -> Self {
        Expr::Sym(Symbol::State(i))
    }

    pub fn input(i: usize) -> Self {
        Expr::Sym(Symbol::Input(i))
    }

    /// Negation that cancels a directly nested negation.
    pub fn negated(self) -> Self {
        match self {
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn evaluate<S: Scope + ?Sized>(&self, scope: &S) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Sym(s) => scope.value(s).ok_or_else(|| EvalError::Unbound(s.to_string())),
            Expr::Neg(e) => Ok(-e.evaluate(scope)?),
            Expr::Bin(op, l, r) => {
                let a = l.evaluate(scope)?;
                let b = r.evaluate(scope)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(self.domain(DomainErrorKind::DivisionByZero))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_finite() || !a.is_finite() || !b.is_finite() {
                            Ok(v)
                        } else {
                            Err(self.domain(DomainErrorKind::PowUndefined))
                        }
                    }
                }
            }
            Expr::Call(func, arg) => {
                let a = arg.evaluate(scope)?;
                match func {
                    Func::Exp => Ok(a.exp()),
                    Func::Log if a <= 0.0 => Err(self.domain(DomainErrorKind::LogNonPositive)),
                    Func::Log => Ok(a.ln()),
                    Func::Sqrt if a < 0.0 => Err(self.domain(DomainErrorKind::SqrtNegative)),
                    Func::Sqrt => Ok(a.sqrt()),
                }
            }
        }
    }

    fn domain(&self, kind: DomainErrorKind) -> EvalError {
        EvalError::Domain {
            kind,
            subexpr: self.to_string(),
        }
    }

    /// State indices referenced anywhere in the expression.
    pub fn state_dependencies(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Sym(Symbol::State(i)) = e {
                out.insert(*i);
            }
        });
        out
    }

    /// True when no state or input variable occurs.
    pub fn is_constant(&self) -> bool {
        let mut constant = true;
        self.visit(&mut |e| {
            if matches!(e, Expr::Sym(Symbol::State(_) | Symbol::Input(_))) {
                constant = false;
            }
        });
        constant
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Sym(_) => {}
            Expr::Neg(e) | Expr::Call(_, e) => e.visit(f),
            Expr::Bin(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// Rebuilds the tree, replacing every symbol by `f(symbol)`.
    pub fn substitute(&self, f: &impl Fn(&Symbol) -> Expr) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Sym(s) => f(s),
            Expr::Neg(e) => e.substitute(f).negated(),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.substitute(f), r.substitute(f)),
            Expr::Call(func, e) => Expr::Call(*func, Box::new(e.substitute(f))),
        }
    }
}

/// Canonical, fully parenthesized form. Re-parsing it yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.as_str()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.as_str()),
        }
    }
}
