//! Checks whether dynamical systems propagate stochastic orders.
//!
//! The crate is organized bottom-up:
//!
//! * [`expr`] parses the vector-field language and differentiates it numerically;
//! * [`orders`] decides orthant, PSD and Gaussian order relations;
//! * [`classify`] certifies the infinitesimal monotonicity and curvature conditions;
//! * [`flow`] integrates ODE flows and tests order, convexity and directional
//!   convexity of the flow map;
//! * [`stoch`] simulates diffusions, checks their structural conditions and
//!   runs empirical stochastic-order tests;
//! * [`lna`] builds reaction networks and compares their linear noise
//!   approximations.

pub mod classify;
pub mod expr;
pub mod flow;
pub mod lna;
pub mod orders;
pub mod sampling;
pub mod stoch;

pub use classify::{classify_system, CheckConfig, ClassificationReport, OrderClass, Verdict};
pub use expr::{Expr, Interval, SystemModel};
pub use flow::{integrate_rk4, FlowConfig, FlowProperty, FlowReport, FlowVerdict, InputSignal, Trajectory};
pub use lna::{GaussianTrajectory, LnaConfig, ReactionNetwork};
pub use orders::{GaussianState, OrthantOrder, Sign};
pub use stoch::{Diffusion, EmConfig, Ensemble};
