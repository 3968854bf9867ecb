//! Decision diagnostics for bilevel (leader-follower) programs.
//!
//! Given a bilevel problem with leader decision `x` and follower decision
//! `y`, the follower's near-optimal responses form the tolerance set
//! `S_eps(x) = {y : f(x,y) <= phi(x) + eps}`. The same leader decision can
//! then induce a whole interval of upper-level outcomes, bracketed by the
//! optimistic value `psi_o = min F` and the pessimistic value
//! `psi_p = max F` over `S_eps(x)`. This crate computes that interval and
//! its width `delta = psi_p - psi_o` (the ambiguity premium), certifies
//! pessimistic evaluations through an equilibrium gap function, generates
//! candidate decisions, and assembles robustness-efficiency frontiers for
//! screening.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`problem`]: problem containers, feasible sets, projections;
//! - [`lower`]: lower-level solves and constrained extrema over `S_eps`;
//! - [`diagnostics`]: premium, ratio, residuals, bound checks;
//! - [`optimistic`]: proximal alternating candidate generation;
//! - [`pessimistic`]: gap-penalized pessimistic evaluation and outer search;
//! - [`frontier`]: scalarization sweep, space-filling samples, Pareto filter;
//! - [`cases`]: the two built-in study instances with closed-form oracles;
//! - [`report`]: CSV/JSON emission, run manifests, plot data.

pub mod cases;
pub mod config;
pub mod diagnostics;
pub mod frontier;
pub mod linalg;
pub mod lower;
pub mod neldermead;
pub mod optimistic;
pub mod pessimistic;
pub mod problem;
pub mod report;
pub mod rng;
pub mod solver;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible input: {0}")]
    Infeasible(String),
    #[error("evaluation failure: objective returned non-finite value at {context}")]
    EvalFailure { context: String },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("gradients required but not supplied for {0}")]
    MissingGradient(&'static str),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
