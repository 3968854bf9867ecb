//! Centralized tolerances and solver settings.
//!
//! Every numeric threshold used by the solvers lives here so that runs are
//! reproducible from a single config snapshot and tests can override
//! individual knobs.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Master seed for every derived random stream.
    pub master_seed: u64,
    /// Projected-gradient stationarity tolerance for inner solves.
    pub grad_tol: f64,
    /// Iteration cap per penalty stage of an inner solve.
    pub max_inner_iters: usize,
    /// Exterior penalty schedule: start, growth factor, cap.
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    /// Feasibility slack distinguishing eps-feasible from infeasible returns.
    pub eps_slack_tol: f64,
    /// KKT residual threshold for a `converged` lower solve.
    pub kkt_tol: f64,
    /// Multistart counts.
    pub lower_starts: usize,
    pub extremum_starts: usize,
    /// Euclidean projection convergence tolerance (polyhedral leader sets).
    pub projection_tol: f64,
    /// Proximal alternating scheme: step weight, iteration cap, joint tolerance.
    pub prox_tau: f64,
    pub prox_max_iters: usize,
    pub prox_tol: f64,
    /// Gap-penalty schedule and stopping tolerance for pessimistic evaluation.
    pub sigma_schedule: Vec<f64>,
    pub ni_gap_tol: f64,
    pub ni_starts: usize,
    /// Iteration cap per sigma stage of the penalized (y, v) descent.
    pub ni_inner_iters: usize,
    /// Nelder-Mead simplex-diameter tolerance and per-start budget.
    pub nm_tol: f64,
    pub nm_max_fevals: usize,
    /// Strictness margin when testing Pareto dominance.
    pub dominance_strict_tol: f64,
    /// Premiums within this margin below zero are clamped to zero.
    pub delta_clamp: f64,
    /// Central finite-difference step for gradient checks and fallbacks.
    pub fd_step: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            master_seed: 7,
            grad_tol: 1e-10,
            max_inner_iters: 2000,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            penalty_max: 1e6,
            eps_slack_tol: 1e-8,
            kkt_tol: 1e-8,
            lower_starts: 5,
            extremum_starts: 8,
            projection_tol: 1e-10,
            prox_tau: 2.0,
            prox_max_iters: 120,
            prox_tol: 1e-6,
            sigma_schedule: vec![10.0, 100.0, 1000.0, 10000.0],
            ni_gap_tol: 1e-6,
            ni_starts: 5,
            ni_inner_iters: 80,
            nm_tol: 1e-6,
            nm_max_fevals: 400,
            dominance_strict_tol: 1e-9,
            delta_clamp: 1e-9,
            fd_step: 1e-6,
        }
    }
}

impl ToleranceConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = ToleranceConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ToleranceConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_overrides_single_field() {
        let cfg: ToleranceConfig = toml::from_str("master_seed = 11").unwrap();
        assert_eq!(cfg.master_seed, 11);
        assert_eq!(cfg.prox_tau, 2.0);
    }
}
