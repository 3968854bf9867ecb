//! Per-decision diagnostics: the ambiguity premium `delta = psi_p - psi_o`
//! over the eps-response set, its normalized ratio, the tolerance-violation
//! residual, the Fischer-Burmeister stationarity residual, and the
//! diameter/sqrt-rate bound checks.

use serde::Serialize;

use crate::config::ToleranceConfig;
use crate::linalg::{dist, norm};
use crate::lower::{
    solve_eps_extremum, solve_lower, Effort, EpsExtremum, ExtremumSense, LowerSolution,
    SolveStatus,
};
use crate::problem::BilevelInstance;
use crate::rng::{stream_for_point, uniform_in_box};
use crate::solver::restore_feasible;
use crate::Result;

/// Computational provenance of a reported point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusLabel {
    /// Full stopping test passed.
    Converged,
    /// Returned at an iteration or budget limit.
    Incumbent,
    /// Hand-specified benchmark.
    Heuristic,
    /// Undominated within the sampled candidate set.
    EmpiricalPareto,
}

impl StatusLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatusLabel::Converged => "converged",
            StatusLabel::Incumbent => "incumbent",
            StatusLabel::Heuristic => "heuristic",
            StatusLabel::EmpiricalPareto => "empirical_pareto",
        }
    }
}

/// The per-decision diagnostic bundle. Field order is the serialization
/// order for both the CSV row and the JSON object.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRecord {
    pub x: Vec<f64>,
    pub eps: f64,
    pub psi_o: f64,
    pub psi_p: f64,
    pub delta: f64,
    pub rho: f64,
    /// Tolerance violation at the reported optimistic response.
    pub r_ll: f64,
    /// Stationarity residual; populated when a `(v, lambda)` pair exists.
    pub g_stat: Option<f64>,
    /// Whether `g_stat`'s multiplier was fitted rather than returned by a
    /// subproblem solver.
    pub g_stat_fitted: bool,
    /// Equilibrium-gap certificate of the pessimistic value.
    pub ni_gap: f64,
    pub status: StatusLabel,
}

/// `delta / (1 + |psi_o|)`.
pub fn normalized_ratio(delta: f64, psi_o: f64) -> f64 {
    delta / (1.0 + psi_o.abs())
}

/// `max(0, f(x,y) - phi - eps)`.
pub fn ll_residual(inst: &BilevelInstance, x: &[f64], y: &[f64], eps: f64, phi: f64) -> f64 {
    (inst.f(x, y) - phi - eps).max(0.0)
}

/// Fischer-Burmeister complementarity function:
/// zero exactly when `a >= 0`, `b >= 0`, `a b = 0`.
pub fn phi_fb(a: f64, b: f64) -> f64 {
    a + b - (a * a + b * b).sqrt()
}

/// First-order stationarity residual of the two-player optimality system at
/// `(x, y, v, lambda)`: natural residuals of the three projected gradient
/// conditions plus the Fischer-Burmeister encoding of complementarity on
/// the coupling constraint `f(x,y) - f(x,v) - eps <= 0`.
pub fn fb_stationarity_residual(
    inst: &BilevelInstance,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    lambda: f64,
    eps: f64,
) -> f64 {
    let gx_f = inst.grad_x_upper(x, y);
    let gx_fy = inst.grad_x_lower(x, y);
    let gx_fv = inst.grad_x_lower(x, v);
    let wx: Vec<f64> = (0..x.len())
        .map(|i| gx_f[i] + lambda * (gx_fy[i] - gx_fv[i]))
        .collect();
    let rx = inst.residual_leader(x, &wx);

    let gy_f = inst.grad_y_upper(x, y);
    let gy_fy = inst.grad_y_lower(x, y);
    let wy: Vec<f64> = (0..y.len()).map(|j| gy_f[j] + lambda * gy_fy[j]).collect();
    let ry = inst.residual_follower(y, &wy);

    let gv = inst.grad_y_lower(x, v);
    let rv = inst.residual_follower(v, &gv);

    let comp = phi_fb(lambda, -(inst.f(x, y) - inst.f(x, v) - eps));

    (norm(&rx).powi(2) + norm(&ry).powi(2) + norm(&rv).powi(2) + comp * comp).sqrt()
}

/// Nonnegative least-squares fit of the multiplier: minimizes the
/// stationarity residual over `lambda >= 0` when no subproblem multiplier
/// is available. Coarse log-grid bracketing followed by golden-section
/// refinement.
pub fn fit_multiplier(
    inst: &BilevelInstance,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    eps: f64,
) -> (f64, f64) {
    let r = |lam: f64| fb_stationarity_residual(inst, x, y, v, lam, eps);
    let mut best_lam = 0.0;
    let mut best_val = r(0.0);
    for k in -6..=6 {
        let lam = 10f64.powi(k);
        let val = r(lam);
        if val < best_val {
            best_val = val;
            best_lam = lam;
        }
    }
    let (mut lo, mut hi) = if best_lam == 0.0 {
        (0.0, 1e-6)
    } else {
        (best_lam / 10.0, best_lam * 10.0)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - (hi - lo) * inv_phi;
        let b = lo + (hi - lo) * inv_phi;
        if r(a) < r(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let lam = 0.5 * (lo + hi);
    let val = r(lam);
    if val < best_val {
        (lam, val)
    } else {
        (best_lam, best_val)
    }
}

/// Intermediate products of a premium evaluation, exposed so callers can
/// reuse the lower solution and the extremal responses.
pub struct PremiumEvaluation {
    pub lower: LowerSolution,
    pub minimum: EpsExtremum,
    pub maximum: EpsExtremum,
    pub record: DiagnosticRecord,
}

/// The ambiguity premium `psi_p - psi_o` with a fully populated record
/// (except `g_stat`, which needs a `(v, lambda)` pair from a subproblem).
/// The pessimistic certificate re-solves the upper maximum from fresh
/// starts and reports how much the reported value undershoots it.
pub fn ambiguity_premium(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    cfg: &ToleranceConfig,
    effort: Effort,
) -> Result<PremiumEvaluation> {
    let lower = solve_lower(inst, x, cfg, effort)?;
    let minimum = solve_eps_extremum(inst, x, eps, ExtremumSense::Min, &lower, cfg, effort)?;
    let maximum = solve_eps_extremum(inst, x, eps, ExtremumSense::Max, &lower, cfg, effort)?;
    let mut delta = maximum.value - minimum.value;
    if delta < 0.0 && delta >= -cfg.delta_clamp {
        delta = 0.0;
    }
    let rho = normalized_ratio(delta, minimum.value);
    let r_ll = ll_residual(inst, x, &minimum.y, eps, lower.phi);
    let ni_gap =
        crate::pessimistic::certificate_gap(inst, x, &maximum.y, &lower, eps, cfg, Effort::Light);
    let status = if lower.status == SolveStatus::Converged
        && minimum.status == SolveStatus::Converged
        && maximum.status == SolveStatus::Converged
    {
        StatusLabel::Converged
    } else {
        StatusLabel::Incumbent
    };
    let record = DiagnosticRecord {
        x: x.to_vec(),
        eps,
        psi_o: minimum.value,
        psi_p: maximum.value,
        delta,
        rho,
        r_ll,
        g_stat: None,
        g_stat_fitted: false,
        ni_gap,
        status,
    };
    Ok(PremiumEvaluation {
        lower,
        minimum,
        maximum,
        record,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiameterCheck {
    pub delta: f64,
    pub diameter_estimate: f64,
    pub lipschitz: f64,
    pub bound: f64,
    pub holds: bool,
    /// Pooled eps-feasible candidates (responses and their upper values);
    /// includes the extremal argument points.
    pub pool: Vec<(Vec<f64>, f64)>,
}

/// Samples the eps-response set, estimates its diameter from inside, and
/// checks `delta <= L_F(x) * diameter + tol`. The pooled candidates also
/// support the exact restricted form of the inequality.
pub fn diameter_bound_check(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    n_samples: usize,
    cfg: &ToleranceConfig,
) -> Result<DiameterCheck> {
    let lip = inst
        .lipschitz_upper_bound
        .as_ref()
        .ok_or(crate::Error::MissingGradient("lipschitz_upper_bound"))?;
    let ev = ambiguity_premium(inst, x, eps, cfg, Effort::Full)?;
    let level = ev.lower.phi + eps;
    let cushion = crate::lower::level_cushion(level);
    let con = |y: &[f64]| inst.f(x, y) - level - cushion;
    let con_grad = |y: &[f64]| inst.grad_y_lower(x, y);
    let (lo, hi) = inst.follower_set.bounding_box();
    let mut rng = stream_for_point(cfg.master_seed, "diameter", x, eps.to_bits());
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_samples + 2);
    pool.push((ev.minimum.y.clone(), inst.big_f(x, &ev.minimum.y)));
    pool.push((ev.maximum.y.clone(), inst.big_f(x, &ev.maximum.y)));
    for _ in 0..n_samples {
        // support-style probe: maximize a random linear functional over
        // the response set, starting from a feasibility-restored sample
        use rand::Rng;
        let dir: Vec<f64> = (0..inst.m).map(|_| rng.gen::<f64>() - 0.5).collect();
        let raw = inst.follower_set.project(&uniform_in_box(&mut rng, &lo, &hi));
        let start = restore_feasible(
            |z: &[f64]| inst.follower_set.project(z),
            con,
            con_grad,
            &ev.lower.y_star,
            &raw,
        );
        let pol = crate::solver::polish_on_constraint(
            |z: &[f64]| inst.follower_set.project(z),
            |y: &[f64]| -crate::linalg::dot(&dir, y),
            |_: &[f64]| dir.iter().map(|d| -d).collect(),
            con,
            con_grad,
            &ev.lower.y_star,
            &start,
            120,
        );
        let y = pol.point;
        let f_val = inst.big_f(x, &y);
        pool.push((y, f_val));
    }
    let mut diam: f64 = 0.0;
    for i in 0..pool.len() {
        for j in (i + 1)..pool.len() {
            diam = diam.max(dist(&pool[i].0, &pool[j].0));
        }
    }
    let l = lip(x);
    let bound = l * diam;
    Ok(DiameterCheck {
        delta: ev.record.delta,
        diameter_estimate: diam,
        lipschitz: l,
        bound,
        holds: ev.record.delta <= bound + 1e-6,
        pool,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub eps: f64,
    pub delta: f64,
    /// `delta / sqrt(eps)`.
    pub ratio: f64,
    /// `2 L_F(x) sqrt(eps / mu)` when a growth modulus is available.
    pub cap: Option<f64>,
}

/// Premium scan over an ascending positive eps grid.
pub fn sqrt_rate_scan(
    inst: &BilevelInstance,
    x: &[f64],
    eps_grid: &[f64],
    cfg: &ToleranceConfig,
) -> Result<Vec<ScanEntry>> {
    if eps_grid.iter().any(|e| *e <= 0.0) || eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::Config(
            "eps grid must be positive and ascending".into(),
        ));
    }
    let mut out = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let ev = ambiguity_premium(inst, x, eps, cfg, Effort::Full)?;
        let cap = match (&inst.lipschitz_upper_bound, &inst.growth_modulus) {
            (Some(l), Some(mu)) => Some(2.0 * l(x) * (eps / mu(x)).sqrt()),
            _ => None,
        };
        out.push(ScanEntry {
            eps,
            delta: ev.record.delta,
            ratio: ev.record.delta / eps.sqrt(),
            cap,
        });
    }
    Ok(out)
}
