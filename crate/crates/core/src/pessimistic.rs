//! Pessimistic evaluation through equilibrium-gap penalization.
//!
//! For fixed `x`, the pessimistic value `psi_p(x)` is generated by a
//! two-player lower equilibrium: player 1 maximizes `F(x, .)` subject to
//! staying within `eps` of player 2's value, player 2 minimizes `f(x, .)`.
//! The gap function
//!
//! `N_x(y, v) = [max_{f(x,yh) <= f(x,v)+eps} F(x,yh) - F(x,y)] + [f(x,v) - phi(x)]`
//!
//! is nonnegative on the feasible region and vanishes exactly at
//! equilibria, where `F(x, y) = psi_p(x)`. Evaluation minimizes
//! `-F(x,y) + sigma [N_x]_+` over feasible `(y, v)` pairs along an
//! escalating `sigma` schedule with multistart; achieved gaps certify the
//! reported values. The raw truncated penalty admits spurious penalty-free
//! minimizers at infeasible high-`F` points, so the descent also penalizes
//! the player-1 coupling violation and candidates are feasibility-restored
//! before gaps are reported.

use serde::Serialize;

use crate::config::ToleranceConfig;
use crate::linalg::{dist, dot, norm};
use crate::lower::{extremum_at_level, solve_lower, Effort, ExtremumSense, LowerSolution, SolveStatus};
use crate::neldermead::{self, NelderMeadConfig};
use crate::problem::BilevelInstance;
use crate::rng::{stream_for_point, uniform_in_box};
use crate::solver::{polish_on_constraint, restore_feasible};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PessimisticEval {
    pub x: Vec<f64>,
    pub psi_p: f64,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub ni_gap: f64,
    pub sigma_final: f64,
    pub starts_used: usize,
    pub status: SolveStatus,
    pub trace: Vec<StartTrace>,
}

/// Per-start provenance for the result manifest.
#[derive(Debug, Clone, Serialize)]
pub struct StartTrace {
    pub start_index: usize,
    pub y0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Achieved gap after each sigma stage.
    pub sigma_chain: Vec<(f64, f64)>,
    pub final_gap: f64,
    pub final_value: f64,
    pub status: SolveStatus,
}

/// Inner supremum `M(level) = max F(x, .)` over `{f(x,.) <= level}` with a
/// warm start; polish-only path for the thousands of calls made per
/// penalized descent. Returns the value, the maximizer, and a multiplier
/// estimate for the level constraint.
fn inner_max_warm(
    inst: &BilevelInstance,
    x: &[f64],
    level: f64,
    anchor: &[f64],
    warm: Option<&[f64]>,
) -> (f64, Vec<f64>, f64) {
    let con = |y: &[f64]| inst.f(x, y) - level;
    let value = |y: &[f64]| -inst.big_f(x, y);
    let grad = |y: &[f64]| -> Vec<f64> { inst.grad_y_upper(x, y).iter().map(|g| -g).collect() };
    let start = warm.unwrap_or(anchor);
    let pol = polish_on_constraint(
        |z| inst.follower_set.project(z),
        value,
        grad,
        con,
        |y| inst.grad_y_lower(x, y),
        anchor,
        start,
        150,
    );
    let yhat = pol.point;
    let m_val = -pol.value;
    // multiplier of the level constraint from stationarity: grad F aligns
    // with lambda * grad f on the free coordinates when the level binds
    let lam = if con(&yhat) > -1e-8 {
        let gf = inst.grad_y_upper(x, &yhat);
        let gc = inst.grad_y_lower(x, &yhat);
        let denom = dot(&gc, &gc);
        if denom > 1e-14 {
            (dot(&gf, &gc) / denom).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    (m_val, yhat, lam)
}

/// Full-effort inner supremum used for reported gaps.
fn inner_max_full(
    inst: &BilevelInstance,
    x: &[f64],
    level: f64,
    anchor: &[f64],
    cfg: &ToleranceConfig,
    effort: Effort,
) -> (f64, Vec<f64>) {
    let n_starts = match effort {
        Effort::Full => cfg.extremum_starts.max(1),
        Effort::Light => 3,
    };
    let (lo, hi) = inst.follower_set.bounding_box();
    let mut rng = stream_for_point(cfg.master_seed, "ni-inner", x, level.to_bits());
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|_| inst.follower_set.project(&uniform_in_box(&mut rng, &lo, &hi)))
        .collect();
    let (m, yhat, _mult, _mv) = extremum_at_level(
        inst,
        x,
        level,
        ExtremumSense::Max,
        anchor,
        &starts,
        cfg,
        effort,
        false,
    );
    (m, yhat)
}

fn clamp_gap(raw: f64) -> f64 {
    if raw < 0.0 && raw >= -1e-10 {
        0.0
    } else {
        raw
    }
}

/// The equilibrium gap `N_x(y, v)`; both inner suprema are resolved by
/// constrained local solves (the second reduces to `f(x,v) - phi(x)`).
pub fn ni_gap(
    inst: &BilevelInstance,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    eps: f64,
    cfg: &ToleranceConfig,
) -> Result<f64> {
    let lower = solve_lower(inst, x, cfg, Effort::Full)?;
    Ok(ni_gap_with_lower(inst, x, y, v, eps, &lower, cfg, Effort::Full))
}

#[allow(clippy::too_many_arguments)]
pub fn ni_gap_with_lower(
    inst: &BilevelInstance,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    eps: f64,
    lower: &LowerSolution,
    cfg: &ToleranceConfig,
    effort: Effort,
) -> f64 {
    let level = inst.f(x, v) + eps;
    let (m, _) = inner_max_full(inst, x, level, &lower.y_star, cfg, effort);
    let raw = (m - inst.big_f(x, y)) + (inst.f(x, v) - lower.phi);
    clamp_gap(raw)
}

/// Gap certificate of a pessimistic candidate `y` against the exact lower
/// response: re-solves the inner supremum from fresh starts and reports the
/// shortfall `[M - F(x, y)]_+`.
pub fn certificate_gap(
    inst: &BilevelInstance,
    x: &[f64],
    y: &[f64],
    lower: &LowerSolution,
    eps: f64,
    cfg: &ToleranceConfig,
    effort: Effort,
) -> f64 {
    ni_gap_with_lower(inst, x, y, &lower.y_star, eps, lower, cfg, effort).max(0.0)
}

pub struct NiEvalOptions {
    pub n_starts: usize,
    pub inner_iters: usize,
}

impl NiEvalOptions {
    pub fn from_config(cfg: &ToleranceConfig) -> Self {
        Self {
            n_starts: cfg.ni_starts,
            inner_iters: cfg.ni_inner_iters,
        }
    }

    pub fn light() -> Self {
        Self {
            n_starts: 2,
            inner_iters: 40,
        }
    }
}

/// Pessimistic evaluation at `x`: penalized descent over `(y, v)` pairs
/// along the sigma schedule, warm-started per stage, multistart over
/// space-filling seeds. Best candidate prefers gap feasibility over value.
pub fn ni_penalized_eval(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    cfg: &ToleranceConfig,
    opts: &NiEvalOptions,
) -> Result<PessimisticEval> {
    let lower = solve_lower(inst, x, cfg, Effort::Full)?;
    let phi = lower.phi;
    let y_star = lower.y_star.clone();
    let gap_tol = cfg.ni_gap_tol;

    let (lo, hi) = inst.follower_set.bounding_box();
    let mut rng = stream_for_point(cfg.master_seed, "ni-eval", x, eps.to_bits());
    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = vec![(y_star.clone(), y_star.clone())];
    // equilibrium-targeted seed: player 1 at the inner oracle's argmax for
    // the exact lower level, player 2 at the exact response
    if opts.n_starts > 1 {
        let (_, y_seed) = inner_max_full(inst, x, phi + eps, &y_star, cfg, Effort::Light);
        starts.push((y_seed, y_star.clone()));
    }
    // space-filling fill over Y x Y: stratify each coordinate of the pair
    let n_extra = opts.n_starts.saturating_sub(2);
    if n_extra > 0 {
        let pts = latin_hypercube_pairs(&mut rng, n_extra, &lo, &hi);
        for (y0, v0) in pts {
            starts.push((
                inst.follower_set.project(&y0),
                inst.follower_set.project(&v0),
            ));
        }
    }

    let mut traces: Vec<StartTrace> = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, f64, f64, Vec<f64>, Vec<f64>, f64)> = None; // (idx, gap, F, y, v, sigma)

    for (s_idx, (y0, v0)) in starts.iter().enumerate() {
        let mut y = y0.clone();
        let mut v = v0.clone();
        let mut warm: Option<Vec<f64>> = None;
        let mut chain: Vec<(f64, f64)> = Vec::new();
        let mut sigma_final = cfg.sigma_schedule[0];
        let mut prev_gap = f64::INFINITY;

        for &sigma in &cfg.sigma_schedule {
            sigma_final = sigma;
            let (y_new, v_new, warm_new) =
                penalized_stage(inst, x, eps, phi, sigma, &y, &v, warm.take(), opts.inner_iters);
            warm = warm_new;
            // stage gap at the feasibility-restored candidate
            let (gap_new, _, _) = restored_gap(
                inst, x, eps, phi, &y_star, &y_new, &v_new, warm.as_deref(), cfg,
                Effort::Light,
            );
            if gap_new <= prev_gap {
                y = y_new;
                v = v_new;
                prev_gap = gap_new;
            }
            chain.push((sigma, prev_gap));
            if prev_gap <= gap_tol {
                break;
            }
        }

        // final restoration and bookkeeping: reported gaps face the
        // full-effort inner oracle
        let (gap, y_restored, f_val) = restored_gap(
            inst, x, eps, phi, &y_star, &y, &v, warm.as_deref(), cfg, Effort::Full,
        );
        let status = if gap <= gap_tol {
            SolveStatus::Converged
        } else {
            SolveStatus::Incumbent
        };
        traces.push(StartTrace {
            start_index: s_idx,
            y0: y0.clone(),
            v0: v0.clone(),
            sigma_chain: chain,
            final_gap: gap,
            final_value: f_val,
            status,
        });
        let better = match &best {
            None => true,
            Some((_, bg, bf, ..)) => {
                let cand_ok = gap <= gap_tol;
                let best_ok = *bg <= gap_tol;
                match (cand_ok, best_ok) {
                    (true, true) => f_val > *bf,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => gap < *bg || (gap == *bg && f_val > *bf),
                }
            }
        };
        if better {
            best = Some((s_idx, gap, f_val, y_restored, v.clone(), sigma_final));
        }
    }

    let (_, gap, f_val, y, v, sigma_final) =
        best.ok_or_else(|| Error::SolverFailure("pessimistic evaluation had no starts".into()))?;
    let status = if gap <= gap_tol && lower.status == SolveStatus::Converged {
        SolveStatus::Converged
    } else {
        SolveStatus::Incumbent
    };
    Ok(PessimisticEval {
        x: x.to_vec(),
        psi_p: f_val,
        y,
        v,
        ni_gap: gap,
        sigma_final,
        starts_used: starts.len(),
        status,
        trace: traces,
    })
}

/// One sigma stage: projected-gradient descent on
/// `-F(x,y) + sigma ([N]_+ + [coupling violation]_+)` over `Y x Y`.
#[allow(clippy::too_many_arguments)]
fn penalized_stage(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    phi: f64,
    sigma: f64,
    y0: &[f64],
    v0: &[f64],
    warm0: Option<Vec<f64>>,
    max_iters: usize,
) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let m = inst.m;
    let mut y = y0.to_vec();
    let mut v = v0.to_vec();
    let mut warm = warm0;

    let eval = |y: &[f64], v: &[f64], warm: Option<&[f64]>| -> (f64, f64, f64, Vec<f64>, f64) {
        let level = inst.f(x, v) + eps;
        let (m_val, yhat, lam) = inner_max_warm(inst, x, level, y, warm);
        let n_gap = (m_val - inst.big_f(x, y)) + (inst.f(x, v) - phi);
        let viol = (inst.f(x, y) - inst.f(x, v) - eps).max(0.0);
        let g = -inst.big_f(x, y) + sigma * (n_gap.max(0.0) + viol);
        (g, n_gap, viol, yhat, lam)
    };

    let (mut g_cur, mut n_cur, mut viol_cur, yhat, mut lam_cur) = eval(&y, &v, warm.as_deref());
    warm = Some(yhat);
    let mut step = 0.25;
    for _ in 0..max_iters {
        // semi-analytic gradient blocks
        let gy_f = inst.grad_y_upper(x, &y);
        let gy_fy = inst.grad_y_lower(x, &y);
        let gv_f = inst.grad_y_lower(x, &v);
        let act_n = if n_cur > 0.0 { 1.0 } else { 0.0 };
        let act_v = if viol_cur > 0.0 { 1.0 } else { 0.0 };
        let dy: Vec<f64> = (0..m)
            .map(|j| -(1.0 + sigma * act_n) * gy_f[j] + sigma * act_v * gy_fy[j])
            .collect();
        let dv: Vec<f64> = (0..m)
            .map(|j| sigma * act_n * (1.0 + lam_cur) * gv_f[j] - sigma * act_v * gv_f[j])
            .collect();
        let gnorm = (norm(&dy).powi(2) + norm(&dv).powi(2)).sqrt();
        if gnorm < 1e-12 {
            break;
        }
        let mut s = step;
        let mut accepted = false;
        for _ in 0..25 {
            // normalized move: `s` is the travel distance, not a raw
            // gradient multiple, so sigma escalation does not shrink steps
            let scale = s / gnorm;
            let y_t = inst
                .follower_set
                .project(&crate::linalg::add_scaled(&y, -scale, &dy));
            let v_t = inst
                .follower_set
                .project(&crate::linalg::add_scaled(&v, -scale, &dv));
            let moved = dist(&y_t, &y) + dist(&v_t, &v);
            if moved < 1e-14 {
                break;
            }
            let (g_t, n_t, viol_t, yhat_t, lam_t) = eval(&y_t, &v_t, warm.as_deref());
            if g_t < g_cur - 1e-12 {
                y = y_t;
                v = v_t;
                g_cur = g_t;
                n_cur = n_t;
                viol_cur = viol_t;
                lam_cur = lam_t;
                warm = Some(yhat_t);
                step = (s * 1.4).min(2.0);
                accepted = true;
                break;
            }
            s *= 0.4;
        }
        if !accepted {
            break;
        }
    }
    (y, v, warm)
}

/// Feasibility-restores `y` against the player-1 constraint at `v`'s level
/// and returns the clamped gap, the restored point, and its upper value.
/// The inner supremum behind a reported gap is re-solved with multistart:
/// a single-basin estimate would certify against too weak an oracle.
#[allow(clippy::too_many_arguments)]
fn restored_gap(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    phi: f64,
    y_star: &[f64],
    y: &[f64],
    v: &[f64],
    warm: Option<&[f64]>,
    cfg: &ToleranceConfig,
    effort: Effort,
) -> (f64, Vec<f64>, f64) {
    let level = inst.f(x, v) + eps;
    let cushion = crate::lower::level_cushion(level);
    let con = |w: &[f64]| inst.f(x, w) - level - cushion;
    let y_feas = restore_feasible(
        |z: &[f64]| inst.follower_set.project(z),
        con,
        |w: &[f64]| inst.grad_y_lower(x, w),
        y_star,
        y,
    );
    let (m_full, _) = inner_max_full(inst, x, level, y_star, cfg, effort);
    let (m_warm, _, _) = inner_max_warm(inst, x, level, y_star, warm.or(Some(&y_feas)));
    let (m_alt, _, _) = inner_max_warm(inst, x, level, y_star, Some(&y_feas));
    let m_best = m_full.max(m_warm).max(m_alt);
    let raw = (m_best - inst.big_f(x, &y_feas)) + (inst.f(x, v) - phi);
    (clamp_gap(raw), y_feas.clone(), inst.big_f(x, &y_feas))
}

fn latin_hypercube_pairs(
    rng: &mut rand_chacha::ChaCha8Rng,
    n: usize,
    lo: &[f64],
    hi: &[f64],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut lo2 = lo.to_vec();
    lo2.extend_from_slice(lo);
    let mut hi2 = hi.to_vec();
    hi2.extend_from_slice(hi);
    let m = lo.len();
    crate::rng::lhs_in_box(rng, n, &lo2, &hi2)
        .into_iter()
        .map(|p| (p[..m].to_vec(), p[m..].to_vec()))
        .collect()
}

// ---------------------------------------------------------------------------
// Outer derivative-free search
// ---------------------------------------------------------------------------

pub struct OuterSearchConfig {
    pub n_starts: usize,
    /// Nelder-Mead evaluation budget per start; zero means evaluate the
    /// starts only.
    pub max_fevals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterStartTrace {
    pub start_index: usize,
    pub x0: Vec<f64>,
    pub x_final: Vec<f64>,
    pub psi_p: f64,
    pub fevals: usize,
    pub status: SolveStatus,
}

pub struct OuterSearchResult {
    pub x_best: Vec<f64>,
    pub eval: PessimisticEval,
    pub trace: Vec<OuterStartTrace>,
}

/// Minimizes `x -> psi_p(x)` by multistart Nelder-Mead. Trial points are
/// projected onto the leader set; the residual infeasibility multiplies the
/// objective as a soft barrier.
pub fn outer_pessimistic_search(
    inst: &BilevelInstance,
    eps: f64,
    cfg: &ToleranceConfig,
    search: &OuterSearchConfig,
) -> Result<OuterSearchResult> {
    let set = &inst.leader_set;
    let center: Vec<f64> = set
        .lo
        .iter()
        .zip(&set.hi)
        .map(|(l, h)| 0.5 * (l + h))
        .collect();
    let mut starts = vec![set.project(&center)];
    let mut rng = crate::rng::stream(cfg.master_seed, "outer-pess", eps.to_bits());
    while starts.len() < search.n_starts.max(1) {
        let p = uniform_in_box(&mut rng, &set.lo, &set.hi);
        starts.push(set.project(&p));
    }

    let light = NiEvalOptions::light();
    let objective = |x_raw: &[f64]| -> f64 {
        let xp = set.project(x_raw);
        let d2 = dist(x_raw, &xp).powi(2);
        match ni_penalized_eval(inst, &xp, eps, cfg, &light) {
            Ok(ev) => ev.psi_p * (1.0 + d2),
            Err(_) => f64::INFINITY,
        }
    };

    let mut trace = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (i, x0) in starts.iter().enumerate() {
        let (xf, fv, fevals, converged) = if search.max_fevals == 0 {
            (x0.clone(), objective(x0), 1, false)
        } else {
            let scale: Vec<f64> = set
                .lo
                .iter()
                .zip(&set.hi)
                .map(|(l, h)| 0.08 * (h - l))
                .collect();
            let r = neldermead::minimize(
                &objective,
                x0,
                &scale,
                &NelderMeadConfig {
                    max_fevals: search.max_fevals,
                    xatol: cfg.nm_tol,
                    fatol: 1e-10,
                },
            );
            (set.project(&r.x), r.fx, r.fevals, r.converged)
        };
        trace.push(OuterStartTrace {
            start_index: i,
            x0: x0.clone(),
            x_final: xf.clone(),
            psi_p: fv,
            fevals,
            status: if converged {
                SolveStatus::Converged
            } else {
                SolveStatus::Incumbent
            },
        });
        if best.as_ref().map_or(true, |(bv, _)| fv < *bv) {
            best = Some((fv, xf));
        }
    }
    let (_, x_best) = best.ok_or_else(|| Error::SolverFailure("no outer starts".into()))?;
    let eval = ni_penalized_eval(inst, &x_best, eps, cfg, &NiEvalOptions::from_config(cfg))?;
    Ok(OuterSearchResult {
        x_best,
        eval,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{case1_instance, case1_params, case2_instance, case2_params};
    use crate::problem::{FollowerSet, LeaderSet, Objective};
    use std::sync::Arc;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn gap_vanishes_at_lower_equilibrium() {
        // study 1 at x=(0,0), eps=0.1: equilibrium is v=(1,0) (exact
        // optimum) and y the constrained maximizer (1,0) itself
        let inst = case1_instance(&case1_params()).unwrap();
        let x = [0.0, 0.0];
        let g = ni_gap(&inst, &x, &[1.0, 0.0], &[1.0, 0.0], 0.1, &cfg()).unwrap();
        assert!(g.abs() <= 1e-6, "gap {g}");
    }

    #[test]
    fn gap_splits_into_value_and_suboptimality_terms() {
        let inst = case1_instance(&case1_params()).unwrap();
        let x = [0.0, 0.0];
        // y=(0.5,0.5) undershoots the constrained max 1.5 by 0.875
        let g = ni_gap(&inst, &x, &[0.5, 0.5], &[1.0, 0.0], 0.1, &cfg()).unwrap();
        assert!((g - 0.875).abs() < 1e-5, "gap {g}");
        // a v suboptimal by exactly f(x,v) - phi = 0.2 adds that amount
        let g2 = ni_gap(&inst, &x, &[0.5, 0.5], &[0.0, 1.0], 0.1, &cfg()).unwrap();
        let level = inst.f(&x, &[0.0, 1.0]) + 0.1; // 1.3: the whole simplex
        assert!((level - 1.3).abs() < 1e-12);
        // first sup over the whole simplex is F max = 1.5 at (1,0)
        assert!((g2 - (1.5 - 0.625 + 0.2)).abs() < 1e-5, "gap {g2}");
    }

    #[test]
    fn penalized_eval_on_line_finds_endpoint_max() {
        let inst = case1_instance(&case1_params()).unwrap();
        let ev = ni_penalized_eval(
            &inst,
            &[1.6, 1.4],
            0.1,
            &cfg(),
            &NiEvalOptions::from_config(&cfg()),
        )
        .unwrap();
        assert!((ev.psi_p - 1.246).abs() < 1e-3, "psi_p {}", ev.psi_p);
        assert!(ev.ni_gap <= 1e-6, "gap {}", ev.ni_gap);
        assert_eq!(ev.status, SolveStatus::Converged);
    }

    #[test]
    fn strongly_convex_zero_eps_gives_degenerate_interval() {
        let inst = case2_instance(&case2_params()).unwrap();
        let x = [1.08, 0.72, 3.79, 1.08];
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let ev = ni_penalized_eval(&inst, &x, 0.0, &cfg(), &NiEvalOptions::light()).unwrap();
        assert!((ev.psi_p - inst.big_f(&x, &lower.y_star)).abs() < 1e-4);
        assert!(ev.ni_gap <= 1e-6);
    }

    #[test]
    fn sigma_chain_gaps_are_monotone() {
        let inst = case2_instance(&case2_params()).unwrap();
        let ev = ni_penalized_eval(
            &inst,
            &[0.79, 0.79, 3.12, 0.50],
            0.5,
            &cfg(),
            &NiEvalOptions::from_config(&cfg()),
        )
        .unwrap();
        for tr in &ev.trace {
            for w in tr.sigma_chain.windows(2) {
                assert!(w[1].1 <= w[0].1 + 1e-12, "chain not monotone: {:?}", tr.sigma_chain);
            }
        }
    }

    #[test]
    fn case2_robust_incumbent_premium_band() {
        let inst = case2_instance(&case2_params()).unwrap();
        let x = [1.06, 1.09, 4.99, 1.17];
        let ev = ni_penalized_eval(&inst, &x, 0.5, &cfg(), &NiEvalOptions::from_config(&cfg()))
            .unwrap();
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mn = crate::lower::solve_eps_extremum(
            &inst,
            &x,
            0.5,
            ExtremumSense::Min,
            &lower,
            &cfg(),
            Effort::Full,
        )
        .unwrap();
        let delta = ev.psi_p - mn.value;
        assert!((delta - 0.370).abs() <= 0.02, "delta {delta}");
        assert!(ev.ni_gap <= 1e-6);
    }

    fn toy_instance() -> crate::problem::BilevelInstance {
        // f = (y - x)^2, F = (x - 1)^2 + y on X = [0,2], Y = [-3,3]
        let f = Objective::new(
            Arc::new(|x: &[f64], y: &[f64]| (y[0] - x[0]).powi(2)),
            Arc::new(|x: &[f64], y: &[f64]| vec![-2.0 * (y[0] - x[0])]),
            Arc::new(|x: &[f64], y: &[f64]| vec![2.0 * (y[0] - x[0])]),
        );
        let big_f = Objective::new(
            Arc::new(|x: &[f64], y: &[f64]| (x[0] - 1.0).powi(2) + y[0]),
            Arc::new(|x: &[f64], _: &[f64]| vec![2.0 * (x[0] - 1.0)]),
            Arc::new(|_: &[f64], _: &[f64]| vec![1.0]),
        );
        crate::problem::BilevelInstance::new(
            big_f,
            f,
            LeaderSet::new(vec![0.0], vec![2.0], vec![]).unwrap(),
            FollowerSet::Box {
                lo: vec![-3.0],
                hi: vec![3.0],
            },
        )
    }

    #[test]
    fn outer_search_recovers_toy_minimizer() {
        // psi_p(x) = (x-1)^2 + x + sqrt(eps); minimized at x = 0.5
        let inst = toy_instance();
        let eps = 0.1;
        let r = outer_pessimistic_search(
            &inst,
            eps,
            &cfg(),
            &OuterSearchConfig {
                n_starts: 3,
                max_fevals: 200,
            },
        )
        .unwrap();
        assert!((r.x_best[0] - 0.5).abs() < 1e-4, "x {:?}", r.x_best);
        let want = 0.25 + 0.5 + eps.sqrt();
        assert!((r.eval.psi_p - want).abs() < 1e-4, "psi_p {}", r.eval.psi_p);
    }

    #[test]
    fn outer_search_budget_zero_returns_best_start() {
        let inst = toy_instance();
        let r = outer_pessimistic_search(
            &inst,
            0.1,
            &cfg(),
            &OuterSearchConfig {
                n_starts: 2,
                max_fevals: 0,
            },
        )
        .unwrap();
        assert_eq!(r.trace.len(), 2);
        assert!(r.trace.iter().all(|t| t.status == SolveStatus::Incumbent));
    }
}
