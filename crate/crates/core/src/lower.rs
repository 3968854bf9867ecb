//! Lower-level solves: the follower's optimal value `phi(x)`, exact
//! responses `y*(x)`, and constrained extrema of the upper objective over
//! the tolerance set `S_eps(x) = {y in Y : f(x,y) <= phi(x) + eps}`.
//!
//! This is the oracle layer under the diagnostics. Every solve is a pure
//! function of `(instance, x, eps, effort)`: multistart seeds derive from
//! the coordinates themselves, never from call order.

use serde::Serialize;

use crate::config::ToleranceConfig;
use crate::problem::BilevelInstance;
use crate::rng::{stream_for_point, uniform_in_box};
use crate::solver::{
    pgd_minimize, polish_on_constraint, restore_feasible, solve_penalized, PenaltySchedule,
    PgdConfig, PgdOutcome,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Incumbent,
}

#[derive(Debug, Clone)]
pub struct LowerSolution {
    /// Lower-level optimal value; equals `f(x, y_star)` by construction.
    pub phi: f64,
    pub y_star: Vec<f64>,
    pub kkt_residual: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumSense {
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct EpsExtremum {
    pub value: f64,
    pub y: Vec<f64>,
    pub sense: ExtremumSense,
    /// `phi(x) + eps - f(x, y)`; nonnegative up to tolerance.
    pub feasibility_slack: f64,
    pub status: SolveStatus,
}

/// Solve effort for the multistart layers. `Light` is used inside search
/// loops where thousands of evaluations occur; `Full` for reported numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effort {
    Light,
    Full,
}

fn lower_pgd_cfg(cfg: &ToleranceConfig, effort: Effort) -> PgdConfig {
    match effort {
        Effort::Full => PgdConfig {
            grad_tol: cfg.grad_tol,
            max_iters: cfg.max_inner_iters,
        },
        Effort::Light => PgdConfig {
            grad_tol: cfg.grad_tol.max(1e-10),
            max_iters: cfg.max_inner_iters.min(600),
        },
    }
}

/// Local minimum of `f(x, .)` over the follower set by projected gradient
/// with multistart; the best value is kept with lowest-start-index ties.
pub fn solve_lower(
    inst: &BilevelInstance,
    x: &[f64],
    cfg: &ToleranceConfig,
    effort: Effort,
) -> Result<LowerSolution> {
    let pgd_cfg = lower_pgd_cfg(cfg, effort);
    let n_starts = match effort {
        Effort::Full => cfg.lower_starts.max(1),
        Effort::Light => 2,
    };
    let (lo, hi) = inst.follower_set.bounding_box();
    let mut rng = stream_for_point(cfg.master_seed, "lower", x, 0);
    let fills = crate::rng::lhs_in_box(&mut rng, n_starts.saturating_sub(1), &lo, &hi);
    let mut best: Option<PgdOutcome> = None;
    for k in 0..n_starts {
        let start = if k == 0 {
            inst.follower_set.center()
        } else {
            inst.follower_set.project(&fills[k - 1])
        };
        let out = pgd_minimize(
            |z| inst.follower_set.project(z),
            |y| inst.f(x, y),
            |y| inst.grad_y_lower(x, y),
            &start,
            &pgd_cfg,
        );
        if !out.value.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => out.value < b.value,
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| {
        Error::SolverFailure(format!("lower solve failed at x={x:?}: no finite start"))
    })?;
    let kkt = crate::linalg::norm(&inst.residual_follower(&best.point, &inst.grad_y_lower(x, &best.point)));
    let status = if kkt <= cfg.kkt_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::Incumbent
    };
    Ok(LowerSolution {
        phi: inst.f(x, &best.point),
        y_star: best.point,
        kkt_residual: kkt,
        status,
    })
}

/// Absolute cushion that keeps level-set membership tests meaningful when
/// `f` varies by last-bit noise across the set (degenerate instances where
/// the lower objective is constant on follower directions). Well inside
/// the 1e-8 feasibility slack the eps-extremum contract allows.
pub(crate) fn level_cushion(level: f64) -> f64 {
    1e-12 * (1.0 + level.abs())
}

/// Constrained extremum of `F(x, .)` over `{y in Y : f(x, y) <= level}`
/// with a feasible `anchor` (`f(x, anchor) <= level`). Returns the value,
/// the point, the constraint multiplier estimate, and the final polish
/// move size.
#[allow(clippy::too_many_arguments)]
pub(crate) fn extremum_at_level(
    inst: &BilevelInstance,
    x: &[f64],
    level: f64,
    sense: ExtremumSense,
    anchor: &[f64],
    starts: &[Vec<f64>],
    cfg: &ToleranceConfig,
    effort: Effort,
    cushioned: bool,
) -> (f64, Vec<f64>, f64, f64) {
    let sgn = match sense {
        ExtremumSense::Min => 1.0,
        ExtremumSense::Max => -1.0,
    };
    let pgd_cfg = lower_pgd_cfg(cfg, effort);
    let schedule = PenaltySchedule {
        init: cfg.penalty_init,
        growth: cfg.penalty_growth,
        max: match effort {
            Effort::Full => cfg.penalty_max,
            Effort::Light => cfg.penalty_max.min(1e5),
        },
    };
    let polish_iters = match effort {
        Effort::Full => 300,
        Effort::Light => 120,
    };
    let value = |y: &[f64]| sgn * inst.big_f(x, y);
    let grad = |y: &[f64]| -> Vec<f64> {
        inst.grad_y_upper(x, y).iter().map(|g| sgn * g).collect()
    };
    let cushion = if cushioned { level_cushion(level) } else { 0.0 };
    let con = |y: &[f64]| inst.f(x, y) - level - cushion;
    let con_grad = |y: &[f64]| inst.grad_y_lower(x, y);

    let mut best_val = f64::INFINITY;
    let mut best_y = anchor.to_vec();
    let mut best_mult = 0.0;
    let mut best_move = 0.0;
    // the anchor itself is always an admissible candidate
    let mut candidates: Vec<Vec<f64>> = vec![anchor.to_vec()];
    candidates.extend(starts.iter().cloned());
    for start in &candidates {
        let pen = solve_penalized(
            |z| inst.follower_set.project(z),
            value,
            grad,
            con,
            con_grad,
            start,
            &schedule,
            &pgd_cfg,
        );
        let restored = restore_feasible(
            |z| inst.follower_set.project(z),
            con,
            con_grad,
            anchor,
            &pen.point,
        );
        let pol = polish_on_constraint(
            |z| inst.follower_set.project(z),
            value,
            grad,
            con,
            con_grad,
            anchor,
            &restored,
            polish_iters,
        );
        if pol.value.is_finite() && pol.value < best_val {
            best_val = pol.value;
            best_y = pol.point;
            best_mult = pen.multiplier;
            best_move = pol.last_move;
        }
    }
    (sgn * best_val, best_y, best_mult, best_move)
}

fn perturbed_starts(
    inst: &BilevelInstance,
    x: &[f64],
    anchor: &[f64],
    n: usize,
    salt: u64,
    cfg: &ToleranceConfig,
) -> Vec<Vec<f64>> {
    let (lo, hi) = inst.follower_set.bounding_box();
    let mut rng = stream_for_point(cfg.master_seed, "extremum", x, salt);
    (0..n)
        .map(|k| {
            if k % 2 == 0 {
                inst.follower_set.project(&uniform_in_box(&mut rng, &lo, &hi))
            } else {
                // anchored jitter covers the near-optimal shell
                let z: Vec<f64> = anchor
                    .iter()
                    .zip(lo.iter().zip(&hi))
                    .map(|(a, (l, h))| {
                        use rand::Rng;
                        a + (rng.gen::<f64>() - 0.5) * 0.5 * (h - l)
                    })
                    .collect();
                inst.follower_set.project(&z)
            }
        })
        .collect()
}

/// Extremum of `F(x, .)` over the eps-response set; the lower solution
/// supplies `phi` and the feasible anchor.
pub fn solve_eps_extremum(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    sense: ExtremumSense,
    lower: &LowerSolution,
    cfg: &ToleranceConfig,
    effort: Effort,
) -> Result<EpsExtremum> {
    if eps < 0.0 {
        return Err(Error::Config("eps must be nonnegative".into()));
    }
    let level = lower.phi + eps;
    let n_starts = match effort {
        Effort::Full => cfg.extremum_starts.max(1),
        Effort::Light => 3,
    };
    let salt = match sense {
        ExtremumSense::Min => 1,
        ExtremumSense::Max => 2,
    };
    let starts = perturbed_starts(inst, x, &lower.y_star, n_starts, salt, cfg);
    let (value, y, _mult, last_move) =
        extremum_at_level(inst, x, level, sense, &lower.y_star, &starts, cfg, effort, true);
    let slack = level - inst.f(x, &y);
    if slack < -cfg.eps_slack_tol {
        return Err(Error::SolverFailure(format!(
            "no eps-feasible point found at x={x:?} eps={eps}; phi may be inconsistent"
        )));
    }
    let status = if last_move <= 1e-7 {
        SolveStatus::Converged
    } else {
        SolveStatus::Incumbent
    };
    Ok(EpsExtremum {
        value,
        y,
        sense,
        feasibility_slack: slack,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{case1_instance, case1_params, case2_instance, case2_lower_closed_form, case2_params};
    use crate::linalg::dist;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn case1_lower_at_origin_picks_cheap_link() {
        let inst = case1_instance(&case1_params()).unwrap();
        let sol = solve_lower(&inst, &[0.0, 0.0], &cfg(), Effort::Full).unwrap();
        assert!((sol.phi - 1.0).abs() < 1e-9);
        assert!(dist(&sol.y_star, &[1.0, 0.0]) < 1e-7);
        assert_eq!(sol.status, SolveStatus::Converged);
    }

    #[test]
    fn case1_lower_on_indifference_line_is_flat() {
        let inst = case1_instance(&case1_params()).unwrap();
        let sol = solve_lower(&inst, &[1.6, 1.4], &cfg(), Effort::Full).unwrap();
        assert!((sol.phi - 2.6).abs() < 1e-9);
        assert!(inst.follower_set.contains(&sol.y_star, 1e-10));
        assert!((inst.f(&[1.6, 1.4], &sol.y_star) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn case2_lower_matches_closed_form() {
        let params = case2_params();
        let inst = case2_instance(&params).unwrap();
        let x = [1.08, 0.72, 3.79, 1.08];
        let sol = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let (oracle, interior) = case2_lower_closed_form(&params, &x);
        assert!(interior);
        assert!(dist(&sol.y_star, &oracle) < 1e-6, "{:?} vs {oracle:?}", sol.y_star);
        assert!((sol.phi - 0.34609378).abs() < 1e-6);
        assert_eq!(sol.status, SolveStatus::Converged);
    }

    #[test]
    fn case1_eps_extrema_at_origin() {
        let inst = case1_instance(&case1_params()).unwrap();
        let x = [0.0, 0.0];
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mn = solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Min, &lower, &cfg(), Effort::Full).unwrap();
        let mx = solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Max, &lower, &cfg(), Effort::Full).unwrap();
        assert!((mn.value - 0.625).abs() < 1e-6, "min {}", mn.value);
        assert!(dist(&mn.y, &[0.5, 0.5]) < 1e-4);
        assert!((mx.value - 1.5).abs() < 1e-6, "max {}", mx.value);
        assert!(dist(&mx.y, &[1.0, 0.0]) < 1e-4);
        assert!(mn.feasibility_slack >= -1e-8 && mx.feasibility_slack >= -1e-8);
    }

    #[test]
    fn large_eps_reduces_to_extrema_over_y() {
        // with eps big enough the tolerance set is all of Y
        let inst = case1_instance(&case1_params()).unwrap();
        let x = [1.0, 0.3];
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mx = solve_eps_extremum(&inst, &x, 50.0, ExtremumSense::Max, &lower, &cfg(), Effort::Full).unwrap();
        // max of F(x, .) over the simplex: endpoints t=1 or t=0
        let f_at = |t: f64| inst.big_f(&x, &[t, 1.0 - t]);
        let want = f_at(1.0).max(f_at(0.0));
        assert!((mx.value - want).abs() < 1e-7);
    }

    #[test]
    fn zero_eps_strongly_convex_collapses_to_y_star() {
        let inst = case2_instance(&case2_params()).unwrap();
        let x = [1.08, 0.72, 3.79, 1.08];
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mn = solve_eps_extremum(&inst, &x, 0.0, ExtremumSense::Min, &lower, &cfg(), Effort::Full).unwrap();
        let mx = solve_eps_extremum(&inst, &x, 0.0, ExtremumSense::Max, &lower, &cfg(), Effort::Full).unwrap();
        assert!((mx.value - mn.value).abs() < 1e-6);
        assert!(dist(&mn.y, &lower.y_star) < 1e-4);
    }

    #[test]
    fn psi_p_at_least_psi_o() {
        let inst = case2_instance(&case2_params()).unwrap();
        let x = [0.79, 0.79, 3.12, 0.50];
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        for eps in [0.0, 0.05, 0.1, 0.5, 1.0] {
            let mn = solve_eps_extremum(&inst, &x, eps, ExtremumSense::Min, &lower, &cfg(), Effort::Full).unwrap();
            let mx = solve_eps_extremum(&inst, &x, eps, ExtremumSense::Max, &lower, &cfg(), Effort::Full).unwrap();
            assert!(mx.value >= mn.value - 1e-9);
        }
    }
}
