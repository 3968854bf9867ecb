//! Shared first-order machinery: projected gradient descent with
//! backtracking, exterior quadratic penalties for a scalar inequality
//! constraint, radial feasibility restoration, and an on-constraint
//! tangential polish.
//!
//! Each routine works on closures over `&[f64]` so the same code drives
//! follower-space solves, joint leader-follower subproblems, and the
//! penalized equilibrium descent.

use crate::linalg::{add_scaled, dist, dot, norm, sub};

pub struct PgdConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iters: 2000,
        }
    }
}

pub struct PgdOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Natural residual `|z - P(z - grad)|` at the final point.
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Projected gradient with Barzilai-Borwein step seeding and Armijo
/// backtracking. The spectral step keeps stiff penalized objectives moving
/// where a plain adaptive step crawls.
pub fn pgd_minimize<P, V, G>(
    project: P,
    value: V,
    grad: G,
    start: &[f64],
    cfg: &PgdConfig,
) -> PgdOutcome
where
    P: Fn(&[f64]) -> Vec<f64>,
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut z = project(start);
    let mut fz = value(&z);
    let mut g = grad(&z);
    let mut step = 1.0 / (1.0 + norm(&g));
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    for it in 0..cfg.max_iters {
        iters = it + 1;
        let unit = project(&sub(&z, &g));
        residual = dist(&z, &unit);
        if residual <= cfg.grad_tol {
            return PgdOutcome {
                point: z,
                value: fz,
                residual,
                iters,
                converged: true,
            };
        }
        // spectral step from the last accepted move
        if let Some((pz, pg)) = &prev {
            let dz = sub(&z, pz);
            let dg = sub(&g, pg);
            let num = dot(&dz, &dz);
            let den = dot(&dz, &dg);
            if den > 0.0 && num > 0.0 {
                let bb = num / den;
                if bb.is_finite() {
                    step = bb.clamp(1e-12, 1e8);
                }
            }
        }
        let mut accepted = false;
        let mut s = step;
        for _ in 0..60 {
            let trial = project(&add_scaled(&z, -s, &g));
            let ft = value(&trial);
            let decrease = dist(&trial, &z);
            if decrease == 0.0 {
                break;
            }
            if ft <= fz - 1e-4 * decrease * decrease / s {
                prev = Some((z.clone(), g.clone()));
                z = trial;
                fz = ft;
                g = grad(&z);
                step = s;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // no progress possible at any step length: stationary to
            // working precision
            return PgdOutcome {
                point: z,
                value: fz,
                residual,
                iters,
                converged: residual <= cfg.grad_tol * 10.0,
            };
        }
    }
    PgdOutcome {
        point: z,
        value: fz,
        residual,
        iters,
        converged: false,
    }
}

pub struct AugLagOutcome {
    pub point: Vec<f64>,
    /// Converged inequality multiplier.
    pub multiplier: f64,
    pub violation: f64,
    pub rounds: usize,
}

/// Augmented-Lagrangian solve of `min value s.t. g <= 0` over a
/// projectable set: smooth at the solution (no truncation kink), with the
/// multiplier recovered by the standard update `lambda <- [lambda + r g]_+`.
#[allow(clippy::too_many_arguments)]
pub fn solve_augmented_lagrangian<P, V, GV, C, GC>(
    project: P,
    value: V,
    grad_value: GV,
    constraint: C,
    grad_constraint: GC,
    start: &[f64],
    lambda0: f64,
    penalty: f64,
    max_rounds: usize,
    cfg: &PgdConfig,
) -> AugLagOutcome
where
    P: Fn(&[f64]) -> Vec<f64>,
    V: Fn(&[f64]) -> f64,
    GV: Fn(&[f64]) -> Vec<f64>,
    C: Fn(&[f64]) -> f64,
    GC: Fn(&[f64]) -> Vec<f64>,
{
    let mut lam = lambda0.max(0.0);
    let mut z = project(start);
    let mut rounds = 0;
    for _ in 0..max_rounds {
        rounds += 1;
        let al_value = |w: &[f64]| {
            let t = (lam + penalty * constraint(w)).max(0.0);
            value(w) + (t * t - lam * lam) / (2.0 * penalty)
        };
        let al_grad = |w: &[f64]| {
            let mut gr = grad_value(w);
            let t = (lam + penalty * constraint(w)).max(0.0);
            if t > 0.0 {
                let gc = grad_constraint(w);
                for i in 0..gr.len() {
                    gr[i] += t * gc[i];
                }
            }
            gr
        };
        let out = pgd_minimize(&project, al_value, al_grad, &z, cfg);
        z = out.point;
        let gval = constraint(&z);
        let new_lam = (lam + penalty * gval).max(0.0);
        let settled = (new_lam - lam).abs() <= 1e-10 * (1.0 + lam) && gval <= 1e-10;
        lam = new_lam;
        if settled {
            break;
        }
    }
    AugLagOutcome {
        violation: constraint(&z).max(0.0),
        multiplier: lam,
        point: z,
        rounds,
    }
}

pub struct PenaltySchedule {
    pub init: f64,
    pub growth: f64,
    pub max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            init: 10.0,
            growth: 10.0,
            max: 1e6,
        }
    }
}

pub struct PenaltyOutcome {
    pub point: Vec<f64>,
    /// Multiplier estimate `2 P [g]_+` from the final penalty stage.
    pub multiplier: f64,
    pub violation: f64,
    pub stages: usize,
}

/// Minimizes `value + P [g]_+^2` over the projectable set along an
/// escalating penalty schedule, warm-starting each stage.
#[allow(clippy::too_many_arguments)]
pub fn solve_penalized<P, V, GV, C, GC>(
    project: P,
    value: V,
    grad_value: GV,
    constraint: C,
    grad_constraint: GC,
    start: &[f64],
    schedule: &PenaltySchedule,
    cfg: &PgdConfig,
) -> PenaltyOutcome
where
    P: Fn(&[f64]) -> Vec<f64>,
    V: Fn(&[f64]) -> f64,
    GV: Fn(&[f64]) -> Vec<f64>,
    C: Fn(&[f64]) -> f64,
    GC: Fn(&[f64]) -> Vec<f64>,
{
    let mut z = project(start);
    let mut multiplier;
    let mut violation;
    let mut p = schedule.init;
    let mut stages = 0;
    loop {
        stages += 1;
        let pen_value = |w: &[f64]| {
            let v = constraint(w).max(0.0);
            value(w) + p * v * v
        };
        let pen_grad = |w: &[f64]| {
            let mut g = grad_value(w);
            let v = constraint(w);
            if v > 0.0 {
                let gc = grad_constraint(w);
                for i in 0..g.len() {
                    g[i] += 2.0 * p * v * gc[i];
                }
            }
            g
        };
        let out = pgd_minimize(&project, pen_value, pen_grad, &z, cfg);
        z = out.point;
        let v = constraint(&z);
        violation = v.max(0.0);
        multiplier = 2.0 * p * violation;
        if p >= schedule.max || violation == 0.0 {
            break;
        }
        p *= schedule.growth;
    }
    PenaltyOutcome {
        point: z,
        multiplier,
        violation,
        stages,
    }
}

/// Pulls `z` back onto `{g <= 0}` along the segment toward a strictly
/// feasible `anchor` (largest feasible interpolation kept; convex feasible
/// sets keep the whole segment inside the ambient set).
pub fn restore_radial<C>(constraint: C, anchor: &[f64], z: &[f64], bisections: usize) -> Vec<f64>
where
    C: Fn(&[f64]) -> f64,
{
    if constraint(z) <= 0.0 {
        return z.to_vec();
    }
    let mut lo = 0.0; // anchor side, feasible (or closest available)
    let mut hi = 1.0; // z side, infeasible
    for _ in 0..bisections {
        let mid = 0.5 * (lo + hi);
        let w = crate::linalg::lerp(anchor, z, mid);
        if constraint(&w) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    crate::linalg::lerp(anchor, z, lo)
}

/// Feasibility restoration with first-order accuracy: projected Newton
/// steps along the constraint gradient (tangential displacement
/// `O(violation^2)` instead of the radial `O(violation)`), falling back to
/// the radial segment when Newton stalls.
pub fn restore_feasible<P, C, GC>(
    project: P,
    constraint: C,
    grad_constraint: GC,
    anchor: &[f64],
    z: &[f64],
) -> Vec<f64>
where
    P: Fn(&[f64]) -> Vec<f64>,
    C: Fn(&[f64]) -> f64,
    GC: Fn(&[f64]) -> Vec<f64>,
{
    let mut w = z.to_vec();
    for _ in 0..8 {
        let v = constraint(&w);
        if v <= 0.0 {
            return w;
        }
        let g = grad_constraint(&w);
        let gg = dot(&g, &g);
        if gg < 1e-16 {
            break;
        }
        // slight overshoot keeps the iterate on the feasible side
        let t = 1.02 * v / gg;
        w = project(&add_scaled(&w, -t, &g));
    }
    if constraint(&w) <= 0.0 {
        w
    } else {
        restore_radial(constraint, anchor, &w, 80)
    }
}

pub struct PolishOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Norm of the final accepted move; small means first-order stationary
    /// along the feasible surface.
    pub last_move: f64,
}

/// Improves a feasible point of `min value s.t. g <= 0` by moving along the
/// component of the negative gradient tangential to the active constraint,
/// restoring feasibility after every trial. Complements the exterior
/// penalty, whose high-weight stages advance slowly along the boundary.
#[allow(clippy::too_many_arguments)]
pub fn polish_on_constraint<P, V, GV, C, GC>(
    project: P,
    value: V,
    grad_value: GV,
    constraint: C,
    grad_constraint: GC,
    anchor: &[f64],
    start: &[f64],
    max_iters: usize,
) -> PolishOutcome
where
    P: Fn(&[f64]) -> Vec<f64>,
    V: Fn(&[f64]) -> f64,
    GV: Fn(&[f64]) -> Vec<f64>,
    C: Fn(&[f64]) -> f64,
    GC: Fn(&[f64]) -> Vec<f64>,
{
    let feas = |w: &[f64]| {
        restore_feasible(&project, &constraint, &grad_constraint, anchor, &project(w))
    };
    let mut z = feas(start);
    let mut fz = value(&z);
    let mut step = 0.1;
    let mut last_move = f64::INFINITY;
    let active_tol = 1e-10;
    for _ in 0..max_iters {
        let mut d: Vec<f64> = grad_value(&z).iter().map(|v| -v).collect();
        if constraint(&z) > -active_tol {
            let n = grad_constraint(&z);
            let nn = dot(&n, &n);
            if nn > 0.0 {
                let c = dot(&d, &n) / nn;
                // strip the outward normal component only; moving into the
                // interior stays admissible
                if c > 0.0 {
                    for i in 0..d.len() {
                        d[i] -= c * n[i];
                    }
                }
            }
        }
        let dn = norm(&d);
        if dn < 1e-14 {
            last_move = 0.0;
            break;
        }
        let mut accepted = false;
        let mut s = step;
        for _ in 0..40 {
            let trial = feas(&add_scaled(&z, s / dn.max(1.0), &d));
            let ft = value(&trial);
            if ft < fz - 1e-12 {
                last_move = dist(&trial, &z);
                z = trial;
                fz = ft;
                step = (s * 1.4).min(1.0);
                accepted = true;
                break;
            }
            s *= 0.4;
        }
        if !accepted {
            last_move = 0.0;
            break;
        }
        if last_move < 1e-12 {
            break;
        }
    }
    PolishOutcome {
        point: z,
        value: fz,
        last_move,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clamp01(z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| v.max(0.0).min(1.0)).collect()
    }

    #[test]
    fn pgd_solves_box_quadratic() {
        // min (z0 - 2)^2 + (z1 + 1)^2 over [0,1]^2 -> (1, 0)
        let out = pgd_minimize(
            clamp01,
            |z| (z[0] - 2.0).powi(2) + (z[1] + 1.0).powi(2),
            |z| vec![2.0 * (z[0] - 2.0), 2.0 * (z[1] + 1.0)],
            &[0.5, 0.5],
            &PgdConfig::default(),
        );
        assert!(dist(&out.point, &[1.0, 0.0]) < 1e-9, "{:?}", out.point);
    }

    #[test]
    fn penalty_respects_constraint_after_restoration() {
        // min (z0 - 1)^2 s.t. z0 <= 0.25 over [0,1]
        let con = |z: &[f64]| z[0] - 0.25;
        let out = solve_penalized(
            |z: &[f64]| vec![z[0].max(0.0).min(1.0)],
            |z: &[f64]| (z[0] - 1.0).powi(2),
            |z: &[f64]| vec![2.0 * (z[0] - 1.0)],
            con,
            |_: &[f64]| vec![1.0],
            &[0.0],
            &PenaltySchedule::default(),
            &PgdConfig::default(),
        );
        let restored = restore_radial(con, &[0.0], &out.point, 80);
        assert!(con(&restored) <= 0.0);
        assert!((restored[0] - 0.25).abs() < 1e-6, "{restored:?}");
        assert!(out.multiplier > 0.0);
    }

    #[test]
    fn restore_keeps_feasible_points() {
        let con = |z: &[f64]| z[0] - 0.5;
        let kept = restore_radial(con, &[0.0], &[0.3], 60);
        assert_eq!(kept, vec![0.3]);
    }

    #[test]
    fn polish_moves_along_active_constraint() {
        // min -(z0 + 2 z1) over the triangle {z >= 0, z0 + z1 <= 1}:
        // optimum at (0, 1). Start from the suboptimal boundary point (1, 0).
        let project = |z: &[f64]| -> Vec<f64> { z.iter().map(|v| v.max(0.0)).collect() };
        let con = |z: &[f64]| z[0] + z[1] - 1.0;
        let out = polish_on_constraint(
            project,
            |z: &[f64]| -(z[0] + 2.0 * z[1]),
            |_| vec![-1.0, -2.0],
            con,
            |_| vec![1.0, 1.0],
            &[0.2, 0.2],
            &[1.0, 0.0],
            400,
        );
        assert!(dist(&out.point, &[0.0, 1.0]) < 1e-5, "{:?}", out.point);
    }
}
