//! Cross-module consistency checks: closed-form oracles against the
//! generic solvers, route agreement for pessimistic values, and frontier
//! support structure.

use bilevel_diag::cases::{
    case1_analytic_diagnostics, case1_instance, case1_params, case2_instance, case2_params,
};
use bilevel_diag::config::ToleranceConfig;
use bilevel_diag::diagnostics::ambiguity_premium;
use bilevel_diag::frontier::{build_frontier, Source, SweepConfig};
use bilevel_diag::lower::{solve_eps_extremum, solve_lower, Effort, ExtremumSense};
use bilevel_diag::pessimistic::{ni_penalized_eval, NiEvalOptions};
use bilevel_diag::report::optimistic_trace_csv;
use bilevel_diag::rng::{stream, uniform_in_box};

fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn random_leader(inst: &bilevel_diag::problem::BilevelInstance, n: usize, tag: &str) -> Vec<Vec<f64>> {
    let mut rng = stream(7, tag, 0);
    (0..n)
        .map(|_| {
            inst.leader_set
                .project(&uniform_in_box(&mut rng, &inst.leader_set.lo, &inst.leader_set.hi))
        })
        .collect()
}

#[test]
fn eps_extrema_match_closed_form_tightly() {
    // module-level bound: 1e-6 at 50 random decisions
    let params = case1_params();
    let inst = case1_instance(&params).unwrap();
    for x in random_leader(&inst, 50, "tight-oracle") {
        let analytic = case1_analytic_diagnostics(&params, &x, 0.1);
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mn =
            solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Min, &lower, &cfg(), Effort::Full)
                .unwrap();
        let mx =
            solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Max, &lower, &cfg(), Effort::Full)
                .unwrap();
        assert!(
            (mn.value - analytic.psi_o).abs() < 1e-6,
            "psi_o at {x:?}: {} vs {}",
            mn.value,
            analytic.psi_o
        );
        assert!(
            (mx.value - analytic.psi_p).abs() < 1e-6,
            "psi_p at {x:?}: {} vs {}",
            mx.value,
            analytic.psi_p
        );
    }
}

#[test]
fn pessimistic_routes_agree_on_study_1() {
    // direct constrained maximization and the gap-penalized evaluation
    // sandwich each other at 20 random decisions
    let inst = case1_instance(&case1_params()).unwrap();
    for x in random_leader(&inst, 20, "sandwich") {
        let lower = solve_lower(&inst, &x, &cfg(), Effort::Full).unwrap();
        let mn =
            solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Min, &lower, &cfg(), Effort::Full)
                .unwrap();
        let mx =
            solve_eps_extremum(&inst, &x, 0.1, ExtremumSense::Max, &lower, &cfg(), Effort::Full)
                .unwrap();
        let ni = ni_penalized_eval(&inst, &x, 0.1, &cfg(), &NiEvalOptions::from_config(&cfg()))
            .unwrap();
        let f_eval = inst.big_f(&x, &ni.y);
        assert!(
            f_eval >= mn.value - 1e-6 && f_eval <= mx.value + 1e-6,
            "sandwich violated at {x:?}: {} not in [{}, {}]",
            f_eval,
            mn.value,
            mx.value
        );
        assert!(
            (ni.psi_p - mx.value).abs() < 1e-4,
            "routes disagree at {x:?}: ni {} vs direct {}",
            ni.psi_p,
            mx.value
        );
    }
}

#[test]
fn records_maintain_their_identities() {
    let inst = case2_instance(&case2_params()).unwrap();
    for x in random_leader(&inst, 10, "identities") {
        let ev = ambiguity_premium(&inst, &x, 0.5, &cfg(), Effort::Full).unwrap();
        let r = &ev.record;
        assert!(r.delta >= -1e-9);
        assert!((r.delta - (r.psi_p - r.psi_o).max(0.0)).abs() < 1e-12);
        assert!((r.rho - r.delta / (1.0 + r.psi_o.abs())).abs() < 1e-12);
        assert!(r.ni_gap >= 0.0);
        assert!(ev.minimum.feasibility_slack >= -1e-8);
        assert!(ev.maximum.feasibility_slack >= -1e-8);
    }
}

#[test]
fn converged_sweep_points_are_supported() {
    // supported nondominated points: nothing may dominate a converged
    // sweep output by more than the stated slack in both coordinates
    let inst = case1_instance(&case1_params()).unwrap();
    let sweep = SweepConfig {
        j_weights: 6,
        n_lhs: 20,
        eps: 0.1,
        seed: 7,
        nm_starts: 3,
        nm_max_fevals: 220,
    };
    let report = build_frontier(&inst, &sweep, &cfg(), &[]).unwrap();
    for p in report.points.iter().filter(|p| {
        p.source == Source::Sweep
            && p.status == bilevel_diag::diagnostics::StatusLabel::Converged
    }) {
        for q in &report.points {
            assert!(
                !(q.psi_o < p.psi_o - 1e-6 && q.delta < p.delta - 1e-6),
                "converged sweep point ({}, {}) beaten by ({}, {})",
                p.psi_o,
                p.delta,
                q.psi_o,
                q.delta
            );
        }
    }
}

#[test]
fn optimistic_case2_multistart_band() {
    // eight space-filling starts land at or below the reference band
    let inst = case2_instance(&case2_params()).unwrap();
    let tol_cfg = cfg();
    let prox = bilevel_diag::optimistic::ProxConfig::from_config(&tol_cfg);
    let starts = bilevel_diag::frontier::lhs_sample(&inst.leader_set, 8, 7);
    let mut best = f64::INFINITY;
    let mut trace_seen = false;
    for x0 in starts {
        let rep = bilevel_diag::optimistic::run_optimistic(&inst, 0.5, &x0, &prox, &tol_cfg).unwrap();
        let lower = solve_lower(&inst, &rep.x, &tol_cfg, Effort::Full).unwrap();
        let mn = solve_eps_extremum(
            &inst,
            &rep.x,
            0.5,
            ExtremumSense::Min,
            &lower,
            &tol_cfg,
            Effort::Full,
        )
        .unwrap();
        best = best.min(mn.value);
        if !trace_seen {
            let csv = optimistic_trace_csv(&rep);
            assert!(csv.starts_with("iter,step_norm,r_ll,g_stat,upper_value"));
            assert!(csv.lines().count() > 1);
            trace_seen = true;
        }
        // any run claiming convergence must survive a from-scratch
        // residual re-evaluation
        if rep.status == bilevel_diag::lower::SolveStatus::Converged {
            let r_ll = bilevel_diag::diagnostics::ll_residual(&inst, &rep.x, &rep.y, 0.5, lower.phi);
            let g = bilevel_diag::diagnostics::fb_stationarity_residual(
                &inst, &rep.x, &rep.y, &lower.y_star, rep.lambda, 0.5,
            );
            assert!(r_ll <= 1e-6 && g <= 1e-6, "converged label fails recheck: {r_ll} {g}");
        }
    }
    assert!(best <= 0.70, "best optimistic value {best}");
}

#[test]
fn custom_quadratic_instance_spec_roundtrip() {
    // the declarative authoring path builds a working instance
    let text = r#"
[objective]
name = "custom_quadratic"

[objective.upper]
pxx = [[2.0]]
pyy = [[0.0]]
pxy = [[0.0]]
px = [-2.0]
py = [1.0]
c = 1.0

[objective.lower]
pxx = [[2.0]]
pyy = [[2.0]]
pxy = [[-2.0]]
px = [0.0]
py = [0.0]
c = 0.0

[leader]
lo = [0.0]
hi = [2.0]

[follower]
kind = "box"
lo = [-3.0]
hi = [3.0]
"#;
    let spec: bilevel_diag::problem::InstanceSpec = toml::from_str(text).unwrap();
    let inst = spec.build().unwrap();
    // upper = (x-1)^2 + y, lower = (y-x)^2
    assert!((inst.f(&[1.5], &[0.5]) - 1.0).abs() < 1e-12);
    assert!((inst.big_f(&[0.5], &[0.2]) - (0.25 + 0.2)).abs() < 1e-12);
    let lower = solve_lower(&inst, &[0.5], &cfg(), Effort::Full).unwrap();
    assert!((lower.y_star[0] - 0.5).abs() < 1e-7);
    // known pessimistic value: psi_p(x) = (x-1)^2 + x + sqrt(eps)
    let ni = ni_penalized_eval(&inst, &[0.5], 0.09, &cfg(), &NiEvalOptions::from_config(&cfg()))
        .unwrap();
    assert!((ni.psi_p - (0.25 + 0.5 + 0.3)).abs() < 1e-4, "{}", ni.psi_p);
}

#[test]
fn outer_pessimistic_search_binds_the_share_cap() {
    // worst-case-minimizing portfolios sit in the gas-heavy regime where
    // the diversification cap binds; the search reports an incumbent with
    // a certified gap
    let inst = case2_instance(&case2_params()).unwrap();
    let r = bilevel_diag::pessimistic::outer_pessimistic_search(
        &inst,
        0.5,
        &cfg(),
        &bilevel_diag::pessimistic::OuterSearchConfig {
            n_starts: 8,
            max_fevals: 60,
        },
    )
    .unwrap();
    let total: f64 = r.x_best.iter().sum();
    let share = r.x_best[2] / total;
    assert!(
        (0.58..=0.6 + 1e-9).contains(&share),
        "gas share {share} not at the cap"
    );
    assert!(r.eval.ni_gap <= 1e-6, "gap {}", r.eval.ni_gap);
    assert!(inst.leader_set.contains(&r.x_best, 1e-8));
    // robust-regime premium band, well below the nominal-regime >= 0.9
    let lower = solve_lower(&inst, &r.x_best, &cfg(), Effort::Full).unwrap();
    let mn = solve_eps_extremum(
        &inst,
        &r.x_best,
        0.5,
        ExtremumSense::Min,
        &lower,
        &cfg(),
        Effort::Full,
    )
    .unwrap();
    let delta = r.eval.psi_p - mn.value;
    assert!((0.3..=0.7).contains(&delta), "delta {delta}");
}

#[test]
fn scan_ratios_respect_the_growth_cap() {
    let inst = case2_instance(&case2_params()).unwrap();
    let entries = bilevel_diag::diagnostics::sqrt_rate_scan(
        &inst,
        &bilevel_diag::cases::CASE2_BALANCED_POLICY,
        &[0.05, 0.5, 4.0],
        &cfg(),
    )
    .unwrap();
    for e in entries {
        let cap = e.cap.expect("growth modulus supplied");
        assert!(e.delta <= cap, "delta {} above cap {cap}", e.delta);
    }
}

#[test]
fn case2_lhs_points_respect_diversification() {
    let inst = case2_instance(&case2_params()).unwrap();
    let p = case2_params();
    for x in bilevel_diag::frontier::lhs_sample(&inst.leader_set, 40, 7) {
        let total: f64 = x.iter().sum();
        assert!(total >= p.demand - 1e-8, "{x:?}");
        for xi in &x {
            assert!(*xi <= p.share_cap * total + 1e-8, "{x:?}");
        }
    }
}
