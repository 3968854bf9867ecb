//! Screens a handful of candidate toll policies: nominal value, ambiguity
//! exposure, and the gap certificate for each, then a coarse frontier.
//!
//! Run with: `cargo run --release --example screen_decisions`

use bilevel_diag::cases::{case1_instance, case1_params};
use bilevel_diag::config::ToleranceConfig;
use bilevel_diag::diagnostics::ambiguity_premium;
use bilevel_diag::frontier::{build_frontier, SweepConfig};
use bilevel_diag::lower::Effort;
use bilevel_diag::report::fmt_g6;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = case1_instance(&case1_params())?;
    let cfg = ToleranceConfig::default();
    let eps = 0.1;

    println!("candidate tolls at eps = {eps}:");
    println!("{:>12} {:>10} {:>10} {:>10} {:>10}", "x", "psi_o", "psi_p", "delta", "rho");
    for x in [[1.6, 1.4], [1.6, 1.0], [2.0, 0.0], [0.0, 0.0]] {
        let ev = ambiguity_premium(&inst, &x, eps, &cfg, Effort::Full)?;
        let r = ev.record;
        println!(
            "({:>4},{:>4}) {:>10} {:>10} {:>10} {:>10}",
            x[0],
            x[1],
            fmt_g6(r.psi_o),
            fmt_g6(r.psi_p),
            fmt_g6(r.delta),
            fmt_g6(r.rho)
        );
    }

    let sweep = SweepConfig {
        j_weights: 5,
        n_lhs: 10,
        eps,
        seed: 7,
        ..Default::default()
    };
    let report = build_frontier(&inst, &sweep, &cfg, &[])?;
    println!("\nnondominated frontier points:");
    for p in report.nondominated() {
        println!(
            "  [{}] psi_o = {:<10} delta = {:<10} ({})",
            p.source.as_str(),
            fmt_g6(p.psi_o),
            fmt_g6(p.delta),
            p.status.as_str()
        );
    }
    Ok(())
}
