//! Command-line entry point: reproduce the built-in studies, diagnose
//! ad-hoc decisions, and run frontier sweeps.
//!
//! Exit codes: 0 success (all reference checks pass), 1 usage error,
//! 2 infeasible input, 3 solver failure, 4 reference-table mismatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use bilevel_diag::cases::{
    self, case1_instance, case1_params, case2_instance, case2_params, golden_table1,
    golden_table4, CASE2_BALANCED_POLICY, SQRT_SCAN_GRID,
};
use bilevel_diag::config::ToleranceConfig;
use bilevel_diag::diagnostics::{
    ambiguity_premium, fit_multiplier, normalized_ratio, sqrt_rate_scan, DiagnosticRecord,
};
use bilevel_diag::frontier::{build_frontier, FrontierReport, SweepConfig};
use bilevel_diag::lower::Effort;
use bilevel_diag::pessimistic::{ni_penalized_eval, NiEvalOptions};
use bilevel_diag::problem::{BilevelInstance, InstanceSpec};
use bilevel_diag::report::{
    self, fmt_g6, frontier_csv, frontier_gnuplot_script, frontier_plotdata, record_csv_header,
    record_csv_row, scan_csv, scan_gnuplot_script, scan_plotdata, PointStatus, RunManifest,
};
use bilevel_diag::Error;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_INFEASIBLE: i32 = 2;
const EXIT_SOLVER: i32 = 3;
const EXIT_GOLDEN: i32 = 4;

#[derive(Parser)]
#[command(
    name = "bilevel-diag",
    about = "Bilevel decision diagnostics: value intervals, ambiguity premiums, frontiers",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseName {
    Case1,
    Case2,
}

#[derive(Subcommand)]
enum Command {
    /// Re-run a built-in study, write its tables and plot data, and check
    /// them against the shipped reference values
    Reproduce {
        #[arg(value_enum)]
        case: CaseName,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Follower tolerance (defaults: 0.1 for case1, 0.5 for case2)
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the premium-vs-sqrt(eps) ratio scan (case2)
        #[arg(long)]
        scan_eps: bool,
        /// Multistart count for inner solves
        #[arg(long)]
        starts: Option<usize>,
        /// Truncate the gap-penalty schedule at this value
        #[arg(long)]
        sigma_max: Option<f64>,
        /// Joint stopping / gap tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Tolerance config file (TOML)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate the diagnostic record at one leader decision
    Diagnose {
        /// `case1`, `case2`, or a path to an instance file (TOML/JSON)
        instance: String,
        /// Leader decision, comma-separated
        #[arg(long, short = 'x')]
        x: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Also fit a multiplier and report the stationarity residual
        #[arg(long)]
        g_stat: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build the robustness-efficiency frontier
    Frontier {
        /// `case1`, `case2`, or a path to an instance file (TOML/JSON)
        instance: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of scalarization weights
        #[arg(long)]
        weights: Option<usize>,
        /// Number of space-filling samples
        #[arg(long)]
        lhs: Option<usize>,
        /// Multistart count per scalarized solve
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// File of benchmark decisions, one comma/space-separated row each
        #[arg(long)]
        heuristics: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not usage errors
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Reproduce {
            case,
            out,
            eps,
            seed,
            scan_eps,
            starts,
            sigma_max,
            tol,
            config,
        } => cmd_reproduce(case, out, eps, seed, scan_eps, starts, sigma_max, tol, config),
        Command::Diagnose {
            instance,
            x,
            eps,
            g_stat,
            out,
            seed,
            config,
        } => cmd_diagnose(&instance, &x, eps, g_stat, out, seed, config),
        Command::Frontier {
            instance,
            out,
            eps,
            seed,
            weights,
            lhs,
            starts,
            sigma_max,
            tol,
            heuristics,
            config,
        } => cmd_frontier(
            &instance, out, eps, seed, weights, lhs, starts, sigma_max, tol, heuristics, config,
        ),
    };
    std::process::exit(code);
}

fn load_tolerances(
    config: Option<PathBuf>,
    seed: Option<u64>,
    starts: Option<usize>,
    sigma_max: Option<f64>,
    tol: Option<f64>,
) -> Result<ToleranceConfig, Error> {
    let mut cfg = match config {
        Some(p) => ToleranceConfig::from_path(&p)?,
        None => ToleranceConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(k) = starts {
        cfg.lower_starts = k;
        cfg.extremum_starts = k;
        cfg.ni_starts = k;
    }
    if let Some(sm) = sigma_max {
        cfg.sigma_schedule.retain(|s| *s <= sm);
        if cfg.sigma_schedule.is_empty() {
            cfg.sigma_schedule.push(sm);
        }
    }
    if let Some(t) = tol {
        cfg.prox_tol = t;
        cfg.ni_gap_tol = t;
    }
    Ok(cfg)
}

fn build_named_instance(name: &str) -> Result<BilevelInstance, Error> {
    match name {
        "case1" => case1_instance(&case1_params()),
        "case2" => case2_instance(&case2_params()),
        path => InstanceSpec::from_path(Path::new(path))?.build(),
    }
}

fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::SolverFailure(_) | Error::EvalFailure { .. } => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

struct CellDiff {
    label: String,
    column: &'static str,
    computed: f64,
    reference: f64,
    tolerance: f64,
}

fn report_diffs(diffs: &[CellDiff]) -> bool {
    if diffs.is_empty() {
        return true;
    }
    eprintln!("reference mismatches ({}):", diffs.len());
    for d in diffs {
        eprintln!(
            "  {} / {}: computed {} vs reference {} (tol {})",
            d.label,
            d.column,
            fmt_g6(d.computed),
            fmt_g6(d.reference),
            fmt_g6(d.tolerance)
        );
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn cmd_reproduce(
    case: CaseName,
    out: Option<PathBuf>,
    eps: Option<f64>,
    seed: Option<u64>,
    scan_eps: bool,
    starts: Option<usize>,
    sigma_max: Option<f64>,
    tol: Option<f64>,
    config: Option<PathBuf>,
) -> i32 {
    let cfg = match load_tolerances(config, seed, starts, sigma_max, tol) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let t0 = Instant::now();
    match case {
        CaseName::Case1 => {
            let eps = eps.unwrap_or(0.1);
            let out = out.unwrap_or_else(|| PathBuf::from("bilevel-out/reproduce-case1"));
            match reproduce_case1(eps, &out, &cfg, t0) {
                Ok(ok) => {
                    if ok {
                        EXIT_OK
                    } else {
                        EXIT_GOLDEN
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    error_exit_code(&e)
                }
            }
        }
        CaseName::Case2 => {
            let eps = eps.unwrap_or(0.5);
            let out = out.unwrap_or_else(|| PathBuf::from("bilevel-out/reproduce-case2"));
            match reproduce_case2(eps, scan_eps, &out, &cfg, t0) {
                Ok(ok) => {
                    if ok {
                        EXIT_OK
                    } else {
                        EXIT_GOLDEN
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    error_exit_code(&e)
                }
            }
        }
    }
}

fn reproduce_case1(
    eps: f64,
    out: &Path,
    cfg: &ToleranceConfig,
    t0: Instant,
) -> Result<bool, Error> {
    let params = case1_params();
    let inst = case1_instance(&params)?;
    let rows = golden_table1();
    let mut table = String::from("label,x1,x2,psi_o,psi_p,delta,rho,r_ll,ni_gap,status\n");
    let mut diffs: Vec<CellDiff> = Vec::new();
    let mut statuses = Vec::new();
    for row in &rows {
        let ev = ambiguity_premium(&inst, &row.x, eps, cfg, Effort::Full)?;
        let r = &ev.record;
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.label,
            fmt_g6(row.x[0]),
            fmt_g6(row.x[1]),
            fmt_g6(r.psi_o),
            fmt_g6(r.psi_p),
            fmt_g6(r.delta),
            fmt_g6(r.rho),
            fmt_g6(r.r_ll),
            fmt_g6(r.ni_gap),
            r.status.as_str()
        ));
        statuses.push(PointStatus {
            label: row.label.clone(),
            status: r.status.as_str().to_string(),
            ni_gap: r.ni_gap,
        });
        if (eps - 0.1).abs() < 1e-12 {
            for (col, computed, reference) in [
                ("psi_o", r.psi_o, row.psi_o),
                ("delta", r.delta, row.delta),
                ("rho", r.rho, row.rho),
            ] {
                if (computed - reference).abs() > row.tol {
                    diffs.push(CellDiff {
                        label: row.label.clone(),
                        column: col,
                        computed,
                        reference,
                        tolerance: row.tol,
                    });
                }
            }
        }
    }
    if eps == 0.0 {
        // exact-multiplicity check at the nominal on-line decision
        let ev = ambiguity_premium(&inst, &[1.6, 1.4], 0.0, cfg, Effort::Full)?;
        if (ev.record.delta - 0.864).abs() > 0.001 {
            diffs.push(CellDiff {
                label: "exact_multiplicity".into(),
                column: "delta",
                computed: ev.record.delta,
                reference: 0.864,
                tolerance: 0.001,
            });
        }
        let analytic = cases::case1_analytic_diagnostics(&params, &[1.6, 1.4], 0.0);
        if (analytic.t_star - 0.412).abs() > 0.0005 {
            diffs.push(CellDiff {
                label: "exact_multiplicity".into(),
                column: "t_star",
                computed: analytic.t_star,
                reference: 0.412,
                tolerance: 0.0005,
            });
        }
    }
    report::write_text(out, "table1.csv", &table)?;
    println!("{table}");

    let sweep = SweepConfig {
        eps,
        seed: cfg.master_seed,
        ..Default::default()
    };
    let report_data = build_frontier(&inst, &sweep, cfg, &[])?;
    write_frontier_artifacts(out, &report_data, "study 1 frontier")?;

    let manifest = RunManifest {
        command: format!("reproduce case1 --eps {eps}"),
        tolerances: cfg.clone(),
        sweep: Some(sweep),
        eps,
        statuses,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
        artifacts: artifact_names(out)?,
    };
    report::write_json(out, "manifest.json", &manifest)?;
    let ok = report_diffs(&diffs);
    println!(
        "reproduce case1: {} ({} rows, {:.1}s)",
        if ok { "all reference checks passed" } else { "MISMATCH" },
        rows.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(ok)
}

fn reproduce_case2(
    eps: f64,
    scan_eps: bool,
    out: &Path,
    cfg: &ToleranceConfig,
    t0: Instant,
) -> Result<bool, Error> {
    let params = case2_params();
    let inst = case2_instance(&params)?;
    let mut cfg = cfg.clone();
    cfg.ni_starts = cfg.ni_starts.max(8);
    let rows = golden_table4();
    let mut table = String::from("label,x1,x2,x3,x4,psi_o,psi_p,delta,rho,ni_gap,status,gated\n");
    let mut diffs: Vec<CellDiff> = Vec::new();
    let mut statuses = Vec::new();
    for row in &rows {
        let ev = ambiguity_premium(&inst, &row.x, eps, &cfg, Effort::Full)?;
        let ni = ni_penalized_eval(&inst, &row.x, eps, &cfg, &NiEvalOptions::from_config(&cfg))?;
        let mut r = ev.record.clone();
        if ni.psi_p > r.psi_p {
            r.psi_p = ni.psi_p;
            r.delta = (r.psi_p - r.psi_o).max(0.0);
            r.rho = normalized_ratio(r.delta, r.psi_o);
            r.ni_gap = ni.ni_gap;
        }
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.label,
            fmt_g6(row.x[0]),
            fmt_g6(row.x[1]),
            fmt_g6(row.x[2]),
            fmt_g6(row.x[3]),
            fmt_g6(r.psi_o),
            fmt_g6(r.psi_p),
            fmt_g6(r.delta),
            fmt_g6(r.rho),
            fmt_g6(r.ni_gap),
            r.status.as_str(),
            if row.gated { "yes" } else { "no" }
        ));
        statuses.push(PointStatus {
            label: row.label.clone(),
            status: r.status.as_str().to_string(),
            ni_gap: r.ni_gap,
        });
        if row.gated && (eps - 0.5).abs() < 1e-12 {
            if (r.psi_o - row.psi_o).abs() > row.tol_psi_o {
                diffs.push(CellDiff {
                    label: row.label.clone(),
                    column: "psi_o",
                    computed: r.psi_o,
                    reference: row.psi_o,
                    tolerance: row.tol_psi_o,
                });
            }
            if (r.delta - row.delta).abs() > row.tol_delta {
                diffs.push(CellDiff {
                    label: row.label.clone(),
                    column: "delta",
                    computed: r.delta,
                    reference: row.delta,
                    tolerance: row.tol_delta,
                });
            }
        }
    }
    report::write_text(out, "table4.csv", &table)?;
    println!("{table}");

    // sweep + fill; the sweep must dominate-or-match the local reference
    // incumbents rather than reproduce them exactly
    let sweep = SweepConfig {
        eps,
        seed: cfg.master_seed,
        ..Default::default()
    };
    let report_data = build_frontier(&inst, &sweep, &cfg, &cases::case2_heuristics())?;
    write_frontier_artifacts(out, &report_data, "study 2 frontier")?;
    if (eps - 0.5).abs() < 1e-12 {
        let sweep_pts: Vec<_> = report_data
            .points
            .iter()
            .filter(|p| p.source == bilevel_diag::frontier::Source::Sweep)
            .collect();
        let best_psi = sweep_pts.iter().map(|p| p.psi_o).fold(f64::INFINITY, f64::min);
        let best_delta = sweep_pts.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
        if best_psi > 0.61 {
            diffs.push(CellDiff {
                label: "sweep".into(),
                column: "min psi_o",
                computed: best_psi,
                reference: 0.61,
                tolerance: 0.0,
            });
        }
        if best_delta > 0.40 {
            diffs.push(CellDiff {
                label: "sweep".into(),
                column: "min delta",
                computed: best_delta,
                reference: 0.40,
                tolerance: 0.0,
            });
        }
    }

    if scan_eps {
        let grid: Vec<f64> = SQRT_SCAN_GRID.iter().map(|(e, _)| *e).collect();
        let entries = sqrt_rate_scan(&inst, &CASE2_BALANCED_POLICY, &grid, &cfg)?;
        report::write_text(out, "scan.csv", &scan_csv(&entries))?;
        report::write_text(out, "plotdata_sqrt.dat", &scan_plotdata(&entries))?;
        report::write_text(out, "plot_sqrt.gp", &scan_gnuplot_script("plotdata_sqrt.dat"))?;
        for (entry, (e_ref, ratio_ref)) in entries.iter().zip(SQRT_SCAN_GRID.iter()) {
            debug_assert_eq!(entry.eps, *e_ref);
            let rel = (entry.ratio - ratio_ref).abs() / ratio_ref;
            if rel > 0.05 {
                diffs.push(CellDiff {
                    label: format!("scan eps={}", fmt_g6(entry.eps)),
                    column: "ratio",
                    computed: entry.ratio,
                    reference: *ratio_ref,
                    tolerance: 0.05 * ratio_ref,
                });
            }
        }
        println!(
            "sqrt scan ratios: {}",
            entries
                .iter()
                .map(|e| fmt_g6(e.ratio))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    let manifest = RunManifest {
        command: format!("reproduce case2 --eps {eps}{}", if scan_eps { " --scan-eps" } else { "" }),
        tolerances: cfg.clone(),
        sweep: Some(sweep),
        eps,
        statuses,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
        artifacts: artifact_names(out)?,
    };
    report::write_json(out, "manifest.json", &manifest)?;
    let ok = report_diffs(&diffs);
    println!(
        "reproduce case2: {} ({:.1}s)",
        if ok { "all reference checks passed" } else { "MISMATCH" },
        t0.elapsed().as_secs_f64()
    );
    Ok(ok)
}

fn write_frontier_artifacts(
    out: &Path,
    report_data: &FrontierReport,
    title: &str,
) -> Result<(), Error> {
    report::write_text(out, "frontier.csv", &frontier_csv(report_data))?;
    report::write_json(out, "frontier.json", report_data)?;
    report::write_text(out, "plotdata_frontier.dat", &frontier_plotdata(report_data))?;
    report::write_text(
        out,
        "plot_frontier.gp",
        &frontier_gnuplot_script("plotdata_frontier.dat", title),
    )?;
    Ok(())
}

fn artifact_names(out: &Path) -> Result<Vec<String>, Error> {
    let mut names: Vec<String> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    Ok(names)
}

fn parse_coords(s: &str) -> Result<Vec<f64>, Error> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad coordinate '{t}'")))
        })
        .collect()
}

fn cmd_diagnose(
    instance: &str,
    x_arg: &str,
    eps: f64,
    g_stat: bool,
    out: Option<PathBuf>,
    seed: Option<u64>,
    config: Option<PathBuf>,
) -> i32 {
    let cfg = match load_tolerances(config, seed, None, None, None) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let inst = match build_named_instance(instance) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            return error_exit_code(&e);
        }
    };
    let x = match parse_coords(x_arg) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    if x.len() != inst.n {
        eprintln!("expected {} coordinates, got {}", inst.n, x.len());
        return EXIT_USAGE;
    }
    if !inst.leader_set.contains(&x, 1e-9) {
        let p = inst.leader_set.project(&x);
        eprintln!(
            "decision is infeasible; nearest feasible point: {}",
            p.iter().map(|v| fmt_g6(*v)).collect::<Vec<_>>().join(",")
        );
        return EXIT_INFEASIBLE;
    }
    match diagnose_inner(&inst, &x, eps, g_stat, out, &cfg) {
        Ok(record) => {
            print_record(&record);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            error_exit_code(&e)
        }
    }
}

fn diagnose_inner(
    inst: &BilevelInstance,
    x: &[f64],
    eps: f64,
    g_stat: bool,
    out: Option<PathBuf>,
    cfg: &ToleranceConfig,
) -> Result<DiagnosticRecord, Error> {
    let ev = ambiguity_premium(inst, x, eps, cfg, Effort::Full)?;
    let mut record = ev.record;
    if g_stat {
        let (lam, resid) = fit_multiplier(inst, x, &ev.minimum.y, &ev.lower.y_star, eps);
        let _ = lam;
        record.g_stat = Some(resid);
        record.g_stat_fitted = true;
    }
    if let Some(dir) = out {
        report::write_json(&dir, "record.json", &record)?;
        let csv = format!(
            "{}\n{}\n",
            record_csv_header(inst.n),
            record_csv_row(&record)
        );
        report::write_text(&dir, "record.csv", &csv)?;
    }
    Ok(record)
}

fn print_record(r: &DiagnosticRecord) {
    println!(
        "x = ({})  eps = {}",
        r.x.iter().map(|v| fmt_g6(*v)).collect::<Vec<_>>().join(", "),
        fmt_g6(r.eps)
    );
    println!("  psi_o  = {:>12}", fmt_g6(r.psi_o));
    println!("  psi_p  = {:>12}", fmt_g6(r.psi_p));
    println!("  delta  = {:>12}", fmt_g6(r.delta));
    println!("  rho    = {:>12}", fmt_g6(r.rho));
    println!("  r_ll   = {:>12}", fmt_g6(r.r_ll));
    if let Some(g) = r.g_stat {
        println!(
            "  g_stat = {:>12}{}",
            fmt_g6(g),
            if r.g_stat_fitted { " (fitted multiplier)" } else { "" }
        );
    }
    println!("  ni_gap = {:>12}", fmt_g6(r.ni_gap));
    println!("  status = {:>12}", r.status.as_str());
}

#[allow(clippy::too_many_arguments)]
fn cmd_frontier(
    instance: &str,
    out: Option<PathBuf>,
    eps: Option<f64>,
    seed: Option<u64>,
    weights: Option<usize>,
    lhs: Option<usize>,
    starts: Option<usize>,
    sigma_max: Option<f64>,
    tol: Option<f64>,
    heuristics: Option<PathBuf>,
    config: Option<PathBuf>,
) -> i32 {
    let t0 = Instant::now();
    let cfg = match load_tolerances(config, seed, None, sigma_max, tol) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let inst = match build_named_instance(instance) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            return error_exit_code(&e);
        }
    };
    let eps = eps.unwrap_or(if instance == "case2" { 0.5 } else { 0.1 });
    let mut sweep = SweepConfig {
        eps,
        seed: cfg.master_seed,
        ..Default::default()
    };
    if let Some(j) = weights {
        sweep.j_weights = j;
    }
    if let Some(n) = lhs {
        sweep.n_lhs = n;
    }
    if let Some(s) = starts {
        sweep.nm_starts = s;
    }
    if sweep.validate().is_err() {
        eprintln!("sweep needs at least 2 weights");
        return EXIT_USAGE;
    }
    let heur: Vec<(String, Vec<f64>)> = match heuristics {
        None => Vec::new(),
        Some(path) => match std::fs::read_to_string(&path) {
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return EXIT_USAGE;
            }
            Ok(text) => {
                let mut pts = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    match parse_coords(line) {
                        Ok(p) if p.len() == inst.n => pts.push((format!("heuristic_{i}"), p)),
                        _ => {
                            eprintln!("bad heuristic row {i}: '{line}'");
                            return EXIT_USAGE;
                        }
                    }
                }
                pts
            }
        },
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("bilevel-out/frontier-{instance}")));
    let report_data = match build_frontier(&inst, &sweep, &cfg, &heur) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return error_exit_code(&e);
        }
    };
    if let Err(e) = write_frontier_artifacts(&out, &report_data, "robustness-efficiency frontier") {
        eprintln!("{e}");
        return error_exit_code(&e);
    }
    let manifest = RunManifest {
        command: format!("frontier {instance} --eps {eps}"),
        tolerances: cfg.clone(),
        sweep: Some(sweep),
        eps,
        statuses: RunManifest::point_statuses(&report_data),
        wall_clock_secs: t0.elapsed().as_secs_f64(),
        artifacts: match artifact_names(&out) {
            Ok(a) => a,
            Err(_) => Vec::new(),
        },
    };
    if let Err(e) = report::write_json(&out, "manifest.json", &manifest) {
        eprintln!("{e}");
        return error_exit_code(&e);
    }
    let nd: Vec<&bilevel_diag::frontier::FrontierPoint> = report_data.nondominated().collect();
    println!(
        "frontier: {} points, {} nondominated ({:.1}s)",
        report_data.points.len(),
        nd.len(),
        t0.elapsed().as_secs_f64()
    );
    for p in nd {
        println!(
            "  [{}] psi_o={} delta={} status={}",
            p.source.as_str(),
            fmt_g6(p.psi_o),
            fmt_g6(p.delta),
            p.status.as_str()
        );
    }
    EXIT_OK
}
