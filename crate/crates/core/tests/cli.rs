//! End-to-end checks of the command-line interface: exit codes, emitted
//! artifacts, and manifest-replay determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bilevel-diag"))
}

#[test]
fn usage_error_exits_1() {
    let out = bin().arg("definitely-not-a-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn diagnose_no_toll_matches_reference_ratio() {
    let out = bin()
        .args(["diagnose", "case1", "-x", "0,0", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let rho_line = text.lines().find(|l| l.contains("rho")).unwrap();
    let rho: f64 = rho_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((rho - 0.538).abs() < 1e-3, "rho {rho}");
}

#[test]
fn diagnose_infeasible_exits_2_with_suggestion() {
    let out = bin()
        .args(["diagnose", "case1", "-x", "5,5", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nearest feasible"), "{err}");
    assert!(err.contains("2,2"), "suggestion missing: {err}");
}

#[test]
fn diagnose_dimension_mismatch_exits_1() {
    let out = bin()
        .args(["diagnose", "case2", "-x", "1,2", "--eps", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn diagnose_renewables_heavy_benchmark() {
    let out = bin()
        .args(["diagnose", "case2", "-x", "3.0,2.5,1.0,0.5", "--eps", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let grab = |name: &str| -> f64 {
        text.lines()
            .find(|l| l.trim_start().starts_with(name))
            .unwrap()
            .split('=')
            .nth(1)
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!((grab("psi_o") - 1.451).abs() <= 0.02);
    assert!((grab("delta") - 1.460).abs() <= 0.02);
}

#[test]
fn diagnose_custom_instance_file_with_g_stat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.toml");
    std::fs::write(
        &path,
        r#"
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
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args([
            "diagnose",
            path.to_str().unwrap(),
            "-x",
            "0.5",
            "--eps",
            "0.09",
            "--g-stat",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("g_stat"));
    assert!(text.contains("fitted"));
    // delta = psi_p - psi_o = (0.75 + 0.3) - (0.75 - 0.3) = 0.6
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("record.json")).unwrap())
            .unwrap();
    let delta = record["delta"].as_f64().unwrap();
    assert!((delta - 0.6).abs() < 1e-4, "delta {delta}");
    assert!(out_dir.join("record.csv").exists());
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn frontier_manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let st = bin()
            .args([
                "frontier",
                "case1",
                "--weights",
                "3",
                "--lhs",
                "4",
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    for name in ["frontier.csv", "plotdata_frontier.dat"] {
        assert_eq!(read(&out1, name), read(&out2, name), "{name} differs");
    }
    // manifests agree except the wall clock
    let m1: serde_json::Value = serde_json::from_str(&read(&out1, "manifest.json")).unwrap();
    let m2: serde_json::Value = serde_json::from_str(&read(&out2, "manifest.json")).unwrap();
    assert_eq!(m1["tolerances"], m2["tolerances"]);
    assert_eq!(m1["sweep"], m2["sweep"]);
    assert_eq!(m1["statuses"], m2["statuses"]);
}

#[test]
fn frontier_degenerate_two_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deg");
    let st = bin()
        .args([
            "frontier",
            "case1",
            "--weights",
            "2",
            "--lhs",
            "0",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let csv = read(&out, "frontier.csv");
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("sweep,0,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("sweep,1,"));
}

#[test]
fn frontier_rejects_single_weight() {
    let out = bin()
        .args(["frontier", "case1", "--weights", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reproduce_case1_passes_reference_gates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep1");
    let st = bin()
        .args(["reproduce", "case1", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let table = read(&out, "table1.csv");
    assert_eq!(table.lines().count(), 8);
    assert!(out.join("frontier.csv").exists());
    assert!(out.join("plot_frontier.gp").exists());
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["statuses"].as_array().unwrap().len(), 7);
    assert!(manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a == "plotdata_frontier.dat"));
}

#[test]
fn reproduce_case1_eps_zero_checks_multiplicity_premium() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep0");
    let st = bin()
        .args(["reproduce", "case1", "--eps", "0", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn reproduce_case2_with_scan_passes_reference_gates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep2");
    let res = bin()
        .args([
            "reproduce",
            "case2",
            "--scan-eps",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let table = read(&out, "table4.csv");
    assert_eq!(table.lines().count(), 8);
    assert!(out.join("scan.csv").exists());
    assert!(out.join("plot_sqrt.gp").exists());
    let scan = read(&out, "scan.csv");
    assert_eq!(scan.lines().count(), 8);
}

#[test]
fn crippled_solver_fails_reference_gates_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("crippled.toml");
    std::fs::write(
        &cfg_path,
        "max_inner_iters = 1\nlower_starts = 1\nextremum_starts = 1\nni_starts = 1\n",
    )
    .unwrap();
    let out = dir.path().join("rep");
    let res = bin()
        .args([
            "reproduce",
            "case1",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(4));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("reference mismatches"), "{err}");
}

#[test]
fn non_finite_objective_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(
        &path,
        r#"
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
c = nan

[leader]
lo = [0.0]
hi = [2.0]

[follower]
kind = "box"
lo = [-3.0]
hi = [3.0]
"#,
    )
    .unwrap();
    let out = bin()
        .args(["diagnose", path.to_str().unwrap(), "-x", "0.5", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn diagnose_accepts_named_study_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case1.toml");
    std::fs::write(&path, "[objective]\nname = \"case1\"\n").unwrap();
    let out = bin()
        .args(["diagnose", path.to_str().unwrap(), "-x", "0,0", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rho"));
}
