//! Machine-readable outputs: CSV tables (6 significant digits), JSON
//! reports (full precision), gnuplot-ready plot data, and run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ToleranceConfig;
use crate::diagnostics::{DiagnosticRecord, ScanEntry};
use crate::frontier::{FrontierPoint, FrontierReport, SweepConfig};
use crate::Result;

/// Formats with 6 significant digits, plain decimal where reasonable.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        let exp = a.log10().floor() as i32;
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let trimmed = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if trimmed == "-0" {
            "0".into()
        } else {
            trimmed
        }
    } else {
        format!("{v:.5e}")
    }
}

pub fn record_csv_header(n: usize) -> String {
    let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    format!(
        "{},eps,psi_o,psi_p,delta,rho,r_ll,g_stat,ni_gap,status",
        xs.join(",")
    )
}

pub fn record_csv_row(r: &DiagnosticRecord) -> String {
    let xs: Vec<String> = r.x.iter().map(|v| fmt_g6(*v)).collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        xs.join(","),
        fmt_g6(r.eps),
        fmt_g6(r.psi_o),
        fmt_g6(r.psi_p),
        fmt_g6(r.delta),
        fmt_g6(r.rho),
        fmt_g6(r.r_ll),
        r.g_stat.map(fmt_g6).unwrap_or_default(),
        fmt_g6(r.ni_gap),
        r.status.as_str()
    )
}

pub fn frontier_csv(report: &FrontierReport) -> String {
    let n = report.points.first().map_or(0, |p| p.x.len());
    let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut out = format!(
        "source,weight,{},psi_o,psi_p,delta,rho,r_ll,ni_gap,status,dominated\n",
        xs.join(",")
    );
    for p in &report.points {
        let xs: Vec<String> = p.x.iter().map(|v| fmt_g6(*v)).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.source.as_str(),
            p.weight.map(fmt_g6).unwrap_or_default(),
            xs.join(","),
            fmt_g6(p.psi_o),
            fmt_g6(p.psi_p),
            fmt_g6(p.delta),
            fmt_g6(p.rho),
            fmt_g6(p.record.r_ll),
            fmt_g6(p.record.ni_gap),
            p.status.as_str(),
            p.dominated
        ));
    }
    out
}

/// Two-column `psi_o delta` blocks separated by source, gnuplot `index`
/// addressable.
pub fn frontier_plotdata(report: &FrontierReport) -> String {
    let mut out = String::new();
    let sources = [
        crate::frontier::Source::Sweep,
        crate::frontier::Source::Lhs,
        crate::frontier::Source::Heuristic,
        crate::frontier::Source::External,
    ];
    let mut first = true;
    for src in sources {
        let pts: Vec<&FrontierPoint> = report.points.iter().filter(|p| p.source == src).collect();
        if pts.is_empty() {
            continue;
        }
        if !first {
            out.push_str("\n\n");
        }
        first = false;
        out.push_str(&format!("# source={}\n", src.as_str()));
        for p in pts {
            out.push_str(&format!("{} {}\n", fmt_g6(p.psi_o), fmt_g6(p.delta)));
        }
    }
    out
}

pub fn frontier_gnuplot_script(dat_name: &str, title: &str) -> String {
    format!(
        "set terminal pngcairo size 900,640\n\
         set output 'frontier.png'\n\
         set xlabel 'optimistic value'\n\
         set ylabel 'ambiguity premium'\n\
         set title '{title}'\n\
         set key top right\n\
         plot '{dat_name}' index 0 with points pt 7 ps 1.1 lc rgb 'blue' title 'sweep', \\\n\
              '{dat_name}' index 1 with points pt 7 ps 0.7 lc rgb 'gray' title 'samples', \\\n\
              '{dat_name}' index 2 with points pt 5 ps 1.3 lc rgb 'red' title 'heuristics'\n"
    )
}

pub fn optimistic_trace_csv(report: &crate::optimistic::OptimisticRunReport) -> String {
    let mut out = String::from("iter,step_norm,r_ll,g_stat,upper_value\n");
    for t in &report.trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.iter,
            fmt_g6(t.step_norm),
            fmt_g6(t.r_ll),
            fmt_g6(t.g_stat),
            fmt_g6(t.upper_value)
        ));
    }
    out
}

pub fn scan_csv(entries: &[ScanEntry]) -> String {
    let mut out = String::from("eps,delta,ratio,cap\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g6(e.eps),
            fmt_g6(e.delta),
            fmt_g6(e.ratio),
            e.cap.map(fmt_g6).unwrap_or_default()
        ));
    }
    out
}

pub fn scan_plotdata(entries: &[ScanEntry]) -> String {
    let mut out = String::from("# eps ratio\n");
    for e in entries {
        out.push_str(&format!("{} {}\n", fmt_g6(e.eps), fmt_g6(e.ratio)));
    }
    out
}

pub fn scan_gnuplot_script(dat_name: &str) -> String {
    format!(
        "set terminal pngcairo size 900,640\n\
         set output 'sqrt_scan.png'\n\
         set logscale x\n\
         set xlabel 'eps'\n\
         set ylabel 'premium / sqrt(eps)'\n\
         plot '{dat_name}' using 1:2 with linespoints pt 7 title 'ratio'\n"
    )
}

/// Snapshot of everything a run needs to be replayed, plus per-point
/// statuses and produced artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tolerances: ToleranceConfig,
    pub sweep: Option<SweepConfig>,
    pub eps: f64,
    pub statuses: Vec<PointStatus>,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointStatus {
    pub label: String,
    pub status: String,
    pub ni_gap: f64,
}

impl RunManifest {
    pub fn point_statuses(report: &FrontierReport) -> Vec<PointStatus> {
        report
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| PointStatus {
                label: match (p.source, p.weight) {
                    (crate::frontier::Source::Sweep, Some(w)) => {
                        format!("sweep_omega_{}", fmt_g6(w))
                    }
                    (src, _) => format!("{}_{i}", src.as_str()),
                },
                status: p.status.as_str().to_string(),
                ni_gap: p.record.ni_gap,
            })
            .collect()
    }
}

pub fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::Error::Parse(format!("json encode: {e}")))?;
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::StatusLabel;

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(0.382), "0.382");
        assert_eq!(fmt_g6(0.864360), "0.86436");
        assert_eq!(fmt_g6(1.0632716), "1.06327");
        assert_eq!(fmt_g6(123456.78), "123457");
        assert_eq!(fmt_g6(-0.137), "-0.137");
        assert_eq!(fmt_g6(1e-7), "1.00000e-7");
    }

    #[test]
    fn record_row_roundtrip_fields() {
        let r = DiagnosticRecord {
            x: vec![1.6, 1.4],
            eps: 0.1,
            psi_o: 0.381640,
            psi_p: 1.246,
            delta: 0.864360,
            rho: 0.6256,
            r_ll: 0.0,
            g_stat: None,
            g_stat_fitted: false,
            ni_gap: 0.0,
            status: StatusLabel::Converged,
        };
        let header = record_csv_header(2);
        let row = record_csv_row(&r);
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(row.starts_with("1.6,1.4,0.1,"));
        assert!(row.ends_with("converged"));
        // fixed JSON field order
        let json = serde_json::to_string(&r).unwrap();
        let x_pos = json.find("\"x\"").unwrap();
        let eps_pos = json.find("\"eps\"").unwrap();
        let status_pos = json.find("\"status\"").unwrap();
        assert!(x_pos < eps_pos && eps_pos < status_pos);
    }
}
