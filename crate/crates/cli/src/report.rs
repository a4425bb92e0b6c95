//! Experiment execution and table emission.
//!
//! CSV schema (fixed): `method,levels,error,estimate,wall_seconds,
//! matvecs_l1,tol_l1,matvecs_l2,tol_l2,...` — level columns finest first,
//! scientific notation with 7 significant digits, cells empty where a column
//! does not apply (estimate for the baseline, higher levels for shallow runs).
//! Numeric columns are deterministic for a given config; wall_seconds is not.

use std::path::{Path, PathBuf};
use std::time::Instant;

use phicgc::cgc::{cgc_multigrid, CgcConfig};
use phicgc::krylov::{phi_rt_solve, DEFAULT_MAX_DIM};
use phicgc::oracle::{reference_solution, relative_error};
use phicgc::problems::{build_hierarchy, HeatProblem};

use crate::config::{self, ExperimentConfig};
use crate::Format;

pub struct RunRow {
    pub method: String,
    pub levels: usize,
    pub error: Option<f64>,
    pub estimate: Option<f64>,
    pub wall_seconds: f64,
    /// (matvecs, tolerance) per level, finest first.
    pub per_level: Vec<(u64, f64)>,
}

pub fn cmd_run(path: &Path) -> i32 {
    let cfg = match config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let p = match config::build_problem(&cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let rows = match execute(&cfg, &p) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("solver error: {e}");
            return 3;
        }
    };
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("config error: cannot create {}: {e}", out_dir.display());
        return 2;
    }
    let stem = config::output_stem(&cfg);
    let csv = render_csv(&rows);
    let md = render_md(&rows, &config_echo(&cfg, &p));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let md_path = out_dir.join(format!("{stem}.md"));
    if let Err(e) = std::fs::write(&csv_path, &csv).and_then(|_| std::fs::write(&md_path, &md)) {
        eprintln!("config error: cannot write outputs: {e}");
        return 2;
    }
    print!("{md}");
    eprintln!("wrote {} and {}", csv_path.display(), md_path.display());
    0
}

/// 1-grid baseline plus (for levels ≥ 2) the configured correction run, both
/// measured against the tight-tolerance reference on the same grid.
fn execute(cfg: &ExperimentConfig, p: &HeatProblem) -> phicgc::Result<Vec<RunRow>> {
    let y_ref = reference_solution(p, p.t_end)?;
    let max_dim = cfg.krylov_max_dim.unwrap_or(DEFAULT_MAX_DIM);
    let mut rows = Vec::new();

    let t0 = Instant::now();
    let single = phi_rt_solve(&p.operator, &p.v, &p.g, p.t_end, p.rel_tol, max_dim)?;
    let wall = t0.elapsed().as_secs_f64();
    rows.push(RunRow {
        method: "1-grid".into(),
        levels: 1,
        error: Some(relative_error(&single.y, &y_ref)?),
        estimate: None,
        wall_seconds: wall,
        per_level: vec![(single.matvecs, p.rel_tol)],
    });

    if cfg.levels >= 2 {
        let h = build_hierarchy(p, cfg.levels, cfg.transfer_method.method())?;
        let run_cfg = CgcConfig {
            rel_tol: p.rel_tol,
            num_levels: cfg.levels,
            krylov_max_dim: max_dim,
            ..Default::default()
        };
        let t0 = Instant::now();
        let (y, report) = cgc_multigrid(&h, &p.v, &p.g, p.t_end, &run_cfg)?;
        let wall = t0.elapsed().as_secs_f64();
        rows.push(RunRow {
            method: format!("{}-grid", cfg.levels),
            levels: cfg.levels,
            error: Some(relative_error(&y, &y_ref)?),
            estimate: Some(report.total_estimate),
            wall_seconds: wall,
            per_level: report
                .levels
                .iter()
                .map(|l| (l.matvecs, l.effective_rel_tol))
                .collect(),
        });
    }
    Ok(rows)
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn csv_header(max_levels: usize) -> String {
    let mut s = String::from("method,levels,error,estimate,wall_seconds");
    for i in 1..=max_levels {
        s.push_str(&format!(",matvecs_l{i},tol_l{i}"));
    }
    s
}

pub fn render_csv(rows: &[RunRow]) -> String {
    let max_levels = rows.iter().map(|r| r.per_level.len()).max().unwrap_or(0);
    let mut out = csv_header(max_levels);
    out.push('\n');
    for r in rows {
        out.push_str(&r.method);
        out.push_str(&format!(",{}", r.levels));
        out.push_str(&format!(",{}", r.error.map(sci).unwrap_or_default()));
        out.push_str(&format!(",{}", r.estimate.map(sci).unwrap_or_default()));
        out.push_str(&format!(",{}", sci(r.wall_seconds)));
        for i in 0..max_levels {
            match r.per_level.get(i) {
                Some((m, tol)) => out.push_str(&format!(",{m},{}", sci(*tol))),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

fn config_echo(cfg: &ExperimentConfig, p: &HeatProblem) -> String {
    format!(
        "T = {}, rel_tol = {:.1e}, transfer = {}, krylov_max_dim = {}, seed = {}",
        p.t_end,
        p.rel_tol,
        match cfg.transfer_method {
            crate::config::TransferChoice::Linear => "linear",
            crate::config::TransferChoice::CubicSpline => "cubic-spline",
        },
        cfg.krylov_max_dim.unwrap_or(DEFAULT_MAX_DIM),
        cfg.seed,
    )
}

/// Markdown table in the benchmark layout: error (estimate), wall time, then
/// matvecs (tolerance) per grid, finest first.
pub fn render_md(rows: &[RunRow], echo: &str) -> String {
    let max_levels = rows.iter().map(|r| r.per_level.len()).max().unwrap_or(0);
    let mut out = String::new();
    if !echo.is_empty() {
        out.push_str(&format!("{echo}\n\n"));
    }
    out.push_str("| method | error | estimate | wall [s] |");
    for i in 1..=max_levels {
        out.push_str(&format!(" matvecs (tol) L{i} |"));
    }
    out.push('\n');
    out.push_str("|---|---|---|---|");
    out.push_str(&"---|".repeat(max_levels));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.2} |",
            r.method,
            r.error.map(|e| format!("{e:.2e}")).unwrap_or_else(|| "—".into()),
            r.estimate.map(|e| format!("{e:.2e}")).unwrap_or_else(|| "—".into()),
            r.wall_seconds,
        ));
        for i in 0..max_levels {
            match r.per_level.get(i) {
                Some((m, tol)) => out.push_str(&format!(" {m} ({tol:.2e}) |")),
                None => out.push_str(" — |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Merge CSVs produced by `run` (possibly with different level counts) and
/// print them as one table.
pub fn cmd_table(inputs: &[PathBuf], format: Format) -> i32 {
    let mut merged: Vec<(String, Vec<String>)> = Vec::new(); // (source, fields)
    let mut max_levels = 0usize;
    for path in inputs {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("input error: cannot read {}: {e}", path.display());
                return 2;
            }
        };
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let cols = header.split(',').count();
        if cols < 5 || (cols - 5) % 2 != 0 || !header.starts_with("method,levels,error,estimate,wall_seconds") {
            eprintln!("input error: {} does not have the run CSV header", path.display());
            return 2;
        }
        let levels = (cols - 5) / 2;
        max_levels = max_levels.max(levels);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<String> = line.split(',').map(str::to_string).collect();
            if fields.len() != cols {
                eprintln!(
                    "input error: row in {} has {} fields, header has {cols}",
                    path.display(),
                    fields.len()
                );
                return 2;
            }
            merged.push((path.display().to_string(), fields));
        }
    }
    match format {
        Format::Csv => {
            println!("{}", csv_header(max_levels));
            for (_, fields) in &merged {
                let mut padded = fields.clone();
                padded.resize(5 + 2 * max_levels, String::new());
                println!("{}", padded.join(","));
            }
        }
        Format::Md => {
            print!("| source | method | error | estimate | wall [s] |");
            for i in 1..=max_levels {
                print!(" matvecs (tol) L{i} |");
            }
            println!();
            print!("|---|---|---|---|---|");
            print!("{}", "---|".repeat(max_levels));
            println!();
            for (source, fields) in &merged {
                let cell = |s: &String| if s.is_empty() { "—".to_string() } else { s.clone() };
                print!(
                    "| {source} | {} | {} | {} | {} |",
                    fields[0],
                    cell(&fields[2]),
                    cell(&fields[3]),
                    cell(&fields[4])
                );
                for i in 0..max_levels {
                    let m = fields.get(5 + 2 * i).cloned().unwrap_or_default();
                    let tol = fields.get(6 + 2 * i).cloned().unwrap_or_default();
                    if m.is_empty() {
                        print!(" — |");
                    } else {
                        print!(" {m} ({tol}) |");
                    }
                }
                println!();
            }
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<RunRow> {
        vec![
            RunRow {
                method: "1-grid".into(),
                levels: 1,
                error: Some(1.98e-13),
                estimate: None,
                wall_seconds: 1.5,
                per_level: vec![(4052, 1e-8)],
            },
            RunRow {
                method: "2-grid".into(),
                levels: 2,
                error: Some(3.93e-8),
                estimate: Some(1.66e-5),
                wall_seconds: 0.4,
                per_level: vec![(33, 1.65e-1), (1200, 1.41e-8)],
            },
        ]
    }

    #[test]
    fn csv_has_fixed_header_and_padding() {
        let csv = render_csv(&sample_rows());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,levels,error,estimate,wall_seconds,matvecs_l1,tol_l1,matvecs_l2,tol_l2"
        );
        let baseline = lines.next().unwrap();
        assert!(baseline.starts_with("1-grid,1,1.980000e-13,,"));
        assert!(baseline.ends_with(",,"), "missing level-2 padding: {baseline}");
        let cgc = lines.next().unwrap();
        assert!(cgc.contains(",33,1.650000e-1,1200,1.410000e-8"));
    }

    #[test]
    fn md_marks_missing_cells() {
        let md = render_md(&sample_rows(), "");
        assert!(md.contains("| 1-grid | 1.98e-13 | — |"));
        assert!(md.contains("4052 (1.00e-8)"));
    }
}
