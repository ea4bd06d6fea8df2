//! Markdown summary of whatever a run directory currently holds.

use std::fmt::Write as _;
use std::path::Path;

use semcode::metrics::{bd_report, curves_from_rows, load_rd_csv, RdRow};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::rundir::*;

/// RD rows per file, in file-name order.
pub fn rd_inventory(dir: &Path) -> CliResult<Vec<(String, Vec<RdRow>)>> {
    crate::commands::rd_files(dir)?
        .into_iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_rd_csv(&p)?))
        })
        .collect()
}

fn manifests(dir: &Path) -> CliResult<Vec<Manifest>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(MANIFEST_SUFFIX))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_manifest(p)).collect()
}

pub fn build_report(dir: &Path, config: &RunConfig) -> CliResult<String> {
    let mut md = String::new();
    let _ = writeln!(md, "# semcode run report\n");

    let _ = writeln!(md, "## Settings\n");
    let _ = writeln!(md, "| key | value |\n|---|---|");
    let _ = writeln!(md, "| seed | {} |", config.seed);
    let _ = writeln!(md, "| config hash | `{}` |", config.hash());
    let _ = writeln!(md, "| code version | {} |", env!("CARGO_PKG_VERSION"));
    let lambdas: Vec<String> = config.lambdas.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(md, "| lambdas | {} |", lambdas.join(", "));
    let e = &config.env;
    let _ = writeln!(
        md,
        "| environment | {} frames, {}x{} CTUs, GOP {} |",
        e.frames, e.rows, e.cols, e.gop_size
    );
    let _ = writeln!(md, "| mode space | {} modes |", config.space.size());
    let t = &config.train;
    let _ = writeln!(
        md,
        "| training | {} iterations x batch {}, lr {} / {}, {:?} |\n",
        t.iterations, t.batch_size, t.lr_parent, t.lr_child, t.optimizer
    );

    let inventory = rd_inventory(dir)?;
    let total: usize = inventory.iter().map(|(_, rows)| rows.len()).sum();
    let _ = writeln!(md, "## RD points\n");
    let _ = writeln!(md, "| file | label | points |\n|---|---|---|");
    for (file, rows) in &inventory {
        let mut labels: Vec<&str> = Vec::new();
        for r in rows {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
        for label in labels {
            let n = rows.iter().filter(|r| r.label == label).count();
            let _ = writeln!(md, "| {file} | {label} | {n} |");
        }
    }
    let _ = writeln!(md, "\nTotal RD points: {total}\n");

    let _ = writeln!(md, "## BD metrics against the fixed-QP anchor\n");
    let anchor_rows = inventory
        .iter()
        .find(|(f, _)| *f == rd_csv_name("anchor"))
        .map(|(_, r)| r);
    match anchor_rows {
        None => {
            let _ = writeln!(md, "No anchor curve in this run directory.\n");
        }
        Some(anchor_rows) => {
            let anchor = curves_from_rows(anchor_rows)?.into_iter().next().map(|(c, _)| c);
            let _ = writeln!(md, "| curve | BD-rate (%) | BD-quality (points) |\n|---|---|---|");
            for (file, rows) in inventory.iter().filter(|(f, _)| *f != rd_csv_name("anchor")) {
                for (curve, _) in curves_from_rows(rows)? {
                    let cell = match anchor.as_ref().map(|a| bd_report(a, &curve, config.metrics.bd_variant)) {
                        Some(Ok(r)) => format!("{:.3} | {:.3}", r.bd_rate_pct, r.bd_quality_pts),
                        Some(Err(e)) => format!("n/a ({}) | n/a", e.class()),
                        None => "n/a | n/a".to_string(),
                    };
                    let _ = writeln!(md, "| {} ({file}) | {cell} |", curve.label());
                }
            }
            md.push('\n');
        }
    }

    let _ = writeln!(md, "## Oracle gaps\n");
    let gaps = dir.join(GAPS_CSV);
    if gaps.exists() {
        let text = read_file(&gaps)?;
        let mut lines = text.lines();
        if let Some(header) = lines.next() {
            let cols: Vec<&str> = header.split(',').collect();
            let _ = writeln!(md, "| {} |", cols.join(" | "));
            let _ = writeln!(md, "|{}", "---|".repeat(cols.len()));
            for l in lines.filter(|l| !l.is_empty()) {
                let _ = writeln!(md, "| {} |", l.split(',').collect::<Vec<_>>().join(" | "));
            }
        }
        md.push('\n');
    } else {
        let _ = writeln!(md, "No gap report in this run directory.\n");
    }

    let _ = writeln!(md, "## Timings\n");
    let _ = writeln!(md, "| command | wall clock (s) | measurements |\n|---|---|---|");
    for m in manifests(dir)? {
        let extra: Vec<String> = m.timings.iter().map(|(k, v)| format!("{k} = {v:.3}")).collect();
        let _ = writeln!(md, "| {} | {:.3} | {} |", m.command, m.wall_clock_s, extra.join(", "));
    }
    Ok(md)
}
