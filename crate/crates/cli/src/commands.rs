//! One function per CLI verb. Each takes the effective configuration and a
//! started [`CommandRun`], writes its outputs through it and returns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use semcode::agent::{greedy_flat_mode, greedy_mode, objective, train_flat, train_hierarchical, AgentPolicy, Scenario};
use semcode::baselines::{fixed_qp_outcome, handcrafted_sweep, rate_control_anchor};
use semcode::env::modelfile::{load_model, model_to_string};
use semcode::env::{gen_model, EncodeOutcome, Environment, SyntheticEnv};
use semcode::metrics::{bd_report, curves_from_rows, load_rd_csv, rd_csv_string, BdReport, RdCurve, RdRow};
use semcode::mode::{mode_key, ModeSelection};
use semcode::oracle::{evaluate_space, mode_gap, GapReport, OracleResult};
use semcode::Exec;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::rundir::*;

pub const GAPS_HEADER: &str = "method,lambda,mode,objective,oracle_objective,gap,relative_gap";
pub const ORACLE_HEADER: &str = "lambda,best_mode,best_objective,worst_objective,rate_bits,fidelity";
pub const EVAL_MODES_HEADER: &str = "lambda,mode,rate_bits,fidelity,objective";

/// Prints progress lines unless `--quiet`.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn load_env(dir: &Path, config: &RunConfig) -> CliResult<SyntheticEnv> {
    let path = dir.join(MODEL_FILE);
    if !path.exists() {
        return Err(CliError::MissingInput(format!(
            "{} not found; run `semcode gen-env` first",
            path.display()
        )));
    }
    Ok(SyntheticEnv::new(load_model(&path)?, config.space.clone())?)
}

fn load_policy(path: &Path) -> CliResult<AgentPolicy> {
    if !path.exists() {
        return Err(CliError::MissingInput(format!("{} not found", path.display())));
    }
    Ok(AgentPolicy::load(path)?)
}

fn row(label: &str, lambda: Option<f64>, outcome: &EncodeOutcome) -> RdRow {
    RdRow {
        label: label.to_string(),
        lambda,
        rate_bits: outcome.total_rate,
        fidelity: outcome.fidelity,
    }
}

pub fn gen_env(run: &mut CommandRun<'_>) -> CliResult<()> {
    let model = gen_model(run.config.seed, &run.config.env)?;
    run.write(MODEL_FILE, model_to_string(&model))?;
    run.write(CONFIG_FILE, run.config.to_toml())?;
    Ok(())
}

pub fn train(run: &mut CommandRun<'_>, progress: Progress) -> CliResult<()> {
    let env = load_env(&run.dir, run.config)?;
    let scenario = Scenario::synthetic(&env);
    for &lambda in &run.config.lambdas.clone() {
        let tc = run.config.train.to_train_config(lambda, run.config.seed);
        let clock = Instant::now();
        let out = train_hierarchical(scenario, &tc)?;
        run.timing(
            &format!("train_s_{}", lambda_tag(lambda)),
            clock.elapsed().as_secs_f64(),
        );
        progress.say(format!(
            "lambda {lambda}: parent choice {:?}, {} encodes, {:.1} s",
            out.parent_choice,
            out.encodes,
            clock.elapsed().as_secs_f64()
        ));
        for (kind, policy) in [("parent", &out.parent), ("child", &out.child)] {
            let rel = policy_path(Path::new(""), kind, lambda);
            run.write(rel, policy.to_text())?;
        }
        run.write(log_path(Path::new(""), "hrl", lambda), out.log.to_csv())?;
    }
    Ok(())
}

/// Greedy HRL decision per configured λ, in sweep order.
pub fn hrl_modes(dir: &Path, config: &RunConfig, env: &SyntheticEnv) -> CliResult<Vec<(f64, ModeSelection, f64)>> {
    let scenario = Scenario::synthetic(env);
    config
        .lambdas
        .iter()
        .map(|&lambda| {
            let parent = load_policy(&policy_path(dir, "parent", lambda))?;
            let child = load_policy(&policy_path(dir, "child", lambda))?;
            let clock = Instant::now();
            let mode = greedy_mode(&parent, &child, scenario, lambda)?;
            Ok((lambda, mode, clock.elapsed().as_secs_f64()))
        })
        .collect()
}

pub fn eval(run: &mut CommandRun<'_>, progress: Progress) -> CliResult<()> {
    let env = load_env(&run.dir, run.config)?;
    let decisions = hrl_modes(&run.dir, run.config, &env)?;
    let mut rows = Vec::new();
    let mut modes = format!("{EVAL_MODES_HEADER}\n");
    let mut total_s = 0.0;
    for (lambda, mode, secs) in &decisions {
        let o = env.evaluate(mode)?;
        let key = mode_key(mode);
        progress.say(format!(
            "lambda {lambda}: {key} rate {:.0} fidelity {:.4}",
            o.total_rate, o.fidelity
        ));
        let _ = writeln!(
            modes,
            "{lambda},{key},{},{},{}",
            o.total_rate,
            o.fidelity,
            objective(&o, *lambda)
        );
        rows.push(row("hrl", Some(*lambda), &o));
        total_s += secs;
    }
    run.write(rd_csv_name("hrl"), rd_csv_string(&rows))?;
    run.write(EVAL_MODES_CSV, modes)?;
    run.timing("decision_time_us_mean", total_s * 1e6 / decisions.len() as f64);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineKind {
    Anchor,
    Ratecontrol,
    Handcrafted,
    Flatrl,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Anchor => "anchor",
            BaselineKind::Ratecontrol => "ratecontrol",
            BaselineKind::Handcrafted => "handcrafted",
            BaselineKind::Flatrl => "flatrl",
        }
    }
}

pub fn baseline(run: &mut CommandRun<'_>, which: BaselineKind, progress: Progress) -> CliResult<()> {
    let env = load_env(&run.dir, run.config)?;
    let model = env.model();
    let b = &run.config.baselines;
    let mut rows = Vec::new();
    match which {
        BaselineKind::Anchor => {
            for &qp in &b.anchor_qps {
                rows.push(row("anchor", None, &fixed_qp_outcome(model, qp)?));
            }
        }
        BaselineKind::Ratecontrol => {
            // targets are the fixed-QP anchor rates
            for &qp in &b.anchor_qps {
                let target = fixed_qp_outcome(model, qp)?.total_rate;
                let (_, o) = rate_control_anchor(model, target)?;
                rows.push(row("ratecontrol", None, &o));
            }
        }
        BaselineKind::Handcrafted => {
            for scheme in b.schemes() {
                for (_, o) in handcrafted_sweep(model, &b.handcrafted_qps, &scheme)? {
                    rows.push(row(&scheme.label(), None, &o));
                }
            }
        }
        BaselineKind::Flatrl => {
            let scenario = Scenario::synthetic(&env);
            for &lambda in &run.config.lambdas.clone() {
                let tc = run.config.train.to_train_config(lambda, run.config.seed).matched_flat();
                let clock = Instant::now();
                let out = train_flat(scenario, &tc)?;
                run.timing(
                    &format!("train_s_{}", lambda_tag(lambda)),
                    clock.elapsed().as_secs_f64(),
                );
                let mode = greedy_flat_mode(&out.policy, scenario, lambda)?;
                progress.say(format!(
                    "lambda {lambda}: {} after {} encodes",
                    mode_key(&mode),
                    out.encodes
                ));
                run.write(policy_path(Path::new(""), "flat", lambda), out.policy.to_text())?;
                run.write(log_path(Path::new(""), "flat", lambda), out.log.to_csv())?;
                rows.push(row("flatrl", Some(lambda), &env.evaluate(&mode)?));
            }
        }
    }
    run.write(rd_csv_name(which.name()), rd_csv_string(&rows))?;
    Ok(())
}

fn gap_line(out: &mut String, method: &str, g: &GapReport) {
    let _ = writeln!(
        out,
        "{method},{},{},{},{},{},{}",
        g.lambda,
        mode_key(&g.mode),
        g.objective,
        g.oracle_objective,
        g.gap,
        g.relative_gap
    );
}

pub fn oracle(run: &mut CommandRun<'_>, progress: Progress) -> CliResult<()> {
    let env = load_env(&run.dir, run.config)?;
    let cap = u128::from(run.config.oracle.cap);
    let evals = evaluate_space(&env, &run.config.space, cap, Exec::default())?;
    progress.say(format!("evaluated {} modes", evals.len()));
    if run.config.oracle.keep_table {
        run.write(ORACLE_TRACE, evals.trace_string())?;
    }
    let results: Vec<OracleResult> = run
        .config
        .lambdas
        .iter()
        .map(|&l| evals.search(l, false))
        .collect::<semcode::Result<_>>()?;
    let mut table = format!("{ORACLE_HEADER}\n");
    let mut rows = Vec::new();
    for r in &results {
        let o = env.evaluate(&r.best_mode)?;
        let _ = writeln!(
            table,
            "{},{},{},{},{},{}",
            r.lambda,
            mode_key(&r.best_mode),
            r.best_objective,
            r.worst_objective,
            o.total_rate,
            o.fidelity
        );
        rows.push(row("oracle", Some(r.lambda), &o));
    }
    run.write(ORACLE_CSV, table)?;
    run.write(rd_csv_name("oracle"), rd_csv_string(&rows))?;

    let mut gaps = format!("{GAPS_HEADER}\n");
    let have = |kind: &str| {
        run.config
            .lambdas
            .iter()
            .all(|&l| policy_path(&run.dir, kind, l).exists())
    };
    if have("parent") && have("child") {
        for ((_, mode, _), r) in hrl_modes(&run.dir, run.config, &env)?.iter().zip(&results) {
            gap_line(&mut gaps, "hrl", &mode_gap(&env, mode, r)?);
        }
    }
    if have("flat") {
        let scenario = Scenario::synthetic(&env);
        for r in &results {
            let policy = load_policy(&policy_path(&run.dir, "flat", r.lambda))?;
            let mode = greedy_flat_mode(&policy, scenario, r.lambda)?;
            gap_line(&mut gaps, "flatrl", &mode_gap(&env, &mode, r)?);
        }
    }
    run.write(GAPS_CSV, gaps)?;
    Ok(())
}

/// BD reports of every curve in each test file against the anchor file's
/// first curve (or `anchor_label`).
pub fn bd_reports(
    config: &RunConfig,
    anchor: &Path,
    tests: &[PathBuf],
    anchor_label: Option<&str>,
) -> CliResult<Vec<BdReport>> {
    let anchor_curves = curves_from_rows(&load_rd_csv(anchor)?)?;
    let anchor_curve: &RdCurve = match anchor_label {
        Some(label) => anchor_curves
            .iter()
            .map(|(c, _)| c)
            .find(|c| c.label() == label)
            .ok_or_else(|| CliError::MissingInput(format!("no curve labelled `{label}` in {}", anchor.display())))?,
        None => anchor_curves
            .first()
            .map(|(c, _)| c)
            .ok_or_else(|| CliError::MissingInput(format!("{} has no RD rows", anchor.display())))?,
    };
    let mut reports = Vec::new();
    for path in tests {
        for (curve, _) in curves_from_rows(&load_rd_csv(path)?)? {
            reports.push(bd_report(anchor_curve, &curve, config.metrics.bd_variant)?);
        }
    }
    Ok(reports)
}

pub fn bd(run: &mut CommandRun<'_>, anchor: &Path, tests: &[PathBuf], anchor_label: Option<&str>) -> CliResult<()> {
    let reports = bd_reports(run.config, anchor, tests, anchor_label)?;
    let mut csv = format!("{}\n", semcode::metrics::BD_CSV_HEADER);
    let mut text = String::new();
    for r in &reports {
        csv.push_str(&r.csv_row());
        text.push_str(&r.to_text());
        text.push('\n');
    }
    print!("{text}");
    run.write(BD_CSV, csv)?;
    run.write(BD_TEXT, text)?;
    Ok(())
}

/// `rd_*.csv` files of a run directory, sorted by name.
pub fn rd_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("rd_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn plot(run: &mut CommandRun<'_>, inputs: &[PathBuf]) -> CliResult<()> {
    let files = if inputs.is_empty() {
        rd_files(&run.dir)?
    } else {
        inputs.to_vec()
    };
    if files.is_empty() {
        return Err(CliError::MissingInput(format!(
            "no rd_*.csv files in {}",
            run.dir.display()
        )));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(load_rd_csv(f)?);
    }
    run.write(PLOT_SVG, crate::plot::rd_svg(&rows))?;
    Ok(())
}

pub fn report(run: &mut CommandRun<'_>) -> CliResult<()> {
    let text = crate::report::build_report(&run.dir, run.config)?;
    run.write(REPORT_MD, text)?;
    Ok(())
}
