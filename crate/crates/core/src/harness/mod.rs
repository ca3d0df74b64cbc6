//! Configuration, experiment orchestration, reference optima, trace files
//! and the command-line interface.

pub mod cli;
pub mod config;
pub mod reference;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, RidgeSplit};
use crate::data;
use crate::engine::{CertVariant, Engine, RunMeta, RunTrace};
use crate::{Error, Result};
use config::{Baseline, ExperimentConfig, ProblemConfig, RunConfig};
use reference::ReferenceOptimum;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "COLA_OUTPUT_DIR";

/// Relative suboptimality used for "rounds to target" summaries.
pub const TARGET_SUBOPT: f64 = 1e-4;

/// Output directory: explicit flag, else the config's `output_dir`
/// (relative to the config file), else `$COLA_OUTPUT_DIR`, else `.`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig, base_dir: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return base_dir.join(p);
    }
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPass {
    pub round: usize,
    pub variant: CertVariant,
    pub gap: f64,
    /// Measured gap divided by epsilon.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub meta: Option<RunMeta>,
    pub rounds: usize,
    pub final_objective: f64,
    pub final_gap: Option<f64>,
    pub f_star: Option<f64>,
    pub final_rel_subopt: Option<f64>,
    pub rounds_to_target: Option<usize>,
    pub alpha: Option<f64>,
    pub first_all_pass: Vec<FirstPass>,
    pub reference_warning: Option<String>,
}

/// First certificate evaluation, per variant, where all local flags pass.
pub fn first_all_pass(trace: &RunTrace, epsilon: f64) -> Vec<FirstPass> {
    [CertVariant::Post, CertVariant::Mixed]
        .into_iter()
        .filter_map(|variant| {
            trace
                .certs
                .iter()
                .find(|c| c.variant == variant && c.report.all_pass())
                .map(|c| FirstPass { round: c.round, variant, gap: c.report.gap, slack: c.report.gap / epsilon })
        })
        .collect()
}

fn relative(f: f64, f_star: f64) -> f64 {
    (f - f_star) / f_star.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Option<RunTrace>,
    pub reference: Option<ReferenceOptimum>,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// Executes one configured run and writes its artifacts into `out_dir`:
/// `<name>.csv`, `<name>.certs.csv` (when certificates are on) and
/// `<name>.summary.json`.
pub fn execute_run(run: &RunConfig, base_dir: &Path, out_dir: &Path, reference_budget: u64) -> Result<RunOutcome> {
    if run.baseline == Some(Baseline::Diging) {
        return execute_diging(run, base_dir, out_dir);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let prepared = config::prepare(run, base_dir)?;
    let problem = prepared.problem.clone();
    let mut engine = Engine::new(prepared.problem, &prepared.partition, prepared.network, prepared.engine)?;
    let trace = engine.run()?;

    let mut files = Vec::new();
    let csv = out_dir.join(format!("{}.csv", run.name));
    trace::emit_trace(&trace.records, &csv)?;
    files.push(csv);
    if !trace.certs.is_empty() {
        let path = out_dir.join(format!("{}.certs.csv", run.name));
        trace::emit_certs(&trace.certs, &path)?;
        files.push(path);
    }

    let reference = reference::cached_reference(&out_dir.join("reference_cache"), &problem, reference_budget)?;
    let last = trace.records.last().expect("round 0 is always recorded");
    let f_star = reference.f_star;
    let summary = RunSummary {
        name: run.name.clone(),
        meta: Some(trace.meta.clone()),
        rounds: run.rounds,
        final_objective: last.fa,
        final_gap: Some(last.gap),
        f_star: Some(f_star),
        final_rel_subopt: Some(relative(last.fa, f_star)),
        rounds_to_target: trace.rounds_to(TARGET_SUBOPT, |r| relative(r.fa, f_star)),
        alpha: None,
        first_all_pass: run.cert_epsilon.map(|e| first_all_pass(&trace, e)).unwrap_or_default(),
        reference_warning: reference.warning.clone(),
    };
    let path = out_dir.join(format!("{}.summary.json", run.name));
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::file(&path, e))?;
    files.push(path);
    Ok(RunOutcome { trace: Some(trace), reference: Some(reference), summary, files })
}

/// Default DIGing step-size grid.
pub fn default_alpha_grid() -> Vec<f64> {
    (-8..=2).map(|e| 10f64.powi(e)).flat_map(|s| [s, 3.0 * s]).collect()
}

/// Sample-split ridge for the DIGing baseline of a ridge config.
pub fn ridge_split(run: &RunConfig, data: &config::Dataset) -> Result<RidgeSplit> {
    let ProblemConfig::Ridge { lambda, .. } = run.problem else {
        return Err(Error::config("the DIGing baseline needs a ridge problem"));
    };
    let a = Arc::new(data.samples.transpose());
    let partition = data::partition_columns(a.n_cols(), run.nodes, run.seeds.partition)?;
    RidgeSplit::new(a, data.targets.clone(), lambda, &partition)
}

fn execute_diging(run: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let data = config::load_data(&run.data, base_dir)?;
    let split = ridge_split(run, &data)?;
    let network = config::build_network(run, base_dir)?;
    let w = network.schedule().matrices()[0].clone();
    let grid = if run.alpha_candidates.is_empty() { default_alpha_grid() } else { run.alpha_candidates.clone() };
    let alpha = baselines::grid_search_alpha(&split, &w, &grid, run.alpha_budget)?;
    let trace = baselines::run_diging(&split, &w, alpha, run.rounds);
    let w_star = split
        .solve_exact()
        .ok_or_else(|| Error::config("normal equations are not positive definite"))?;
    let f_star = split.objective(&w_star);

    let csv = out_dir.join(format!("{}.diging.csv", run.name));
    let mut body = String::from("round,objective,suboptimality\n");
    for (t, f) in trace.objective.iter().enumerate() {
        body += &format!("{t},{},{}\n", trace::fmt_f64(*f), trace::fmt_f64(relative(*f, f_star)));
    }
    fs::write(&csv, body).map_err(|e| Error::file(&csv, e))?;

    let last = *trace.objective.last().expect("start is recorded");
    let summary = RunSummary {
        name: run.name.clone(),
        meta: None,
        rounds: run.rounds,
        final_objective: last,
        final_gap: None,
        f_star: Some(f_star),
        final_rel_subopt: Some(relative(last, f_star)),
        rounds_to_target: trace.rounds_to(f_star, TARGET_SUBOPT),
        alpha: Some(alpha),
        first_all_pass: Vec::new(),
        reference_warning: None,
    };
    let path = out_dir.join(format!("{}.summary.json", run.name));
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::file(&path, e))?;
    Ok(RunOutcome { trace: None, reference: None, summary, files: vec![csv, path] })
}

/// Runs every sweep point; points execute concurrently and each writes its
/// own files.
pub fn execute_sweep(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<Vec<RunOutcome>> {
    let points = cfg.sweep_points()?;
    for p in &points {
        let prepared = config::prepare(p, base_dir)?;
        if p.baseline.is_none() {
            // Sweep axes never change the problem; solve the reference once up front.
            reference::cached_reference(&out_dir.join("reference_cache"), &prepared.problem, cfg.reference_budget)?;
        }
    }
    points
        .par_iter()
        .map(|p| execute_run(p, base_dir, out_dir, cfg.reference_budget))
        .collect()
}
