//! How much does the first decision variable matter?
//!
//! For each instance a subset of variables is sampled; each one is forced to
//! the front of an otherwise random order for a number of runs, and the mean
//! propagation count per variable is compared across variables.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, solver_config, write_config, HarnessError, Instance, InstanceSource};
use crate::ranking::mean_ci;
use crate::seed::{derive_seed, rng_from_seed, stable_hash};
use crate::solver::{solve, Heuristic, SolveResult, VariableOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingImpactConfig {
    pub source: InstanceSource,
    #[serde(default = "default_sampled")]
    pub sampled_variables: usize,
    #[serde(default = "default_runs")]
    pub runs_per_variable: u32,
    pub seed: u64,
    /// Propagation budget per solve. Instances whose default solve exceeds it
    /// are skipped; forced runs that exceed it are counted at the budget.
    pub budget: Option<u64>,
    #[serde(default)]
    pub heuristic: Heuristic,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub record_time: bool,
}

fn default_sampled() -> usize {
    50
}
fn default_runs() -> u32 {
    1000
}
pub(crate) fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImpact {
    pub instance_id: String,
    pub var: u32,
    pub runs: u32,
    pub censored_runs: u32,
    pub mean_propagations: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub mean_time_ms: Option<f64>,
}

/// Summary over per-variable means. Lower is better, so "best" is the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    pub median: f64,
    pub best: f64,
    pub p10: f64,
    pub worst: f64,
    pub best_speedup_pct: Option<f64>,
    pub top10_speedup_pct: Option<f64>,
    pub max_min_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceImpact {
    pub instance_id: String,
    pub num_vars: u32,
    pub num_clauses: usize,
    pub default_propagations: u64,
    pub variables: Vec<VariableImpact>,
    pub summary: ImpactSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub instances: Vec<InstanceImpact>,
    /// Ids skipped because the default solve ran out of budget.
    pub skipped: Vec<String>,
}

/// Nearest-rank percentile of sorted values, `p` in (0, 100].
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[idx.clamp(1, sorted.len()) - 1]
}

fn speedup(median: f64, reference: f64) -> Option<f64> {
    (reference > 0.0).then(|| (median - reference) / reference * 100.0)
}

/// Summarises per-variable means. The median of an even count averages the
/// two middle values.
pub fn summarize_means(means: &[f64]) -> Option<ImpactSummary> {
    if means.is_empty() {
        return None;
    }
    let mut s = means.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    };
    let best = s[0];
    let worst = s[n - 1];
    let p10 = nearest_rank(&s, 10.0);
    Some(ImpactSummary {
        median,
        best,
        p10,
        worst,
        best_speedup_pct: speedup(median, best),
        top10_speedup_pct: speedup(median, p10),
        max_min_ratio: (best > 0.0).then(|| worst / best),
    })
}

fn sample_vars(num_vars: u32, count: usize, seed: u64) -> Vec<u32> {
    let count = count.min(num_vars as usize);
    let mut rng = rng_from_seed(seed);
    let mut vars: Vec<u32> = rand::seq::index::sample(&mut rng, num_vars as usize, count)
        .into_iter()
        .map(|v| v as u32 + 1)
        .collect();
    vars.sort_unstable();
    vars
}

fn impact_for_instance(
    id: &str,
    formula: &crate::cnf::Formula,
    config: &BranchingImpactConfig,
) -> Result<Option<InstanceImpact>, HarnessError> {
    let base = solver_config(config.heuristic, config.budget);
    let default = solve(formula, &base)?;
    if default.result == SolveResult::BudgetExceeded {
        return Ok(None);
    }
    let n = formula.num_vars();
    let inst_seed = derive_seed(config.seed, &[stable_hash(id)]);
    let vars = sample_vars(n, config.sampled_variables, derive_seed(inst_seed, &[0]));
    let trials: Vec<(u32, u32)> = vars
        .iter()
        .flat_map(|&v| (0..config.runs_per_variable).map(move |r| (v, r)))
        .collect();
    let results: Vec<(u64, bool, f64)> = trials
        .par_iter()
        .map(|&(v, r)| {
            let mut rng = rng_from_seed(derive_seed(inst_seed, &[1, u64::from(v), u64::from(r)]));
            let order = VariableOrder::random_with_first(n, v, &mut rng);
            let stats = solve(formula, &base.clone().with_order(order))?;
            let censored = stats.result == SolveResult::BudgetExceeded;
            let props = if censored {
                config.budget.unwrap_or(stats.propagations)
            } else {
                stats.propagations
            };
            Ok((props, censored, stats.wall_time.as_secs_f64() * 1e3))
        })
        .collect::<Result<_, HarnessError>>()?;

    let runs = config.runs_per_variable as usize;
    let variables: Vec<VariableImpact> = vars
        .iter()
        .zip(results.chunks(runs.max(1)))
        .map(|(&var, chunk)| {
            let props: Vec<f64> = chunk.iter().map(|r| r.0 as f64).collect();
            let ci = mean_ci(&props);
            VariableImpact {
                instance_id: id.to_string(),
                var,
                runs: chunk.len() as u32,
                censored_runs: chunk.iter().filter(|r| r.1).count() as u32,
                mean_propagations: ci.map_or(0.0, |c| c.mean),
                ci_low: ci.and_then(|c| c.ci_low),
                ci_high: ci.and_then(|c| c.ci_high),
                mean_time_ms: config
                    .record_time
                    .then(|| chunk.iter().map(|r| r.2).sum::<f64>() / chunk.len().max(1) as f64),
            }
        })
        .collect();
    let means: Vec<f64> = variables.iter().map(|v| v.mean_propagations).collect();
    let Some(summary) = summarize_means(&means) else {
        return Ok(None);
    };
    Ok(Some(InstanceImpact {
        instance_id: id.to_string(),
        num_vars: n,
        num_clauses: formula.num_clauses(),
        default_propagations: default.propagations,
        variables,
        summary,
    }))
}

fn validate(config: &BranchingImpactConfig) -> Result<(), HarnessError> {
    if config.sampled_variables == 0 || config.runs_per_variable == 0 {
        return Err(HarnessError::Config(
            "sampled_variables and runs_per_variable must be >= 1".into(),
        ));
    }
    if config.workers == 0 {
        return Err(HarnessError::Config("worker count must be >= 1".into()));
    }
    Ok(())
}

/// Runs the experiment on already-loaded instances without touching disk.
pub fn run_branching_impact(
    instances: &[Instance],
    config: &BranchingImpactConfig,
) -> Result<ImpactReport, HarnessError> {
    validate(config)?;
    let per: Vec<(String, Option<InstanceImpact>)> = super::with_workers(config.workers, || {
        instances
            .iter()
            .map(|(id, f)| Ok((id.clone(), impact_for_instance(id, f, config)?)))
            .collect::<Result<Vec<_>, HarnessError>>()
    })??;
    let mut report = ImpactReport {
        instances: Vec::new(),
        skipped: Vec::new(),
    };
    for (id, r) in per {
        match r {
            Some(r) => report.instances.push(r),
            None => report.skipped.push(id),
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    instance_id: &'a str,
    num_vars: u32,
    num_clauses: usize,
    sampled_variables: usize,
    default_propagations: u64,
    median: f64,
    best: f64,
    p10: f64,
    worst: f64,
    best_speedup_pct: Option<f64>,
    top10_speedup_pct: Option<f64>,
    max_min_ratio: Option<f64>,
}

/// Writes `config.json`, `per_variable.csv`, `summary.csv` and `skipped.txt`.
pub fn write_impact_files(
    report: &ImpactReport,
    config: &BranchingImpactConfig,
) -> Result<(), HarnessError> {
    let dir = &config.out_dir;
    write_config(dir, "branching_impact", config)?;
    let per_path = dir.join("per_variable.csv");
    let mut w = csv::Writer::from_path(&per_path)?;
    for inst in &report.instances {
        for v in &inst.variables {
            w.serialize(v)?;
        }
    }
    w.flush().map_err(io_err(&per_path))?;

    let sum_path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&sum_path)?;
    for inst in &report.instances {
        let s = &inst.summary;
        w.serialize(SummaryRow {
            instance_id: &inst.instance_id,
            num_vars: inst.num_vars,
            num_clauses: inst.num_clauses,
            sampled_variables: inst.variables.len(),
            default_propagations: inst.default_propagations,
            median: s.median,
            best: s.best,
            p10: s.p10,
            worst: s.worst,
            best_speedup_pct: s.best_speedup_pct,
            top10_speedup_pct: s.top10_speedup_pct,
            max_min_ratio: s.max_min_ratio,
        })?;
    }
    w.flush().map_err(io_err(&sum_path))?;

    let skip_path = dir.join("skipped.txt");
    let mut text = String::new();
    for id in &report.skipped {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(&skip_path, text).map_err(io_err(&skip_path))
}

/// Loads instances from the config's source, runs, and writes result files.
pub fn run_branching_impact_to_dir(config: &BranchingImpactConfig) -> Result<ImpactReport, HarnessError> {
    validate(config)?;
    let instances = super::with_workers(config.workers, || config.source.load())??;
    let report = run_branching_impact(&instances, config)?;
    write_impact_files(&report, config)?;
    Ok(report)
}

impl BranchingImpactConfig {
    pub fn run(&self) -> Result<ImpactReport, HarnessError> {
        run_branching_impact_to_dir(self)
    }

    pub fn per_variable_path(&self) -> PathBuf {
        self.out_dir.join("per_variable.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("summary.csv")
    }
}
