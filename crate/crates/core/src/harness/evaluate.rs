//! Solving instances under supplied orders and comparing against the default.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::impact::default_workers;
use super::{io_err, read_jsonl, solver_config, write_config, write_jsonl, HarnessError, Instance, InstanceSource};
use crate::labeling::LabelRecord;
use crate::ranking::{aggregate, reduction, spearman, write_eval_csv, write_summary_csv, EvalRow, GroupSummary};
use crate::seed::{derive_seed, rng_from_seed, stable_hash};
use crate::solver::{solve, Heuristic, SolveResult, VariableOrder};

/// One line of an orders file. Extra fields (as in a labels file) are ignored,
/// so labeling output can be evaluated directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub instance_id: String,
    pub order: VariableOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_time_ms: Option<f64>,
}

impl From<&LabelRecord> for OrderRecord {
    fn from(l: &LabelRecord) -> Self {
        OrderRecord {
            instance_id: l.instance_id.clone(),
            order: l.order.clone(),
            scores: Some(l.scores.clone()),
            inference_time_ms: None,
        }
    }
}

pub fn read_orders(path: &Path) -> Result<Vec<OrderRecord>, HarnessError> {
    read_jsonl(path)
}

pub fn write_orders(path: &Path, orders: &[OrderRecord]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_jsonl(orders, std::io::BufWriter::new(file)).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    #[default]
    All,
    NumVars,
    Result,
}

impl GroupBy {
    fn key(self, row: &EvalRow) -> String {
        match self {
            GroupBy::All => "all".into(),
            GroupBy::NumVars => row.num_vars.to_string(),
            GroupBy::Result => row.result.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    #[serde(default)]
    pub heuristic: Heuristic,
    pub budget: Option<u64>,
    /// Seed for the random-order baseline; no baseline when absent.
    pub random_baseline_seed: Option<u64>,
    #[serde(default)]
    pub record_time: bool,
}

fn result_name(r: SolveResult) -> String {
    match r {
        SolveResult::Sat => "SAT",
        SolveResult::Unsat => "UNSAT",
        SolveResult::BudgetExceeded => "BUDGET_EXCEEDED",
    }
    .to_string()
}

fn index_unique<'a, T>(
    items: &'a [T],
    id: impl Fn(&T) -> &str,
    what: &str,
) -> Result<HashMap<&'a str, &'a T>, HarnessError> {
    let mut map = HashMap::with_capacity(items.len());
    for it in items {
        if map.insert(id(it), it).is_some() {
            return Err(HarnessError::Config(format!("duplicate {what} for `{}`", id(it))));
        }
    }
    Ok(map)
}

/// Evaluates `orders` on `instances`, one row per instance in input order.
/// Instances without an order get a row with empty tested columns. With
/// `labels`, the Spearman correlation between order and label is reported.
pub fn evaluate_orders(
    instances: &[Instance],
    orders: &[OrderRecord],
    labels: Option<&[LabelRecord]>,
    options: &EvaluateOptions,
) -> Result<Vec<EvalRow>, HarnessError> {
    let orders = index_unique(orders, |o| o.instance_id.as_str(), "order")?;
    let labels = labels
        .map(|ls| index_unique(ls, |l| l.instance_id.as_str(), "label"))
        .transpose()?;
    let base = solver_config(options.heuristic, options.budget);
    instances
        .par_iter()
        .map(|(id, f)| {
            let n = f.num_vars();
            let default = solve(f, &base)?;
            let mut row = EvalRow {
                instance_id: id.clone(),
                num_vars: n,
                result: result_name(default.result),
                propagations_default: default.propagations,
                propagations_tested: None,
                reduction: None,
                propagations_random: None,
                reduction_random: None,
                spearman: None,
                inference_time_ms: None,
                solve_time_ms: options
                    .record_time
                    .then(|| default.wall_time.as_secs_f64() * 1e3),
            };
            if let Some(seed) = options.random_baseline_seed {
                let mut rng = rng_from_seed(derive_seed(seed, &[stable_hash(id)]));
                let random = VariableOrder::random(n, &mut rng);
                let stats = solve(f, &base.clone().with_order(random))?;
                row.propagations_random = Some(stats.propagations);
                row.reduction_random = reduction(default.propagations, stats.propagations);
            }
            let Some(rec) = orders.get(id.as_str()) else {
                return Ok(row);
            };
            if rec.order.len() != n as usize {
                return Err(HarnessError::Config(format!(
                    "order for `{id}` has {} variables, instance has {n}",
                    rec.order.len()
                )));
            }
            let tested = solve(f, &base.clone().with_order(rec.order.clone()))?;
            row.propagations_tested = Some(tested.propagations);
            row.reduction = reduction(default.propagations, tested.propagations);
            row.inference_time_ms = rec.inference_time_ms;
            if let Some(label) = labels.as_ref().and_then(|m| m.get(id.as_str())) {
                if n >= 2 {
                    row.spearman = Some(spearman(&rec.order, &label.order)?);
                }
            }
            Ok(row)
        })
        .collect()
}

pub fn summarize(rows: &[EvalRow], group_by: GroupBy) -> Result<Vec<GroupSummary>, HarnessError> {
    Ok(aggregate(rows, |r| group_by.key(r))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub source: InstanceSource,
    pub orders: PathBuf,
    pub labels: Option<PathBuf>,
    #[serde(flatten)]
    pub options: EvaluateOptions,
    #[serde(default)]
    pub group_by: GroupBy,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub out_dir: PathBuf,
}

/// Loads everything named by `config`, evaluates, and writes `config.json`,
/// `results.csv` and `summary.csv` under `out_dir`.
pub fn run_evaluate(config: &EvaluateConfig) -> Result<(Vec<EvalRow>, Vec<GroupSummary>), HarnessError> {
    let orders = read_orders(&config.orders)?;
    let labels = config.labels.as_deref().map(super::read_labels).transpose()?;
    let rows = super::with_workers(config.workers, || {
        let instances = config.source.load()?;
        evaluate_orders(&instances, &orders, labels.as_deref(), &config.options)
    })??;
    let groups = if rows.is_empty() {
        Vec::new()
    } else {
        summarize(&rows, config.group_by)?
    };
    write_config(&config.out_dir, "evaluate", config)?;
    let path = config.out_dir.join("results.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_eval_csv(&rows, file)?;
    let path = config.out_dir.join("summary.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_summary_csv(&groups, file)?;
    Ok((rows, groups))
}
