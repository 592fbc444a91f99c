//! Ranking-quality and solver-performance metrics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::VariableOrder;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("rank must be >= 1")]
    RankZero,
    #[error("orders cover different variable sets ({0} vs {1} variables)")]
    MismatchedOrders(usize, usize),
    #[error("spearman correlation needs at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error("group `{0}` has no rows")]
    EmptyGroup(String),
    #[error("no rows to aggregate")]
    NoRows,
}

/// DCG-style gain for a 1-based rank: `1 / log2(rank + 1)`.
pub fn relevance(rank: u32) -> Result<f64, RankingError> {
    if rank == 0 {
        return Err(RankingError::RankZero);
    }
    Ok(1.0 / (f64::from(rank) + 1.0).log2())
}

/// Spearman rank correlation between two permutations of the same variables.
pub fn spearman(a: &VariableOrder, b: &VariableOrder) -> Result<f64, RankingError> {
    if a.len() != b.len() {
        return Err(RankingError::MismatchedOrders(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(RankingError::TooFewVariables(n));
    }
    let d2: u128 = a
        .ranks()
        .iter()
        .zip(b.ranks())
        .map(|(&x, &y)| {
            let d = i128::from(x) - i128::from(y);
            (d * d) as u128
        })
        .sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 as f64 / (n * (n * n - 1.0)))
}

/// Relative propagation reduction of `tested` against `default`.
pub fn reduction(default: u64, tested: u64) -> Option<f64> {
    (default > 0).then(|| (default as f64 - tested as f64) / default as f64)
}

/// One evaluated instance. Timing fields are in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance_id: String,
    pub num_vars: u32,
    pub result: String,
    pub propagations_default: u64,
    pub propagations_tested: Option<u64>,
    pub reduction: Option<f64>,
    pub propagations_random: Option<u64>,
    pub reduction_random: Option<f64>,
    pub spearman: Option<f64>,
    pub inference_time_ms: Option<f64>,
    pub solve_time_ms: Option<f64>,
}

/// Mean with a normal-approximation 95% interval. `ci_low`/`ci_high` are
/// `None` when fewer than two values exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

pub const Z_95: f64 = 1.96;

pub fn mean_ci(values: &[f64]) -> Option<MeanCi> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some(MeanCi {
            n,
            mean,
            sd: None,
            ci_low: None,
            ci_high: None,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let half = Z_95 * sd / (n as f64).sqrt();
    Some(MeanCi {
        n,
        mean,
        sd: Some(sd),
        ci_low: Some(mean - half),
        ci_high: Some(mean + half),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub rows: usize,
    pub reduction: Option<MeanCi>,
    pub reduction_random: Option<MeanCi>,
    pub spearman: Option<MeanCi>,
}

impl GroupSummary {
    pub fn ci_excludes_zero(&self) -> bool {
        matches!(
            self.reduction,
            Some(MeanCi { ci_low: Some(lo), ci_high: Some(hi), .. }) if lo > 0.0 || hi < 0.0
        )
    }
}

/// Groups rows by `key` (sorted by group name) and summarises each group.
pub fn aggregate<F>(rows: &[EvalRow], key: F) -> Result<Vec<GroupSummary>, RankingError>
where
    F: Fn(&EvalRow) -> String,
{
    if rows.is_empty() {
        return Err(RankingError::NoRows);
    }
    let mut groups: BTreeMap<String, Vec<&EvalRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(key(row)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(group, rows)| {
            if rows.is_empty() {
                return Err(RankingError::EmptyGroup(group));
            }
            let collect = |f: fn(&EvalRow) -> Option<f64>| -> Vec<f64> {
                rows.iter().filter_map(|r| f(r)).collect()
            };
            Ok(GroupSummary {
                rows: rows.len(),
                reduction: mean_ci(&collect(|r| r.reduction)),
                reduction_random: mean_ci(&collect(|r| r.reduction_random)),
                spearman: mean_ci(&collect(|r| r.spearman)),
                group,
            })
        })
        .collect()
}

pub fn write_eval_csv<W: Write>(rows: &[EvalRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<EvalRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Serialize)]
struct SummaryCsvRow<'a> {
    group: &'a str,
    rows: usize,
    reduction_n: usize,
    reduction_mean: Option<f64>,
    reduction_ci_low: Option<f64>,
    reduction_ci_high: Option<f64>,
    reduction_random_mean: Option<f64>,
    spearman_n: usize,
    spearman_mean: Option<f64>,
    spearman_ci_low: Option<f64>,
    spearman_ci_high: Option<f64>,
}

pub fn write_summary_csv<W: Write>(groups: &[GroupSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for g in groups {
        w.serialize(SummaryCsvRow {
            group: &g.group,
            rows: g.rows,
            reduction_n: g.reduction.map_or(0, |m| m.n),
            reduction_mean: g.reduction.map(|m| m.mean),
            reduction_ci_low: g.reduction.and_then(|m| m.ci_low),
            reduction_ci_high: g.reduction.and_then(|m| m.ci_high),
            reduction_random_mean: g.reduction_random.map(|m| m.mean),
            spearman_n: g.spearman.map_or(0, |m| m.n),
            spearman_mean: g.spearman.map(|m| m.mean),
            spearman_ci_low: g.spearman.and_then(|m| m.ci_low),
            spearman_ci_high: g.spearman.and_then(|m| m.ci_high),
        })?;
    }
    w.flush()?;
    Ok(())
}
