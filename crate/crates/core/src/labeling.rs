//! Reference branching orders for an instance.
//!
//! Three labelers turn a formula into a [`LabelRecord`]:
//!
//! * conflict: one default-order solve, variables ranked by how many conflicts
//!   they took part in (most first);
//! * first variable: every variable is forced first `k` times with a random
//!   tail, ranked by mean propagations (fewest first);
//! * genetic: hill climbing over whole permutations, mutating the incumbent
//!   with a shrinking swap radius.
//!
//! Every solve goes through a [`SolveRunner`], which counts calls. Trials run
//! on the current rayon pool with seeds derived from the task coordinates, so
//! the pool size never changes a label.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Formula;
use crate::seed::{derive_seed, rng_from_seed};
use crate::solver::{solve, SolveResult, SolveStats, SolverConfig, SolverError, VariableOrder};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid labeling parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMethod {
    Conflict,
    FirstVariable,
    Genetic,
}

impl LabelMethod {
    /// Whether the order puts the highest score first.
    pub fn descending(self) -> bool {
        match self {
            LabelMethod::Conflict => true,
            LabelMethod::FirstVariable => false,
            // Genetic scores are negated ranks.
            LabelMethod::Genetic => true,
        }
    }
}

impl std::str::FromStr for LabelMethod {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conflict" => Ok(LabelMethod::Conflict),
            "first" | "first_variable" | "first-variable" => Ok(LabelMethod::FirstVariable),
            "genetic" => Ok(LabelMethod::Genetic),
            other => Err(LabelError::InvalidParams(format!(
                "unknown labeling method `{other}`"
            ))),
        }
    }
}

/// One line of a labels file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub instance_id: String,
    pub method: LabelMethod,
    pub seed: u64,
    /// Per-variable score in variable index order.
    pub scores: Vec<f64>,
    pub order: VariableOrder,
    pub trials_used: u64,
    pub total_propagations_spent: u64,
    /// Some solve hit the budget; the label is built from censored data.
    #[serde(default)]
    pub partial: bool,
    #[serde(default)]
    pub censored_trials: u64,
    /// Genetic only: incumbent propagations after sampling and after each generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<u64>>,
}

impl LabelRecord {
    /// Rebuilds the order from the stored scores.
    pub fn order_from_scores(&self) -> VariableOrder {
        VariableOrder::from_scores(&self.scores, self.method.descending())
    }
}

/// Runs solves under a fixed configuration and counts them.
#[derive(Debug)]
pub struct SolveRunner {
    config: SolverConfig,
    calls: AtomicU64,
}

impl SolveRunner {
    pub fn new(config: SolverConfig) -> SolveRunner {
        SolveRunner {
            config,
            calls: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn run(
        &self,
        formula: &Formula,
        order: Option<&VariableOrder>,
    ) -> Result<SolveStats, SolverError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match order {
            Some(order) => solve(formula, &self.config.clone().with_order(order.clone())),
            None => solve(formula, &self.config),
        }
    }

    /// Cost of a solve for labeling purposes: its propagations, or the
    /// budget when it was cut off.
    pub fn score(&self, stats: &SolveStats) -> (u64, bool) {
        if stats.result == SolveResult::BudgetExceeded {
            let cap = self.config.propagation_limit.unwrap_or(stats.propagations);
            (cap, true)
        } else {
            (stats.propagations, false)
        }
    }
}

pub fn conflict_label(
    instance_id: &str,
    formula: &Formula,
    runner: &SolveRunner,
    seed: u64,
) -> Result<LabelRecord, LabelError> {
    let stats = runner.run(formula, None)?;
    let n = formula.num_vars() as usize;
    let mut scores = vec![0.0; n];
    for (&v, &c) in &stats.per_var_conflicts {
        scores[v as usize - 1] = c as f64;
    }
    let partial = stats.result == SolveResult::BudgetExceeded;
    Ok(LabelRecord {
        instance_id: instance_id.to_string(),
        method: LabelMethod::Conflict,
        seed,
        order: VariableOrder::from_scores(&scores, true),
        scores,
        trials_used: 1,
        total_propagations_spent: stats.propagations,
        partial,
        censored_trials: u64::from(partial),
        trace: None,
    })
}

struct Trial {
    score: u64,
    spent: u64,
    censored: bool,
}

pub fn first_variable_label(
    instance_id: &str,
    formula: &Formula,
    trials_per_var: u32,
    runner: &SolveRunner,
    seed: u64,
) -> Result<LabelRecord, LabelError> {
    if trials_per_var == 0 {
        return Err(LabelError::InvalidParams("k must be >= 1".into()));
    }
    let n = formula.num_vars();
    let k = trials_per_var;
    let trials: Vec<Trial> = (0..u64::from(n) * u64::from(k))
        .into_par_iter()
        .map(|task| {
            let var = (task / u64::from(k)) as u32 + 1;
            let trial = task % u64::from(k);
            let mut rng = rng_from_seed(derive_seed(seed, &[u64::from(var), trial]));
            let order = VariableOrder::random_with_first(n, var, &mut rng);
            let stats = runner.run(formula, Some(&order))?;
            let (score, censored) = runner.score(&stats);
            Ok(Trial {
                score,
                spent: stats.propagations,
                censored,
            })
        })
        .collect::<Result<_, SolverError>>()?;

    let scores: Vec<f64> = trials
        .chunks(k as usize)
        .map(|chunk| {
            let mut sum = 0.0;
            for t in chunk {
                sum += t.score as f64;
            }
            sum / f64::from(k)
        })
        .collect();
    let censored = trials.iter().filter(|t| t.censored).count() as u64;
    Ok(LabelRecord {
        instance_id: instance_id.to_string(),
        method: LabelMethod::FirstVariable,
        seed,
        order: VariableOrder::from_scores(&scores, false),
        scores,
        trials_used: trials.len() as u64,
        total_propagations_spent: trials.iter().map(|t| t.spent).sum(),
        partial: censored > 0,
        censored_trials: censored,
        trace: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneticConfig {
    /// Candidates per generation (and initial random samples).
    pub population: u32,
    pub generations: u32,
    pub seed: u64,
}

/// Maximum swap distance for each generation: `n/2`, halved every
/// generation, never below 1.
pub fn swap_schedule(num_vars: usize, generations: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(generations);
    let mut l = (num_vars / 2).max(1);
    for _ in 0..generations {
        out.push(l);
        l = (l / 2).max(1);
    }
    out
}

/// Swaps two positions at most `max_len` apart, chosen uniformly.
/// Returns the swapped positions. Needs at least two positions and `max_len >= 1`.
pub fn random_swap(
    order: &mut VariableOrder,
    max_len: usize,
    rng: &mut crate::seed::Rng,
) -> (usize, usize) {
    let n = order.len();
    debug_assert!(n >= 2 && max_len >= 1);
    let i = rng.gen_range(0..n);
    let lo = i.saturating_sub(max_len);
    let hi = (i + max_len).min(n - 1);
    // Uniform over [lo, hi] without i.
    let mut j = rng.gen_range(lo..hi);
    if j >= i {
        j += 1;
    }
    order.swap_positions(i, j);
    (i, j)
}

/// Applies `order.len()` random swaps of length at most `max_len`. Each swap
/// reads positions from the partially mutated order.
pub fn mutate(order: &VariableOrder, max_len: usize, rng: &mut crate::seed::Rng) -> VariableOrder {
    let mut out = order.clone();
    if out.len() < 2 || max_len == 0 {
        return out;
    }
    for _ in 0..out.len() {
        random_swap(&mut out, max_len, rng);
    }
    out
}

fn evaluate_batch(
    formula: &Formula,
    candidates: &[VariableOrder],
    runner: &SolveRunner,
) -> Result<Vec<(u64, u64, bool)>, SolverError> {
    candidates
        .par_iter()
        .map(|order| {
            let stats = runner.run(formula, Some(order))?;
            let (score, censored) = runner.score(&stats);
            Ok((score, stats.propagations, censored))
        })
        .collect()
}

fn argmin(scores: &[(u64, u64, bool)]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.0 < scores[best].0 {
            best = i;
        }
    }
    best
}

pub fn genetic_label(
    instance_id: &str,
    formula: &Formula,
    config: &GeneticConfig,
    runner: &SolveRunner,
) -> Result<LabelRecord, LabelError> {
    if config.population == 0 {
        return Err(LabelError::InvalidParams("population must be >= 1".into()));
    }
    let n = formula.num_vars();
    let k = config.population as u64;
    let mut spent = 0u64;
    let mut censored = 0u64;
    let mut trials = 0u64;

    let initial: Vec<VariableOrder> = (0..k)
        .map(|j| VariableOrder::random(n, &mut rng_from_seed(derive_seed(config.seed, &[0, j]))))
        .collect();
    let scores = evaluate_batch(formula, &initial, runner)?;
    trials += k;
    spent += scores.iter().map(|s| s.1).sum::<u64>();
    censored += scores.iter().filter(|s| s.2).count() as u64;
    let b = argmin(&scores);
    let mut best = initial[b].clone();
    let mut best_score = scores[b].0;
    let mut trace = vec![best_score];

    for (g, max_len) in swap_schedule(n as usize, config.generations as usize)
        .into_iter()
        .enumerate()
    {
        let candidates: Vec<VariableOrder> = (0..k)
            .map(|j| {
                let mut rng = rng_from_seed(derive_seed(config.seed, &[g as u64 + 1, j]));
                mutate(&best, max_len, &mut rng)
            })
            .collect();
        let scores = evaluate_batch(formula, &candidates, runner)?;
        trials += k;
        spent += scores.iter().map(|s| s.1).sum::<u64>();
        censored += scores.iter().filter(|s| s.2).count() as u64;
        let c = argmin(&scores);
        if scores[c].0 < best_score {
            best_score = scores[c].0;
            best = candidates[c].clone();
        }
        trace.push(best_score);
    }

    let scores: Vec<f64> = (1..=n).map(|v| -f64::from(best.rank(v))).collect();
    Ok(LabelRecord {
        instance_id: instance_id.to_string(),
        method: LabelMethod::Genetic,
        seed: config.seed,
        scores,
        order: best,
        trials_used: trials,
        total_propagations_spent: spent,
        partial: censored > 0,
        censored_trials: censored,
        trace: Some(trace),
    })
}

/// Method plus its parameters, as persisted in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub method: LabelMethod,
    /// Trials per variable (first variable) or population (genetic).
    pub k: u32,
    /// Generations (genetic only).
    pub m: u32,
    pub seed: u64,
}

impl LabelingConfig {
    /// Expected number of solves for an instance with `num_vars` variables.
    pub fn expected_solves(&self, num_vars: u32) -> u64 {
        match self.method {
            LabelMethod::Conflict => 1,
            LabelMethod::FirstVariable => u64::from(self.k) * u64::from(num_vars),
            LabelMethod::Genetic => u64::from(self.k) * (u64::from(self.m) + 1),
        }
    }
}

/// Labels one instance. The per-instance seed mixes the master seed with `instance_seed`.
pub fn label_instance(
    instance_id: &str,
    formula: &Formula,
    config: &LabelingConfig,
    runner: &SolveRunner,
    instance_seed: u64,
) -> Result<LabelRecord, LabelError> {
    let seed = derive_seed(config.seed, &[instance_seed]);
    match config.method {
        LabelMethod::Conflict => conflict_label(instance_id, formula, runner, seed),
        LabelMethod::FirstVariable => {
            first_variable_label(instance_id, formula, config.k, runner, seed)
        }
        LabelMethod::Genetic => genetic_label(
            instance_id,
            formula,
            &GeneticConfig {
                population: config.k,
                generations: config.m,
                seed,
            },
            runner,
        ),
    }
}
