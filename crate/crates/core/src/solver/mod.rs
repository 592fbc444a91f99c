//! CDCL solver with injectable initial branching order.
//!
//! The engine is a conventional MiniSat-style design: two watched literals,
//! first-UIP learning with non-chronological backjumping, Luby restarts,
//! phase saving, and either VSIDS or VMTF for decisions. On top of that it
//! accepts a suggested [`VariableOrder`] which seeds the decision heuristic,
//! and can optionally re-inject that order into VSIDS at every restart.

mod cdcl;
mod heap;
mod luby;
mod order;
mod vmtf;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Formula;

pub use cdcl::Solver;
pub use luby::luby;
pub use order::VariableOrder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid variable order: {0}")]
    InvalidOrder(String),
    #[error("order covers {got} variables but the formula has {expected}")]
    OrderSizeMismatch { expected: usize, got: usize },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("model assigns {got} variables but the formula has {expected}")]
    IncompleteModel { expected: usize, got: usize },
    #[error("the order must be injected before search starts")]
    SearchStarted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    #[default]
    Vsids,
    Vmtf,
}

impl std::str::FromStr for Heuristic {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vsids" => Ok(Heuristic::Vsids),
            "vmtf" => Ok(Heuristic::Vmtf),
            other => Err(SolverError::InvalidConfig(format!(
                "unknown heuristic `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseDefault {
    False,
    True,
    /// Phase saving, starting from false.
    Saved,
}

/// How the suggested order is re-applied to VSIDS activities at restarts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemindMode {
    /// `a(i) += factor * max(a) * decay^(rank(i) - 1)`: the best rank gets the largest boost.
    Additive,
    /// `a(i) = factor * max(a) * decay^(-rank(i))`, applied verbatim.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub heuristic: Heuristic,
    pub var_decay: f64,
    /// Conflicts in the first Luby interval.
    pub restart_base: u64,
    #[serde(skip)]
    pub injected_order: Option<VariableOrder>,
    pub remind_factor: f64,
    pub remind_decay: f64,
    pub remind_mode: RemindMode,
    pub seed: u64,
    /// Probability of a uniformly random decision instead of the heuristic's pick.
    pub random_decision_freq: f64,
    pub phase_default: PhaseDefault,
    pub conflict_limit: Option<u64>,
    pub propagation_limit: Option<u64>,
    /// Upper bound on kept learned clauses; `None` keeps them all.
    pub max_learnts: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            heuristic: Heuristic::Vsids,
            var_decay: 0.95,
            restart_base: 100,
            injected_order: None,
            remind_factor: 0.0,
            remind_decay: 0.95,
            remind_mode: RemindMode::Additive,
            seed: 0,
            random_decision_freq: 0.0,
            phase_default: PhaseDefault::Saved,
            conflict_limit: None,
            propagation_limit: None,
            max_learnts: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.var_decay > 0.0 && self.var_decay < 1.0) {
            return bad(format!("var_decay must be in (0,1), got {}", self.var_decay));
        }
        if !(self.remind_decay > 0.0 && self.remind_decay < 1.0) {
            return bad(format!(
                "remind_decay must be in (0,1), got {}",
                self.remind_decay
            ));
        }
        if !(self.remind_factor >= 0.0) || !self.remind_factor.is_finite() {
            return bad(format!(
                "remind_factor must be >= 0, got {}",
                self.remind_factor
            ));
        }
        if !(0.0..=1.0).contains(&self.random_decision_freq) {
            return bad(format!(
                "random_decision_freq must be in [0,1], got {}",
                self.random_decision_freq
            ));
        }
        if self.remind_factor > 0.0 {
            if self.heuristic != Heuristic::Vsids {
                return bad("reminding acts on VSIDS activities; use the vsids heuristic".into());
            }
            if self.injected_order.is_none() {
                return bad("reminding needs an injected order".into());
            }
        }
        Ok(())
    }

    pub fn with_order(mut self, order: VariableOrder) -> SolverConfig {
        self.injected_order = Some(order);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveResult {
    Sat,
    Unsat,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub result: SolveResult,
    /// `model[v - 1]` is the value of variable `v`; present iff SAT.
    pub model: Option<Vec<bool>>,
    /// Assignments implied by unit propagation, decisions excluded.
    pub propagations: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub restarts: u64,
    /// Per variable, the number of conflicts whose analysis touched it.
    pub per_var_conflicts: BTreeMap<u32, u64>,
    /// Conflicts spent between consecutive restarts.
    pub conflicts_per_restart: Vec<u64>,
    pub first_decision: Option<u32>,
    pub wall_time: Duration,
}

impl SolveStats {
    pub fn is_sat(&self) -> bool {
        self.result == SolveResult::Sat
    }
}

/// Solves `formula` under `config`. Without an injected order the identity
/// order is injected, so the default run and an explicit identity order are
/// the same run.
pub fn solve(formula: &Formula, config: &SolverConfig) -> Result<SolveStats, SolverError> {
    let mut solver = Solver::new(formula, config)?;
    match &config.injected_order {
        Some(order) => solver.inject_order(order)?,
        None => solver.inject_order(&VariableOrder::identity(formula.num_vars()))?,
    }
    Ok(solver.solve())
}

/// True iff every clause has a satisfied literal under `model`.
pub fn verify_model(formula: &Formula, model: &[bool]) -> Result<bool, SolverError> {
    if model.len() != formula.num_vars() as usize {
        return Err(SolverError::IncompleteModel {
            expected: formula.num_vars() as usize,
            got: model.len(),
        });
    }
    Ok(formula.clauses().iter().all(|clause| {
        clause
            .iter()
            .any(|lit| model[lit.var() as usize - 1] == lit.is_positive())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_model_examples() {
        let f = Formula::from_dimacs_clauses(3, &[&[1, -2], &[2, 3]]);
        assert!(verify_model(&f, &[true, true, false]).unwrap());
        assert!(!verify_model(&f, &[false, true, false]).unwrap());
        let unit = Formula::from_dimacs_clauses(1, &[&[1]]);
        assert!(!verify_model(&unit, &[false]).unwrap());
        assert!(verify_model(&Formula::default(), &[]).unwrap());
        assert!(matches!(
            verify_model(&f, &[true]),
            Err(SolverError::IncompleteModel { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig {
            var_decay: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.var_decay = 0.95;
        c.remind_factor = -1.0;
        assert!(c.validate().is_err());
        c.remind_factor = 1.0;
        assert!(c.validate().is_err(), "reminding without an order");
        c.injected_order = Some(VariableOrder::identity(3));
        assert!(c.validate().is_ok());
        c.heuristic = Heuristic::Vmtf;
        assert!(c.validate().is_err());
    }

    #[test]
    fn heuristic_parses() {
        assert_eq!("VSIDS".parse::<Heuristic>().unwrap(), Heuristic::Vsids);
        assert_eq!("vmtf".parse::<Heuristic>().unwrap(), Heuristic::Vmtf);
        assert!("chb".parse::<Heuristic>().is_err());
    }
}
