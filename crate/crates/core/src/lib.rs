//! Branching-order experiments for CDCL SAT solving.
//!
//! The crate bundles a small CDCL solver that accepts a suggested initial
//! branching order, three ways of deriving reference orders from an
//! instance, a graph encoding of CNF formulas for learned rankers, ranking
//! metrics, and the experiment harness that ties them together through flat
//! JSONL/CSV files.

pub mod cnf;
pub mod graphx;
pub mod harness;
pub mod labeling;
pub mod ranking;
pub mod seed;
pub mod solver;
