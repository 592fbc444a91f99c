//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use branchorder::cnf::Formula;

/// Exhaustive truth-table satisfiability check.
pub fn brute_force_sat(formula: &Formula) -> bool {
    let n = formula.num_vars();
    assert!(n <= 20, "truth table too large");
    (0u64..1 << n).any(|bits| {
        formula.clauses().iter().all(|c| {
            c.iter()
                .any(|l| ((bits >> (l.var() - 1)) & 1 == 1) == l.is_positive())
        })
    })
}

/// Variables fixed by unit propagation from the input clauses alone, or
/// `None` if that propagation reaches a conflict. Naive fixpoint iteration.
pub fn level0_fixed(formula: &Formula) -> Option<BTreeSet<u32>> {
    let n = formula.num_vars() as usize;
    let mut value: Vec<Option<bool>> = vec![None; n];
    loop {
        let mut changed = false;
        for clause in formula.clauses() {
            let mut satisfied = false;
            let mut open = Vec::new();
            for l in clause {
                match value[l.var() as usize - 1] {
                    Some(v) if v == l.is_positive() => satisfied = true,
                    Some(_) => {}
                    None => open.push(*l),
                }
            }
            if satisfied {
                continue;
            }
            open.dedup();
            let distinct: BTreeSet<_> = open.iter().copied().collect();
            match distinct.len() {
                0 => return None,
                1 => {
                    let l = *distinct.iter().next().unwrap();
                    value[l.var() as usize - 1] = Some(l.is_positive());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    Some(
        value
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| i as u32 + 1)
            .collect(),
    )
}
