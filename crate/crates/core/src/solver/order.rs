use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::seed::Rng;

/// A branching order: a permutation of the variables `1..=n`.
/// Rank 1 is branched on first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct VariableOrder {
    permutation: Vec<u32>,
    /// `ranks[v - 1]` is the 1-based rank of variable `v`.
    ranks: Vec<u32>,
}

impl VariableOrder {
    pub fn new(permutation: Vec<u32>) -> Result<VariableOrder, SolverError> {
        let n = permutation.len();
        let mut ranks = vec![0u32; n];
        for (i, &v) in permutation.iter().enumerate() {
            if v == 0 || v as usize > n {
                return Err(SolverError::InvalidOrder(format!(
                    "variable {v} outside 1..={n}"
                )));
            }
            let slot = &mut ranks[v as usize - 1];
            if *slot != 0 {
                return Err(SolverError::InvalidOrder(format!(
                    "variable {v} appears twice"
                )));
            }
            *slot = i as u32 + 1;
        }
        Ok(VariableOrder { permutation, ranks })
    }

    /// Ascending variable index: the default branching order.
    pub fn identity(num_vars: u32) -> VariableOrder {
        VariableOrder::new((1..=num_vars).collect()).expect("identity is a permutation")
    }

    pub fn random(num_vars: u32, rng: &mut Rng) -> VariableOrder {
        let mut perm: Vec<u32> = (1..=num_vars).collect();
        perm.shuffle(rng);
        VariableOrder::new(perm).expect("shuffle is a permutation")
    }

    /// `first` followed by a uniform random permutation of the other variables.
    pub fn random_with_first(num_vars: u32, first: u32, rng: &mut Rng) -> VariableOrder {
        let mut perm: Vec<u32> = Vec::with_capacity(num_vars as usize);
        perm.push(first);
        let mut rest: Vec<u32> = (1..=num_vars).filter(|&v| v != first).collect();
        rest.shuffle(rng);
        perm.extend(rest);
        VariableOrder::new(perm).expect("first plus shuffled rest is a permutation")
    }

    /// Sorts variables by score. `descending` puts the highest score first.
    /// Ties (and NaNs, which compare equal) go by ascending variable index.
    pub fn from_scores(scores: &[f64], descending: bool) -> VariableOrder {
        let mut perm: Vec<u32> = (1..=scores.len() as u32).collect();
        perm.sort_by(|&a, &b| {
            let (sa, sb) = (scores[a as usize - 1], scores[b as usize - 1]);
            let ord = if descending {
                sb.partial_cmp(&sa)
            } else {
                sa.partial_cmp(&sb)
            };
            ord.unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        VariableOrder::new(perm).expect("sorted indices are a permutation")
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.permutation
    }

    /// 1-based rank of `var`. Panics if `var` is outside the order.
    pub fn rank(&self, var: u32) -> u32 {
        self.ranks[var as usize - 1]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn first(&self) -> Option<u32> {
        self.permutation.first().copied()
    }

    /// Swaps the variables at two positions.
    pub fn swap_positions(&mut self, i: usize, j: usize) {
        self.permutation.swap(i, j);
        self.ranks[self.permutation[i] as usize - 1] = i as u32 + 1;
        self.ranks[self.permutation[j] as usize - 1] = j as u32 + 1;
    }
}

impl TryFrom<Vec<u32>> for VariableOrder {
    type Error = SolverError;

    fn try_from(value: Vec<u32>) -> Result<Self, Self::Error> {
        VariableOrder::new(value)
    }
}

impl From<VariableOrder> for Vec<u32> {
    fn from(order: VariableOrder) -> Vec<u32> {
        order.permutation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_permutations() {
        assert!(VariableOrder::new(vec![1, 1]).is_err());
        assert!(VariableOrder::new(vec![0, 1]).is_err());
        assert!(VariableOrder::new(vec![1, 3]).is_err());
        assert!(VariableOrder::new(vec![]).is_ok());
    }

    #[test]
    fn ranks_follow_positions() {
        let o = VariableOrder::new(vec![2, 1, 3]).unwrap();
        assert_eq!(o.rank(2), 1);
        assert_eq!(o.rank(1), 2);
        assert_eq!(o.rank(3), 3);
    }

    #[test]
    fn scores_sort_with_index_tie_break() {
        let o = VariableOrder::from_scores(&[0.4, 0.7, 0.1], true);
        assert_eq!(o.as_slice(), &[2, 1, 3]);
        let o = VariableOrder::from_scores(&[1.0, 1.0, 1.0], true);
        assert_eq!(o.as_slice(), &[1, 2, 3]);
        let o = VariableOrder::from_scores(&[3.0, 1.0, 3.0, 0.0], false);
        assert_eq!(o.as_slice(), &[4, 2, 1, 3]);
    }

    #[test]
    fn serde_validates() {
        let o: VariableOrder = serde_json::from_str("[3,1,2]").unwrap();
        assert_eq!(o.rank(3), 1);
        assert!(serde_json::from_str::<VariableOrder>("[3,3,2]").is_err());
        assert_eq!(serde_json::to_string(&o).unwrap(), "[3,1,2]");
    }

    proptest! {
        #[test]
        fn rank_inverts_permutation(n in 0u32..50, seed: u64, swaps in prop::collection::vec((0usize..50, 0usize..50), 0..10)) {
            let mut o = VariableOrder::random(n, &mut rng_from_seed(seed));
            for (i, j) in swaps {
                if n > 0 {
                    o.swap_positions(i % n as usize, j % n as usize);
                }
            }
            for (i, &v) in o.as_slice().iter().enumerate() {
                prop_assert_eq!(o.rank(v) as usize, i + 1);
            }
        }

        #[test]
        fn random_with_first_starts_with_first(n in 1u32..50, seed: u64, pick in 0u32..50) {
            let first = pick % n + 1;
            let o = VariableOrder::random_with_first(n, first, &mut rng_from_seed(seed));
            prop_assert_eq!(o.first(), Some(first));
            prop_assert_eq!(o.len(), n as usize);
        }
    }
}
