//! Cumulative LLR statistics and their order statistics.

use crate::error::{Error, Result};

/// Cumulative LLRs of all `K` streams at time `n`, with the descending
/// order and the count of positive LLRs.
///
/// Ties are ordered by ascending stream index so that every derived
/// quantity is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrState {
    n: u64,
    lambda: Vec<f64>,
    order: Vec<usize>,
    positive_count: usize,
}

#[inline]
fn ranks_before(lambda: &[f64], x: usize, y: usize) -> bool {
    // descending value, then ascending index
    lambda[x] > lambda[y] || (lambda[x] == lambda[y] && x < y)
}

impl LlrState {
    /// State at `n = 0` with all LLRs zero.
    pub fn new(k: usize) -> Self {
        Self {
            n: 0,
            lambda: vec![0.0; k],
            order: (0..k).collect(),
            positive_count: 0,
        }
    }

    /// Builds a state directly from LLR values at time `n`.
    pub fn from_values(n: u64, lambda: Vec<f64>) -> Self {
        let k = lambda.len();
        let mut s = Self {
            n,
            lambda,
            order: (0..k).collect(),
            positive_count: 0,
        };
        s.reorder();
        s
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn value(&self, stream: usize) -> f64 {
        self.lambda[stream]
    }

    /// Stream indices sorted by descending LLR.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    /// Adds one step of increments to every stream.
    pub fn advance(&mut self, increments: &[f64]) -> Result<()> {
        if increments.len() != self.lambda.len() {
            return Err(Error::config(format!(
                "expected {} increments, got {}",
                self.lambda.len(),
                increments.len()
            )));
        }
        for (l, inc) in self.lambda.iter_mut().zip(increments) {
            *l += inc;
        }
        self.n += 1;
        self.reorder();
        Ok(())
    }

    /// Replaces all values at the next time step (used by the adaptive statistic).
    pub(crate) fn set_next(&mut self, values: impl IntoIterator<Item = f64>) {
        for (l, v) in self.lambda.iter_mut().zip(values) {
            *l = v;
        }
        self.n += 1;
        self.reorder();
    }

    fn reorder(&mut self) {
        // Insertion sort from the previous order: linear when the ranking
        // barely moves, and it yields the same permutation as a full sort
        // because the comparison is a strict total order.
        let lambda = &self.lambda;
        let order = &mut self.order;
        for i in 1..order.len() {
            let cur = order[i];
            let mut j = i;
            while j > 0 && ranks_before(lambda, cur, order[j - 1]) {
                order[j] = order[j - 1];
                j -= 1;
            }
            order[j] = cur;
        }
        self.positive_count = lambda.iter().filter(|&&l| l > 0.0).count();
    }

    /// `lambda_(rank)(n)` for a one-based rank.
    pub fn ordered_value(&self, rank: usize) -> Result<f64> {
        if rank == 0 || rank > self.lambda.len() {
            return Err(Error::config(format!(
                "rank {rank} out of bounds for K={}",
                self.lambda.len()
            )));
        }
        Ok(self.lambda[self.order[rank - 1]])
    }

    /// Unchecked one-based order statistic with `+inf` at rank 0 and `-inf`
    /// at rank `K+1`.
    #[inline]
    pub fn ranked(&self, rank: usize) -> f64 {
        if rank == 0 {
            f64::INFINITY
        } else if rank > self.lambda.len() {
            f64::NEG_INFINITY
        } else {
            self.lambda[self.order[rank - 1]]
        }
    }

    /// Stream holding the given one-based rank.
    #[inline]
    pub fn stream_at_rank(&self, rank: usize) -> usize {
        self.order[rank - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_from_scratch(lambda: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..lambda.len()).collect();
        idx.sort_by(|&x, &y| {
            lambda[y]
                .partial_cmp(&lambda[x])
                .unwrap()
                .then_with(|| x.cmp(&y))
        });
        idx
    }

    #[test]
    fn advance_example() {
        let mut s = LlrState::new(3);
        s.advance(&[1.0, -0.5, 0.2]).unwrap();
        assert_eq!(s.values(), &[1.0, -0.5, 0.2]);
        assert_eq!(s.order(), &[0, 2, 1]);
        assert_eq!(s.positive_count(), 2);
        assert_eq!(s.n(), 1);
        assert_eq!(s.ordered_value(2).unwrap(), 0.2);
        assert_eq!(s.ordered_value(3).unwrap(), -0.5);
    }

    #[test]
    fn ties_break_by_index() {
        let s = LlrState::from_values(1, vec![0.5, 0.5]);
        assert_eq!(s.order(), &[0, 1]);
        let s = LlrState::from_values(1, vec![0.3, 0.3, -0.1, 0.9]);
        assert_eq!(s.ordered_value(2).unwrap(), 0.3);
        assert_eq!(s.stream_at_rank(2), 0);
        assert_eq!(s.stream_at_rank(3), 1);
    }

    #[test]
    fn degenerate_and_bounds() {
        let s = LlrState::from_values(1, vec![2.0, 2.0, 2.0]);
        assert_eq!(s.ordered_value(1).unwrap(), 2.0);
        assert_eq!(s.positive_count(), 3);
        assert!(s.ordered_value(0).is_err());
        assert!(s.ordered_value(4).is_err());
        assert_eq!(s.ranked(0), f64::INFINITY);
        assert_eq!(s.ranked(4), f64::NEG_INFINITY);
        let s = LlrState::from_values(1, vec![1.0, -3.0, 0.0]);
        assert_eq!(s.ordered_value(3).unwrap(), -3.0);
        assert_eq!(s.positive_count(), 1);
    }

    #[test]
    fn length_mismatch_is_config_error() {
        let mut s = LlrState::new(3);
        assert!(matches!(s.advance(&[1.0]), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn incremental_order_matches_full_sort(
            steps in prop::collection::vec(prop::collection::vec(-3i32..=3, 5), 1..40)
        ) {
            // small integer increments force many exact ties
            let mut s = LlrState::new(5);
            for step in &steps {
                let inc: Vec<f64> = step.iter().map(|&v| v as f64 * 0.5).collect();
                s.advance(&inc).unwrap();
                prop_assert_eq!(s.order().to_vec(), sorted_from_scratch(s.values()));
                let pos = s.values().iter().filter(|&&v| v > 0.0).count();
                prop_assert_eq!(s.positive_count(), pos);
                for r in 1..5 {
                    prop_assert!(s.ordered_value(r).unwrap() >= s.ordered_value(r + 1).unwrap());
                }
            }
        }

        #[test]
        fn split_steps_agree_with_merged_step(
            u in prop::collection::vec(-2.0f64..2.0, 4),
            v in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let mut two = LlrState::new(4);
            two.advance(&u).unwrap();
            two.advance(&v).unwrap();
            let merged: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let one = LlrState::from_values(2, merged);
            for k in 0..4 {
                prop_assert!((two.value(k) - one.value(k)).abs() < 1e-12);
            }
            prop_assert_eq!(two.order().to_vec(), sorted_from_scratch(two.values()));
        }
    }
}
