//! Attacker moves built from a set comparator by binary search over the
//! level-sorted piece line.
//!
//! Cut `c` puts the first `c` pieces (highest levels first) in A. Moving
//! the cut from `c-1` to `c` carries piece `c` from B to A, which improves
//! the balance exactly when the pieces above it weigh less than the pieces
//! below it. That predicate flips once along the line, so the best cut is
//! found by bisection, one comparator query per probe.

use crate::game::{GameState, Partition, Units};

/// Answers "does set A have at least the potential of set B?" for two
/// count vectors of equal length. The two sets need not cover a state.
pub trait Comparator {
    fn a_is_larger(&self, a: &[u64], b: &[u64]) -> bool;
}

impl<T: Comparator + ?Sized> Comparator for &T {
    fn a_is_larger(&self, a: &[u64], b: &[u64]) -> bool {
        (**self).a_is_larger(a, b)
    }
}

/// Ground truth: exact potentials, ties count as A-larger.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactComparator;

impl Comparator for ExactComparator {
    fn a_is_larger(&self, a: &[u64], b: &[u64]) -> bool {
        let units = |s: &[u64]| -> Units {
            s.iter()
                .enumerate()
                .map(|(i, &n)| Units::from(n) << i)
                .sum()
        };
        units(a) >= units(b)
    }
}

/// A comparator that always gives the same answer.
#[derive(Debug, Clone, Copy)]
pub struct ConstantComparator(pub bool);

impl Comparator for ConstantComparator {
    fn a_is_larger(&self, _: &[u64], _: &[u64]) -> bool {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub partition: Partition,
    pub probes: u32,
}

/// Counts of the first `cut` pieces taken from the top level down.
fn top_pieces(counts: &[u64], cut: u64) -> Vec<u64> {
    let mut left = cut;
    let mut out = vec![0; counts.len()];
    for level in (0..counts.len()).rev() {
        let take = left.min(counts[level]);
        out[level] = take;
        left -= take;
    }
    out
}

fn minus(total: &[u64], part: &[u64]) -> Vec<u64> {
    total.iter().zip(part).map(|(t, p)| t - p).collect()
}

/// `⌈log₂(n+1)⌉`, the probe budget for `n` pieces.
pub fn probe_bound(pieces: u64) -> u32 {
    let candidates = pieces as u128 + 1;
    if candidates <= 1 {
        0
    } else {
        128 - (candidates - 1).leading_zeros()
    }
}

/// Binary search for the most balanced prefix cut, steered by `comparator`.
///
/// With [`ExactComparator`] the result equals
/// [`prefix_attacker_partition`](crate::strategies::prefix_attacker_partition).
/// A single piece goes to A without any query.
pub fn binary_search_partition<C: Comparator + ?Sized>(
    state: &GameState,
    comparator: &C,
) -> SearchResult {
    let counts = state.counts();
    let n = state.total_pieces();
    if n == 1 {
        return SearchResult {
            partition: Partition::new(counts.to_vec(), vec![0; counts.len()]),
            probes: 0,
        };
    }
    // Invariant: the best cut lies in [lo, hi].
    let mut lo: u64 = 0;
    let mut hi: u64 = n;
    let mut probes = 0;
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        // Pieces above piece `mid` versus pieces below it.
        let above = top_pieces(counts, mid - 1);
        let below = minus(counts, &top_pieces(counts, mid));
        probes += 1;
        if comparator.a_is_larger(&above, &below) {
            hi = mid - 1;
        } else {
            lo = mid;
        }
    }
    let a = top_pieces(counts, lo);
    let b = minus(counts, &a);
    SearchResult {
        partition: Partition::new(a, b),
        probes,
    }
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::game::GameRng;
    use crate::strategies::prefix_attacker_partition;

    fn st(c: &[u64]) -> GameState {
        GameState::new(c.to_vec()).unwrap()
    }

    struct Counting<'a, C> {
        inner: C,
        calls: &'a Cell<u32>,
    }

    impl<C: Comparator> Comparator for Counting<'_, C> {
        fn a_is_larger(&self, a: &[u64], b: &[u64]) -> bool {
            self.calls.set(self.calls.get() + 1);
            self.inner.a_is_larger(a, b)
        }
    }

    #[test]
    fn exact_comparator_examples() {
        let got = binary_search_partition(&st(&[0, 4, 0]), &ExactComparator);
        assert_eq!(got.partition, Partition::new(vec![0, 2, 0], vec![0, 2, 0]));
        let got = binary_search_partition(&st(&[1, 0, 0, 0]), &ExactComparator);
        assert_eq!(got.partition, prefix_attacker_partition(&st(&[1, 0, 0, 0])));
        assert_eq!(got.probes, 0);
    }

    #[test]
    fn constant_comparator_walks_to_the_ends() {
        let s = st(&[3, 2, 1, 0]);
        let all_b = binary_search_partition(&s, &ConstantComparator(true));
        assert_eq!(
            all_b.partition,
            Partition::new(vec![0; 4], vec![3, 2, 1, 0])
        );
        let all_a = binary_search_partition(&s, &ConstantComparator(false));
        assert_eq!(
            all_a.partition,
            Partition::new(vec![3, 2, 1, 0], vec![0; 4])
        );
    }

    #[test]
    fn probe_bound_values() {
        assert_eq!(probe_bound(0), 0);
        assert_eq!(probe_bound(1), 1);
        assert_eq!(probe_bound(2), 2);
        assert_eq!(probe_bound(3), 2);
        assert_eq!(probe_bound(4), 3);
        assert_eq!(probe_bound(7), 3);
        assert_eq!(probe_bound(8), 4);
    }

    #[test]
    fn matches_prefix_attacker_on_random_states() {
        let mut rng = GameRng::seed_from_u64(21);
        for _ in 0..3000 {
            let levels = rng.random_range(1..=10);
            let mut counts = vec![0u64; levels + 1];
            for _ in 0..rng.random_range(1..=60) {
                counts[rng.random_range(0..levels)] += 1;
            }
            let s = st(&counts);
            let calls = Cell::new(0);
            let cmp = Counting {
                inner: ExactComparator,
                calls: &calls,
            };
            let got = binary_search_partition(&s, &cmp);
            assert_eq!(got.partition, prefix_attacker_partition(&s), "{s}");
            assert_eq!(got.probes, calls.get());
            assert!(got.probes <= probe_bound(s.total_pieces()));
        }
    }
}
