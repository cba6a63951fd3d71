//! Scripted players: the potential-greedy optimal defender, the balanced
//! prefix attacker, and the deliberately sub-optimal opponents used for
//! exploration and stress tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::game::DestroyChoice;
use crate::game::{AttackerPolicy, DefenderPolicy, GameRng, GameState, Partition, Units};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("unknown {role} strategy '{name}'")]
    UnknownName { role: &'static str, name: String },
    #[error("mixing probability {0} outside [0, 1]")]
    BadProbability(String),
    #[error("fraction {0} outside (0, 1/2)")]
    BadFraction(String),
    #[error("fraction menu is empty")]
    EmptyMenu,
}

/// Destroys the set with higher potential; on an exact tie destroys A.
pub fn optimal_defender_choice(partition: &Partition) -> DestroyChoice {
    let (a, b) = partition
        .potentials()
        .expect("partition sides are bounded by a valid state");
    if b.units > a.units {
        DestroyChoice::B
    } else {
        DestroyChoice::A
    }
}

pub fn random_defender_choice(rng: &mut GameRng) -> DestroyChoice {
    if rng.random::<bool>() {
        DestroyChoice::A
    } else {
        DestroyChoice::B
    }
}

/// Units of the pieces strictly above and strictly below `level`.
fn units_around(counts: &[u64], level: usize) -> (Units, Units) {
    let mut above: Units = 0;
    let mut below: Units = 0;
    for (i, &n) in counts.iter().enumerate() {
        let u = Units::from(n) << i;
        if i > level {
            above += u;
        } else if i < level {
            below += u;
        }
    }
    (above, below)
}

/// Partition with everything above `level` in A, everything below in B and
/// `k` of the `level` pieces in A.
pub(crate) fn split_at_level(counts: &[u64], level: usize, k: u64) -> Partition {
    let mut a = vec![0; counts.len()];
    let mut b = vec![0; counts.len()];
    for (i, &n) in counts.iter().enumerate() {
        if i > level {
            a[i] = n;
        } else if i < level {
            b[i] = n;
        } else {
            a[i] = k;
            b[i] = n - k;
        }
    }
    Partition::new(a, b)
}

/// How many of the `level` pieces go to A so that the two sides are as
/// close as possible, returned with the smaller side's units. Ties put the
/// extra piece in B.
pub(crate) fn balanced_count_at_level(counts: &[u64], level: usize) -> (u64, Units) {
    let (above, below) = units_around(counts, level);
    let n = counts[level];
    let w: Units = 1 << level;
    let n_units = Units::from(n) * w;
    // Smallest k with above + k*w >= below + (n-k)*w.
    let k0 = if above >= below + n_units {
        0
    } else {
        let deficit = below + n_units - above;
        let twice_w = 2 * w;
        let k = deficit.div_ceil(twice_w);
        (k as u64).min(n)
    };
    let min_side = |k: u64| -> Units {
        let a = above + Units::from(k) * w;
        let b = below + Units::from(n - k) * w;
        a.min(b)
    };
    if k0 > 0 && min_side(k0 - 1) >= min_side(k0) {
        (k0 - 1, min_side(k0 - 1))
    } else {
        (k0, min_side(k0))
    }
}

/// Pieces above `level` to A, below to B, `level` divided as evenly as the
/// potentials allow.
pub fn balanced_split_at_level(state: &GameState, level: usize) -> Partition {
    let (k, _) = balanced_count_at_level(state.counts(), level);
    split_at_level(state.counts(), level, k)
}

/// The most balanced prefix/suffix partition: pieces sorted by level, A
/// takes a prefix from the top, and the split maximizes `min(φ(A), φ(B))`.
/// Among equally balanced splits the one with the smaller A wins, except
/// for a single piece, which goes entirely to A.
///
/// When `φ(state) >= 1` both sides end up with potential at least 1/2.
pub fn prefix_attacker_partition(state: &GameState) -> Partition {
    let counts = state.counts();
    if state.total_pieces() == 1 {
        return Partition::new(counts.to_vec(), vec![0; counts.len()]);
    }
    let mut best: Option<(Units, Units, Partition)> = None;
    for level in 0..counts.len() {
        let (k, min_side) = balanced_count_at_level(counts, level);
        let p = split_at_level(counts, level, k);
        let a_units = p.potential_of(DestroyChoice::A).expect("bounded").units;
        let better = match &best {
            None => true,
            Some((m, a, _)) => min_side > *m || (min_side == *m && a_units < *a),
        };
        if better {
            best = Some((min_side, a_units, p));
        }
    }
    best.expect("at least one level").2
}

/// Exact fraction in `(0, 1/2)`, the target share of the smaller set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub fn new(num: u32, den: u32) -> Result<Self, StrategyError> {
        // 0 < num/den < 1/2
        if num == 0 || den == 0 || 2 * u64::from(num) >= u64::from(den) {
            return Err(StrategyError::BadFraction(format!("{num}/{den}")));
        }
        Ok(Fraction { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub fn default_fraction_menu() -> Vec<Fraction> {
    (1..=4).map(|n| Fraction { num: n, den: 10 }).collect()
}

/// Prefix partition whose low-level suffix B has potential closest to
/// `fraction * φ(state)`. Ties go to the smaller B.
#[allow(clippy::unnecessary_cast)] // a no-op only under `wide`
pub fn disjoint_support_split(state: &GameState, fraction: Fraction) -> Partition {
    let counts = state.counts();
    let total = state.potential().units as u128;
    let num = u128::from(fraction.num);
    let den = u128::from(fraction.den);
    let target = num * total;
    let distance = |b_units: u128| -> u128 { (den * b_units).abs_diff(target) };
    let mut best: Option<(u128, u128, Partition)> = None;
    for level in 0..counts.len() {
        let (_, below) = units_around(counts, level);
        let below = below as u128;
        let n = counts[level];
        let w: u128 = 1 << level;
        // B = below + j*w; the ideal j is (target/den - below) / w.
        let ideal = if target >= den * below {
            (target - den * below) / (den * w)
        } else {
            0
        };
        for j in [ideal, ideal + 1] {
            let j = (j as u64).min(n);
            let b_units = below + u128::from(j) * w;
            let d = distance(b_units);
            let better = match &best {
                None => true,
                Some((bd, bu, _)) => d < *bd || (d == *bd && b_units < *bu),
            };
            if better {
                best = Some((d, b_units, split_at_level(counts, level, n - j)));
            }
        }
    }
    best.expect("at least one level").2
}

/// Draws a fraction from `menu` and plays [`disjoint_support_split`].
pub fn disjoint_support_partition(
    state: &GameState,
    menu: &[Fraction],
    rng: &mut GameRng,
) -> Partition {
    let fraction = menu[rng.random_range(0..menu.len())];
    disjoint_support_split(state, fraction)
}

/// Per move: the prefix attacker with probability `p_optimal`, otherwise
/// the disjoint-support attacker.
pub fn mixed_attacker_partition(
    state: &GameState,
    menu: &[Fraction],
    p_optimal: f64,
    rng: &mut GameRng,
) -> Partition {
    if rng.random::<f64>() < p_optimal {
        prefix_attacker_partition(state)
    } else {
        disjoint_support_partition(state, menu, rng)
    }
}

/// Each piece independently joins A or B with probability 1/2.
pub fn random_partition(state: &GameState, rng: &mut GameRng) -> Partition {
    let mut a = vec![0; state.counts().len()];
    let mut b = vec![0; state.counts().len()];
    for (i, &n) in state.counts().iter().enumerate() {
        let k = if n == 0 {
            0
        } else {
            Binomial::new(n, 0.5).expect("valid binomial").sample(rng)
        };
        a[i] = k;
        b[i] = n - k;
    }
    Partition::new(a, b)
}

pub const DEFAULT_P_OPTIMAL: f64 = 0.8;

/// Scripted attacker selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackerKind {
    Prefix,
    DisjointSupport {
        fraction_menu: Vec<Fraction>,
    },
    Mixed {
        p_optimal: f64,
        fraction_menu: Vec<Fraction>,
    },
    Random,
}

impl AttackerKind {
    pub fn mixed(p_optimal: f64) -> Result<Self, StrategyError> {
        if !(0.0..=1.0).contains(&p_optimal) {
            return Err(StrategyError::BadProbability(p_optimal.to_string()));
        }
        Ok(AttackerKind::Mixed {
            p_optimal,
            fraction_menu: default_fraction_menu(),
        })
    }

    pub fn disjoint() -> Self {
        AttackerKind::DisjointSupport {
            fraction_menu: default_fraction_menu(),
        }
    }
}

impl AttackerPolicy for AttackerKind {
    fn partition(&self, state: &GameState, rng: &mut GameRng) -> Partition {
        match self {
            AttackerKind::Prefix => prefix_attacker_partition(state),
            AttackerKind::DisjointSupport { fraction_menu } => {
                disjoint_support_partition(state, fraction_menu, rng)
            }
            AttackerKind::Mixed {
                p_optimal,
                fraction_menu,
            } => mixed_attacker_partition(state, fraction_menu, *p_optimal, rng),
            AttackerKind::Random => random_partition(state, rng),
        }
    }
}

impl fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackerKind::Prefix => write!(f, "prefix"),
            AttackerKind::DisjointSupport { .. } => write!(f, "disjoint"),
            AttackerKind::Mixed { p_optimal, .. } => write!(f, "mixed:{p_optimal}"),
            AttackerKind::Random => write!(f, "random"),
        }
    }
}

impl FromStr for AttackerKind {
    type Err = StrategyError;

    /// `prefix`, `disjoint`, `random`, `mixed` or `mixed:<p>`.
    fn from_str(s: &str) -> Result<Self, StrategyError> {
        match s {
            "prefix" | "optimal" => Ok(AttackerKind::Prefix),
            "disjoint" => Ok(AttackerKind::disjoint()),
            "random" => Ok(AttackerKind::Random),
            "mixed" => AttackerKind::mixed(DEFAULT_P_OPTIMAL),
            _ => match s.strip_prefix("mixed:") {
                Some(p) => {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| StrategyError::BadProbability(p.to_string()))?;
                    AttackerKind::mixed(p)
                }
                None => Err(StrategyError::UnknownName {
                    role: "attacker",
                    name: s.to_string(),
                }),
            },
        }
    }
}

/// Scripted defender selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenderKind {
    Optimal,
    Random,
    /// Always destroys A; a fixed baseline for probes such as the null-set check.
    AlwaysA,
}

impl DefenderPolicy for DefenderKind {
    fn choose(&self, partition: &Partition, rng: &mut GameRng) -> DestroyChoice {
        match self {
            DefenderKind::Optimal => optimal_defender_choice(partition),
            DefenderKind::Random => random_defender_choice(rng),
            DefenderKind::AlwaysA => DestroyChoice::A,
        }
    }
}

impl fmt::Display for DefenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefenderKind::Optimal => "optimal",
            DefenderKind::Random => "random",
            DefenderKind::AlwaysA => "always_a",
        })
    }
}

impl FromStr for DefenderKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, StrategyError> {
        match s {
            "optimal" => Ok(DefenderKind::Optimal),
            "random" => Ok(DefenderKind::Random),
            "always_a" => Ok(DefenderKind::AlwaysA),
            _ => Err(StrategyError::UnknownName {
                role: "defender",
                name: s.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn st(c: &[u64]) -> GameState {
        GameState::new(c.to_vec()).unwrap()
    }

    fn p(a: &[u64], b: &[u64]) -> Partition {
        Partition::new(a.to_vec(), b.to_vec())
    }

    /// Every prefix cut of the level-sorted piece line, by brute force.
    fn all_prefix_partitions(state: &GameState) -> Vec<Partition> {
        let counts = state.counts();
        let mut line = Vec::new();
        for level in (0..counts.len()).rev() {
            line.extend(std::iter::repeat_n(level, counts[level] as usize));
        }
        (0..=line.len())
            .map(|cut| {
                let mut a = vec![0; counts.len()];
                for &l in &line[..cut] {
                    a[l] += 1;
                }
                let b = counts.iter().zip(&a).map(|(n, x)| n - x).collect();
                Partition::new(a, b)
            })
            .collect()
    }

    fn min_side(p: &Partition) -> Units {
        let (a, b) = p.potentials().unwrap();
        a.units.min(b.units)
    }

    #[test]
    fn defender_destroys_larger_set() {
        assert_eq!(
            optimal_defender_choice(&p(&[0, 1, 0], &[1, 0, 0])),
            DestroyChoice::A
        );
        assert_eq!(
            optimal_defender_choice(&p(&[2, 0, 0], &[0, 1, 0])),
            DestroyChoice::A
        );
        assert_eq!(
            optimal_defender_choice(&p(&[0, 0, 0, 0], &[1, 0, 0, 0])),
            DestroyChoice::B
        );
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(
            prefix_attacker_partition(&st(&[0, 4, 0])),
            p(&[0, 2, 0], &[0, 2, 0])
        );
        assert_eq!(
            prefix_attacker_partition(&st(&[2, 1, 0])),
            p(&[0, 1, 0], &[2, 0, 0])
        );
        assert_eq!(
            prefix_attacker_partition(&st(&[1, 0, 0, 0])),
            p(&[1, 0, 0, 0], &[0, 0, 0, 0])
        );
        // Equal balance either way: the smaller A wins.
        assert_eq!(
            prefix_attacker_partition(&st(&[3, 0, 0])),
            p(&[1, 0, 0], &[2, 0, 0])
        );
    }

    #[test]
    fn prefix_matches_brute_force_max_min() {
        let mut rng = GameRng::seed_from_u64(3);
        for _ in 0..2000 {
            let levels = rng.random_range(1..=8);
            let mut counts = vec![0u64; levels + 1];
            let pieces = rng.random_range(1..=50);
            for _ in 0..pieces {
                counts[rng.random_range(0..levels)] += 1;
            }
            let state = st(&counts);
            let got = prefix_attacker_partition(&state);
            assert!(validate(&state, &got));
            let best = all_prefix_partitions(&state)
                .iter()
                .map(min_side)
                .max()
                .unwrap();
            assert_eq!(min_side(&got), best, "{state}");
        }
    }

    fn validate(state: &GameState, p: &Partition) -> bool {
        crate::game::validate_partition(state, p).is_empty()
    }

    #[test]
    fn balanced_level_split_examples() {
        let s = st(&[2, 1, 0]);
        assert_eq!(balanced_split_at_level(&s, 1), p(&[0, 1, 0], &[2, 0, 0]));
        assert_eq!(balanced_split_at_level(&s, 2), p(&[0, 0, 0], &[2, 1, 0]));
        // Level 0: the level-1 piece is already in A, so one of the two
        // level-0 pieces joins it only if that helps balance.
        assert_eq!(balanced_split_at_level(&s, 0), p(&[0, 1, 0], &[2, 0, 0]));
        // Four equal pieces at level 0 split evenly.
        assert_eq!(
            balanced_split_at_level(&st(&[4, 0, 0]), 0),
            p(&[2, 0, 0], &[2, 0, 0])
        );
        // An odd count puts the extra piece in B.
        assert_eq!(
            balanced_split_at_level(&st(&[3, 0, 0]), 0),
            p(&[1, 0, 0], &[2, 0, 0])
        );
    }

    #[test]
    fn disjoint_support_targets_fraction() {
        let s = st(&[0, 4, 0]);
        let got = disjoint_support_split(&s, Fraction::new(1, 4).unwrap());
        assert_eq!(got, p(&[0, 3, 0], &[0, 1, 0]));
        for f in default_fraction_menu() {
            let got = disjoint_support_split(&s, f);
            assert!(validate(&s, &got));
            // Support overlaps at most at one boundary level.
            let shared = got
                .a
                .iter()
                .zip(&got.b)
                .filter(|(x, y)| **x > 0 && **y > 0)
                .count();
            assert!(shared <= 1);
        }
    }

    #[test]
    fn disjoint_support_is_closest_suffix() {
        let mut rng = GameRng::seed_from_u64(9);
        for _ in 0..500 {
            let levels = rng.random_range(1..=6);
            let mut counts = vec![0u64; levels + 1];
            for _ in 0..rng.random_range(1..=30) {
                counts[rng.random_range(0..levels)] += 1;
            }
            let state = st(&counts);
            let f = default_fraction_menu()[rng.random_range(0..4)];
            let got = disjoint_support_split(&state, f);
            let total = state.potential().units as f64;
            let dist = |q: &Partition| {
                (q.potential_of(DestroyChoice::B).unwrap().units as f64 - f.as_f64() * total).abs()
            };
            let best = all_prefix_partitions(&state)
                .iter()
                .map(dist)
                .fold(f64::INFINITY, f64::min);
            assert!((dist(&got) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_support_is_seeded() {
        let s = st(&[3, 2, 2, 1, 0]);
        let menu = default_fraction_menu();
        let a: Vec<_> = {
            let mut rng = GameRng::seed_from_u64(5);
            (0..20)
                .map(|_| disjoint_support_partition(&s, &menu, &mut rng))
                .collect()
        };
        let b: Vec<_> = {
            let mut rng = GameRng::seed_from_u64(5);
            (0..20)
                .map(|_| disjoint_support_partition(&s, &menu, &mut rng))
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn mixed_attacker_extremes_and_rate() {
        let s = st(&[5, 3, 1, 1, 0, 0]);
        let menu = default_fraction_menu();
        let mut rng = GameRng::seed_from_u64(11);
        let prefix = prefix_attacker_partition(&s);
        for _ in 0..100 {
            assert_eq!(mixed_attacker_partition(&s, &menu, 1.0, &mut rng), prefix);
        }
        let mut r1 = GameRng::seed_from_u64(12);
        let mut r2 = GameRng::seed_from_u64(12);
        for _ in 0..100 {
            let mixed = mixed_attacker_partition(&s, &menu, 0.0, &mut r1);
            let _: f64 = r2.random();
            assert_eq!(mixed, disjoint_support_partition(&s, &menu, &mut r2));
        }
        // The prefix split never coincides with a disjoint-support split
        // here, so the optimal-move rate is observable.
        let disjoint: Vec<_> = menu
            .iter()
            .map(|&f| disjoint_support_split(&s, f))
            .collect();
        assert!(!disjoint.contains(&prefix));
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| mixed_attacker_partition(&s, &menu, 0.8, &mut rng) == prefix)
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.8).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn random_defender_is_fair_and_seeded() {
        let mut rng = GameRng::seed_from_u64(1);
        let n = 10_000;
        let a = (0..n)
            .filter(|_| random_defender_choice(&mut rng) == DestroyChoice::A)
            .count();
        let rate = a as f64 / n as f64;
        assert!((0.48..=0.52).contains(&rate), "rate {rate}");
        let mut r1 = GameRng::seed_from_u64(2);
        let mut r2 = GameRng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(
                random_defender_choice(&mut r1),
                random_defender_choice(&mut r2)
            );
        }
    }

    #[test]
    fn random_partition_is_valid() {
        let mut rng = GameRng::seed_from_u64(4);
        let s = st(&[100, 7, 0, 3, 0]);
        for _ in 0..100 {
            assert!(validate(&s, &random_partition(&s, &mut rng)));
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!(
            "prefix".parse::<AttackerKind>().unwrap(),
            AttackerKind::Prefix
        );
        assert_eq!(
            "mixed:0.5".parse::<AttackerKind>().unwrap(),
            AttackerKind::mixed(0.5).unwrap()
        );
        assert!("mixed:1.5".parse::<AttackerKind>().is_err());
        assert!("greedy".parse::<AttackerKind>().is_err());
        assert_eq!(
            "random".parse::<DefenderKind>().unwrap(),
            DefenderKind::Random
        );
        assert!(Fraction::new(1, 2).is_err());
        assert!(Fraction::new(0, 5).is_err());
    }
}
