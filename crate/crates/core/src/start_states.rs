//! Start positions at an exact potential: sampling, enumeration, counting.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, GameRng, GameState, Potential, Units, MAX_LEVELS};

/// Largest `K` for exhaustive enumeration.
pub const MAX_ENUMERATION_LEVELS: usize = 8;
/// Largest `K` for the counting DP.
pub const MAX_COUNT_LEVELS: usize = 20;
/// Largest unit target for the counting DP, which keeps a table of
/// `target + 1` entries.
pub const MAX_COUNT_UNITS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StartError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("target potential must be at least one unit")]
    EmptyTarget,
    #[error("enumeration is limited to K <= {MAX_ENUMERATION_LEVELS}, got K={0}; use count_states instead")]
    TooManyLevels(usize),
    #[error("counting is limited to K <= {MAX_COUNT_LEVELS}, got K={0}")]
    CountTooLarge(usize),
    #[error("state count exceeds 128 bits")]
    CountOverflow,
    #[error("target is {target} but the distribution is for K={levels}")]
    LevelMismatch { target: Potential, levels: usize },
    #[error("unknown start distribution '{0}'")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// All pieces at level 0.
    Level0,
    /// Pieces dropped on random levels, topped up at level 0.
    #[serde(alias = "spread")]
    RandomSpread,
    /// Every piece on one randomly chosen level.
    #[serde(alias = "single")]
    SingleLevelConcentrated,
}

impl fmt::Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartKind::Level0 => "level0",
            StartKind::RandomSpread => "spread",
            StartKind::SingleLevelConcentrated => "single",
        })
    }
}

impl FromStr for StartKind {
    type Err = StartError;

    fn from_str(s: &str) -> Result<Self, StartError> {
        match s {
            "level0" => Ok(StartKind::Level0),
            "spread" | "random_spread" => Ok(StartKind::RandomSpread),
            "single" | "single_level" => Ok(StartKind::SingleLevelConcentrated),
            _ => Err(StartError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StartDistribution {
    pub kind: StartKind,
    pub target: Potential,
}

impl StartDistribution {
    pub fn new(kind: StartKind, levels: usize, units: Units) -> Result<Self, StartError> {
        if levels == 0 || levels > MAX_LEVELS {
            return Err(GameError::LevelCount(levels).into());
        }
        if units == 0 {
            return Err(StartError::EmptyTarget);
        }
        Ok(StartDistribution {
            kind,
            target: Potential::new(units, levels),
        })
    }

    pub fn levels(&self) -> usize {
        self.target.levels
    }

    pub fn sample(&self, rng: &mut GameRng) -> Result<GameState, StartError> {
        sample_start_state(self, rng)
    }
}

impl fmt::Display for StartDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:units={}", self.kind, self.target.units)
    }
}

/// Draws a start state whose potential is exactly the requested units.
/// Level `K` is never populated.
// `Units` is u128 under `wide`, so the conversions are not always no-ops.
#[allow(clippy::useless_conversion)]
pub fn sample_start_state(
    dist: &StartDistribution,
    rng: &mut GameRng,
) -> Result<GameState, StartError> {
    let levels = dist.levels();
    let units = dist.target.units;
    if levels == 0 || levels > MAX_LEVELS {
        return Err(GameError::LevelCount(levels).into());
    }
    if units == 0 {
        return Err(StartError::EmptyTarget);
    }
    let mut counts = vec![0u64; levels + 1];
    match dist.kind {
        StartKind::Level0 => {
            counts[0] = u64::try_from(units).map_err(|_| GameError::Overflow)?;
        }
        StartKind::RandomSpread => {
            let mut remaining = units;
            loop {
                let level = rng.random_range(0..levels);
                let w: Units = 1 << level;
                if w > remaining {
                    break;
                }
                counts[level] += 1;
                remaining -= w;
            }
            counts[0] += u64::try_from(remaining).map_err(|_| GameError::Overflow)?;
        }
        StartKind::SingleLevelConcentrated => {
            let options: Vec<usize> = (0..levels)
                .filter(|&l| units.is_multiple_of(1 << l))
                .collect();
            let level = options[rng.random_range(0..options.len())];
            counts[level] = u64::try_from(units >> level).map_err(|_| GameError::Overflow)?;
        }
    }
    Ok(GameState::new(counts)?)
}

/// Every state on `K` levels with potential exactly `target` units, in
/// lexicographic order of `(n_K, ..., n_0)` descending.
pub fn enumerate_states(
    levels: usize,
    target: Units,
    forbid_top: bool,
) -> Result<Vec<GameState>, StartError> {
    if levels == 0 {
        return Err(GameError::LevelCount(levels).into());
    }
    if levels > MAX_ENUMERATION_LEVELS {
        return Err(StartError::TooManyLevels(levels));
    }
    let mut out = Vec::new();
    let mut counts = vec![0u64; levels + 1];
    let top = if forbid_top { levels - 1 } else { levels };
    if forbid_top {
        counts[levels] = 0;
    }
    fill(top, target, &mut counts, &mut out)?;
    Ok(out)
}

#[allow(clippy::useless_conversion, clippy::unnecessary_cast)]
fn fill(
    level: usize,
    remaining: Units,
    counts: &mut [u64],
    out: &mut Vec<GameState>,
) -> Result<(), StartError> {
    if level == 0 {
        counts[0] = u64::try_from(remaining).map_err(|_| GameError::Overflow)?;
        out.push(GameState::new(counts.to_vec())?);
        return Ok(());
    }
    let w: Units = 1 << level;
    for n in (0..=remaining / w).rev() {
        counts[level] = n as u64;
        fill(level - 1, remaining - n * w, counts, out)?;
    }
    counts[level] = 0;
    Ok(())
}

/// Number of states on `K` levels with potential `target` units, pieces at
/// level `K` allowed.
pub fn count_states(levels: usize, target: Units) -> Result<u128, StartError> {
    count_states_with(levels, target, false)
}

/// Coin-change style DP over unit totals: `ways[u]` counts multisets of
/// level weights summing to `u`.
pub fn count_states_with(
    levels: usize,
    target: Units,
    forbid_top: bool,
) -> Result<u128, StartError> {
    if levels == 0 {
        return Err(GameError::LevelCount(levels).into());
    }
    if levels > MAX_COUNT_LEVELS {
        return Err(StartError::CountTooLarge(levels));
    }
    let target = usize::try_from(target).map_err(|_| GameError::Overflow)?;
    if target > MAX_COUNT_UNITS {
        return Err(GameError::Overflow.into());
    }
    let top = if forbid_top { levels - 1 } else { levels };
    let mut ways = vec![0u128; target + 1];
    ways[0] = 1;
    for level in 0..=top {
        let w = 1usize << level;
        for u in w..=target {
            ways[u] = ways[u]
                .checked_add(ways[u - w])
                .ok_or(StartError::CountOverflow)?;
        }
    }
    Ok(ways[target])
}

/// `log2` of the asymptotic bracket `[2^{K²/4}, 2^{K²/2}]` for the number of
/// potential-1 states; reported next to exact counts for trend inspection.
pub fn asymptotic_bracket_log2(levels: usize) -> (f64, f64) {
    let k2 = (levels * levels) as f64;
    (k2 / 4.0, k2 / 2.0)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::SeedableRng;

    use super::*;

    fn st(c: &[u64]) -> GameState {
        GameState::new(c.to_vec()).unwrap()
    }

    #[test]
    fn level0_start() {
        let d = StartDistribution::new(StartKind::Level0, 3, 8).unwrap();
        let mut rng = GameRng::seed_from_u64(0);
        assert_eq!(d.sample(&mut rng).unwrap(), st(&[8, 0, 0, 0]));
    }

    #[test]
    fn spread_start_lands_in_potential_one_set() {
        let d = StartDistribution::new(StartKind::RandomSpread, 2, 4).unwrap();
        let allowed: HashSet<GameState> = [st(&[4, 0, 0]), st(&[2, 1, 0]), st(&[0, 2, 0])].into();
        let mut rng = GameRng::seed_from_u64(1);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            let s = d.sample(&mut rng).unwrap();
            assert!(allowed.contains(&s), "{s}");
            seen.insert(s);
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn samples_hit_target_exactly() {
        let mut rng = GameRng::seed_from_u64(2);
        for kind in [
            StartKind::Level0,
            StartKind::RandomSpread,
            StartKind::SingleLevelConcentrated,
        ] {
            for levels in 1..=12 {
                for units in [1, 3, (1 << levels) - 1, 1 << levels, 3 << (levels - 1)] {
                    let d = StartDistribution::new(kind, levels, units).unwrap();
                    let s = d.sample(&mut rng).unwrap();
                    assert_eq!(s.potential().units, units);
                    assert_eq!(s.counts()[levels], 0);
                }
            }
        }
    }

    #[test]
    fn zero_target_is_rejected() {
        assert_eq!(
            StartDistribution::new(StartKind::Level0, 3, 0),
            Err(StartError::EmptyTarget)
        );
    }

    #[test]
    fn fractional_targets_must_be_whole_units() {
        assert!(Potential::from_real(0.95, 5).is_err());
        assert_eq!(Potential::from_real(0.9375, 5).unwrap().units, 30);
    }

    #[test]
    fn small_enumerations() {
        let k2 = enumerate_states(2, 4, false).unwrap();
        assert_eq!(
            k2,
            vec![
                st(&[0, 0, 1]),
                st(&[0, 2, 0]),
                st(&[2, 1, 0]),
                st(&[4, 0, 0])
            ]
        );
        assert_eq!(enumerate_states(3, 8, false).unwrap().len(), 10);
        assert_eq!(enumerate_states(2, 4, true).unwrap().len(), 3);
        assert_eq!(enumerate_states(2, 0, false).unwrap(), vec![st(&[0, 0, 0])]);
        assert_eq!(
            enumerate_states(9, 4, false),
            Err(StartError::TooManyLevels(9))
        );
    }

    #[test]
    fn counts_match_examples() {
        assert_eq!(count_states(2, 4).unwrap(), 4);
        assert_eq!(count_states(3, 8).unwrap(), 10);
        assert_eq!(
            count_states(4, 16).unwrap(),
            enumerate_states(4, 16, false).unwrap().len() as u128
        );
        assert_eq!(count_states(2, 0).unwrap(), 1);
        assert_eq!(count_states(21, 1), Err(StartError::CountTooLarge(21)));
    }

    #[test]
    fn potential_one_counts_grow_with_levels() {
        let counts: Vec<u128> = (2..=12).map(|k| count_states(k, 1 << k).unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }
}
