//! Exact rules of the attacker-defender tenure game.
//!
//! A board has levels `0..=K`. Every turn the attacker splits the pieces in
//! play into two sets, the defender destroys one of them, and the survivors
//! advance one level. The attacker wins as soon as a piece reaches level `K`;
//! the defender wins when no pieces are left.
//!
//! Potentials are kept as integers in units of `2^-K`, so a piece at level
//! `i` is worth `2^i` units and the critical potential 1 is `2^K` units.
//! Nothing in this module touches floating point.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer type holding potential units.
#[cfg(not(feature = "wide"))]
pub type Units = u64;
#[cfg(feature = "wide")]
pub type Units = u128;

/// Largest level count the engine accepts. A single piece at level `K` is
/// worth `2^K` units, so this keeps one top-level piece well inside `Units`
/// and leaves headroom for sums of many pieces.
#[cfg(not(feature = "wide"))]
pub const MAX_LEVELS: usize = 30;
#[cfg(feature = "wide")]
pub const MAX_LEVELS: usize = 62;

/// RNG used for every random decision in the crate.
pub type GameRng = ChaCha8Rng;

/// Seeded generator for item `index` of a run with `master_seed`.
///
/// Each index gets its own ChaCha stream, so results do not depend on how
/// work is distributed or ordered.
pub fn stream_rng(master_seed: u64, index: u64) -> GameRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("level count {0} outside supported range 1..={max}", max = MAX_LEVELS)]
    LevelCount(usize),
    #[error("expected {expected} counts for K={levels}, got {got}", expected = levels + 1)]
    CountLength { levels: usize, got: usize },
    #[error("potential exceeds the {bits}-bit unit bound", bits = Units::BITS)]
    Overflow,
    #[error("invalid partition: {}", join_violations(.0))]
    InvalidPartition(Vec<Violation>),
    #[error("state {0} is terminal")]
    Terminal(GameState),
    #[error("potential {value} is not a whole number of 2^-{levels} units")]
    NotWholeUnits { value: String, levels: usize },
    #[error("start potential must be positive")]
    ZeroPotential,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checked `count * 2^level`.
pub(crate) fn piece_units(count: u64, level: usize) -> Result<Units, GameError> {
    let weight = Units::checked_pow(2, level as u32).ok_or(GameError::Overflow)?;
    Units::from(count)
        .checked_mul(weight)
        .ok_or(GameError::Overflow)
}

fn units_of(counts: &[u64]) -> Result<Units, GameError> {
    counts
        .iter()
        .enumerate()
        .try_fold(0 as Units, |acc, (level, &n)| {
            acc.checked_add(piece_units(n, level)?)
                .ok_or(GameError::Overflow)
        })
}

/// Exact potential, `units * 2^-levels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Potential {
    pub units: Units,
    #[serde(rename = "K")]
    pub levels: usize,
}

impl Potential {
    pub fn new(units: Units, levels: usize) -> Self {
        Potential { units, levels }
    }

    /// Potential 1, the boundary between defender and attacker wins.
    pub fn one(levels: usize) -> Self {
        Potential::new((1 as Units) << levels, levels)
    }

    /// Converts a real-valued potential, refusing values that are not a
    /// whole number of units (0.95 at K=5 is 30.4 units and is rejected).
    pub fn from_real(value: f64, levels: usize) -> Result<Self, GameError> {
        if levels == 0 || levels > MAX_LEVELS {
            return Err(GameError::LevelCount(levels));
        }
        let scaled = value * (1u64 << levels) as f64;
        if !scaled.is_finite()
            || scaled < 0.0
            || scaled.fract() != 0.0
            || scaled > Units::MAX as f64
        {
            return Err(GameError::NotWholeUnits {
                value: value.to_string(),
                levels,
            });
        }
        Ok(Potential::new(scaled as Units, levels))
    }

    /// Units for a real potential rounded to the nearest unit; used for
    /// experiment labels such as "0.95" that are not exactly representable.
    pub fn rounded(value: f64, levels: usize) -> Self {
        let scaled = (value * (1u64 << levels) as f64).round().max(0.0);
        Potential::new(scaled as Units, levels)
    }

    pub fn as_f64(&self) -> f64 {
        self.units as f64 / (1u64 << self.levels) as f64
    }

    pub fn is_at_least_one(&self) -> bool {
        self.units >= (1 as Units) << self.levels
    }

    /// `2 * self >= 1`, i.e. potential at least one half.
    pub fn is_at_least_half(&self) -> bool {
        self.units.saturating_mul(2) >= (1 as Units) << self.levels
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.units, self.levels)
    }
}

/// Board description: level count and start potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameParams {
    #[serde(rename = "K")]
    pub levels: usize,
    pub start_potential: Potential,
}

impl GameParams {
    pub fn new(levels: usize, start_units: Units) -> Result<Self, GameError> {
        if levels == 0 || levels > MAX_LEVELS {
            return Err(GameError::LevelCount(levels));
        }
        if start_units == 0 {
            return Err(GameError::ZeroPotential);
        }
        Ok(GameParams {
            levels,
            start_potential: Potential::new(start_units, levels),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    Attacker,
    Defender,
}

impl Winner {
    pub fn other(self) -> Winner {
        match self {
            Winner::Attacker => Winner::Defender,
            Winner::Defender => Winner::Attacker,
        }
    }
}

/// Which set of a partition the defender destroys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DestroyChoice {
    A,
    B,
}

impl DestroyChoice {
    pub fn index(self) -> usize {
        match self {
            DestroyChoice::A => 0,
            DestroyChoice::B => 1,
        }
    }

    pub fn from_index(i: usize) -> DestroyChoice {
        if i == 0 {
            DestroyChoice::A
        } else {
            DestroyChoice::B
        }
    }

    pub fn other(self) -> DestroyChoice {
        match self {
            DestroyChoice::A => DestroyChoice::B,
            DestroyChoice::B => DestroyChoice::A,
        }
    }
}

/// Piece counts per level. `counts[i]` is the number of pieces at level `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct GameState {
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    #[serde(rename = "K")]
    levels: usize,
    counts: Vec<u64>,
}

impl TryFrom<StateRepr> for GameState {
    type Error = GameError;

    fn try_from(r: StateRepr) -> Result<Self, GameError> {
        if r.counts.len() != r.levels + 1 {
            return Err(GameError::CountLength {
                levels: r.levels,
                got: r.counts.len(),
            });
        }
        GameState::new(r.counts)
    }
}

impl From<GameState> for StateRepr {
    fn from(s: GameState) -> Self {
        StateRepr {
            levels: s.levels(),
            counts: s.counts,
        }
    }
}

impl GameState {
    /// Builds a state from `K+1` counts.
    pub fn new(counts: Vec<u64>) -> Result<Self, GameError> {
        let levels = counts.len().saturating_sub(1);
        if levels == 0 || levels > MAX_LEVELS {
            return Err(GameError::LevelCount(levels));
        }
        units_of(&counts)?;
        Ok(GameState { counts })
    }

    pub fn empty(levels: usize) -> Result<Self, GameError> {
        GameState::new(vec![0; levels + 1])
    }

    pub fn levels(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_pieces(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Always fits: checked at construction.
    pub fn potential(&self) -> Potential {
        Potential::new(
            units_of(&self.counts).expect("checked at construction"),
            self.levels(),
        )
    }

    pub fn is_terminal(&self) -> Option<Winner> {
        if self.counts[self.levels()] > 0 {
            Some(Winner::Attacker)
        } else if self.counts.iter().all(|&n| n == 0) {
            Some(Winner::Defender)
        } else {
            None
        }
    }

    /// Resulting state when `destroy` is removed from `partition` and the
    /// other set advances one level.
    pub fn apply_move(
        &self,
        partition: &Partition,
        destroy: DestroyChoice,
    ) -> Result<GameState, GameError> {
        if self.is_terminal().is_some() {
            return Err(GameError::Terminal(self.clone()));
        }
        let violations = validate_partition(self, partition);
        if !violations.is_empty() {
            return Err(GameError::InvalidPartition(violations));
        }
        let survivors = partition.side(destroy.other());
        let mut next = vec![0; self.counts.len()];
        // survivors[K] is zero: a non-terminal state has nothing at the top.
        next[1..].copy_from_slice(&survivors[..self.levels()]);
        GameState::new(next)
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// The attacker's move: every piece goes to exactly one of `a` and `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

impl Partition {
    pub fn new(a: Vec<u64>, b: Vec<u64>) -> Self {
        Partition { a, b }
    }

    pub fn levels(&self) -> usize {
        self.a.len().saturating_sub(1)
    }

    pub fn side(&self, which: DestroyChoice) -> &[u64] {
        match which {
            DestroyChoice::A => &self.a,
            DestroyChoice::B => &self.b,
        }
    }

    /// Potential of one side.
    pub fn potential_of(&self, which: DestroyChoice) -> Result<Potential, GameError> {
        let side = self.side(which);
        Ok(Potential::new(
            units_of(side)?,
            side.len().saturating_sub(1),
        ))
    }

    pub fn potentials(&self) -> Result<(Potential, Potential), GameError> {
        Ok((
            self.potential_of(DestroyChoice::A)?,
            self.potential_of(DestroyChoice::B)?,
        ))
    }

    /// Swaps the two sides.
    pub fn swapped(&self) -> Partition {
        Partition::new(self.b.clone(), self.a.clone())
    }

    /// Union of both sides.
    pub fn merged(&self) -> Vec<u64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x + y).collect()
    }
}

/// One problem found by [`validate_partition`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// `a` or `b` does not have `K+1` entries.
    Length { expected: usize, a: usize, b: usize },
    /// `a[level] + b[level]` differs from the state's count.
    Sum {
        level: usize,
        a: u64,
        b: u64,
        expected: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { expected, a, b } => {
                write!(f, "side lengths {a}/{b}, expected {expected}")
            }
            Violation::Sum {
                level,
                a,
                b,
                expected,
            } => {
                write!(f, "level {level}: {a}+{b} != {expected}")
            }
        }
    }
}

/// Every level where the partition does not split the state's pieces.
///
/// Counts are unsigned, so the "negative entry" case surfaces as a sum
/// mismatch. Returns an empty list for a valid partition.
pub fn validate_partition(state: &GameState, partition: &Partition) -> Vec<Violation> {
    let expected = state.counts.len();
    if partition.a.len() != expected || partition.b.len() != expected {
        return vec![Violation::Length {
            expected,
            a: partition.a.len(),
            b: partition.b.len(),
        }];
    }
    state
        .counts
        .iter()
        .zip(partition.a.iter().zip(&partition.b))
        .enumerate()
        .filter(|(_, (&n, (&a, &b)))| a.checked_add(b) != Some(n))
        .map(|(level, (&n, (&a, &b)))| Violation::Sum {
            level,
            a,
            b,
            expected: n,
        })
        .collect()
}

/// Final result of a finished match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Winner,
    pub turns_played: usize,
}

/// Decides how to split the pieces.
pub trait AttackerPolicy {
    fn partition(&self, state: &GameState, rng: &mut GameRng) -> Partition;
}

/// Decides which set to destroy.
pub trait DefenderPolicy {
    fn choose(&self, partition: &Partition, rng: &mut GameRng) -> DestroyChoice;
}

impl<T: AttackerPolicy + ?Sized> AttackerPolicy for &T {
    fn partition(&self, state: &GameState, rng: &mut GameRng) -> Partition {
        (**self).partition(state, rng)
    }
}

impl<T: DefenderPolicy + ?Sized> DefenderPolicy for &T {
    fn choose(&self, partition: &Partition, rng: &mut GameRng) -> DestroyChoice {
        (**self).choose(partition, rng)
    }
}

impl<T: AttackerPolicy + ?Sized> AttackerPolicy for Box<T> {
    fn partition(&self, state: &GameState, rng: &mut GameRng) -> Partition {
        (**self).partition(state, rng)
    }
}

impl<T: DefenderPolicy + ?Sized> DefenderPolicy for Box<T> {
    fn choose(&self, partition: &Partition, rng: &mut GameRng) -> DestroyChoice {
        (**self).choose(partition, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub state: GameState,
    pub partition: Partition,
    pub destroy: DestroyChoice,
}

/// A match aborted because a policy broke the rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub turn: usize,
    pub state: GameState,
    pub partition: Partition,
    pub violations: Vec<Violation>,
}

/// Full trajectory of a match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub start_state: GameState,
    pub steps: Vec<Step>,
    /// `None` when the match was aborted; see `fault`.
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
    pub seed: u64,
}

impl MatchRecord {
    pub fn winner(&self) -> Option<Winner> {
        self.outcome.map(|o| o.winner)
    }

    /// Replays the recorded moves and returns the resulting outcome.
    pub fn replay(&self) -> Result<Outcome, GameError> {
        let mut state = self.start_state.clone();
        for step in &self.steps {
            if step.state != state {
                return Err(GameError::InvalidPartition(vec![]));
            }
            state = state.apply_move(&step.partition, step.destroy)?;
        }
        match state.is_terminal() {
            Some(winner) => Ok(Outcome {
                winner,
                turns_played: self.steps.len(),
            }),
            None => Err(GameError::InvalidPartition(vec![])),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("match records always serialize")
    }
}

/// Plays one match to the end. All randomness comes from `seed`.
pub fn play_match<A, D>(
    attacker: &A,
    defender: &D,
    start: &GameState,
    seed: u64,
) -> Result<MatchRecord, GameError>
where
    A: AttackerPolicy + ?Sized,
    D: DefenderPolicy + ?Sized,
{
    let mut rng = GameRng::seed_from_u64(seed);
    play_match_with(attacker, defender, start, seed, &mut rng)
}

/// [`play_match`] drawing from a caller-owned generator; `seed` is only
/// recorded.
pub fn play_match_with<A, D>(
    attacker: &A,
    defender: &D,
    start: &GameState,
    seed: u64,
    rng: &mut GameRng,
) -> Result<MatchRecord, GameError>
where
    A: AttackerPolicy + ?Sized,
    D: DefenderPolicy + ?Sized,
{
    let mut record = MatchRecord {
        start_state: start.clone(),
        steps: Vec::new(),
        outcome: None,
        fault: None,
        seed,
    };
    if let Some(winner) = start.is_terminal() {
        // A one-piece board with the piece already on top is an immediate win.
        if winner == Winner::Attacker {
            record.outcome = Some(Outcome {
                winner,
                turns_played: 0,
            });
            return Ok(record);
        }
        return Err(GameError::Terminal(start.clone()));
    }
    let mut state = start.clone();
    loop {
        if let Some(winner) = state.is_terminal() {
            record.outcome = Some(Outcome {
                winner,
                turns_played: record.steps.len(),
            });
            return Ok(record);
        }
        let partition = attacker.partition(&state, rng);
        let violations = validate_partition(&state, &partition);
        if !violations.is_empty() {
            record.fault = Some(Fault {
                turn: record.steps.len(),
                state,
                partition,
                violations,
            });
            return Ok(record);
        }
        let destroy = defender.choose(&partition, rng);
        let next = state.apply_move(&partition, destroy)?;
        record.steps.push(Step {
            state,
            partition,
            destroy,
        });
        state = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(c: &[u64]) -> GameState {
        GameState::new(c.to_vec()).unwrap()
    }

    #[test]
    fn potential_in_units() {
        assert_eq!(st(&[8, 0, 0, 0]).potential().units, 8);
        assert!(st(&[8, 0, 0, 0]).potential().is_at_least_one());
        assert_eq!(st(&[0, 0, 0, 0, 1]).potential().units, 16);
        let p = st(&[1, 1, 1, 1, 0]).potential();
        assert_eq!(p.units, 15);
        assert_eq!(p.as_f64(), 15.0 / 16.0);
        assert!(!p.is_at_least_one());
    }

    #[test]
    fn overflow_is_reported() {
        let mut counts = vec![0; 31];
        counts[30] = u64::MAX / 4;
        assert_eq!(GameState::new(counts), Err(GameError::Overflow));
        assert_eq!(GameState::new(vec![0; 40]), Err(GameError::LevelCount(39)));
    }

    #[test]
    fn real_potential_must_be_whole_units() {
        assert_eq!(Potential::from_real(1.0, 3).unwrap().units, 8);
        assert!(matches!(
            Potential::from_real(0.95, 5),
            Err(GameError::NotWholeUnits { .. })
        ));
        assert_eq!(Potential::rounded(0.95, 5).units, 30);
    }

    #[test]
    fn move_advances_survivors() {
        let s = st(&[2, 1, 0]);
        let p = Partition::new(vec![0, 1, 0], vec![2, 0, 0]);
        assert_eq!(s.apply_move(&p, DestroyChoice::A).unwrap(), st(&[0, 2, 0]));
        assert_eq!(s.apply_move(&p, DestroyChoice::B).unwrap(), st(&[0, 0, 1]));
    }

    #[test]
    fn move_doubles_surviving_potential() {
        let s = st(&[4, 0, 0, 0]);
        let p = Partition::new(vec![2, 0, 0, 0], vec![2, 0, 0, 0]);
        let next = s.apply_move(&p, DestroyChoice::B).unwrap();
        assert_eq!(next, st(&[0, 2, 0, 0]));
        assert_eq!(s.potential().units, 4);
        assert_eq!(next.potential().units, 4);
        assert_eq!(
            next.potential().units,
            2 * p.potential_of(DestroyChoice::A).unwrap().units
        );
    }

    #[test]
    fn move_on_terminal_state_fails() {
        let s = st(&[0, 0, 1]);
        let p = Partition::new(vec![0, 0, 1], vec![0, 0, 0]);
        assert!(matches!(
            s.apply_move(&p, DestroyChoice::A),
            Err(GameError::Terminal(_))
        ));
    }

    #[test]
    fn invalid_partition_is_rejected() {
        let s = st(&[2, 1, 0]);
        let p = Partition::new(vec![3, 0, 0], vec![0, 1, 0]);
        assert!(matches!(
            s.apply_move(&p, DestroyChoice::A),
            Err(GameError::InvalidPartition(_))
        ));
    }

    #[test]
    fn validation_reports_each_level() {
        let s = st(&[2, 1, 0]);
        assert!(validate_partition(&s, &Partition::new(vec![1, 0, 0], vec![1, 1, 0])).is_empty());
        assert!(validate_partition(&s, &Partition::new(vec![2, 1, 0], vec![0, 0, 0])).is_empty());
        let v = validate_partition(&s, &Partition::new(vec![3, 0, 0], vec![0, 1, 0]));
        assert_eq!(
            v,
            vec![Violation::Sum {
                level: 0,
                a: 3,
                b: 0,
                expected: 2
            }]
        );
        let v = validate_partition(&s, &Partition::new(vec![0, 0], vec![2, 1]));
        assert!(matches!(v[0], Violation::Length { .. }));
    }

    #[test]
    fn terminal_detection() {
        assert_eq!(st(&[0, 0, 1]).is_terminal(), Some(Winner::Attacker));
        assert_eq!(st(&[0, 0, 0]).is_terminal(), Some(Winner::Defender));
        assert_eq!(st(&[1, 0, 0]).is_terminal(), None);
    }

    #[test]
    fn state_json_shape() {
        let s = st(&[2, 1, 0]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"K":2,"counts":[2,1,0]}"#);
        let back: GameState = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GameState>(r#"{"K":3,"counts":[2,1,0]}"#).is_err());
    }

    struct EverythingToA;
    impl AttackerPolicy for EverythingToA {
        fn partition(&self, s: &GameState, _: &mut GameRng) -> Partition {
            Partition::new(s.counts().to_vec(), vec![0; s.counts().len()])
        }
    }
    struct Broken;
    impl AttackerPolicy for Broken {
        fn partition(&self, s: &GameState, _: &mut GameRng) -> Partition {
            Partition::new(s.counts().to_vec(), s.counts().to_vec())
        }
    }
    struct DestroyB;
    impl DefenderPolicy for DestroyB {
        fn choose(&self, _: &Partition, _: &mut GameRng) -> DestroyChoice {
            DestroyChoice::B
        }
    }

    #[test]
    fn match_with_top_piece_is_immediate() {
        let rec = play_match(&EverythingToA, &DestroyB, &st(&[0, 0, 0, 1]), 7).unwrap();
        assert!(rec.steps.is_empty());
        assert_eq!(rec.winner(), Some(Winner::Attacker));
    }

    #[test]
    fn match_runs_to_the_top_and_replays() {
        let rec = play_match(&EverythingToA, &DestroyB, &st(&[3, 0, 0, 0]), 1).unwrap();
        assert_eq!(rec.steps.len(), 3);
        assert_eq!(rec.outcome.unwrap().winner, Winner::Attacker);
        assert_eq!(rec.replay().unwrap(), rec.outcome.unwrap());
        let back: MatchRecord = serde_json::from_str(&rec.to_json_line()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn broken_attacker_is_blamed() {
        let rec = play_match(&Broken, &DestroyB, &st(&[3, 1, 0, 0]), 1).unwrap();
        assert!(rec.outcome.is_none());
        let fault = rec.fault.unwrap();
        assert_eq!(fault.turn, 0);
        assert_eq!(fault.violations.len(), 2);
    }

    #[test]
    fn empty_start_is_rejected() {
        assert!(play_match(&EverythingToA, &DestroyB, &st(&[0, 0, 0]), 1).is_err());
    }
}
