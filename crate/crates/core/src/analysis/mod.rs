//! Move grading against the potential oracle, supervised baselines,
//! calibration and null-set probes, cross-K embedding, and the experiment
//! driver.

pub mod experiment;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    play_match_with, stream_rng, AttackerPolicy, DefenderPolicy, DestroyChoice, GameError, GameRng,
    GameState, MatchRecord, Partition, Winner,
};
use crate::rl::agent::{Head, PolicyParams};
use crate::rl::binary_search::Comparator;
use crate::rl::config::content_hash;
use crate::rl::encode::{encode_defender_obs, ObservationVec};
use crate::rl::learner::stack;
use crate::rl::nn::{cross_entropy, Adam, Arch, Network};
use crate::rl::{RlError, Role, TrainedAgent};
use crate::start_states::StartDistribution;
use crate::strategies::optimal_defender_choice;

pub use experiment::{run_experiment, ExperimentResult, ExperimentSpec};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot embed K={small} into K={big}: a smaller board cannot hold a larger one")]
    Embed { small: usize, big: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Spec(String),
}

impl AnalysisError {
    pub fn is_config(&self) -> bool {
        match self {
            AnalysisError::Embed { .. } | AnalysisError::Spec(_) => true,
            AnalysisError::Rl(e) => e.is_config(),
            _ => false,
        }
    }
}

/// Counts at `counts.len() - 1` levels moved up so the top levels line up
/// on a `big`-level board.
pub fn cross_k_embed_counts(counts: &[u64], big: usize) -> Vec<u64> {
    let small = counts.len() - 1;
    assert!(small <= big, "cannot embed K={small} into K={big}");
    let mut out = vec![0; big + 1];
    out[big - small..].copy_from_slice(counts);
    out
}

/// Top-aligned embedding; potential relative to the top is unchanged.
pub fn cross_k_embed(state: &GameState, big: usize) -> Result<GameState, AnalysisError> {
    if state.levels() > big {
        return Err(AnalysisError::Embed {
            small: state.levels(),
            big,
        });
    }
    Ok(GameState::new(cross_k_embed_counts(state.counts(), big))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveGrade {
    pub correct: bool,
    /// The larger side was at least one half, the smaller below it, and the
    /// smaller was destroyed.
    pub terminal_mistake: bool,
    /// A terminal mistake from a total below one: a won position thrown away.
    pub fatal_mistake: bool,
}

pub fn grade_move(partition: &Partition, choice: DestroyChoice) -> MoveGrade {
    let (pa, pb) = partition
        .potentials()
        .expect("partition potentials fit in units");
    if pa.units == pb.units {
        return MoveGrade {
            correct: true,
            terminal_mistake: false,
            fatal_mistake: false,
        };
    }
    let (larger_side, larger, smaller) = if pa.units > pb.units {
        (DestroyChoice::A, pa, pb)
    } else {
        (DestroyChoice::B, pb, pa)
    };
    let correct = choice == larger_side;
    let terminal = !correct && larger.is_at_least_half() && !smaller.is_at_least_half();
    let total_below_one = larger.units + smaller.units < (1 as crate::Units) << larger.levels;
    MoveGrade {
        correct,
        terminal_mistake: terminal,
        fatal_mistake: terminal && total_below_one,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMove {
    pub observation: ObservationVec,
    pub oracle_choice: DestroyChoice,
    pub match_index: usize,
    pub turn: usize,
}

/// One labeled row per defender turn of every match, duplicates kept.
pub fn build_supervised_dataset(records: &[MatchRecord]) -> Vec<LabeledMove> {
    build_dataset_with(records, false)
}

/// As [`build_supervised_dataset`], optionally keeping only the first
/// occurrence of each partition.
pub fn build_dataset_with(records: &[MatchRecord], dedup: bool) -> Vec<LabeledMove> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (match_index, record) in records.iter().enumerate() {
        for (turn, step) in record.steps.iter().enumerate() {
            if dedup && !seen.insert(step.partition.clone()) {
                continue;
            }
            out.push(LabeledMove {
                observation: encode_defender_obs(&step.partition),
                oracle_choice: optimal_defender_choice(&step.partition),
                match_index,
                turn,
            });
        }
    }
    out
}

/// Splits a dataset into (train, held-out) by a seeded shuffle.
pub fn split_dataset(
    dataset: &[LabeledMove],
    holdout_fraction: f64,
    seed: u64,
) -> (Vec<LabeledMove>, Vec<LabeledMove>) {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut GameRng::seed_from_u64(seed));
    let held = (holdout_fraction.clamp(0.0, 1.0) * dataset.len() as f64).round() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| dataset[i].clone()).collect();
    (pick(&order[held..]), pick(&order[..held]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisedConfig {
    pub arch: Arch,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl SupervisedConfig {
    pub fn new(arch: Arch, seed: u64) -> Self {
        SupervisedConfig {
            arch,
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 64,
            seed,
        }
    }
}

/// Cross-entropy classifier over {destroy A, destroy B}, returned as a
/// defender agent with a logit head.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
pub fn train_supervised(
    dataset: &[LabeledMove],
    cfg: &SupervisedConfig,
) -> Result<TrainedAgent, AnalysisError> {
    let first = dataset
        .first()
        .ok_or_else(|| AnalysisError::Spec("empty supervised dataset".into()))?;
    let inputs = first.observation.values.len();
    if dataset.iter().any(|m| m.observation.values.len() != inputs) {
        return Err(AnalysisError::Spec("dataset mixes board sizes".into()));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(AnalysisError::Spec(
            "batch_size and learning_rate must be positive".into(),
        ));
    }
    let levels = inputs / 2 - 1;
    let mut rng = stream_rng(cfg.seed, 0);
    let mut net = Network::new(cfg.arch, inputs, 2, &mut rng);
    let mut opt = Adam::new(&net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = batch
                .iter()
                .map(|&i| dataset[i].observation.values.as_slice())
                .collect();
            let labels: Vec<usize> = batch
                .iter()
                .map(|&i| dataset[i].oracle_choice.index())
                .collect();
            let cache = net.forward(stack(&rows).view());
            let (loss, grad) = cross_entropy(&cache.output, &labels);
            if !loss.is_finite() {
                return Err(
                    RlError::Diverged(format!("supervised loss {loss} in epoch {epoch}")).into(),
                );
            }
            let grads = net.backward(&cache, &grad);
            opt.apply(&mut net, &grads);
        }
    }
    Ok(TrainedAgent::new(
        Role::Defender,
        levels,
        PolicyParams {
            arch: cfg.arch,
            network: net,
            head: Head::Logits,
            normalize: false,
        },
        content_hash(&(cfg, dataset.len())),
    ))
}

/// Share of rows on which the agent's greedy choice is graded correct.
pub fn dataset_accuracy(agent: &TrainedAgent, dataset: &[LabeledMove]) -> f64 {
    if dataset.is_empty() {
        return f64::NAN;
    }
    let mut rng = GameRng::seed_from_u64(0);
    let correct = dataset
        .iter()
        .filter(|m| {
            let p = crate::rl::encode::decode_defender_obs(&m.observation)
                .expect("dataset rows are defender observations");
            grade_move(&p, agent.choose(&p, &mut rng)).correct
        })
        .count();
    correct as f64 / dataset.len() as f64
}

/// Per-agent metrics for the RL versus supervised comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub agent: String,
    #[serde(rename = "K")]
    pub levels: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub win_rate: f64,
    pub terminal_rate: f64,
    pub fatal_rate: f64,
}

/// Plays `n_games` against `attacker` and grades every defender move.
pub fn assess_defender<A, D>(
    name: &str,
    defender: &D,
    attacker: &A,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
) -> Result<ComparisonRow, AnalysisError>
where
    A: AttackerPolicy + Sync + ?Sized,
    D: DefenderPolicy + Sync + ?Sized,
{
    let records = crate::rl::eval::play_matches(attacker, defender, start, n_games, seed, 1)?;
    let mut moves = 0usize;
    let (mut correct, mut terminal, mut fatal) = (0usize, 0usize, 0usize);
    for step in records.iter().flat_map(|r| &r.steps) {
        let g = grade_move(&step.partition, step.destroy);
        moves += 1;
        correct += g.correct as usize;
        terminal += g.terminal_mistake as usize;
        fatal += g.fatal_mistake as usize;
    }
    let wins = records
        .iter()
        .filter(|r| r.winner() == Some(Winner::Defender))
        .count();
    let per_move = |n: usize| {
        if moves == 0 {
            0.0
        } else {
            n as f64 / moves as f64
        }
    };
    Ok(ComparisonRow {
        agent: name.to_string(),
        levels: start.levels(),
        seed,
        accuracy: per_move(correct),
        win_rate: wins as f64 / n_games as f64,
        terminal_rate: per_move(terminal),
        fatal_rate: per_move(fatal),
    })
}

/// Accuracy, win rate, terminal and fatal mistake rates of both agents on
/// the same matches seeds.
pub fn compare_rl_vs_supervised<A: AttackerPolicy + Sync + ?Sized>(
    rl_agent: &TrainedAgent,
    sup_agent: &TrainedAgent,
    attacker: &A,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>, AnalysisError> {
    Ok(vec![
        assess_defender("rl", rl_agent, attacker, start, n_games, seed)?,
        assess_defender("supervised", sup_agent, attacker, start, n_games, seed)?,
    ])
}

/// Writes serializable rows as CSV with a header, even when empty.
pub fn write_csv<T: Serialize, W: Write>(
    rows: &[T],
    header: &[&str],
    out: W,
) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const COMPARISON_HEADER: [&str; 7] = [
    "agent",
    "K",
    "seed",
    "accuracy",
    "win_rate",
    "terminal_rate",
    "fatal_rate",
];

/// Share of one-hot-versus-empty presentations, over both orderings, in
/// which the agent destroys the empty set.
pub fn null_set_check<D: DefenderPolicy + ?Sized>(agent: &D, levels: usize) -> f64 {
    let mut rng = GameRng::seed_from_u64(0);
    let mut violations = 0;
    for level in 0..=levels {
        let mut one = vec![0; levels + 1];
        one[level] = 1;
        let empty = vec![0; levels + 1];
        if agent.choose(&Partition::new(one.clone(), empty.clone()), &mut rng) != DestroyChoice::A {
            violations += 1;
        }
        if agent.choose(&Partition::new(empty, one), &mut rng) != DestroyChoice::B {
            violations += 1;
        }
    }
    violations as f64 / (2 * (levels + 1)) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    /// φ(A) − φ(B) in units of the agent's board.
    pub potential_diff_units: i128,
    pub confidence: f64,
    pub correct: bool,
    pub confidence_kind: &'static str,
}

pub const CALIBRATION_HEADER: [&str; 4] = [
    "potential_diff_units",
    "confidence",
    "correct",
    "confidence_kind",
];

pub fn calibration_rows(
    agent: &TrainedAgent,
    partitions: &[Partition],
) -> Result<Vec<CalibrationRow>, AnalysisError> {
    partitions
        .iter()
        .map(|p| {
            let (pa, pb) = p.potentials()?;
            let (choice, confidence) = agent.confidence(p);
            Ok(CalibrationRow {
                potential_diff_units: pa.units as i128 - pb.units as i128,
                confidence,
                correct: grade_move(p, choice).correct,
                confidence_kind: agent.confidence_label(),
            })
        })
        .collect()
}

/// Calibration data in input order.
pub fn calibration_dump<W: Write>(
    agent: &TrainedAgent,
    partitions: &[Partition],
    out: W,
) -> Result<(), AnalysisError> {
    write_csv(
        &calibration_rows(agent, partitions)?,
        &CALIBRATION_HEADER,
        out,
    )
}

/// Random partitions for probing comparators: a spread start at a uniform
/// unit target in `[1, 2^K]`, each piece sent to A or B by a coin flip.
pub fn random_partitions(
    levels: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Partition>, AnalysisError> {
    use rand::Rng;
    let top = (1 as crate::Units) << levels;
    (0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let units = rng.random_range(1..=top);
            let start =
                StartDistribution::new(crate::start_states::StartKind::RandomSpread, levels, units)
                    .map_err(RlError::from)?;
            let state = start.sample(&mut rng).map_err(RlError::from)?;
            Ok(crate::strategies::random_partition(&state, &mut rng))
        })
        .collect()
}

/// Share of partitions on which the comparator names the larger-potential
/// side; equal potentials count as correct either way.
pub fn comparator_accuracy<C: Comparator + ?Sized>(
    comparator: &C,
    partitions: &[Partition],
) -> f64 {
    let correct = partitions
        .iter()
        .filter(|p| {
            let (pa, pb) = p.potentials().expect("partition potentials fit in units");
            pa.units == pb.units || comparator.a_is_larger(&p.a, &p.b) == (pa.units > pb.units)
        })
        .count();
    correct as f64 / partitions.len().max(1) as f64
}

/// Matches between scripted players, for building supervised datasets.
pub fn record_matches<A, D>(
    attacker: &A,
    defender: &D,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
) -> Result<Vec<MatchRecord>, AnalysisError>
where
    A: AttackerPolicy + Sync + ?Sized,
    D: DefenderPolicy + Sync + ?Sized,
{
    let mut out = Vec::with_capacity(n_games);
    for i in 0..n_games {
        let mut rng = stream_rng(seed, i as u64);
        let state = start.sample(&mut rng).map_err(RlError::from)?;
        out.push(play_match_with(attacker, defender, &state, seed, &mut rng)?);
    }
    Ok(out)
}
