//! Frozen-policy evaluation.

use serde::{Deserialize, Serialize};

use crate::game::{
    play_match_with, stream_rng, AttackerPolicy, DefenderPolicy, MatchRecord, Winner,
};
use crate::start_states::StartDistribution;

use super::agent::TrainedAgent;
use super::config::OpponentSpec;
use super::env::Opponent;
use super::{RlError, Role};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub games: usize,
    pub wins: usize,
    pub win_rate: f64,
    pub mean_reward: f64,
    /// 95% Wilson score interval for the win rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl EvalReport {
    pub fn from_wins(wins: usize, games: usize) -> Self {
        let rate = wins as f64 / games as f64;
        let (lo, hi) = wilson_interval(wins, games, 1.96);
        EvalReport {
            games,
            wins,
            win_rate: rate,
            mean_reward: 2.0 * rate - 1.0,
            wilson_low: lo,
            wilson_high: hi,
        }
    }
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Loads policy files and wraps scripted players.
pub fn resolve_opponent(spec: &OpponentSpec) -> Result<Opponent, RlError> {
    Ok(match spec {
        OpponentSpec::Attacker { attacker } => Opponent::Attacker(Box::new(attacker.clone())),
        OpponentSpec::Defender { defender } => Opponent::Defender(Box::new(*defender)),
        OpponentSpec::Policy { path } => {
            let agent = TrainedAgent::load(path)?;
            match agent.role {
                Role::Attacker | Role::Comparator => Opponent::Attacker(Box::new(agent)),
                Role::Defender => Opponent::Defender(Box::new(agent)),
            }
        }
    })
}

/// Plays `n_games` matches; match `i` draws its start state and all
/// randomness from stream `i` of `seed`. Matches are spread over `workers`
/// threads without changing any result.
pub fn play_matches<A, D>(
    attacker: &A,
    defender: &D,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<MatchRecord>, RlError>
where
    A: AttackerPolicy + Sync + ?Sized,
    D: DefenderPolicy + Sync + ?Sized,
{
    if n_games == 0 {
        return Err(RlError::Config("n_games must be positive".into()));
    }
    let run = |i: usize| -> Result<MatchRecord, RlError> {
        let mut rng = stream_rng(seed, i as u64);
        let state = start.sample(&mut rng)?;
        Ok(play_match_with(attacker, defender, &state, seed, &mut rng)?)
    };
    let workers = workers.clamp(1, n_games);
    if workers == 1 {
        return (0..n_games).map(run).collect();
    }
    let chunk = n_games.div_ceil(workers);
    let results: Vec<Result<Vec<MatchRecord>, RlError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                scope.spawn(move || {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(n_games);
                    (lo..hi).map(run).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(n_games);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn count_wins(records: &[MatchRecord], side: Winner) -> usize {
    records.iter().filter(|r| r.winner() == Some(side)).count()
}

pub fn evaluate_defender<A, D>(
    defender: &D,
    attacker: &A,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
) -> Result<EvalReport, RlError>
where
    A: AttackerPolicy + Sync + ?Sized,
    D: DefenderPolicy + Sync + ?Sized,
{
    let records = play_matches(attacker, defender, start, n_games, seed, 1)?;
    Ok(EvalReport::from_wins(
        count_wins(&records, Winner::Defender),
        n_games,
    ))
}

pub fn evaluate_attacker<A, D>(
    attacker: &A,
    defender: &D,
    start: &StartDistribution,
    n_games: usize,
    seed: u64,
) -> Result<EvalReport, RlError>
where
    A: AttackerPolicy + Sync + ?Sized,
    D: DefenderPolicy + Sync + ?Sized,
{
    let records = play_matches(attacker, defender, start, n_games, seed, 1)?;
    Ok(EvalReport::from_wins(
        count_wins(&records, Winner::Attacker),
        n_games,
    ))
}

/// Win rate of a frozen agent, greedy actions, against `opponent`.
pub fn evaluate_agent(
    agent: &TrainedAgent,
    opponent: &Opponent,
    n_games: usize,
    start: &StartDistribution,
    seed: u64,
) -> Result<EvalReport, RlError> {
    evaluate_agent_with_workers(agent, opponent, n_games, start, seed, 1)
}

pub fn evaluate_agent_with_workers(
    agent: &TrainedAgent,
    opponent: &Opponent,
    n_games: usize,
    start: &StartDistribution,
    seed: u64,
    workers: usize,
) -> Result<EvalReport, RlError> {
    if start.levels() > agent.levels {
        return Err(RlError::Config(format!(
            "a K={} agent cannot be evaluated on K={}",
            agent.levels,
            start.levels()
        )));
    }
    let (records, side) = match opponent {
        Opponent::Attacker(attacker) => {
            if agent.role == Role::Attacker {
                return Err(RlError::Config(
                    "two attackers cannot play each other".into(),
                ));
            }
            (
                play_matches(attacker.as_ref(), agent, start, n_games, seed, workers)?,
                Winner::Defender,
            )
        }
        Opponent::Defender(defender) => {
            if agent.role == Role::Defender {
                return Err(RlError::Config(
                    "two defenders cannot play each other".into(),
                ));
            }
            (
                play_matches(agent, defender.as_ref(), start, n_games, seed, workers)?,
                Winner::Attacker,
            )
        }
    };
    Ok(EvalReport::from_wins(count_wins(&records, side), n_games))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::start_states::StartKind;
    use crate::strategies::{AttackerKind, DefenderKind};

    #[test]
    fn wilson_interval_brackets_the_rate() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(100, 100, 1.96);
        assert!(hi > 1.0 - 1e-12 && lo > 0.96);
    }

    #[test]
    fn optimal_defender_sweeps_sub_critical_starts() {
        let start = StartDistribution::new(StartKind::RandomSpread, 5, 31).unwrap();
        let r = evaluate_defender(
            &DefenderKind::Optimal,
            &AttackerKind::mixed(0.8).unwrap(),
            &start,
            300,
            4,
        )
        .unwrap();
        assert_eq!(r.win_rate, 1.0);
        let random = evaluate_defender(
            &DefenderKind::Random,
            &AttackerKind::mixed(0.8).unwrap(),
            &start,
            300,
            4,
        )
        .unwrap();
        assert!(random.win_rate < r.win_rate);
    }

    #[test]
    fn zero_games_is_an_error() {
        let start = StartDistribution::new(StartKind::Level0, 3, 5).unwrap();
        assert!(
            evaluate_defender(&DefenderKind::Optimal, &AttackerKind::Prefix, &start, 0, 1).is_err()
        );
    }

    #[test]
    fn workers_do_not_change_results() {
        let start = StartDistribution::new(StartKind::RandomSpread, 6, 60).unwrap();
        let att = AttackerKind::mixed(0.5).unwrap();
        let one = play_matches(&att, &DefenderKind::Random, &start, 101, 8, 1).unwrap();
        let four = play_matches(&att, &DefenderKind::Random, &start, 101, 8, 4).unwrap();
        assert_eq!(one, four);
    }
}
