//! Pieces shared by every training algorithm.

use ndarray::Array2;

use crate::game::stream_rng;

use super::agent::{CurvePoint, Head, PolicyParams, TrainedAgent};
use super::config::TrainConfig;
use crate::start_states::StartDistribution;

use super::env::{GameEnv, Opponent};
use super::eval::evaluate_agent;
use super::nn::Network;
use super::{RlError, Role};

/// Separates the learner's generator from environment and evaluation streams.
pub(crate) const LEARNER_STREAM: u64 = 1;
const EVAL_SALT: u64 = 0xe7a1_0000_0000_0001;

/// A training algorithm that can be advanced in slices, which is what
/// alternating multiagent training needs.
pub trait Learner {
    /// Runs `steps` more environment steps.
    fn train(&mut self, env: &mut GameEnv, steps: u64) -> Result<(), RlError>;
    /// Frozen copy of the current greedy policy.
    fn snapshot(&self) -> TrainedAgent;
    fn steps_done(&self) -> u64;
    fn curve(&self) -> &[CurvePoint];
    /// Appends an evaluation point at the current step count.
    fn record_eval(&mut self, env: &GameEnv) -> Result<(), RlError>;
    /// Drops any episode in progress, for moving to a different environment.
    fn abandon_episode(&mut self) {}
}

pub(crate) fn learner_rng(cfg: &TrainConfig) -> crate::game::GameRng {
    stream_rng(cfg.seed, LEARNER_STREAM)
}

pub(crate) fn make_agent(
    cfg: &TrainConfig,
    role: Role,
    levels: usize,
    network: &Network,
    head: Head,
) -> TrainedAgent {
    TrainedAgent::new(
        role,
        levels,
        PolicyParams {
            arch: cfg.arch,
            network: network.clone(),
            head,
            normalize: cfg.normalize_obs,
        },
        cfg.hash(),
    )
}

/// Evaluates `agent` against the environment's current opponent with the
/// config's evaluation budget.
pub(crate) fn eval_point(
    cfg: &TrainConfig,
    env: &GameEnv,
    agent: &TrainedAgent,
    step: u64,
) -> Result<CurvePoint, RlError> {
    eval_point_against(cfg, env.opponent(), &env.start, agent, step)
}

pub(crate) fn eval_point_against(
    cfg: &TrainConfig,
    opponent: &Opponent,
    start: &StartDistribution,
    agent: &TrainedAgent,
    step: u64,
) -> Result<CurvePoint, RlError> {
    if !agent.params.network.is_finite() {
        return Err(RlError::Diverged(format!(
            "non-finite parameters at step {step}"
        )));
    }
    let report = evaluate_agent(agent, opponent, cfg.eval_games, start, cfg.seed ^ EVAL_SALT)?;
    if report.win_rate.is_nan() {
        return Err(RlError::Diverged(format!("NaN win rate at step {step}")));
    }
    Ok(CurvePoint {
        step,
        win_rate: report.win_rate,
    })
}

/// Stacks row vectors into a batch matrix.
pub(crate) fn stack(rows: &[&[f64]]) -> Array2<f64> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), dim));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&ndarray::ArrayView1::from(*r));
    }
    out
}

pub(crate) fn check_finite(loss: f64, step: u64) -> Result<(), RlError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(RlError::Diverged(format!(
            "loss became {loss} at step {step}"
        )))
    }
}

/// Discounted returns for one rollout. `done[t]` ends an episode after step
/// `t`; `bootstrap` is the value estimate after the last step if the
/// rollout was cut mid-episode.
pub(crate) fn discounted_returns(
    rewards: &[f64],
    done: &[bool],
    bootstrap: f64,
    discount: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for t in (0..rewards.len()).rev() {
        if done[t] {
            running = 0.0;
        }
        running = rewards[t] + discount * running;
        out[t] = running;
    }
    out
}
