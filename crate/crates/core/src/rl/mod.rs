//! Learning harness: encodings, small dense networks, the four training
//! algorithms, alternating two-learner training and comparator self-play.

pub mod agent;
pub mod binary_search;
pub mod config;
pub mod encode;
pub mod env;
pub mod eval;
pub mod learner;
pub mod nn;
pub mod policy;
pub mod random_search;
pub mod value;

use thiserror::Error;

use crate::game::GameError;
use crate::start_states::StartError;

pub use agent::{CurvePoint, Role, TrainedAgent};
pub use config::{Algorithm, EnvConfig, OpponentSpec, TrainConfig};
pub use env::{GameEnv, Opponent};
pub use eval::{evaluate_agent, EvalReport};
pub use learner::Learner;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("observation layout: {0}")]
    Layout(String),
    #[error("action {action} out of range 0..={limit}")]
    Action { action: usize, limit: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Start(#[from] StartError),
    #[error("weight file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl RlError {
    /// Whether the error stems from the request rather than from running it.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RlError::Config(_) | RlError::Layout(_) | RlError::Start(_) | RlError::Format(_)
        )
    }
}

/// Fresh learner for `cfg.algorithm`.
pub fn make_learner(cfg: &TrainConfig, role: Role, levels: usize) -> Box<dyn Learner> {
    match cfg.algorithm {
        Algorithm::QLearn => Box::new(value::ValueLearner::new(cfg, role, levels)),
        Algorithm::PolicyGradClip => Box::new(policy::PolicyGradLearner::new(cfg, role, levels)),
        Algorithm::ActorCritic => Box::new(policy::ActorCriticLearner::new(cfg, role, levels)),
        Algorithm::RandomSearch => {
            Box::new(random_search::RandomSearchLearner::new(cfg, role, levels))
        }
    }
}

/// Final snapshot with its curve, which always ends at the last step.
fn finish(learner: &mut dyn Learner, env: &GameEnv) -> Result<TrainedAgent, RlError> {
    if learner.curve().last().map(|p| p.step) != Some(learner.steps_done()) {
        learner.record_eval(env)?;
    }
    let mut agent = learner.snapshot();
    agent.train_curve = learner.curve().to_vec();
    Ok(agent)
}

/// Trains one agent against the configured opponent with whatever
/// algorithm the config names.
pub fn train(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    cfg.validate()?;
    let opponent = eval::resolve_opponent(&cfg.opponent)?;
    let role = opponent.trainee_role();
    let mut env = GameEnv::new(cfg.env.start, opponent, cfg.normalize_obs, cfg.seed);
    let mut learner = make_learner(cfg, role, cfg.env.levels());
    learner.train(&mut env, cfg.total_steps)?;
    finish(learner.as_mut(), &env)
}

fn require(cfg: &TrainConfig, algorithm: Algorithm) -> Result<(), RlError> {
    if cfg.algorithm == algorithm {
        Ok(())
    } else {
        Err(RlError::Config(format!(
            "expected algorithm {algorithm}, config says {}",
            cfg.algorithm
        )))
    }
}

pub fn train_value_learner(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    require(cfg, Algorithm::QLearn)?;
    train(cfg)
}

pub fn train_policy_grad(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    require(cfg, Algorithm::PolicyGradClip)?;
    train(cfg)
}

pub fn train_actor_critic(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    require(cfg, Algorithm::ActorCritic)?;
    train(cfg)
}

pub fn train_random_search(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    require(cfg, Algorithm::RandomSearch)?;
    train(cfg)
}

/// Trains an attacker (`cfg_attacker`) and a defender (`cfg_defender`)
/// against each other. The defender trains first; every `switch_every`
/// steps the training side is frozen and the other side trains against
/// its greedy snapshot. The total budget is the larger of the two
/// `total_steps`. Returns `(attacker, defender)`.
pub fn train_multiagent(
    cfg_attacker: &TrainConfig,
    cfg_defender: &TrainConfig,
    switch_every: u64,
) -> Result<(TrainedAgent, TrainedAgent), RlError> {
    cfg_attacker.validate()?;
    cfg_defender.validate()?;
    if switch_every == 0 {
        return Err(RlError::Config("switch_every must be positive".into()));
    }
    let levels = cfg_attacker.env.levels();
    if cfg_defender.env.levels() != levels {
        return Err(RlError::Config(format!(
            "attacker K={levels} and defender K={} differ",
            cfg_defender.env.levels()
        )));
    }
    let mut attacker = make_learner(cfg_attacker, Role::Attacker, levels);
    let mut defender = make_learner(cfg_defender, Role::Defender, levels);
    let mut attacker_env = GameEnv::new(
        cfg_attacker.env.start,
        Opponent::Defender(Box::new(defender.snapshot())),
        cfg_attacker.normalize_obs,
        cfg_attacker.seed,
    );
    let mut defender_env = GameEnv::new(
        cfg_defender.env.start,
        Opponent::Attacker(Box::new(attacker.snapshot())),
        cfg_defender.normalize_obs,
        cfg_defender.seed,
    );
    let budget = cfg_attacker.total_steps.max(cfg_defender.total_steps);
    let mut done = 0;
    let mut defender_turn = true;
    while done < budget {
        let slice = switch_every.min(budget - done);
        if defender_turn {
            defender_env.set_opponent(Opponent::Attacker(Box::new(attacker.snapshot())));
            defender.train(&mut defender_env, slice)?;
        } else {
            attacker_env.set_opponent(Opponent::Defender(Box::new(defender.snapshot())));
            attacker.train(&mut attacker_env, slice)?;
        }
        done += slice;
        defender_turn = !defender_turn;
    }
    attacker_env.set_opponent(Opponent::Defender(Box::new(defender.snapshot())));
    defender_env.set_opponent(Opponent::Attacker(Box::new(attacker.snapshot())));
    Ok((
        finish(attacker.as_mut(), &attacker_env)?,
        finish(defender.as_mut(), &defender_env)?,
    ))
}

/// Trains one comparator that plays both sides: it defends by destroying
/// the set it values higher and attacks by binary search over its own
/// comparisons. The configured opponent is used only for the curve.
pub fn train_self_play(cfg: &TrainConfig) -> Result<TrainedAgent, RlError> {
    require(cfg, Algorithm::QLearn)?;
    cfg.validate()?;
    let eval_opponent = eval::resolve_opponent(&cfg.opponent)?;
    if eval_opponent.trainee_role() != Role::Defender {
        return Err(RlError::Config(
            "self-play is evaluated as a defender; give an attacker opponent".into(),
        ));
    }
    let levels = cfg.env.levels();
    let mut learner = value::ValueLearner::self_play(cfg, levels, eval_opponent);
    let placeholder = learner.self_play_opponent();
    let mut env = GameEnv::new(cfg.env.start, placeholder, cfg.normalize_obs, cfg.seed);
    learner.train(&mut env, cfg.total_steps)?;
    finish(&mut learner, &env)
}
