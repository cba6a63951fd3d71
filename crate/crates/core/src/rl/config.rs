//! Training configuration and the checked-in defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::game::Units;
use crate::start_states::{StartDistribution, StartKind};
use crate::strategies::{AttackerKind, DefenderKind};

use super::nn::{Arch, INIT_SCHEME, NONLINEARITY, OPTIMIZER};
use super::{RlError, Role};

const DEFAULTS_TOML: &str = include_str!("../../defaults.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Epsilon-greedy Q-learning with replay and a target network.
    #[serde(alias = "value")]
    QLearn,
    /// Clipped-surrogate policy gradient with a value baseline.
    #[serde(alias = "policy_grad")]
    PolicyGradClip,
    /// Synchronous advantage actor-critic.
    #[serde(alias = "actor_critic")]
    ActorCritic,
    /// Finite-difference random search over parameters.
    #[serde(alias = "random_search")]
    RandomSearch,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::QLearn => "value",
            Algorithm::PolicyGradClip => "policy-grad",
            Algorithm::ActorCritic => "actor-critic",
            Algorithm::RandomSearch => "random-search",
        })
    }
}

impl FromStr for Algorithm {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, RlError> {
        match s {
            "value" | "qlearn" | "dqn" => Ok(Algorithm::QLearn),
            "policy-grad" | "pg" | "ppo" => Ok(Algorithm::PolicyGradClip),
            "actor-critic" | "ac" | "a2c" => Ok(Algorithm::ActorCritic),
            "random-search" | "rs" | "ars" => Ok(Algorithm::RandomSearch),
            _ => Err(RlError::Config(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// Who the learner plays against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OpponentSpec {
    Attacker {
        attacker: AttackerKind,
    },
    Defender {
        defender: DefenderKind,
    },
    /// A saved agent; its role decides which side it plays.
    Policy {
        path: PathBuf,
    },
}

impl OpponentSpec {
    /// Parses `prefix`, `mixed:0.8`, `optimal`, `policy:<file>` and so on.
    /// Plain names are read as the side opposite to `trainee`.
    pub fn parse(s: &str, trainee: Role) -> Result<Self, RlError> {
        if let Some(path) = s.strip_prefix("policy:") {
            return Ok(OpponentSpec::Policy { path: path.into() });
        }
        match trainee {
            Role::Attacker => s
                .parse::<DefenderKind>()
                .map(|defender| OpponentSpec::Defender { defender })
                .map_err(|e| RlError::Config(e.to_string())),
            Role::Defender | Role::Comparator => s
                .parse::<AttackerKind>()
                .map(|attacker| OpponentSpec::Attacker { attacker })
                .map_err(|e| RlError::Config(e.to_string())),
        }
    }
}

impl fmt::Display for OpponentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpponentSpec::Attacker { attacker } => write!(f, "{attacker}"),
            OpponentSpec::Defender { defender } => write!(f, "{defender}"),
            OpponentSpec::Policy { path } => write!(f, "policy:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub train_every: u64,
    pub learning_starts: u64,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    /// Also store every defender transition with A and B exchanged.
    pub mirror_sides: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGradParams {
    pub rollout_steps: usize,
    pub clip_ratio: f64,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticParams {
    pub rollout_steps: usize,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSearchParams {
    pub perturb_std: f64,
    pub num_directions: usize,
    pub top_fraction: f64,
    pub episodes_per_direction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayParams {
    /// Chance that the self-play attacker plays a uniformly random prefix
    /// cut instead of its binary search.
    pub attacker_explore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CommonDefaults {
    discount: f64,
    eval_interval: u64,
    eval_games: usize,
    normalize_obs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WithArch<T> {
    arch: Arch,
    learning_rate: f64,
    #[serde(flatten)]
    params: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Defaults {
    common: CommonDefaults,
    value: WithArch<ValueParams>,
    policy_grad: WithArch<PolicyGradParams>,
    actor_critic: WithArch<ActorCriticParams>,
    random_search: WithArch<RandomSearchParams>,
    self_play: SelfPlayParams,
}

fn defaults() -> &'static Defaults {
    static DEFAULTS: OnceLock<Defaults> = OnceLock::new();
    DEFAULTS.get_or_init(|| toml::from_str(DEFAULTS_TOML).expect("defaults.toml is valid"))
}

/// Start distribution of the training environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub start: StartDistribution,
}

impl EnvConfig {
    pub fn new(kind: StartKind, levels: usize, units: Units) -> Result<Self, RlError> {
        Ok(EnvConfig {
            start: StartDistribution::new(kind, levels, units)?,
        })
    }

    pub fn levels(&self) -> usize {
        self.start.levels()
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub arch: Arch,
    pub total_steps: u64,
    pub learning_rate: f64,
    pub discount: f64,
    pub seed: u64,
    pub normalize_obs: bool,
    pub env: EnvConfig,
    pub opponent: OpponentSpec,
    pub eval_interval: u64,
    pub eval_games: usize,
    pub value: ValueParams,
    pub policy_grad: PolicyGradParams,
    pub actor_critic: ActorCriticParams,
    pub random_search: RandomSearchParams,
    pub self_play: SelfPlayParams,
}

impl TrainConfig {
    /// A config filled from `defaults.toml` for `algorithm`.
    pub fn new(
        algorithm: Algorithm,
        env: EnvConfig,
        opponent: OpponentSpec,
        total_steps: u64,
        seed: u64,
    ) -> Self {
        let d = defaults();
        let (arch, learning_rate) = match algorithm {
            Algorithm::QLearn => (d.value.arch, d.value.learning_rate),
            Algorithm::PolicyGradClip => (d.policy_grad.arch, d.policy_grad.learning_rate),
            Algorithm::ActorCritic => (d.actor_critic.arch, d.actor_critic.learning_rate),
            Algorithm::RandomSearch => (d.random_search.arch, d.random_search.learning_rate),
        };
        TrainConfig {
            algorithm,
            arch,
            total_steps,
            learning_rate,
            discount: d.common.discount,
            seed,
            normalize_obs: d.common.normalize_obs,
            env,
            opponent,
            eval_interval: d.common.eval_interval,
            eval_games: d.common.eval_games,
            value: d.value.params.clone(),
            policy_grad: d.policy_grad.params.clone(),
            actor_critic: d.actor_critic.params.clone(),
            random_search: d.random_search.params.clone(),
            self_play: d.self_play.clone(),
        }
    }

    /// Role of the agent being trained, from the opponent's side. Policy
    /// file opponents need the loaded agent, see [`super::agent`].
    pub fn trainee_role(&self) -> Option<Role> {
        match &self.opponent {
            OpponentSpec::Attacker { .. } => Some(Role::Defender),
            OpponentSpec::Defender { .. } => Some(Role::Attacker),
            OpponentSpec::Policy { .. } => None,
        }
    }

    // `!(x > 0.0)` also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |what: &str| Err(RlError::Config(what.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        match self.algorithm {
            Algorithm::QLearn => {
                let v = &self.value;
                if v.batch_size == 0 || v.replay_capacity < v.batch_size {
                    return bad("replay_capacity must hold at least one batch");
                }
                if v.train_every == 0 || v.target_sync_interval == 0 {
                    return bad("train_every and target_sync_interval must be positive");
                }
                if !(0.0..=1.0).contains(&v.epsilon_start) || !(0.0..=1.0).contains(&v.epsilon_end)
                {
                    return bad("epsilon values must lie in [0, 1]");
                }
            }
            Algorithm::PolicyGradClip => {
                let p = &self.policy_grad;
                if p.rollout_steps == 0 || p.minibatch_size == 0 || p.epochs_per_batch == 0 {
                    return bad("policy-grad batch sizes must be positive");
                }
                if !(p.clip_ratio > 0.0) {
                    return bad("clip_ratio must be positive");
                }
            }
            Algorithm::ActorCritic => {
                if self.actor_critic.rollout_steps == 0 {
                    return bad("rollout_steps must be positive");
                }
            }
            Algorithm::RandomSearch => {
                let r = &self.random_search;
                if r.num_directions == 0 || r.episodes_per_direction == 0 {
                    return bad("random search needs directions and episodes");
                }
                if !(r.top_fraction > 0.0 && r.top_fraction <= 1.0) {
                    return bad("top_fraction must lie in (0, 1]");
                }
                if r.perturb_std < 0.0 {
                    return bad("perturb_std must be non-negative");
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON of the config and the fixed
    /// network constants.
    pub fn hash(&self) -> String {
        content_hash(&(self, NONLINEARITY, INIT_SCHEME, OPTIMIZER))
    }
}

/// Hex SHA-256 of a value's JSON form.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config values serialize");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> EnvConfig {
        EnvConfig::new(StartKind::RandomSpread, 5, 30).unwrap()
    }

    #[test]
    fn defaults_parse() {
        let cfg = TrainConfig::new(
            Algorithm::QLearn,
            env(),
            OpponentSpec::parse("mixed", Role::Defender).unwrap(),
            1000,
            1,
        );
        cfg.validate().unwrap();
        assert_eq!(cfg.trainee_role(), Some(Role::Defender));
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = TrainConfig::new(
            Algorithm::QLearn,
            env(),
            OpponentSpec::parse("prefix", Role::Defender).unwrap(),
            1000,
            1,
        );
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let mut cfg = TrainConfig::new(
            Algorithm::ActorCritic,
            env(),
            OpponentSpec::parse("optimal", Role::Attacker).unwrap(),
            10,
            0,
        );
        cfg.discount = 0.0;
        assert!(cfg.validate().is_err());
        cfg.discount = 1.0;
        cfg.learning_rate = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn opponent_names() {
        assert_eq!(
            OpponentSpec::parse("optimal", Role::Attacker).unwrap(),
            OpponentSpec::Defender {
                defender: DefenderKind::Optimal
            }
        );
        assert!(matches!(
            OpponentSpec::parse("policy:x.json", Role::Defender).unwrap(),
            OpponentSpec::Policy { .. }
        ));
        assert!(OpponentSpec::parse("nobody", Role::Defender).is_err());
    }
}
