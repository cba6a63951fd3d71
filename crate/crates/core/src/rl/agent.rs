//! Trained agents: parameters, role, weight files, and the adapters that
//! let them play matches.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{cross_k_embed, cross_k_embed_counts};
use crate::game::{AttackerPolicy, DefenderPolicy, DestroyChoice, GameRng, GameState, Partition};
use crate::strategies::optimal_defender_choice;

use super::binary_search::{binary_search_partition, Comparator};
use super::encode::{attacker_action_to_partition, encode_attacker_obs_with, Layout};
use super::nn::{argmax, argmax_random_ties, softmax, Arch, Network};
use super::RlError;

pub const WEIGHT_FORMAT: &str = "ess-agent";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Defender,
    Attacker,
    /// Set comparator used both to defend and, through binary search, to attack.
    Comparator,
}

impl Role {
    pub fn layout(self) -> Layout {
        match self {
            Role::Attacker => Layout::AttackerState,
            Role::Defender | Role::Comparator => Layout::DefenderConcat,
        }
    }

    pub fn action_dim(self, levels: usize) -> usize {
        match self {
            Role::Attacker => levels + 1,
            Role::Defender | Role::Comparator => 2,
        }
    }
}

/// What the network outputs mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    QValues,
    Logits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: Arch,
    pub network: Network,
    pub head: Head,
    pub normalize: bool,
}

impl PolicyParams {
    pub fn action_dim(&self) -> usize {
        self.network.outputs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAgent {
    pub format: String,
    pub version: u32,
    pub role: Role,
    #[serde(rename = "K")]
    pub levels: usize,
    pub params: PolicyParams,
    pub train_curve: Vec<CurvePoint>,
    pub config_hash: String,
}

impl TrainedAgent {
    pub fn new(role: Role, levels: usize, params: PolicyParams, config_hash: String) -> Self {
        TrainedAgent {
            format: WEIGHT_FORMAT.to_string(),
            version: WEIGHT_VERSION,
            role,
            levels,
            params,
            train_curve: Vec::new(),
            config_hash,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("agents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, RlError> {
        let agent: TrainedAgent =
            serde_json::from_str(text).map_err(|e| RlError::Format(e.to_string()))?;
        if agent.format != WEIGHT_FORMAT || agent.version != WEIGHT_VERSION {
            return Err(RlError::Format(format!(
                "unsupported weight file {} v{}",
                agent.format, agent.version
            )));
        }
        let inputs = agent.role.layout().len(agent.levels);
        let outputs = agent.role.action_dim(agent.levels);
        let net = &agent.params.network;
        if net.inputs() != inputs || net.outputs() != outputs {
            return Err(RlError::Format(format!(
                "network shape {}x{} does not fit a K={} {:?}",
                net.inputs(),
                net.outputs(),
                agent.levels,
                agent.role
            )));
        }
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<(), RlError> {
        fs::write(path, self.to_json()).map_err(|e| RlError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RlError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RlError::Io(format!("{}: {e}", path.display())))?;
        TrainedAgent::from_json(&text)
    }

    fn check_levels(&self, levels: usize) {
        assert!(
            levels <= self.levels,
            "a K={} agent cannot play K={levels}",
            self.levels
        );
    }

    /// Network outputs for a partition, embedding smaller boards top-aligned.
    pub fn defender_scores(&self, partition: &Partition) -> Vec<f64> {
        let levels = partition.levels();
        self.check_levels(levels);
        let a = cross_k_embed_counts(&partition.a, self.levels);
        let b = cross_k_embed_counts(&partition.b, self.levels);
        let p = Partition::new(a, b);
        let obs = super::encode::encode_defender_obs_with(&p, self.params.normalize);
        self.params.network.predict(&obs.values)
    }

    /// Network outputs for an attacker observation of `state`.
    pub fn attacker_scores(&self, state: &GameState) -> Vec<f64> {
        self.check_levels(state.levels());
        let embedded = cross_k_embed(state, self.levels).expect("levels checked");
        let obs = encode_attacker_obs_with(&embedded, self.params.normalize);
        self.params.network.predict(&obs.values)
    }

    /// Greedy level for an attacker agent, in the agent's own board. On a
    /// smaller board the level is shifted back down and clamped to 0.
    pub fn attacker_level(&self, state: &GameState) -> usize {
        let level = argmax(&self.attacker_scores(state));
        let shift = self.levels - state.levels();
        level.saturating_sub(shift)
    }

    /// Confidence in the preferred destroy choice: softmax probability for
    /// policy heads, half the value gap (clamped to 1) for value heads.
    pub fn confidence(&self, partition: &Partition) -> (DestroyChoice, f64) {
        let scores = self.defender_scores(partition);
        let choice = DestroyChoice::from_index(argmax(&scores));
        let conf = match self.params.head {
            Head::Logits => softmax(&scores)[choice.index()],
            Head::QValues => ((scores[0] - scores[1]).abs() / 2.0).min(1.0),
        };
        (choice, conf)
    }

    pub fn confidence_label(&self) -> &'static str {
        match self.params.head {
            Head::Logits => "softmax_prob",
            Head::QValues => "value_gap",
        }
    }
}

impl DefenderPolicy for TrainedAgent {
    fn choose(&self, partition: &Partition, rng: &mut GameRng) -> DestroyChoice {
        match self.role {
            Role::Defender | Role::Comparator => {
                DestroyChoice::from_index(argmax_random_ties(&self.defender_scores(partition), rng))
            }
            // An attacker file asked to defend falls back to exact play.
            Role::Attacker => optimal_defender_choice(partition),
        }
    }
}

impl Comparator for TrainedAgent {
    /// The set the network would destroy is the larger one; ties say A.
    fn a_is_larger(&self, a: &[u64], b: &[u64]) -> bool {
        let scores = self.defender_scores(&Partition::new(a.to_vec(), b.to_vec()));
        scores[0] >= scores[1]
    }
}

impl AttackerPolicy for TrainedAgent {
    fn partition(&self, state: &GameState, _rng: &mut GameRng) -> Partition {
        match self.role {
            Role::Attacker => attacker_action_to_partition(state, self.attacker_level(state))
                .expect("greedy level is in range"),
            Role::Comparator | Role::Defender => binary_search_partition(state, self).partition,
        }
    }
}

/// Comparator attacker that sometimes plays a uniformly random prefix cut.
pub struct ExploringComparatorAttacker {
    pub agent: TrainedAgent,
    pub explore: f64,
}

impl AttackerPolicy for ExploringComparatorAttacker {
    fn partition(&self, state: &GameState, rng: &mut GameRng) -> Partition {
        if self.explore > 0.0 && rng.random::<f64>() < self.explore {
            random_prefix_cut(state, rng)
        } else {
            binary_search_partition(state, &self.agent).partition
        }
    }
}

/// A prefix partition at a uniformly drawn cut position.
pub fn random_prefix_cut(state: &GameState, rng: &mut GameRng) -> Partition {
    let counts = state.counts();
    let cut = rng.random_range(0..=state.total_pieces());
    let mut left = cut;
    let mut a = vec![0; counts.len()];
    for level in (0..counts.len()).rev() {
        let take = left.min(counts[level]);
        a[level] = take;
        left -= take;
    }
    let b = counts.iter().zip(&a).map(|(n, x)| n - x).collect();
    Partition::new(a, b)
}
