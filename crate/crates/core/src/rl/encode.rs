//! Observation layouts and the attacker's level action.

use serde::{Deserialize, Serialize};

use crate::game::{GameState, Partition};
use crate::strategies::balanced_split_at_level;

use super::RlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Counts of A followed by counts of B, `2(K+1)` entries.
    DefenderConcat,
    /// Counts of the state, `K+1` entries.
    AttackerState,
}

impl Layout {
    pub fn len(self, levels: usize) -> usize {
        match self {
            Layout::DefenderConcat => 2 * (levels + 1),
            Layout::AttackerState => levels + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVec {
    pub values: Vec<f64>,
    pub layout: Layout,
}

/// Multiplies entry `i` of a `K+1` block by `2^-(K-i)`, turning counts
/// into per-level potential. Off unless requested.
fn scale_block(block: &mut [f64]) {
    let levels = block.len() - 1;
    for (i, v) in block.iter_mut().enumerate() {
        *v /= (1u64 << (levels - i)) as f64;
    }
}

pub fn encode_defender_obs(partition: &Partition) -> ObservationVec {
    encode_defender_obs_with(partition, false)
}

pub fn encode_defender_obs_with(partition: &Partition, normalize: bool) -> ObservationVec {
    let mut values: Vec<f64> = partition
        .a
        .iter()
        .chain(&partition.b)
        .map(|&n| n as f64)
        .collect();
    if normalize {
        let half = values.len() / 2;
        let (a, b) = values.split_at_mut(half);
        scale_block(a);
        scale_block(b);
    }
    ObservationVec {
        values,
        layout: Layout::DefenderConcat,
    }
}

/// Inverse of [`encode_defender_obs`] for raw-count observations.
pub fn decode_defender_obs(obs: &ObservationVec) -> Result<Partition, RlError> {
    if obs.layout != Layout::DefenderConcat
        || !obs.values.len().is_multiple_of(2)
        || obs.values.len() < 4
    {
        return Err(RlError::Layout(format!(
            "not a defender observation ({} entries)",
            obs.values.len()
        )));
    }
    let to_count = |v: &f64| -> Result<u64, RlError> {
        if *v >= 0.0 && v.fract() == 0.0 {
            Ok(*v as u64)
        } else {
            Err(RlError::Layout(format!("entry {v} is not a piece count")))
        }
    };
    let half = obs.values.len() / 2;
    let a = obs.values[..half]
        .iter()
        .map(to_count)
        .collect::<Result<_, _>>()?;
    let b = obs.values[half..]
        .iter()
        .map(to_count)
        .collect::<Result<_, _>>()?;
    Ok(Partition::new(a, b))
}

pub fn encode_attacker_obs(state: &GameState) -> ObservationVec {
    encode_attacker_obs_with(state, false)
}

pub fn encode_attacker_obs_with(state: &GameState, normalize: bool) -> ObservationVec {
    let mut values: Vec<f64> = state.counts().iter().map(|&n| n as f64).collect();
    if normalize {
        scale_block(&mut values);
    }
    ObservationVec {
        values,
        layout: Layout::AttackerState,
    }
}

/// The attacker's action: a level `ℓ`. Pieces above `ℓ` go to A, pieces
/// below to B, and level `ℓ` is divided to bring the two potentials as
/// close as possible, an odd piece going to B.
pub fn attacker_action_to_partition(state: &GameState, level: usize) -> Result<Partition, RlError> {
    if level > state.levels() {
        return Err(RlError::Action {
            action: level,
            limit: state.levels(),
        });
    }
    if state.is_terminal().is_some() {
        return Err(RlError::Game(crate::game::GameError::Terminal(
            state.clone(),
        )));
    }
    Ok(balanced_split_at_level(state, level))
}
