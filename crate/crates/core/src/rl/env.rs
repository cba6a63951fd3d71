//! Single-agent view of the game for one side, the other side fixed.

use crate::game::{
    stream_rng, AttackerPolicy, DefenderPolicy, DestroyChoice, GameRng, GameState, Partition,
    Winner,
};
use crate::start_states::StartDistribution;

use super::encode::{
    attacker_action_to_partition, encode_attacker_obs_with, encode_defender_obs_with,
};
use super::{RlError, Role};
use crate::analysis::cross_k_embed;

/// Keeps episode streams apart from the learner's own generator.
const EPISODE_SALT: u64 = 0x5eed_e915_0de5_0001;

pub enum Opponent {
    Attacker(Box<dyn AttackerPolicy + Send + Sync>),
    Defender(Box<dyn DefenderPolicy + Send + Sync>),
}

impl Opponent {
    /// Role of the agent that plays against this opponent.
    pub fn trainee_role(&self) -> Role {
        match self {
            Opponent::Attacker(_) => Role::Defender,
            Opponent::Defender(_) => Role::Attacker,
        }
    }
}

pub struct StepOutcome {
    pub reward: f64,
    /// `None` once the episode has ended.
    pub next_obs: Option<Vec<f64>>,
    pub winner: Option<Winner>,
}

/// Episode `i` of an environment seeded with `s` always starts from the
/// same state and sees the same opponent randomness.
pub struct GameEnv {
    pub start: StartDistribution,
    pub normalize: bool,
    opponent: Opponent,
    seed: u64,
    episodes: u64,
    rng: GameRng,
    state: Option<GameState>,
    pending: Option<Partition>,
    /// Board size the trainee sees when larger than the start distribution's.
    embed_levels: Option<usize>,
}

impl GameEnv {
    pub fn new(start: StartDistribution, opponent: Opponent, normalize: bool, seed: u64) -> Self {
        GameEnv {
            start,
            normalize,
            opponent,
            seed,
            episodes: 0,
            rng: stream_rng(seed ^ EPISODE_SALT, 0),
            state: None,
            pending: None,
            embed_levels: None,
        }
    }

    /// Plays every episode on a `levels`-level board, start states embedded
    /// top-aligned. Lets a larger agent train on a smaller game.
    pub fn embedded(mut self, levels: usize) -> Result<Self, RlError> {
        if levels < self.start.levels() {
            return Err(RlError::Config(format!(
                "cannot embed K={} starts into K={levels}",
                self.start.levels()
            )));
        }
        self.embed_levels = Some(levels);
        Ok(self)
    }

    pub fn role(&self) -> Role {
        self.opponent.trainee_role()
    }

    pub fn levels(&self) -> usize {
        self.embed_levels.unwrap_or(self.start.levels())
    }

    pub fn obs_dim(&self) -> usize {
        self.role().layout().len(self.levels())
    }

    pub fn action_dim(&self) -> usize {
        self.role().action_dim(self.levels())
    }

    pub fn set_opponent(&mut self, opponent: Opponent) {
        assert_eq!(
            opponent.trainee_role(),
            self.role(),
            "opponent must play the same side"
        );
        self.opponent = opponent;
    }

    pub fn opponent(&self) -> &Opponent {
        &self.opponent
    }

    pub fn episodes_started(&self) -> u64 {
        self.episodes
    }

    /// Marks `n` episode indices as used, for callers driving `reset_to`.
    pub fn skip_episodes(&mut self, n: u64) {
        self.episodes += n;
    }

    /// Starts the next episode.
    pub fn reset(&mut self) -> Vec<f64> {
        let index = self.episodes;
        self.episodes += 1;
        self.reset_to(index)
    }

    /// Starts episode `index` without advancing the episode counter.
    pub fn reset_to(&mut self, index: u64) -> Vec<f64> {
        self.rng = stream_rng(self.seed ^ EPISODE_SALT, index);
        let state = self
            .start
            .sample(&mut self.rng)
            .expect("start distribution validated at construction");
        let state = match self.embed_levels {
            Some(big) => cross_k_embed(&state, big).expect("embedding checked at construction"),
            None => state,
        };
        self.begin_turn(state)
    }

    fn begin_turn(&mut self, state: GameState) -> Vec<f64> {
        let obs = match &self.opponent {
            Opponent::Attacker(attacker) => {
                let partition = attacker.partition(&state, &mut self.rng);
                let obs = encode_defender_obs_with(&partition, self.normalize).values;
                self.pending = Some(partition);
                obs
            }
            Opponent::Defender(_) => encode_attacker_obs_with(&state, self.normalize).values,
        };
        self.state = Some(state);
        obs
    }

    /// Current state; the pending partition is visible for defender runs.
    pub fn state(&self) -> Option<&GameState> {
        self.state.as_ref()
    }

    pub fn pending_partition(&self) -> Option<&Partition> {
        self.pending.as_ref()
    }

    pub fn step(&mut self, action: usize) -> StepOutcome {
        let state = self.state.take().expect("step called after reset");
        let (partition, destroy) = match &self.opponent {
            Opponent::Attacker(_) => (
                self.pending
                    .take()
                    .expect("defender turns have a partition"),
                DestroyChoice::from_index(action),
            ),
            Opponent::Defender(defender) => {
                let partition = attacker_action_to_partition(&state, action)
                    .expect("action in range and state live");
                let destroy = defender.choose(&partition, &mut self.rng);
                (partition, destroy)
            }
        };
        let next = state
            .apply_move(&partition, destroy)
            .expect("environment partitions are valid");
        match next.is_terminal() {
            Some(winner) => {
                let won = match self.role() {
                    Role::Attacker => winner == Winner::Attacker,
                    _ => winner == Winner::Defender,
                };
                StepOutcome {
                    reward: if won { 1.0 } else { -1.0 },
                    next_obs: None,
                    winner: Some(winner),
                }
            }
            None => StepOutcome {
                reward: 0.0,
                next_obs: Some(self.begin_turn(next)),
                winner: None,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::start_states::StartKind;
    use crate::strategies::{AttackerKind, DefenderKind};

    fn dist() -> StartDistribution {
        StartDistribution::new(StartKind::RandomSpread, 4, 15).unwrap()
    }

    #[test]
    fn optimal_actions_win_defender_episodes() {
        let mut env = GameEnv::new(
            dist(),
            Opponent::Attacker(Box::new(AttackerKind::Prefix)),
            false,
            3,
        );
        for _ in 0..20 {
            let mut obs = env.reset();
            loop {
                let p = Partition::new(
                    obs[..5].iter().map(|&v| v as u64).collect(),
                    obs[5..].iter().map(|&v| v as u64).collect(),
                );
                let a = crate::strategies::optimal_defender_choice(&p).index();
                let out = env.step(a);
                match out.next_obs {
                    Some(o) => obs = o,
                    None => {
                        assert_eq!(out.reward, 1.0);
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn episodes_replay_by_index() {
        let mk = || {
            GameEnv::new(
                dist(),
                Opponent::Attacker(Box::new(AttackerKind::mixed(0.5).unwrap())),
                false,
                9,
            )
        };
        let mut e1 = mk();
        let mut e2 = mk();
        e1.reset();
        let a = e1.reset();
        let b = e2.reset_to(1);
        assert_eq!(a, b);
    }

    #[test]
    fn attacker_episodes_terminate() {
        let mut env = GameEnv::new(
            dist(),
            Opponent::Defender(Box::new(DefenderKind::Random)),
            false,
            1,
        );
        assert_eq!(env.obs_dim(), 5);
        assert_eq!(env.action_dim(), 5);
        for _ in 0..20 {
            env.reset();
            let mut turns = 0;
            while env.step(2).next_obs.is_some() {
                turns += 1;
                assert!(turns <= 4);
            }
        }
    }
}
