//! Epsilon-greedy Q-learning with experience replay and a periodically
//! synced target network.

use rand::Rng;

use crate::game::GameRng;

use super::agent::{CurvePoint, ExploringComparatorAttacker, Head, TrainedAgent};
use super::config::TrainConfig;
use super::encode::Layout;
use super::env::{GameEnv, Opponent};
use super::learner::{check_finite, eval_point_against, learner_rng, make_agent, stack, Learner};
use super::nn::{argmax_random_ties, selected_mse, Adam, Network};
use super::{RlError, Role};

/// The same partition with A and B exchanged.
fn mirror(obs: &[f64]) -> Vec<f64> {
    let half = obs.len() / 2;
    obs[half..].iter().chain(&obs[..half]).copied().collect()
}

struct Transition {
    obs: Vec<f64>,
    action: usize,
    reward: f64,
    next_obs: Option<Vec<f64>>,
}

/// Fixed-capacity ring buffer.
struct Replay {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl Replay {
    fn new(capacity: usize) -> Self {
        Replay {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

pub struct ValueLearner {
    cfg: TrainConfig,
    role: Role,
    levels: usize,
    online: Network,
    target: Network,
    opt: Adam,
    replay: Replay,
    rng: GameRng,
    steps: u64,
    curve: Vec<CurvePoint>,
    obs: Option<Vec<f64>>,
    /// Self-play: the attacker is a binary search over the target network.
    self_play: bool,
    /// Evaluation opponent when it differs from the training opponent.
    eval_opponent: Option<Opponent>,
}

impl ValueLearner {
    pub fn new(cfg: &TrainConfig, role: Role, levels: usize) -> Self {
        let mut rng = learner_rng(cfg);
        let inputs = role.layout().len(levels);
        let outputs = role.action_dim(levels);
        let online = Network::new(cfg.arch, inputs, outputs, &mut rng);
        ValueLearner {
            cfg: cfg.clone(),
            role,
            levels,
            target: online.clone(),
            opt: Adam::new(&online, cfg.learning_rate),
            online,
            replay: Replay::new(cfg.value.replay_capacity),
            rng,
            steps: 0,
            curve: Vec::new(),
            obs: None,
            self_play: false,
            eval_opponent: None,
        }
    }

    /// A comparator learner whose attacker is its own binary search. Its
    /// curve is measured against `eval_opponent`.
    pub fn self_play(cfg: &TrainConfig, levels: usize, eval_opponent: Opponent) -> Self {
        let mut learner = ValueLearner::new(cfg, Role::Comparator, levels);
        learner.self_play = true;
        learner.eval_opponent = Some(eval_opponent);
        learner
    }

    /// Opponent built from the current target network.
    pub fn self_play_opponent(&self) -> Opponent {
        let agent = make_agent(
            &self.cfg,
            Role::Comparator,
            self.levels,
            &self.target,
            Head::QValues,
        );
        Opponent::Attacker(Box::new(ExploringComparatorAttacker {
            agent,
            explore: self.cfg.self_play.attacker_explore,
        }))
    }

    fn epsilon(&self) -> f64 {
        let v = &self.cfg.value;
        let horizon = (v.epsilon_decay_fraction * self.cfg.total_steps as f64).max(1.0);
        let frac = (self.steps as f64 / horizon).min(1.0);
        v.epsilon_start + frac * (v.epsilon_end - v.epsilon_start)
    }

    fn act(&mut self, obs: &[f64], n_actions: usize) -> usize {
        if self.rng.random::<f64>() < self.epsilon() {
            self.rng.random_range(0..n_actions)
        } else {
            argmax_random_ties(&self.online.predict(obs), &mut self.rng)
        }
    }

    fn update(&mut self) -> Result<(), RlError> {
        let batch_size = self.cfg.value.batch_size;
        let picks: Vec<usize> = (0..batch_size)
            .map(|_| self.rng.random_range(0..self.replay.len()))
            .collect();
        let items: Vec<&Transition> = picks.iter().map(|&i| &self.replay.items[i]).collect();
        let obs = stack(&items.iter().map(|t| t.obs.as_slice()).collect::<Vec<_>>());
        let live: Vec<&[f64]> = items.iter().filter_map(|t| t.next_obs.as_deref()).collect();
        let next_values = if live.is_empty() {
            None
        } else {
            Some(self.target.forward(stack(&live).view()).output)
        };
        let mut targets = Vec::with_capacity(batch_size);
        let mut live_row = 0;
        for t in &items {
            let mut y = t.reward;
            if t.next_obs.is_some() {
                let q = next_values.as_ref().expect("live rows exist").row(live_row);
                y += self.cfg.discount * q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                live_row += 1;
            }
            targets.push(y);
        }
        let actions: Vec<usize> = items.iter().map(|t| t.action).collect();
        let cache = self.online.forward(obs.view());
        let (loss, grad) = selected_mse(&cache.output, &actions, &targets);
        check_finite(loss, self.steps)?;
        let grads = self.online.backward(&cache, &grad);
        self.opt.apply(&mut self.online, &grads);
        Ok(())
    }
}

impl Learner for ValueLearner {
    fn train(&mut self, env: &mut GameEnv, steps: u64) -> Result<(), RlError> {
        let n_actions = env.action_dim();
        let v = self.cfg.value.clone();
        if self.self_play && self.steps == 0 {
            env.set_opponent(self.self_play_opponent());
        }
        for _ in 0..steps {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => env.reset(),
            };
            let action = self.act(&obs, n_actions);
            let out = env.step(action);
            self.obs = out.next_obs.clone();
            if self.cfg.value.mirror_sides && self.role.layout() == Layout::DefenderConcat {
                self.replay.push(Transition {
                    obs: mirror(&obs),
                    action: 1 - action,
                    reward: out.reward,
                    next_obs: out.next_obs.as_deref().map(mirror),
                });
            }
            self.replay.push(Transition {
                obs,
                action,
                reward: out.reward,
                next_obs: out.next_obs,
            });
            self.steps += 1;
            if self.steps >= v.learning_starts
                && self.replay.len() >= v.batch_size
                && self.steps.is_multiple_of(v.train_every)
            {
                self.update()?;
            }
            if self.steps.is_multiple_of(v.target_sync_interval) {
                self.target = self.online.clone();
                if self.self_play {
                    env.set_opponent(self.self_play_opponent());
                }
            }
            if self.steps.is_multiple_of(self.cfg.eval_interval) {
                self.record_eval(env)?;
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> TrainedAgent {
        make_agent(
            &self.cfg,
            self.role,
            self.levels,
            &self.online,
            Head::QValues,
        )
    }

    fn steps_done(&self) -> u64 {
        self.steps
    }

    fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    fn record_eval(&mut self, env: &GameEnv) -> Result<(), RlError> {
        let opponent = self.eval_opponent.as_ref().unwrap_or(env.opponent());
        let point = eval_point_against(
            &self.cfg,
            opponent,
            &env.start,
            &self.snapshot(),
            self.steps,
        )?;
        self.curve.push(point);
        Ok(())
    }

    fn abandon_episode(&mut self) {
        self.obs = None;
    }
}
