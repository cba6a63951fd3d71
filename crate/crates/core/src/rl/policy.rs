//! Softmax-policy learners with a learned value baseline: the clipped
//! surrogate policy gradient and synchronous advantage actor-critic.
//!
//! Both keep a separate critic network of the same architecture with one
//! output. Only the actor ends up in the trained agent.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::game::GameRng;

use super::agent::{CurvePoint, Head, TrainedAgent};
use super::config::TrainConfig;
use super::env::GameEnv;
use super::learner::{
    check_finite, discounted_returns, eval_point, learner_rng, make_agent, stack, Learner,
};
use super::nn::{selected_mse, softmax, Adam, Network};
use super::{RlError, Role};

fn sample_action(probs: &[f64], rng: &mut GameRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Gradient of `-coef * entropy(softmax(logits))` with respect to the
/// logits, added into `grad` row `row`, scaled by `1/n`.
fn add_entropy_grad(grad: &mut Array2<f64>, row: usize, probs: &[f64], coef: f64, n: f64) {
    let entropy: f64 = -probs.iter().map(|p| p * p.max(1e-300).ln()).sum::<f64>();
    for (j, &p) in probs.iter().enumerate() {
        // d(-H)/dz_j = p_j (ln p_j + H)
        grad[[row, j]] += coef * p * (p.max(1e-300).ln() + entropy) / n;
    }
}

/// Gradient of `-scale * ln pi(action)`, added into row `row`.
fn add_log_prob_grad(grad: &mut Array2<f64>, row: usize, probs: &[f64], action: usize, scale: f64) {
    for (j, &p) in probs.iter().enumerate() {
        let indicator = if j == action { 1.0 } else { 0.0 };
        grad[[row, j]] -= scale * (indicator - p);
    }
}

#[derive(Default)]
struct Rollout {
    obs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    action_probs: Vec<f64>,
    rewards: Vec<f64>,
    done: Vec<bool>,
}

/// Actor, critic, their optimizers and the rollout loop.
struct ActorCritic {
    cfg: TrainConfig,
    role: Role,
    levels: usize,
    actor: Network,
    critic: Network,
    actor_opt: Adam,
    critic_opt: Adam,
    rng: GameRng,
    steps: u64,
    curve: Vec<CurvePoint>,
    obs: Option<Vec<f64>>,
}

impl ActorCritic {
    fn new(cfg: &TrainConfig, role: Role, levels: usize) -> Self {
        let mut rng = learner_rng(cfg);
        let inputs = role.layout().len(levels);
        let actor = Network::new(cfg.arch, inputs, role.action_dim(levels), &mut rng);
        let critic = Network::new(cfg.arch, inputs, 1, &mut rng);
        ActorCritic {
            cfg: cfg.clone(),
            role,
            levels,
            actor_opt: Adam::new(&actor, cfg.learning_rate),
            critic_opt: Adam::new(&critic, cfg.learning_rate),
            actor,
            critic,
            rng,
            steps: 0,
            curve: Vec::new(),
            obs: None,
        }
    }

    /// Collects up to `n` steps, recording evaluation points on the way.
    /// Returns the rollout and the bootstrap value after its last step.
    fn collect(&mut self, env: &mut GameEnv, n: u64) -> Result<(Rollout, f64), RlError> {
        let mut r = Rollout::default();
        for _ in 0..n {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => env.reset(),
            };
            let probs = softmax(&self.actor.predict(&obs));
            let action = sample_action(&probs, &mut self.rng);
            let out = env.step(action);
            r.obs.push(obs);
            r.actions.push(action);
            r.action_probs.push(probs[action]);
            r.rewards.push(out.reward);
            r.done.push(out.next_obs.is_none());
            self.obs = out.next_obs;
            self.steps += 1;
            if self.steps.is_multiple_of(self.cfg.eval_interval) {
                let point = eval_point(&self.cfg, env, &self.snapshot(), self.steps)?;
                self.curve.push(point);
            }
        }
        let bootstrap = match &self.obs {
            Some(o) => self.critic.predict(o)[0],
            None => 0.0,
        };
        Ok((r, bootstrap))
    }

    fn fit_critic(&mut self, obs: &Array2<f64>, returns: &[f64]) -> Result<(), RlError> {
        let cache = self.critic.forward(obs.view());
        let zeros = vec![0; returns.len()];
        let (loss, grad) = selected_mse(&cache.output, &zeros, returns);
        check_finite(loss, self.steps)?;
        let grads = self.critic.backward(&cache, &grad);
        self.critic_opt.apply(&mut self.critic, &grads);
        Ok(())
    }

    fn snapshot(&self) -> TrainedAgent {
        make_agent(&self.cfg, self.role, self.levels, &self.actor, Head::Logits)
    }
}

/// Clipped-surrogate policy gradient. Advantages are discounted returns
/// minus the critic's estimate, normalized per batch.
pub struct PolicyGradLearner {
    core: ActorCritic,
}

impl PolicyGradLearner {
    pub fn new(cfg: &TrainConfig, role: Role, levels: usize) -> Self {
        PolicyGradLearner {
            core: ActorCritic::new(cfg, role, levels),
        }
    }

    fn update(&mut self, r: &Rollout, bootstrap: f64) -> Result<(), RlError> {
        let c = &mut self.core;
        let p = c.cfg.policy_grad.clone();
        let returns = discounted_returns(&r.rewards, &r.done, bootstrap, c.cfg.discount);
        let all_obs = stack(&r.obs.iter().map(|o| o.as_slice()).collect::<Vec<_>>());
        let values = c.critic.forward(all_obs.view()).output;
        let mut adv: Vec<f64> = returns
            .iter()
            .zip(values.column(0))
            .map(|(g, v)| g - v)
            .collect();
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / adv.len() as f64).sqrt();
        for a in &mut adv {
            *a = (*a - mean) / (std + 1e-8);
        }
        let mut order: Vec<usize> = (0..r.obs.len()).collect();
        for _ in 0..p.epochs_per_batch {
            order.shuffle(&mut c.rng);
            for mb in order.chunks(p.minibatch_size) {
                let obs = stack(&mb.iter().map(|&i| r.obs[i].as_slice()).collect::<Vec<_>>());
                let cache = c.actor.forward(obs.view());
                let n = mb.len() as f64;
                let mut grad = Array2::zeros(cache.output.raw_dim());
                for (row, &i) in mb.iter().enumerate() {
                    let probs = softmax(cache.output.row(row).as_slice().expect("standard layout"));
                    let a = r.actions[i];
                    let ratio = probs[a] / r.action_probs[i];
                    let clipped = (adv[i] >= 0.0 && ratio > 1.0 + p.clip_ratio)
                        || (adv[i] < 0.0 && ratio < 1.0 - p.clip_ratio);
                    if !clipped {
                        // d(ratio)/dz = ratio * d(ln pi)/dz
                        add_log_prob_grad(&mut grad, row, &probs, a, adv[i] * ratio / n);
                    }
                    add_entropy_grad(&mut grad, row, &probs, p.entropy_coef, n);
                }
                if !grad.iter().all(|g| g.is_finite()) {
                    return Err(RlError::Diverged(format!(
                        "policy gradient at step {}",
                        c.steps
                    )));
                }
                let grads = c.actor.backward(&cache, &grad);
                c.actor_opt.apply(&mut c.actor, &grads);
                let mb_returns: Vec<f64> = mb.iter().map(|&i| returns[i]).collect();
                c.fit_critic(&obs, &mb_returns)?;
            }
        }
        Ok(())
    }
}

impl Learner for PolicyGradLearner {
    fn train(&mut self, env: &mut GameEnv, steps: u64) -> Result<(), RlError> {
        let mut left = steps;
        while left > 0 {
            let n = left.min(self.core.cfg.policy_grad.rollout_steps as u64);
            let (rollout, bootstrap) = self.core.collect(env, n)?;
            self.update(&rollout, bootstrap)?;
            left -= n;
        }
        Ok(())
    }

    fn snapshot(&self) -> TrainedAgent {
        self.core.snapshot()
    }

    fn steps_done(&self) -> u64 {
        self.core.steps
    }

    fn curve(&self) -> &[CurvePoint] {
        &self.core.curve
    }

    fn record_eval(&mut self, env: &GameEnv) -> Result<(), RlError> {
        let point = eval_point(&self.core.cfg, env, &self.core.snapshot(), self.core.steps)?;
        self.core.curve.push(point);
        Ok(())
    }

    fn abandon_episode(&mut self) {
        self.core.obs = None;
    }
}

/// Synchronous single-worker advantage actor-critic: one gradient step per
/// short rollout, bootstrapped n-step returns, entropy bonus.
pub struct ActorCriticLearner {
    core: ActorCritic,
}

impl ActorCriticLearner {
    pub fn new(cfg: &TrainConfig, role: Role, levels: usize) -> Self {
        ActorCriticLearner {
            core: ActorCritic::new(cfg, role, levels),
        }
    }

    fn update(&mut self, r: &Rollout, bootstrap: f64) -> Result<(), RlError> {
        let c = &mut self.core;
        let returns = discounted_returns(&r.rewards, &r.done, bootstrap, c.cfg.discount);
        let obs = stack(&r.obs.iter().map(|o| o.as_slice()).collect::<Vec<_>>());
        let values = c.critic.forward(obs.view()).output;
        let cache = c.actor.forward(obs.view());
        let n = r.obs.len() as f64;
        let mut grad = Array2::zeros(cache.output.raw_dim());
        let coef = c.cfg.actor_critic.entropy_coef;
        for row in 0..r.obs.len() {
            let probs = softmax(cache.output.row(row).as_slice().expect("standard layout"));
            let adv = returns[row] - values[[row, 0]];
            add_log_prob_grad(&mut grad, row, &probs, r.actions[row], adv / n);
            add_entropy_grad(&mut grad, row, &probs, coef, n);
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(RlError::Diverged(format!(
                "policy gradient at step {}",
                c.steps
            )));
        }
        let grads = c.actor.backward(&cache, &grad);
        c.actor_opt.apply(&mut c.actor, &grads);
        c.fit_critic(&obs, &returns)
    }
}

impl Learner for ActorCriticLearner {
    fn train(&mut self, env: &mut GameEnv, steps: u64) -> Result<(), RlError> {
        let mut left = steps;
        while left > 0 {
            let n = left.min(self.core.cfg.actor_critic.rollout_steps as u64);
            let (rollout, bootstrap) = self.core.collect(env, n)?;
            self.update(&rollout, bootstrap)?;
            left -= n;
        }
        Ok(())
    }

    fn snapshot(&self) -> TrainedAgent {
        self.core.snapshot()
    }

    fn steps_done(&self) -> u64 {
        self.core.steps
    }

    fn curve(&self) -> &[CurvePoint] {
        &self.core.curve
    }

    fn record_eval(&mut self, env: &GameEnv) -> Result<(), RlError> {
        let point = eval_point(&self.core.cfg, env, &self.core.snapshot(), self.core.steps)?;
        self.core.curve.push(point);
        Ok(())
    }

    fn abandon_episode(&mut self) {
        self.core.obs = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Loss whose gradient `add_entropy_grad` claims to compute.
    fn neg_entropy(z: &[f64]) -> f64 {
        let p = softmax(z);
        p.iter().map(|q| q * q.ln()).sum()
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 0.8];
        let mut grad = Array2::zeros((1, 3));
        add_entropy_grad(&mut grad, 0, &softmax(&z), 1.0, 1.0);
        for j in 0..3 {
            let h = 1e-6;
            let mut zp = z;
            zp[j] += h;
            let mut zm = z;
            zm[j] -= h;
            let fd = (neg_entropy(&zp) - neg_entropy(&zm)) / (2.0 * h);
            assert!(
                (fd - grad[[0, j]]).abs() < 1e-7,
                "{j}: {fd} vs {}",
                grad[[0, j]]
            );
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 0.8];
        let mut grad = Array2::zeros((1, 3));
        add_log_prob_grad(&mut grad, 0, &softmax(&z), 2, 1.0);
        for j in 0..3 {
            let h = 1e-6;
            let mut zp = z;
            zp[j] += h;
            let mut zm = z;
            zm[j] -= h;
            let f = |z: &[f64]| -softmax(z)[2].ln();
            let fd = (f(&zp) - f(&zm)) / (2.0 * h);
            assert!((fd - grad[[0, j]]).abs() < 1e-7);
        }
    }

    #[test]
    fn sampling_follows_probabilities() {
        let mut rng = <GameRng as rand::SeedableRng>::seed_from_u64(0);
        let probs = [0.2, 0.8];
        let ones = (0..10_000)
            .filter(|_| sample_action(&probs, &mut rng) == 1)
            .count();
        assert!((ones as f64 / 10_000.0 - 0.8).abs() < 0.02);
    }
}
