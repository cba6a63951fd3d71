//! Augmented random search: antithetic Gaussian perturbations of the flat
//! parameter vector, both signs scored on the same episodes, update from
//! the best directions scaled by the spread of their returns.

use rand_distr::{Distribution, StandardNormal};

use crate::game::GameRng;

use super::agent::{CurvePoint, Head, TrainedAgent};
use super::config::TrainConfig;
use super::env::GameEnv;
use super::learner::{eval_point, learner_rng, make_agent, Learner};
use super::nn::{argmax, Network};
use super::{RlError, Role};

pub struct RandomSearchLearner {
    cfg: TrainConfig,
    role: Role,
    levels: usize,
    net: Network,
    rng: GameRng,
    steps: u64,
    next_eval: u64,
    curve: Vec<CurvePoint>,
}

impl RandomSearchLearner {
    pub fn new(cfg: &TrainConfig, role: Role, levels: usize) -> Self {
        let mut rng = learner_rng(cfg);
        let net = Network::new(
            cfg.arch,
            role.layout().len(levels),
            role.action_dim(levels),
            &mut rng,
        );
        RandomSearchLearner {
            cfg: cfg.clone(),
            role,
            levels,
            net,
            rng,
            steps: 0,
            next_eval: cfg.eval_interval,
            curve: Vec::new(),
        }
    }

    /// Total greedy-play reward of `net` over episodes `first..first + n`.
    fn score(net: &Network, env: &mut GameEnv, first: u64, n: u64) -> (f64, u64) {
        let mut total = 0.0;
        let mut steps = 0;
        for e in 0..n {
            let mut obs = env.reset_to(first + e);
            loop {
                let out = env.step(argmax(&net.predict(&obs)));
                steps += 1;
                total += out.reward;
                match out.next_obs {
                    Some(o) => obs = o,
                    None => break,
                }
            }
        }
        (total, steps)
    }

    fn iteration(&mut self, env: &mut GameEnv) -> Result<(), RlError> {
        let r = self.cfg.random_search.clone();
        let theta = self.net.flatten();
        let first = env.episodes_started();
        let n = r.episodes_per_direction as u64;
        let mut probe = self.net.clone();
        let mut results = Vec::with_capacity(r.num_directions);
        for _ in 0..r.num_directions {
            let delta: Vec<f64> = (0..theta.len())
                .map(|_| StandardNormal.sample(&mut self.rng))
                .collect();
            let mut score_side = |sign: f64| {
                let shifted: Vec<f64> = theta
                    .iter()
                    .zip(&delta)
                    .map(|(t, d)| t + sign * r.perturb_std * d)
                    .collect();
                probe.set_flat(&shifted);
                let (score, steps) = Self::score(&probe, env, first, n);
                self.steps += steps;
                score
            };
            let plus = score_side(1.0);
            let minus = score_side(-1.0);
            results.push((plus, minus, delta));
        }
        env.skip_episodes(n);

        results.sort_by(|x, y| y.0.max(y.1).total_cmp(&x.0.max(x.1)));
        let keep =
            ((r.top_fraction * r.num_directions as f64).ceil() as usize).clamp(1, r.num_directions);
        let top = &results[..keep];
        let all: Vec<f64> = top.iter().flat_map(|(p, m, _)| [*p, *m]).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let spread =
            (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        // Identical returns carry no direction; zero noise makes every
        // direction identical too, so the parameters stay put.
        if spread > 0.0 && r.perturb_std > 0.0 {
            let scale = self.cfg.learning_rate / (keep as f64 * spread);
            let mut updated = theta;
            for (plus, minus, delta) in top {
                for (t, d) in updated.iter_mut().zip(delta) {
                    *t += scale * (plus - minus) * d;
                }
            }
            self.net.set_flat(&updated);
        }
        Ok(())
    }
}

impl Learner for RandomSearchLearner {
    fn train(&mut self, env: &mut GameEnv, steps: u64) -> Result<(), RlError> {
        let target = self.steps + steps;
        while self.steps < target {
            self.iteration(env)?;
            while self.steps >= self.next_eval {
                let point = eval_point(&self.cfg, env, &self.snapshot(), self.next_eval)?;
                self.curve.push(point);
                self.next_eval += self.cfg.eval_interval;
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> TrainedAgent {
        make_agent(&self.cfg, self.role, self.levels, &self.net, Head::Logits)
    }

    fn steps_done(&self) -> u64 {
        self.steps
    }

    fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    fn record_eval(&mut self, env: &GameEnv) -> Result<(), RlError> {
        let point = eval_point(&self.cfg, env, &self.snapshot(), self.steps)?;
        self.curve.push(point);
        Ok(())
    }
}
