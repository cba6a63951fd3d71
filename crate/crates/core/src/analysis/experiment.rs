//! Train-then-test experiment driver. A spec names an agent, a sequence of
//! training stages (more than one makes a curriculum, used for forgetting
//! runs) and a list of test environments; every test is evaluated after
//! every stage for every seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::game::Units;
use crate::rl::config::{content_hash, Algorithm, EnvConfig, OpponentSpec, TrainConfig};
use crate::rl::env::{GameEnv, Opponent};
use crate::rl::eval::{evaluate_agent, evaluate_defender, resolve_opponent, EvalReport};
use crate::rl::nn::Arch;
use crate::rl::{make_learner, train_multiagent, train_self_play, Learner, Role, TrainedAgent};
use crate::start_states::{StartDistribution, StartKind};
use crate::strategies::DefenderKind;

use super::{write_csv, AnalysisError};

/// Salt separating stage environments of one seed.
const STAGE_SALT: u64 = 0x57a6_e000_0000_0000;
const TEST_SALT: u64 = 0x7e57_0000_0000_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    /// One learner trained through the stages in order.
    Train {
        algorithm: Algorithm,
        #[serde(default)]
        arch: Option<Arch>,
    },
    /// Attacker and defender trained against each other in one stage.
    Multiagent {
        algorithm: Algorithm,
        #[serde(default)]
        arch: Option<Arch>,
        switch_every: u64,
    },
    /// Comparator self-play in one stage; the stage opponent drives the curve.
    SelfPlay {
        #[serde(default)]
        arch: Option<Arch>,
    },
    /// A scripted defender, nothing trained.
    Scripted { defender: DefenderKind },
    /// A saved agent, nothing trained.
    Policy { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(rename = "K")]
    pub levels: usize,
    pub start: StartKind,
    pub units: Units,
    /// Scripted player name or `policy:<file>`; the side is implied.
    #[serde(default)]
    pub opponent: Option<String>,
}

impl EnvSpec {
    fn distribution(&self) -> Result<StartDistribution, AnalysisError> {
        StartDistribution::new(self.start, self.levels, self.units)
            .map_err(|e| AnalysisError::Spec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    #[serde(flatten)]
    pub env: EnvSpec,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub name: String,
    #[serde(flatten)]
    pub env: EnvSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub seeds: Vec<u64>,
    pub eval_games: usize,
    pub agent: AgentSpec,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    pub tests: Vec<TestSpec>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, AnalysisError> {
        toml::from_str(text).map_err(|e| AnalysisError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AnalysisError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }

    /// Board size of the agent: the largest stage, or the loaded file's.
    fn agent_levels(&self) -> Result<usize, AnalysisError> {
        match &self.agent {
            AgentSpec::Policy { path } => Ok(load_policy(path)?.levels),
            AgentSpec::Scripted { .. } => {
                Ok(self.tests.iter().map(|t| t.env.levels).max().unwrap_or(0))
            }
            _ => Ok(self.stages.iter().map(|s| s.env.levels).max().unwrap_or(0)),
        }
    }

    /// Catches every problem that can be seen without training.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::Spec(m));
        if self.seeds.is_empty() {
            return bad("experiment needs at least one seed".into());
        }
        if self.tests.is_empty() {
            return bad("experiment needs at least one test environment".into());
        }
        if self.eval_games == 0 {
            return bad("eval_games must be positive".into());
        }
        let trains = matches!(
            self.agent,
            AgentSpec::Train { .. } | AgentSpec::Multiagent { .. } | AgentSpec::SelfPlay { .. }
        );
        if trains && self.stages.is_empty() {
            return bad("a trained agent needs at least one stage".into());
        }
        if !trains && !self.stages.is_empty() {
            return bad("scripted and saved agents take no training stages".into());
        }
        if matches!(
            self.agent,
            AgentSpec::Multiagent { .. } | AgentSpec::SelfPlay { .. }
        ) && self.stages.len() != 1
        {
            return bad("multiagent and self-play runs take exactly one stage".into());
        }
        if let AgentSpec::Multiagent {
            switch_every: 0, ..
        } = self.agent
        {
            return bad("switch_every must be positive".into());
        }
        let levels = self.agent_levels()?;
        let mut stage_roles = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            stage.env.distribution()?;
            if stage.steps == 0 {
                return bad(format!("stage {i} has no steps"));
            }
            if matches!(self.agent, AgentSpec::Multiagent { .. }) {
                continue;
            }
            let opponent = stage
                .env
                .opponent
                .as_deref()
                .ok_or_else(|| AnalysisError::Spec(format!("stage {i} needs an opponent")))?;
            let spec = parse_opponent(opponent)?;
            check_policy_file(&spec)?;
            stage_roles.push(trainee_of(&spec)?);
        }
        if stage_roles.windows(2).any(|w| w[0] != w[1]) {
            return bad("all stages must train the same side".into());
        }
        if matches!(self.agent, AgentSpec::SelfPlay { .. }) && stage_roles != [Role::Defender] {
            return bad("self-play stages name an attacker to evaluate against".into());
        }
        if let AgentSpec::Policy { path } = &self.agent {
            load_policy(path)?;
        }
        for test in &self.tests {
            test.env.distribution()?;
            if test.env.levels > levels {
                return bad(format!(
                    "test '{}' has K={} but the agent plays K={levels}",
                    test.name, test.env.levels
                ));
            }
            let opponent = test.env.opponent.as_deref().ok_or_else(|| {
                AnalysisError::Spec(format!("test '{}' needs an opponent", test.name))
            })?;
            let spec = parse_opponent(opponent)?;
            check_policy_file(&spec)?;
            let tested = trainee_of(&spec)?;
            let fits = match &self.agent {
                AgentSpec::Multiagent { .. } => true,
                AgentSpec::Scripted { .. } => tested == Role::Defender,
                _ => stage_roles.first().is_none_or(|r| *r == tested),
            };
            if !fits {
                return bad(format!(
                    "test '{}' plays the agent on the wrong side",
                    test.name
                ));
            }
        }
        Ok(())
    }
}

/// Reads a name as an attacker first, then as a defender.
fn parse_opponent(s: &str) -> Result<OpponentSpec, AnalysisError> {
    OpponentSpec::parse(s, Role::Defender)
        .or_else(|_| OpponentSpec::parse(s, Role::Attacker))
        .map_err(|_| AnalysisError::Spec(format!("unknown opponent '{s}'")))
}

/// A policy file a spec points at; any problem with it is a spec error.
fn load_policy(path: &Path) -> Result<TrainedAgent, AnalysisError> {
    TrainedAgent::load(path).map_err(|e| AnalysisError::Spec(format!("{}: {e}", path.display())))
}

fn check_policy_file(spec: &OpponentSpec) -> Result<(), AnalysisError> {
    if let OpponentSpec::Policy { path } = spec {
        load_policy(path)?;
    }
    Ok(())
}

fn trainee_of(spec: &OpponentSpec) -> Result<Role, AnalysisError> {
    Ok(resolve_opponent(spec)?.trainee_role())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub seed: u64,
    /// Training stages completed before this evaluation.
    pub after_stage: usize,
    pub test: String,
    #[serde(rename = "K")]
    pub levels: usize,
    pub win_rate: f64,
    pub mean_reward: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

pub const ROW_HEADER: [&str; 9] = [
    "experiment",
    "seed",
    "after_stage",
    "test",
    "K",
    "win_rate",
    "mean_reward",
    "wilson_low",
    "wilson_high",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub experiment: String,
    pub after_stage: usize,
    pub test: String,
    pub seeds: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub const AGGREGATE_HEADER: [&str; 7] = [
    "experiment",
    "after_stage",
    "test",
    "seeds",
    "mean",
    "min",
    "max",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec_hash: String,
    pub rows: Vec<ExperimentRow>,
    pub aggregate: Vec<AggregateRow>,
    /// Trained agents by seed; two per seed for multiagent runs.
    pub agents: Vec<(u64, TrainedAgent)>,
}

impl ExperimentResult {
    /// Writes `per_seed.csv`, `aggregate.csv` and one weight file per agent.
    pub fn write_to(&self, dir: &Path) -> Result<(), AnalysisError> {
        fs::create_dir_all(dir)?;
        write_csv(
            &self.rows,
            &ROW_HEADER,
            fs::File::create(dir.join("per_seed.csv"))?,
        )?;
        write_csv(
            &self.aggregate,
            &AGGREGATE_HEADER,
            fs::File::create(dir.join("aggregate.csv"))?,
        )?;
        for (seed, agent) in &self.agents {
            let role = serde_json::to_value(agent.role).expect("roles serialize");
            let name = format!("agent_seed{seed}_{}.json", role.as_str().unwrap_or("agent"));
            agent.save(&dir.join(name))?;
        }
        Ok(())
    }
}

/// The agents one seed ends up with after a stage.
enum Trained {
    One(TrainedAgent),
    Pair {
        attacker: TrainedAgent,
        defender: TrainedAgent,
    },
    Scripted(DefenderKind),
}

fn base_config(
    algorithm: Algorithm,
    arch: Option<Arch>,
    stage: &StageSpec,
    opponent: OpponentSpec,
    total_steps: u64,
    seed: u64,
) -> Result<TrainConfig, AnalysisError> {
    let env = EnvConfig::new(stage.env.start, stage.env.levels, stage.env.units)?;
    let mut cfg = TrainConfig::new(algorithm, env, opponent, total_steps, seed);
    if let Some(arch) = arch {
        cfg.arch = arch;
    }
    Ok(cfg)
}

fn evaluate(
    spec: &ExperimentSpec,
    trained: &Trained,
    seed: u64,
    after_stage: usize,
) -> Result<Vec<ExperimentRow>, AnalysisError> {
    let mut rows = Vec::new();
    for (i, test) in spec.tests.iter().enumerate() {
        let start = test.env.distribution()?;
        let opponent = resolve_opponent(&parse_opponent(
            test.env.opponent.as_deref().unwrap_or_default(),
        )?)?;
        let eval_seed = seed ^ TEST_SALT ^ i as u64;
        let report: EvalReport = match (trained, &opponent) {
            (Trained::One(agent), _) => {
                evaluate_agent(agent, &opponent, spec.eval_games, &start, eval_seed)?
            }
            (Trained::Pair { defender, .. }, Opponent::Attacker(_)) => {
                evaluate_agent(defender, &opponent, spec.eval_games, &start, eval_seed)?
            }
            (Trained::Pair { attacker, .. }, Opponent::Defender(_)) => {
                evaluate_agent(attacker, &opponent, spec.eval_games, &start, eval_seed)?
            }
            (Trained::Scripted(defender), Opponent::Attacker(attacker)) => evaluate_defender(
                defender,
                attacker.as_ref(),
                &start,
                spec.eval_games,
                eval_seed,
            )?,
            (Trained::Scripted(_), Opponent::Defender(_)) => {
                return Err(AnalysisError::Spec(
                    "a scripted defender cannot attack".into(),
                ))
            }
        };
        rows.push(ExperimentRow {
            experiment: spec.name.clone(),
            seed,
            after_stage,
            test: test.name.clone(),
            levels: test.env.levels,
            win_rate: report.win_rate,
            mean_reward: report.mean_reward,
            wilson_low: report.wilson_low,
            wilson_high: report.wilson_high,
        });
    }
    Ok(rows)
}

/// Rows and final agents from one seed.
type SeedRun = Result<(Vec<ExperimentRow>, Vec<TrainedAgent>), AnalysisError>;

fn run_seed(spec: &ExperimentSpec, seed: u64) -> SeedRun {
    let mut rows = Vec::new();
    match &spec.agent {
        AgentSpec::Scripted { defender } => {
            rows.extend(evaluate(spec, &Trained::Scripted(*defender), seed, 0)?);
            Ok((rows, Vec::new()))
        }
        AgentSpec::Policy { path } => {
            let agent = TrainedAgent::load(path)?;
            let trained = Trained::One(agent);
            rows.extend(evaluate(spec, &trained, seed, 0)?);
            Ok((rows, Vec::new()))
        }
        AgentSpec::SelfPlay { arch } => {
            let stage = &spec.stages[0];
            let opponent = parse_opponent(stage.env.opponent.as_deref().unwrap_or_default())?;
            let cfg = base_config(Algorithm::QLearn, *arch, stage, opponent, stage.steps, seed)?;
            let agent = train_self_play(&cfg)?;
            let trained = Trained::One(agent.clone());
            rows.extend(evaluate(spec, &trained, seed, 1)?);
            Ok((rows, vec![agent]))
        }
        AgentSpec::Multiagent {
            algorithm,
            arch,
            switch_every,
        } => {
            let stage = &spec.stages[0];
            let placeholder_attacker = OpponentSpec::parse("prefix", Role::Defender)?;
            let placeholder_defender = OpponentSpec::parse("optimal", Role::Attacker)?;
            let cfg_d = base_config(
                *algorithm,
                *arch,
                stage,
                placeholder_attacker,
                stage.steps,
                seed,
            )?;
            let cfg_a = base_config(
                *algorithm,
                *arch,
                stage,
                placeholder_defender,
                stage.steps,
                seed ^ STAGE_SALT,
            )?;
            let (attacker, defender) = train_multiagent(&cfg_a, &cfg_d, *switch_every)?;
            let trained = Trained::Pair {
                attacker: attacker.clone(),
                defender: defender.clone(),
            };
            rows.extend(evaluate(spec, &trained, seed, 1)?);
            Ok((rows, vec![attacker, defender]))
        }
        AgentSpec::Train { algorithm, arch } => {
            let levels = spec.agent_levels()?;
            let total: u64 = spec.stages.iter().map(|s| s.steps).sum();
            let mut learner: Option<Box<dyn Learner>> = None;
            let mut last = None;
            for (i, stage) in spec.stages.iter().enumerate() {
                let opponent_spec =
                    parse_opponent(stage.env.opponent.as_deref().unwrap_or_default())?;
                let cfg =
                    base_config(*algorithm, *arch, stage, opponent_spec.clone(), total, seed)?;
                cfg.validate()?;
                let opponent = resolve_opponent(&opponent_spec)?;
                let role = opponent.trainee_role();
                let learner = learner.get_or_insert_with(|| make_learner(&cfg, role, levels));
                learner.abandon_episode();
                let mut env = GameEnv::new(
                    cfg.env.start,
                    opponent,
                    cfg.normalize_obs,
                    seed ^ STAGE_SALT.wrapping_mul(i as u64 + 1),
                )
                .embedded(levels)?;
                learner.train(&mut env, stage.steps)?;
                let mut agent = learner.snapshot();
                agent.train_curve = learner.curve().to_vec();
                rows.extend(evaluate(spec, &Trained::One(agent.clone()), seed, i + 1)?);
                last = Some(agent);
            }
            Ok((rows, last.into_iter().collect()))
        }
    }
}

/// Validates, then runs every seed, spread over `workers` threads. The
/// result does not depend on `workers`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    workers: usize,
) -> Result<ExperimentResult, AnalysisError> {
    spec.validate()?;
    let workers = workers.clamp(1, spec.seeds.len());
    let per_seed: Vec<SeedRun> = if workers == 1 {
        spec.seeds.iter().map(|&s| run_seed(spec, s)).collect()
    } else {
        let chunk = spec.seeds.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = spec
                .seeds
                .chunks(chunk)
                .map(|seeds| {
                    scope
                        .spawn(move || seeds.iter().map(|&s| run_seed(spec, s)).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("experiment worker panicked"))
                .collect()
        })
    };
    let mut rows = Vec::new();
    let mut agents = Vec::new();
    for (&seed, result) in spec.seeds.iter().zip(per_seed) {
        let (r, a) = result?;
        rows.extend(r);
        agents.extend(a.into_iter().map(|agent| (seed, agent)));
    }
    Ok(ExperimentResult {
        spec_hash: spec.hash(),
        aggregate: aggregate(&rows),
        rows,
        agents,
    })
}

/// Mean, min and max win rate over seeds per (stage, test), in first-seen order.
pub fn aggregate(rows: &[ExperimentRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize), (String, String, Vec<f64>)> = BTreeMap::new();
    let mut order: Vec<(usize, String)> = Vec::new();
    for row in rows {
        let idx = match order
            .iter()
            .position(|k| k.0 == row.after_stage && k.1 == row.test)
        {
            Some(i) => i,
            None => {
                order.push((row.after_stage, row.test.clone()));
                order.len() - 1
            }
        };
        groups
            .entry((row.after_stage, idx))
            .or_insert_with(|| (row.experiment.clone(), row.test.clone(), Vec::new()))
            .2
            .push(row.win_rate);
    }
    groups
        .into_iter()
        .map(
            |((after_stage, _), (experiment, test, rates))| AggregateRow {
                experiment,
                after_stage,
                test,
                seeds: rates.len(),
                mean: rates.iter().sum::<f64>() / rates.len() as f64,
                min: rates.iter().copied().fold(f64::INFINITY, f64::min),
                max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
        )
        .collect()
}
