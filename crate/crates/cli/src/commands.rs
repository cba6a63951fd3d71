//! Turns parsed flags into a reproducible request, runs it, and records it.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ess::analysis::experiment::ExperimentSpec;
use ess::analysis::{
    build_dataset_with, calibration_dump, compare_rl_vs_supervised, dataset_accuracy,
    null_set_check, record_matches, run_experiment, split_dataset, train_supervised, write_csv,
    AnalysisError, SupervisedConfig, COMPARISON_HEADER,
};
use ess::rl::config::{content_hash, Algorithm, EnvConfig, OpponentSpec, TrainConfig};
use ess::rl::eval::{evaluate_agent_with_workers, play_matches, resolve_opponent};
use ess::rl::nn::Arch;
use ess::rl::{train, train_multiagent, train_self_play, Opponent, RlError, Role, TrainedAgent};
use ess::start_states::{
    count_states_with, enumerate_states, StartDistribution, StartError, StartKind,
};
use ess::{GameError, Potential, Units, Winner};

use crate::{AnalyzeCommand, Cli, Command, GameArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn is_config(&self) -> bool {
        matches!(self, CliError::Config(_))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<RlError> for CliError {
    fn from(e: RlError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<StartError> for CliError {
    fn from(e: StartError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Everything a run depends on, after defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Request {
    Play {
        start: StartDistribution,
        attacker: String,
        defender: String,
        games: usize,
        seed: u64,
    },
    Train {
        config: TrainConfig,
    },
    Selfplay {
        config: TrainConfig,
    },
    Multiagent {
        attacker: TrainConfig,
        defender: TrainConfig,
        switch_every: u64,
    },
    Eval {
        policy: PathBuf,
        opponent: String,
        start: StartDistribution,
        games: usize,
        seed: u64,
    },
    Experiment {
        spec: ExperimentSpec,
    },
    Compare {
        policy: PathBuf,
        attacker: String,
        start: StartDistribution,
        games: usize,
        seed: u64,
    },
    NullSet {
        policy: PathBuf,
    },
    Calibration {
        policy: PathBuf,
        attacker: String,
        start: StartDistribution,
        games: usize,
        seed: u64,
    },
    Enumerate {
        #[serde(rename = "K")]
        levels: usize,
        units: Units,
        count: bool,
        forbid_top: bool,
    },
    Dataset {
        defender: String,
        attacker: String,
        start: StartDistribution,
        games: usize,
        seed: u64,
        dedup: bool,
    },
}

impl Request {
    fn name(&self) -> &'static str {
        match self {
            Request::Play { .. } => "play",
            Request::Train { .. } => "train",
            Request::Selfplay { .. } => "selfplay",
            Request::Multiagent { .. } => "multiagent",
            Request::Eval { .. } => "eval",
            Request::Experiment { .. } => "experiment",
            Request::Compare { .. } => "compare",
            Request::NullSet { .. } => "null_set",
            Request::Calibration { .. } => "calibration",
            Request::Enumerate { .. } => "enumerate",
            Request::Dataset { .. } => "dataset",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub request: Request,
    /// SHA-256 of the request.
    pub hash: String,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn units_from(
    levels: usize,
    units: Option<u64>,
    potential: Option<f64>,
) -> Result<Option<Units>, CliError> {
    match (units, potential) {
        (Some(u), _) => Ok(Some(u as Units)),
        (None, Some(p)) => Ok(Some(Potential::from_real(p, levels)?.units)),
        (None, None) => Ok(None),
    }
}

fn start_of(game: &GameArgs) -> Result<StartDistribution, CliError> {
    let levels = game.levels.ok_or_else(|| config_err("--K is required"))?;
    let (kind, inline_units) = match game.start.split_once(':') {
        Some((kind, rest)) => {
            let units = rest
                .strip_prefix("units=")
                .and_then(|u| u.parse::<u64>().ok())
                .ok_or_else(|| {
                    config_err(format!(
                        "bad --start '{}': expected kind:units=N",
                        game.start
                    ))
                })?;
            (kind, Some(units as Units))
        }
        None => (game.start.as_str(), None),
    };
    let kind: StartKind = kind.parse()?;
    let flag_units = units_from(levels, game.potential_units, game.potential)?;
    let units = match (inline_units, flag_units) {
        (Some(a), Some(b)) if a != b => {
            return Err(config_err(format!(
                "--start says {a} units but the potential flag says {b}"
            )))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(config_err("give --potential-units or --potential")),
    };
    Ok(StartDistribution::new(kind, levels, units)?)
}

fn parse_arch(arch: &Option<String>) -> Result<Option<Arch>, CliError> {
    arch.as_deref()
        .map(|a| a.parse::<Arch>().map_err(config_err))
        .transpose()
}

fn train_config(
    algorithm: Algorithm,
    start: StartDistribution,
    opponent: OpponentSpec,
    steps: u64,
    seed: u64,
    arch: Option<Arch>,
) -> TrainConfig {
    let mut cfg = TrainConfig::new(algorithm, EnvConfig { start }, opponent, steps, seed);
    if let Some(arch) = arch {
        cfg.arch = arch;
    }
    cfg
}

fn train_request(args: &TrainArgs, seed: u64) -> Result<Request, CliError> {
    let start = start_of(&args.game)?;
    let algorithm: Algorithm = args.algo.parse()?;
    let role = match args.role.as_str() {
        "defender" => Role::Defender,
        "attacker" => Role::Attacker,
        other => return Err(config_err(format!("unknown role '{other}'"))),
    };
    let default_opponent = if role == Role::Defender {
        "mixed"
    } else {
        "optimal"
    };
    let opponent = OpponentSpec::parse(args.opponent.as_deref().unwrap_or(default_opponent), role)?;
    let config = train_config(
        algorithm,
        start,
        opponent,
        args.steps,
        seed,
        parse_arch(&args.arch)?,
    );
    config.validate()?;
    Ok(Request::Train { config })
}

/// Builds the request from flags, or takes it from `--config`.
fn resolve(cli: &Cli) -> Result<Request, CliError> {
    let from_flags = || -> Result<Request, CliError> {
        let seed = cli.seed;
        Ok(match &cli.command {
            Command::Play {
                game,
                attacker,
                defender,
                games,
            } => Request::Play {
                start: start_of(game)?,
                attacker: attacker.clone(),
                defender: defender.clone(),
                games: *games,
                seed,
            },
            Command::Train(args) => train_request(args, seed)?,
            Command::Selfplay {
                game,
                opponent,
                steps,
                arch,
            } => {
                let opponent = OpponentSpec::parse(opponent, Role::Defender)?;
                let config = train_config(
                    Algorithm::QLearn,
                    start_of(game)?,
                    opponent,
                    *steps,
                    seed,
                    parse_arch(arch)?,
                );
                Request::Selfplay { config }
            }
            Command::Multiagent {
                game,
                algo,
                steps,
                switch_every,
                arch,
            } => {
                let start = start_of(game)?;
                let algorithm: Algorithm = algo.parse()?;
                let arch = parse_arch(arch)?;
                let defender_side = OpponentSpec::parse("prefix", Role::Defender)?;
                let attacker_side = OpponentSpec::parse("optimal", Role::Attacker)?;
                Request::Multiagent {
                    attacker: train_config(
                        algorithm,
                        start,
                        attacker_side,
                        *steps,
                        seed.wrapping_add(1),
                        arch,
                    ),
                    defender: train_config(algorithm, start, defender_side, *steps, seed, arch),
                    switch_every: *switch_every,
                }
            }
            Command::Eval {
                game,
                policy,
                opponent,
                games,
            } => Request::Eval {
                policy: given(policy, "--policy")?,
                opponent: given(opponent, "--opponent")?,
                start: start_of(game)?,
                games: *games,
                seed,
            },
            Command::Analyze { what } => match what {
                AnalyzeCommand::Experiment { spec } => Request::Experiment {
                    spec: ExperimentSpec::load(&given(spec, "--spec")?)?,
                },
                AnalyzeCommand::Compare {
                    game,
                    policy,
                    attacker,
                    games,
                } => Request::Compare {
                    policy: given(policy, "--policy")?,
                    attacker: attacker.clone(),
                    start: start_of(game)?,
                    games: *games,
                    seed,
                },
                AnalyzeCommand::NullSet { policy } => Request::NullSet {
                    policy: given(policy, "--policy")?,
                },
                AnalyzeCommand::Calibration {
                    game,
                    policy,
                    attacker,
                    games,
                } => Request::Calibration {
                    policy: given(policy, "--policy")?,
                    attacker: attacker.clone(),
                    start: start_of(game)?,
                    games: *games,
                    seed,
                },
            },
            Command::Enumerate {
                levels,
                potential_units,
                potential,
                count,
                forbid_top,
            } => {
                let levels = given(levels, "-K")?;
                Request::Enumerate {
                    levels,
                    units: units_from(levels, *potential_units, *potential)?
                        .ok_or_else(|| config_err("give --potential-units or --potential"))?,
                    count: *count,
                    forbid_top: *forbid_top,
                }
            }
            Command::Dataset {
                game,
                defender,
                attacker,
                games,
                dedup,
            } => Request::Dataset {
                defender: defender.clone(),
                attacker: attacker.clone(),
                start: start_of(game)?,
                games: *games,
                seed,
                dedup: *dedup,
            },
        })
    };
    let Some(path) = &cli.config else {
        return from_flags();
    };
    let text =
        fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let wanted = from_flags_name(&cli.command);
    if let Ok(manifest) = serde_json::from_str::<Manifest>(&text) {
        if manifest.request.name() != wanted {
            return Err(config_err(format!(
                "{} holds a '{}' run, not '{wanted}'",
                path.display(),
                manifest.request.name()
            )));
        }
        return Ok(manifest.request);
    }
    // A bare training config, JSON or TOML.
    let config: TrainConfig = serde_json::from_str(&text)
        .or_else(|_| toml::from_str(&text))
        .map_err(|e| {
            config_err(format!(
                "{}: neither a manifest nor a training config ({e})",
                path.display()
            ))
        })?;
    match wanted {
        "train" => Ok(Request::Train { config }),
        "selfplay" => Ok(Request::Selfplay { config }),
        _ => Err(config_err(format!(
            "a training config cannot drive '{wanted}'"
        ))),
    }
}

/// A flag clap only demands when no `--config` is given.
fn given<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| config_err(format!("{flag} is required")))
}

fn from_flags_name(command: &Command) -> &'static str {
    match command {
        Command::Play { .. } => "play",
        Command::Train(_) => "train",
        Command::Selfplay { .. } => "selfplay",
        Command::Multiagent { .. } => "multiagent",
        Command::Eval { .. } => "eval",
        Command::Analyze { what } => match what {
            AnalyzeCommand::Experiment { .. } => "experiment",
            AnalyzeCommand::Compare { .. } => "compare",
            AnalyzeCommand::NullSet { .. } => "null_set",
            AnalyzeCommand::Calibration { .. } => "calibration",
        },
        Command::Enumerate { .. } => "enumerate",
        Command::Dataset { .. } => "dataset",
    }
}

/// Output directory plus the list of files written into it.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))
    }

    fn save_agent(&mut self, name: &str, agent: &TrainedAgent) -> Result<(), CliError> {
        let path = self.path(name);
        agent.save(&path)?;
        Ok(())
    }
}

fn load_agent(path: &Path) -> Result<TrainedAgent, CliError> {
    TrainedAgent::load(path).map_err(|e| match e {
        RlError::Io(m) => CliError::Config(m),
        other => other.into(),
    })
}

/// Resolves a player name for `side` and checks its board fits `levels`.
fn player(name: &str, side: Role, levels: usize) -> Result<Opponent, CliError> {
    let trainee = match side {
        Role::Attacker => Role::Defender,
        _ => Role::Attacker,
    };
    let spec = OpponentSpec::parse(name, trainee)?;
    if let OpponentSpec::Policy { path } = &spec {
        let agent = load_agent(path)?;
        if agent.levels < levels {
            return Err(config_err(format!(
                "{} plays K={} but the game has K={levels}",
                path.display(),
                agent.levels
            )));
        }
    }
    let opponent = resolve_opponent(&spec).map_err(|e| match e {
        RlError::Io(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let plays = match &opponent {
        Opponent::Attacker(_) => Role::Attacker,
        Opponent::Defender(_) => Role::Defender,
    };
    if plays != side {
        return Err(config_err(format!(
            "'{name}' cannot play the {side:?} side"
        )));
    }
    Ok(opponent)
}

fn curve_csv(agent: &TrainedAgent) -> String {
    let mut s = String::from("step,win_rate\n");
    for p in &agent.train_curve {
        s.push_str(&format!("{},{}\n", p.step, p.win_rate));
    }
    s
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(rows, header, &mut buf)?;
    Ok(buf)
}

fn execute(request: &Request, out: &mut Outputs, workers: usize) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    let say = |stdout: &mut std::io::StdoutLock, line: String| {
        writeln!(stdout, "{line}").map_err(|e| CliError::Runtime(e.to_string()))
    };
    match request {
        Request::Play {
            start,
            attacker,
            defender,
            games,
            seed,
        } => {
            let levels = start.levels();
            let (Opponent::Attacker(att), Opponent::Defender(def)) = (
                player(attacker, Role::Attacker, levels)?,
                player(defender, Role::Defender, levels)?,
            ) else {
                unreachable!("sides checked by player()");
            };
            let records = play_matches(att.as_ref(), def.as_ref(), start, *games, *seed, workers)?;
            let attacker_wins = records
                .iter()
                .filter(|r| r.winner() == Some(Winner::Attacker))
                .count();
            let mut lines = String::new();
            for r in &records {
                lines.push_str(&r.to_json_line());
                lines.push('\n');
            }
            out.write("matches.jsonl", lines.as_bytes())?;
            say(
                &mut stdout,
                format!(
                    "games={games} attacker_wins={attacker_wins} defender_wins={}",
                    games - attacker_wins
                ),
            )?;
        }
        Request::Train { config } => {
            let agent = train(config)?;
            out.save_agent("agent.json", &agent)?;
            out.write("curve.csv", curve_csv(&agent).as_bytes())?;
            say(
                &mut stdout,
                format!(
                    "trained {:?} agent, config {}",
                    agent.role, agent.config_hash
                ),
            )?;
        }
        Request::Selfplay { config } => {
            let agent = train_self_play(config)?;
            out.save_agent("agent.json", &agent)?;
            out.write("curve.csv", curve_csv(&agent).as_bytes())?;
            say(
                &mut stdout,
                format!("trained comparator, config {}", agent.config_hash),
            )?;
        }
        Request::Multiagent {
            attacker,
            defender,
            switch_every,
        } => {
            let (a, d) = train_multiagent(attacker, defender, *switch_every)?;
            out.save_agent("attacker.json", &a)?;
            out.save_agent("defender.json", &d)?;
            out.write("attacker_curve.csv", curve_csv(&a).as_bytes())?;
            out.write("defender_curve.csv", curve_csv(&d).as_bytes())?;
            say(&mut stdout, "trained attacker and defender".to_string())?;
        }
        Request::Eval {
            policy,
            opponent,
            start,
            games,
            seed,
        } => {
            let agent = load_agent(policy)?;
            let side = match agent.role {
                Role::Attacker => Role::Defender,
                _ => Role::Attacker,
            };
            let opp = player(opponent, side, start.levels())?;
            let report = evaluate_agent_with_workers(&agent, &opp, *games, start, *seed, workers)?;
            let step = agent.train_curve.last().map_or(0, |p| p.step);
            let setting = format!("{start} vs {opponent}");
            let csv = format!(
                "setting,seed,step,win_rate,mean_reward,wilson_low,wilson_high\n\"{setting}\",{seed},{step},{},{},{},{}\n",
                report.win_rate, report.mean_reward, report.wilson_low, report.wilson_high
            );
            out.write("eval.csv", csv.as_bytes())?;
            say(
                &mut stdout,
                format!(
                    "win_rate={:.4} [{:.4}, {:.4}] over {games} games",
                    report.win_rate, report.wilson_low, report.wilson_high
                ),
            )?;
        }
        Request::Experiment { spec } => {
            let result = run_experiment(spec, workers)?;
            let dir = out.path("experiment");
            result.write_to(&dir)?;
            for row in &result.aggregate {
                say(
                    &mut stdout,
                    format!(
                        "{} stage {} {}: mean {:.4} min {:.4} max {:.4}",
                        row.experiment, row.after_stage, row.test, row.mean, row.min, row.max
                    ),
                )?;
            }
        }
        Request::Compare {
            policy,
            attacker,
            start,
            games,
            seed,
        } => {
            let agent = load_agent(policy)?;
            if agent.role == Role::Attacker {
                return Err(config_err("compare needs a defender or comparator"));
            }
            let Opponent::Attacker(att) = player(attacker, Role::Attacker, start.levels())? else {
                unreachable!("sides checked by player()");
            };
            let records = record_matches(att.as_ref(), &agent, start, *games, *seed)?;
            let dataset = build_dataset_with(&records, false);
            let (train_rows, held_out) = split_dataset(&dataset, 0.2, *seed);
            let sup = train_supervised(
                &train_rows,
                &SupervisedConfig::new(agent.params.arch, *seed),
            )?;
            let rows = compare_rl_vs_supervised(
                &agent,
                &sup,
                att.as_ref(),
                start,
                *games,
                seed.wrapping_add(1),
            )?;
            out.write("compare.csv", &csv_bytes(&rows, &COMPARISON_HEADER)?)?;
            out.save_agent("supervised.json", &sup)?;
            say(
                &mut stdout,
                format!(
                    "held-out supervised accuracy {:.4}",
                    dataset_accuracy(&sup, &held_out)
                ),
            )?;
            for r in &rows {
                say(
                    &mut stdout,
                    format!(
                        "{}: accuracy {:.4} win_rate {:.4} terminal {:.4} fatal {:.4}",
                        r.agent, r.accuracy, r.win_rate, r.terminal_rate, r.fatal_rate
                    ),
                )?;
            }
        }
        Request::NullSet { policy } => {
            let agent = load_agent(policy)?;
            let rate = null_set_check(&agent, agent.levels);
            out.write(
                "null_set.csv",
                format!("K,violation_rate\n{},{rate}\n", agent.levels).as_bytes(),
            )?;
            say(&mut stdout, format!("null-set violation rate {rate}"))?;
        }
        Request::Calibration {
            policy,
            attacker,
            start,
            games,
            seed,
        } => {
            let agent = load_agent(policy)?;
            let Opponent::Attacker(att) = player(attacker, Role::Attacker, start.levels())? else {
                unreachable!("sides checked by player()");
            };
            let records = record_matches(att.as_ref(), &agent, start, *games, *seed)?;
            let partitions: Vec<_> = records
                .iter()
                .flat_map(|r| r.steps.iter().map(|s| s.partition.clone()))
                .collect();
            let mut buf = Vec::new();
            calibration_dump(&agent, &partitions, &mut buf)?;
            out.write("calibration.csv", &buf)?;
            say(&mut stdout, format!("{} partitions", partitions.len()))?;
        }
        Request::Enumerate {
            levels,
            units,
            count,
            forbid_top,
        } => {
            if *count {
                let n = count_states_with(*levels, *units, *forbid_top)?;
                out.write("count.txt", format!("{n}\n").as_bytes())?;
                say(&mut stdout, n.to_string())?;
            } else {
                let states = enumerate_states(*levels, *units, *forbid_top)?;
                let mut lines = String::new();
                for s in &states {
                    lines.push_str(&serde_json::to_string(s).expect("states serialize"));
                    lines.push('\n');
                }
                out.write("states.jsonl", lines.as_bytes())?;
                stdout
                    .write_all(lines.as_bytes())
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
        }
        Request::Dataset {
            defender,
            attacker,
            start,
            games,
            seed,
            dedup,
        } => {
            let levels = start.levels();
            let (Opponent::Attacker(att), Opponent::Defender(def)) = (
                player(attacker, Role::Attacker, levels)?,
                player(defender, Role::Defender, levels)?,
            ) else {
                unreachable!("sides checked by player()");
            };
            let records = record_matches(att.as_ref(), def.as_ref(), start, *games, *seed)?;
            let rows = build_dataset_with(&records, *dedup);
            let mut lines = String::new();
            for r in &rows {
                lines.push_str(&serde_json::to_string(r).expect("rows serialize"));
                lines.push('\n');
            }
            out.write("dataset.jsonl", lines.as_bytes())?;
            say(&mut stdout, format!("{} labeled moves", rows.len()))?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.workers == 0 {
        return Err(config_err("--workers must be positive"));
    }
    let request = resolve(cli)?;
    let mut out = Outputs::new(&cli.out)?;
    execute(&request, &mut out, cli.workers)?;
    let manifest = Manifest {
        hash: content_hash(&request),
        request,
        outputs: out.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize");
    let path = cli.out.join(MANIFEST_FILE);
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}
