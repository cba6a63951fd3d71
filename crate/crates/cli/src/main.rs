//! `ess`: matches, training, evaluation, self-play, analysis and state
//! enumeration from one command.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "ess",
    version,
    about = "Attacker-defender tenure games: exact play and learning"
)]
pub struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for weights, tables and the run manifest.
    #[arg(long, global = true, default_value = "ess-out")]
    pub out: PathBuf,
    /// Manifest of an earlier run to repeat, or a training config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Threads for match evaluation; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

/// Board and start distribution shared by most subcommands.
#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// Number of levels below the top.
    #[arg(long = "K", short = 'K')]
    pub levels: Option<usize>,
    /// Start potential in units of 2^-K.
    #[arg(long)]
    pub potential_units: Option<u64>,
    /// Start potential as a number; must be a whole number of units.
    #[arg(long, conflicts_with = "potential_units")]
    pub potential: Option<f64>,
    /// Start distribution: level0, spread or single, optionally `kind:units=N`.
    #[arg(long, default_value = "spread")]
    pub start: String,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// value, policy-grad, actor-critic or random-search.
    #[arg(long, default_value = "value")]
    pub algo: String,
    /// Side to train: defender or attacker.
    #[arg(long, default_value = "defender")]
    pub role: String,
    /// Opponent: a scripted name (prefix, mixed:0.8, optimal, ...) or policy:<file>.
    #[arg(long)]
    pub opponent: Option<String>,
    #[arg(long, default_value_t = 200_000)]
    pub steps: u64,
    /// linear or mlp2x300; defaults per algorithm.
    #[arg(long)]
    pub arch: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Play scripted or saved players against each other.
    Play {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value = "prefix")]
        attacker: String,
        #[arg(long, default_value = "optimal")]
        defender: String,
        #[arg(long, default_value_t = 100)]
        games: usize,
    },
    /// Train one agent against a fixed opponent.
    Train(TrainArgs),
    /// Train a comparator that attacks by binary search and defends by comparison.
    Selfplay {
        #[command(flatten)]
        game: GameArgs,
        /// Attacker used for the training curve.
        #[arg(long, default_value = "mixed")]
        opponent: String,
        #[arg(long, default_value_t = 200_000)]
        steps: u64,
        #[arg(long)]
        arch: Option<String>,
    },
    /// Train an attacker and a defender against each other in turns.
    Multiagent {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value = "value")]
        algo: String,
        #[arg(long, default_value_t = 200_000)]
        steps: u64,
        #[arg(long, default_value_t = 20_000)]
        switch_every: u64,
        #[arg(long)]
        arch: Option<String>,
    },
    /// Evaluate a saved agent against an opponent.
    Eval {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, required_unless_present = "config")]
        policy: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        opponent: Option<String>,
        #[arg(long, default_value_t = 1000)]
        games: usize,
    },
    /// Mistake grading, supervised comparison, probes and experiment specs.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// List start states of a given potential, or count them.
    Enumerate {
        #[arg(long = "K", short = 'K', required_unless_present = "config")]
        levels: Option<usize>,
        #[arg(long)]
        potential_units: Option<u64>,
        #[arg(long, conflicts_with = "potential_units")]
        potential: Option<f64>,
        /// Print only the number of states.
        #[arg(long)]
        count: bool,
        /// Leave out states with a piece already at the top.
        #[arg(long)]
        forbid_top: bool,
    },
    /// Record defender moves with oracle labels as JSON lines.
    Dataset {
        #[command(flatten)]
        game: GameArgs,
        /// Defender whose moves are recorded: scripted name or policy:<file>.
        #[arg(long, default_value = "optimal")]
        defender: String,
        #[arg(long, default_value = "mixed")]
        attacker: String,
        #[arg(long, default_value_t = 1000)]
        games: usize,
        /// Keep only the first occurrence of each partition.
        #[arg(long)]
        dedup: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Run an experiment spec file.
    Experiment {
        #[arg(long, required_unless_present = "config")]
        spec: Option<PathBuf>,
    },
    /// RL agent versus a supervised classifier trained on its own games.
    Compare {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, required_unless_present = "config")]
        policy: Option<PathBuf>,
        #[arg(long, default_value = "mixed")]
        attacker: String,
        #[arg(long, default_value_t = 1000)]
        games: usize,
    },
    /// Share of one-hot sets the agent values below the empty set.
    NullSet {
        #[arg(long, required_unless_present = "config")]
        policy: Option<PathBuf>,
    },
    /// Confidence against potential difference on sampled partitions.
    Calibration {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, required_unless_present = "config")]
        policy: Option<PathBuf>,
        #[arg(long, default_value = "mixed")]
        attacker: String,
        #[arg(long, default_value_t = 200)]
        games: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
