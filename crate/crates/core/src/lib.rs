//! Engine, exact strategies and learning harness for attacker-defender
//! tenure games.

pub mod analysis;
pub mod game;
pub mod rl;
pub mod start_states;
pub mod strategies;

pub use game::{
    play_match, AttackerPolicy, DefenderPolicy, DestroyChoice, GameError, GameParams, GameRng,
    GameState, MatchRecord, Outcome, Partition, Potential, Units, Winner,
};
