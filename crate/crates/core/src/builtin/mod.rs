//! Hand-built worlds.

pub mod bitstream;
pub mod explicit;
pub mod oscillating;
pub mod tictactoe;

pub use bitstream::{BitStream, BitstreamWorld};
pub use explicit::{
    bandit_table_world, lever_world, oracle_bandit_family, recall_world, silent_world, trap_world,
    trap_world_with, ExplicitWorld, ExplicitWorldError, TabularWorld, Transition, WorldFamily,
};
pub use oscillating::OscillatingWorld;
pub use tictactoe::{Opponent, TicTacToeWorld};

/// Explicit worlds addressable by name: `trap`, `recall`, `silent`, `lever:<actions>:<winning>`,
/// `bandit:<table digits>:<actions>`.
pub fn explicit_by_name(name: &str) -> Option<ExplicitWorld> {
    let mut parts = name.split(':');
    match parts.next()? {
        "trap" => Some(trap_world()),
        "recall" => Some(recall_world()),
        "silent" => Some(silent_world(2)),
        "lever" => {
            let actions: usize = parts.next()?.parse().ok()?;
            let winning: usize = parts.next()?.parse().ok()?;
            (actions > 0 && winning < actions).then(|| lever_world(actions, winning))
        }
        "bandit" => {
            let table: Vec<usize> = parts
                .next()?
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as usize))
                .collect::<Option<_>>()?;
            let actions: usize = parts.next()?.parse().ok()?;
            (!table.is_empty() && table.iter().all(|&t| t < actions))
                .then(|| bandit_table_world(&table, actions))
        }
        _ => None,
    }
}
