//! A world whose outcomes ignore the agent and alternate in dyadic blocks:
//! 1 win, 2 losses, 4 wins, 8 losses, and so on.

use crate::rng::Stream;
use crate::world::{ActionId, GameSignal, Observation, World, WorldError};

#[derive(Debug, Clone)]
pub struct OscillatingWorld {
    action_count: usize,
    games_played: u64,
}

impl OscillatingWorld {
    pub fn new(action_count: usize) -> Self {
        OscillatingWorld {
            action_count: action_count.max(1),
            games_played: 0,
        }
    }
}

/// Block index of the `game`-th game (0-based): block `i` spans games
/// `2^i - 1 .. 2^(i+1) - 1`.
pub fn block_of(game: u64) -> u32 {
    63 - (game + 1).leading_zeros()
}

impl World for OscillatingWorld {
    fn action_count(&self) -> usize {
        self.action_count
    }

    fn obs_alphabet(&self) -> usize {
        1
    }

    fn step(&mut self, _action: ActionId, _rng: &mut Stream) -> Result<Observation, WorldError> {
        let signal = if block_of(self.games_played).is_multiple_of(2) {
            GameSignal::Win
        } else {
            GameSignal::Loss
        };
        self.games_played += 1;
        Ok(Observation::new(0, signal))
    }

    fn decoded_view(&self) -> Option<String> {
        Some(format!(
            "game {} block {}",
            self.games_played,
            block_of(self.games_played)
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks() {
        let blocks: Vec<u32> = (0..15).map(block_of).collect();
        assert_eq!(blocks, [0, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3]);
    }
}
