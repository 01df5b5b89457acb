//! An agent whose training is finite but, at realistic lifespans, never ends.
//!
//! It walks through every constant policy and then every lookup policy on the
//! last observed symbol, trying each for an epoch that doubles after every
//! switch. Once the enumeration is exhausted it plays the best-scoring policy
//! forever.

use crate::rng::Stream;
use crate::world::{ActionId, Agent, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    Constant(usize),
    /// Lookup code in base `action_count`, one digit per observed symbol.
    Lookup(u64),
}

#[derive(Debug, Clone)]
pub struct RetardedAgent {
    action_count: usize,
    obs_alphabet: usize,
    lookup_count: Option<u64>,
    current: Policy,
    epoch_len: u64,
    epoch_left: u64,
    epoch_games: u64,
    epoch_half_points: u64,
    best: Option<(Policy, f64)>,
    settled: bool,
    epochs: Vec<u64>,
    started: bool,
}

impl RetardedAgent {
    pub fn new(action_count: usize, obs_alphabet: usize, initial_epoch: u64) -> Self {
        let epoch = initial_epoch.max(1);
        RetardedAgent {
            action_count,
            obs_alphabet,
            lookup_count: (action_count as u64).checked_pow(obs_alphabet as u32),
            current: Policy::Constant(0),
            epoch_len: epoch,
            epoch_left: epoch,
            epoch_games: 0,
            epoch_half_points: 0,
            best: None,
            settled: false,
            epochs: vec![epoch],
            started: false,
        }
    }

    /// Lengths of the epochs started so far.
    pub fn epoch_lengths(&self) -> &[u64] {
        &self.epochs
    }

    pub fn is_settled(&self) -> bool {
        self.settled
    }

    fn choose(&self, policy: Policy, symbol: u32) -> usize {
        match policy {
            Policy::Constant(a) => a,
            Policy::Lookup(code) => {
                let digit = (symbol as usize).min(self.obs_alphabet - 1);
                let place = (self.action_count as u64).pow(digit as u32);
                ((code / place) % self.action_count as u64) as usize
            }
        }
    }

    fn next_policy(&self) -> Option<Policy> {
        match self.current {
            Policy::Constant(a) if a + 1 < self.action_count => Some(Policy::Constant(a + 1)),
            Policy::Constant(_) => Some(Policy::Lookup(0)),
            Policy::Lookup(code) => match self.lookup_count {
                Some(n) if code + 1 >= n => None,
                _ => Some(Policy::Lookup(code + 1)),
            },
        }
    }

    fn close_epoch(&mut self) {
        let score = if self.epoch_games == 0 {
            0.5
        } else {
            self.epoch_half_points as f64 / (2 * self.epoch_games) as f64
        };
        if self.best.is_none_or(|(_, s)| score > s) {
            self.best = Some((self.current, score));
        }
        match self.next_policy() {
            Some(p) => {
                self.current = p;
                self.epoch_len = self.epoch_len.saturating_mul(2);
                self.epoch_left = self.epoch_len;
                self.epochs.push(self.epoch_len);
            }
            None => {
                self.current = self.best.expect("at least one epoch scored").0;
                self.settled = true;
            }
        }
        self.epoch_games = 0;
        self.epoch_half_points = 0;
    }
}

impl Agent for RetardedAgent {
    fn act(&mut self, observation: Observation, _rng: &mut Stream) -> ActionId {
        if self.started && !self.settled {
            if let Some(h) = observation.signal.half_points() {
                self.epoch_games += 1;
                self.epoch_half_points += u64::from(h);
            }
            if self.epoch_left == 0 {
                self.close_epoch();
            }
        }
        self.started = true;
        if !self.settled {
            self.epoch_left -= 1;
        }
        ActionId(self.choose(self.current, observation.symbol))
    }
}
