//! A plain tabular learner: game outcomes are counted per (recent context,
//! action) and the best-looking action is played, with epsilon exploration.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::rng::Stream;
use crate::world::{ActionId, Agent, Observation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// `1 / (1 + visits)` where visits counts earlier visits of the context.
    Decaying,
    Fixed(f64),
}

type Context = Vec<(usize, u32)>;

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    games: u64,
    half_points: u64,
}

impl Tally {
    /// Mean reward with one pseudo-draw as prior.
    fn estimate(&self) -> f64 {
        (self.half_points as f64 / 2.0 + 0.5) / (self.games as f64 + 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyLearner {
    action_count: usize,
    context_length: usize,
    exploration: Exploration,
    recent: VecDeque<(usize, u32)>,
    tallies: HashMap<(Context, usize), Tally>,
    visits: HashMap<Context, u64>,
    /// Choices made during the current game, credited when it ends.
    open_game: Vec<(Context, usize)>,
    last_action: Option<usize>,
}

impl FrequencyLearner {
    pub fn new(action_count: usize, context_length: usize, exploration: Exploration) -> Self {
        FrequencyLearner {
            action_count,
            context_length,
            exploration,
            recent: VecDeque::with_capacity(context_length + 1),
            tallies: HashMap::new(),
            visits: HashMap::new(),
            open_game: Vec::new(),
            last_action: None,
        }
    }

    fn observe(&mut self, observation: Observation) {
        let Some(action) = self.last_action else {
            return;
        };
        if let Some(h) = observation.signal.half_points() {
            for key in self.open_game.drain(..) {
                let t = self.tallies.entry(key).or_default();
                t.games += 1;
                t.half_points += u64::from(h);
            }
        }
        if self.context_length > 0 {
            if self.recent.len() == self.context_length {
                self.recent.pop_front();
            }
            self.recent.push_back((action, observation.symbol));
        }
    }

    fn greedy(&self, context: &Context) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for a in 0..self.action_count {
            let v = self
                .tallies
                .get(&(context.clone(), a))
                .copied()
                .unwrap_or_default()
                .estimate();
            if v > best_value {
                best_value = v;
                best = a;
            }
        }
        best
    }
}

impl Agent for FrequencyLearner {
    fn act(&mut self, observation: Observation, rng: &mut Stream) -> ActionId {
        self.observe(observation);
        let context: Context = self.recent.iter().copied().collect();
        let visits = self.visits.entry(context.clone()).or_insert(0);
        let epsilon = match self.exploration {
            Exploration::Decaying => 1.0 / (1.0 + *visits as f64),
            Exploration::Fixed(e) => e,
        };
        *visits += 1;
        let action = if epsilon >= 1.0 || rng.random::<f64>() < epsilon {
            rng.random_range(0..self.action_count)
        } else {
            self.greedy(&context)
        };
        self.open_game.push((context, action));
        self.last_action = Some(action);
        ActionId(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RandomAgent;
    use crate::builtin::{BitStream, BitstreamWorld};
    use crate::rng::stream;
    use crate::world::{run_life, LifeConfig};

    #[test]
    fn full_exploration_matches_random_agent() {
        let mut learner = FrequencyLearner::new(3, 2, Exploration::Fixed(1.0));
        let mut random = RandomAgent::new(3);
        let (mut r1, mut r2) = (stream(8, 1), stream(8, 1));
        for i in 0..500 {
            let obs = Observation::new(i % 2, crate::world::GameSignal::ALL[(i % 4) as usize]);
            assert_eq!(learner.act(obs, &mut r1), random.act(obs, &mut r2));
        }
    }

    #[test]
    fn learns_alternating_bits() {
        let mut world = BitstreamWorld::new(BitStream::named("alternating").unwrap());
        let mut agent = FrequencyLearner::new(2, 1, Exploration::Decaying);
        let life = run_life(&mut world, &mut agent, LifeConfig::new(400, 1).unwrap(), 4).unwrap();
        let tail = &life.games[200..];
        let wins = tail
            .iter()
            .filter(|g| g.outcome == crate::world::Outcome::Win)
            .count();
        assert!(wins as f64 / tail.len() as f64 > 0.95, "{wins}");
    }
}
