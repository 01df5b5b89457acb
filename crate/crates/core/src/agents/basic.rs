use rand::Rng;

use crate::rng::Stream;
use crate::world::{ActionId, Agent, Observation};

/// Moves uniformly at random, ignoring its input.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    action_count: usize,
}

impl RandomAgent {
    pub fn new(action_count: usize) -> Self {
        RandomAgent { action_count }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _observation: Observation, rng: &mut Stream) -> ActionId {
        ActionId(rng.random_range(0..self.action_count))
    }
}

/// Repeats one constant move, ignoring its input.
#[derive(Debug, Clone)]
pub struct DeadAgent {
    action: ActionId,
}

impl DeadAgent {
    pub fn new(action: usize) -> Self {
        DeadAgent {
            action: ActionId(action),
        }
    }
}

impl Agent for DeadAgent {
    fn act(&mut self, _observation: Observation, _rng: &mut Stream) -> ActionId {
        self.action
    }
}

/// Plays `win_action` during even dyadic epochs (steps 0, 3..7, 15..31, ...)
/// and `lose_action` during odd ones.
#[derive(Debug, Clone)]
pub struct OscillatingAgent {
    win_action: usize,
    lose_action: usize,
    steps: u64,
}

impl OscillatingAgent {
    pub fn new(win_action: usize, lose_action: usize) -> Self {
        OscillatingAgent {
            win_action,
            lose_action,
            steps: 0,
        }
    }
}

impl Agent for OscillatingAgent {
    fn act(&mut self, _observation: Observation, _rng: &mut Stream) -> ActionId {
        let epoch = crate::builtin::oscillating::block_of(self.steps);
        self.steps += 1;
        ActionId(if epoch.is_multiple_of(2) {
            self.win_action
        } else {
            self.lose_action
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn random_agent_is_uniform() {
        let mut agent = RandomAgent::new(3);
        let mut rng = stream(12, 1);
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[agent.act(Observation::BLANK, &mut rng).0] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn random_agent_repeats_with_seed() {
        let run = || {
            let mut a = RandomAgent::new(5);
            let mut rng = stream(3, 1);
            (0..50)
                .map(|_| a.act(Observation::BLANK, &mut rng).0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dead_agent_is_constant() {
        let mut a = DeadAgent::new(2);
        let mut rng = stream(0, 1);
        for s in 0..20 {
            let obs = Observation::new(s % 3, crate::world::GameSignal::ALL[(s % 4) as usize]);
            assert_eq!(a.act(obs, &mut rng), ActionId(2));
        }
    }

    #[test]
    fn oscillating_agent_switches_on_dyadic_epochs() {
        let mut a = OscillatingAgent::new(0, 1);
        let mut rng = stream(0, 1);
        let acts: Vec<usize> = (0..7)
            .map(|_| a.act(Observation::BLANK, &mut rng).0)
            .collect();
        assert_eq!(acts, [0, 1, 1, 0, 0, 0, 0]);
    }
}
