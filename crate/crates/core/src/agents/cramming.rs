//! An agent built for one fixed family of worlds.
//!
//! For every training world an optimal policy is computed up front. At run
//! time the agent keeps the set of training worlds still consistent with what
//! it has seen and follows the plan of the lowest-indexed one; when none is
//! left it keeps repeating action 0.

use std::sync::Arc;

use crate::agents::bayes::{filter, PlanningError};
use crate::builtin::WorldFamily;
use crate::fatal::{book, optimal_values, ValueTable};
use crate::rng::Stream;
use crate::world::{ActionId, Agent, LifeConfig, Observation};

pub const MAX_CRAM_WORLDS: usize = 256;

/// Per-world optimal plans for a training family under one life config.
#[derive(Debug, Clone)]
pub struct CrammingTable {
    family: Arc<WorldFamily>,
    plans: Vec<ValueTable>,
    config: LifeConfig,
}

impl CrammingTable {
    pub fn family(&self) -> &WorldFamily {
        &self.family
    }

    pub fn plan(&self, world: usize) -> &ValueTable {
        &self.plans[world]
    }
}

pub fn build_cramming_table(
    family: Arc<WorldFamily>,
    config: LifeConfig,
) -> Result<Arc<CrammingTable>, PlanningError> {
    if family.len() > MAX_CRAM_WORLDS {
        return Err(PlanningError::FamilyTooLarge(format!(
            "{} worlds (limit {MAX_CRAM_WORLDS})",
            family.len()
        )));
    }
    let plans = family
        .worlds
        .iter()
        .map(|w| {
            optimal_values(w, config).map_err(|e| PlanningError::FamilyTooLarge(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok(Arc::new(CrammingTable {
        family,
        plans,
        config,
    }))
}

#[derive(Debug, Clone)]
pub struct CrammingAgent {
    table: Arc<CrammingTable>,
    /// State distribution per training world, `None` once inconsistent.
    beliefs: Vec<Option<Vec<f64>>>,
    games_left: u32,
    step_in_game: u32,
    last_action: Option<usize>,
}

impl CrammingAgent {
    pub fn new(table: Arc<CrammingTable>) -> Self {
        let beliefs = table
            .family
            .worlds
            .iter()
            .map(|w| {
                let mut b = vec![0.0; w.n_states];
                b[w.start] = 1.0;
                Some(b)
            })
            .collect();
        CrammingAgent {
            games_left: table.config.games,
            step_in_game: 0,
            table,
            beliefs,
            last_action: None,
        }
    }

    /// Training worlds still consistent with the history.
    pub fn consistent_worlds(&self) -> Vec<usize> {
        self.beliefs
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|_| i))
            .collect()
    }

    fn update(&mut self, action: usize, obs: Observation) {
        for (w, belief) in self.table.family.worlds.iter().zip(self.beliefs.iter_mut()) {
            if let Some(b) = belief {
                let next = filter(w, b, action, obs);
                let total: f64 = next.iter().sum();
                *belief = (total > 0.0).then(|| next.into_iter().map(|p| p / total).collect());
            }
        }
        if self.games_left > 0 {
            let (_, g, k) = book(
                obs.signal,
                self.games_left,
                self.step_in_game,
                self.table.config.max_steps_per_game,
            );
            self.games_left = g;
            self.step_in_game = k;
        }
    }

    fn planned_action(&self) -> usize {
        let Some((wi, belief)) = self
            .beliefs
            .iter()
            .enumerate()
            .find_map(|(i, b)| b.as_ref().map(|b| (i, b)))
        else {
            return 0;
        };
        if self.games_left == 0 {
            return 0;
        }
        let world = &self.table.family.worlds[wi];
        let plan = &self.table.plans[wi];
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..world.action_count {
            let q: f64 = belief
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(s, &p)| p * plan.q(world, s, a, self.games_left, self.step_in_game))
                .sum();
            if q > best.1 + 1e-12 {
                best = (a, q);
            }
        }
        best.0
    }
}

impl Agent for CrammingAgent {
    fn act(&mut self, observation: Observation, _rng: &mut Stream) -> ActionId {
        if let Some(a) = self.last_action {
            self.update(a, observation);
        }
        let action = self.planned_action();
        self.last_action = Some(action);
        ActionId(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::oracle_bandit_family;
    use crate::rng::stream;
    use crate::world::GameSignal;

    #[test]
    fn first_action_follows_world_zero() {
        let family = Arc::new(oracle_bandit_family(2, 3).subfamily(&[7, 2]).unwrap());
        let table = build_cramming_table(family, LifeConfig::new(5, 1).unwrap()).unwrap();
        let mut agent = CrammingAgent::new(table);
        // world 0 is table code 7 = digits (1, 2): symbol 0 -> action 1
        assert_eq!(
            agent.act(Observation::BLANK, &mut stream(0, 1)),
            ActionId(1)
        );
        assert_eq!(agent.consistent_worlds(), vec![0, 1]);
    }

    #[test]
    fn falls_back_to_action_zero() {
        let family = Arc::new(oracle_bandit_family(2, 3).subfamily(&[8]).unwrap());
        let table = build_cramming_table(family, LifeConfig::new(5, 1).unwrap()).unwrap();
        let mut agent = CrammingAgent::new(table);
        let mut rng = stream(0, 1);
        assert_eq!(agent.act(Observation::BLANK, &mut rng), ActionId(2));
        let next = agent.act(Observation::new(1, GameSignal::Loss), &mut rng);
        assert!(agent.consistent_worlds().is_empty());
        assert_eq!(next, ActionId(0));
    }
}
