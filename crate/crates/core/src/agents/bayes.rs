//! Exact Bayesian agent over a small family of explicit worlds.
//!
//! The agent keeps a posterior over (world, world state) pairs and, at every
//! step, picks the action maximizing expected game reward over the next `h`
//! steps by expectimax over that posterior. It is only feasible for tiny
//! families, which the constructor enforces.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::builtin::{ExplicitWorld, WorldFamily};
use crate::rng::Stream;
use crate::world::{ActionId, Agent, Observation};

/// Largest total number of (world, state) pairs a posterior may span.
pub const MAX_BELIEF_STATES: usize = 4096;
pub const MAX_HORIZON: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanningError {
    #[error("family too large for exact planning: {0}")]
    FamilyTooLarge(String),
    #[error("planning horizon {0} exceeds the limit of {MAX_HORIZON}")]
    HorizonTooDeep(usize),
}

/// Unnormalized state distribution after `action` produced `obs`.
pub(crate) fn filter(
    world: &ExplicitWorld,
    belief: &[f64],
    action: usize,
    obs: Observation,
) -> Vec<f64> {
    let mut next = vec![0.0; world.n_states];
    for (s, &p) in belief.iter().enumerate() {
        if p == 0.0 || action >= world.action_count {
            continue;
        }
        for t in world.outcomes(s, action) {
            if t.obs == obs {
                next[t.next] += p * t.prob;
            }
        }
    }
    next
}

#[derive(Debug, Clone)]
pub struct BayesAgent {
    family: Arc<WorldFamily>,
    action_count: usize,
    horizon: usize,
    /// One distribution per world; world masses sum to 1.
    belief: Vec<Vec<f64>>,
    last_action: Option<usize>,
}

impl BayesAgent {
    pub fn new(family: Arc<WorldFamily>, horizon: usize) -> Result<Self, PlanningError> {
        if horizon == 0 || horizon > MAX_HORIZON {
            return Err(PlanningError::HorizonTooDeep(horizon));
        }
        let states = family.total_states();
        if states > MAX_BELIEF_STATES {
            return Err(PlanningError::FamilyTooLarge(format!(
                "{states} belief states (limit {MAX_BELIEF_STATES})"
            )));
        }
        let belief = family
            .worlds
            .iter()
            .zip(&family.weights)
            .map(|(w, &p)| {
                let mut b = vec![0.0; w.n_states];
                b[w.start] = p;
                b
            })
            .collect();
        Ok(BayesAgent {
            action_count: family.action_count(),
            family,
            horizon,
            belief,
            last_action: None,
        })
    }

    /// Posterior mass of each world.
    pub fn posterior(&self) -> Vec<f64> {
        self.belief.iter().map(|b| b.iter().sum()).collect()
    }

    fn update(&mut self, action: usize, obs: Observation) {
        let next: Vec<Vec<f64>> = self
            .family
            .worlds
            .iter()
            .zip(&self.belief)
            .map(|(w, b)| filter(w, b, action, obs))
            .collect();
        let total: f64 = next.iter().flatten().sum();
        // An observation no member can produce leaves the posterior unchanged.
        if total > 0.0 {
            self.belief = next
                .into_iter()
                .map(|b| b.into_iter().map(|p| p / total).collect())
                .collect();
        }
    }

    /// Observation outcomes of `action` under `belief`, grouped by observation,
    /// each with its (unnormalized) successor belief.
    fn branches(&self, belief: &[Vec<f64>], action: usize) -> BTreeMap<Observation, Vec<Vec<f64>>> {
        let mut out: BTreeMap<Observation, Vec<Vec<f64>>> = BTreeMap::new();
        for (wi, (w, b)) in self.family.worlds.iter().zip(belief).enumerate() {
            if action >= w.action_count {
                continue;
            }
            for (s, &p) in b.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for t in w.outcomes(s, action) {
                    let entry = out.entry(t.obs).or_insert_with(|| {
                        self.family
                            .worlds
                            .iter()
                            .map(|w| vec![0.0; w.n_states])
                            .collect()
                    });
                    entry[wi][t.next] += p * t.prob;
                }
            }
        }
        out
    }

    fn action_value(&self, belief: &[Vec<f64>], action: usize, depth: usize) -> f64 {
        let mut value = 0.0;
        for (obs, next) in self.branches(belief, action) {
            let p: f64 = next.iter().flatten().sum();
            if p == 0.0 {
                continue;
            }
            let reward = obs.signal.reward().unwrap_or(0.0);
            let future = if depth > 1 {
                let normalized: Vec<Vec<f64>> = next
                    .into_iter()
                    .map(|b| b.into_iter().map(|x| x / p).collect())
                    .collect();
                self.best(&normalized, depth - 1).1
            } else {
                0.0
            };
            value += p * (reward + future);
        }
        value
    }

    fn best(&self, belief: &[Vec<f64>], depth: usize) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.action_count {
            let v = self.action_value(belief, a, depth);
            if v > best.1 + 1e-12 {
                best = (a, v);
            }
        }
        best
    }

    /// Expected reward of each action over the planning horizon.
    pub fn action_values(&self) -> Vec<f64> {
        (0..self.action_count)
            .map(|a| self.action_value(&self.belief, a, self.horizon))
            .collect()
    }
}

impl Agent for BayesAgent {
    fn act(&mut self, observation: Observation, _rng: &mut Stream) -> ActionId {
        if let Some(a) = self.last_action {
            self.update(a, observation);
        }
        let (action, _) = self.best(&self.belief, self.horizon);
        self.last_action = Some(action);
        ActionId(action)
    }
}
