//! Finite tabular worlds and families of them.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;
use crate::world::{ActionId, GameSignal, Observation, World, WorldError};

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub prob: f64,
    pub next: usize,
    pub obs: Observation,
}

/// A world given by an explicit table of stochastic transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitWorld {
    pub name: String,
    pub n_states: usize,
    pub action_count: usize,
    pub obs_alphabet: usize,
    pub start: usize,
    /// Indexed by `state * action_count + action`.
    pub transitions: Vec<Vec<Transition>>,
}

#[derive(Debug, Error)]
pub enum ExplicitWorldError {
    #[error("world {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error("family weights must be positive and sum to 1")]
    BadWeights,
    #[error("family is empty")]
    EmptyFamily,
    #[error("family file: {0}")]
    Io(#[from] std::io::Error),
    #[error("family file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("family file has format {0:?}, expected family/1")]
    FormatVersionMismatch(String),
}

impl ExplicitWorld {
    pub fn new(
        name: impl Into<String>,
        n_states: usize,
        action_count: usize,
        obs_alphabet: usize,
        start: usize,
        transitions: Vec<Vec<Transition>>,
    ) -> Result<Self, ExplicitWorldError> {
        let w = ExplicitWorld {
            name: name.into(),
            n_states,
            action_count,
            obs_alphabet,
            start,
            transitions,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ExplicitWorldError> {
        let fail = |reason: String| {
            Err(ExplicitWorldError::Invalid {
                name: self.name.clone(),
                reason,
            })
        };
        if self.n_states == 0 || self.action_count == 0 || self.obs_alphabet == 0 {
            return fail("sizes must be positive".into());
        }
        if self.start >= self.n_states {
            return fail("start state out of range".into());
        }
        if self.transitions.len() != self.n_states * self.action_count {
            return fail("every (state, action) pair needs a distribution".into());
        }
        for (i, dist) in self.transitions.iter().enumerate() {
            let (s, a) = (i / self.action_count, i % self.action_count);
            if dist.is_empty() {
                return fail(format!("state {s} action {a} has no outcomes"));
            }
            let mut total = 0.0;
            for t in dist {
                if !(t.prob > 0.0 && t.prob <= 1.0) {
                    return fail(format!("state {s} action {a}: probability {}", t.prob));
                }
                if t.next >= self.n_states || t.obs.symbol as usize >= self.obs_alphabet {
                    return fail(format!("state {s} action {a}: outcome out of range"));
                }
                total += t.prob;
            }
            if (total - 1.0).abs() > PROB_TOLERANCE {
                return fail(format!(
                    "state {s} action {a}: probabilities sum to {total}"
                ));
            }
        }
        Ok(())
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Transition] {
        &self.transitions[state * self.action_count + action]
    }

    /// Samples an outcome with a single uniform draw.
    pub fn sample(&self, state: usize, action: usize, rng: &mut Stream) -> Transition {
        let dist = self.outcomes(state, action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for t in dist {
            acc += t.prob;
            if u < acc {
                return *t;
            }
        }
        *dist.last().expect("validated distribution is non-empty")
    }

    /// Probability of moving to `next` while showing `obs`.
    pub fn likelihood(&self, state: usize, action: usize, next: usize, obs: Observation) -> f64 {
        self.outcomes(state, action)
            .iter()
            .filter(|t| t.next == next && t.obs == obs)
            .map(|t| t.prob)
            .sum()
    }

    pub fn instantiate(self: &Arc<Self>) -> TabularWorld {
        TabularWorld {
            def: Arc::clone(self),
            state: self.start,
        }
    }
}

/// A running instance of an [`ExplicitWorld`].
#[derive(Debug, Clone)]
pub struct TabularWorld {
    def: Arc<ExplicitWorld>,
    state: usize,
}

impl TabularWorld {
    pub fn definition(&self) -> &ExplicitWorld {
        &self.def
    }
}

impl World for TabularWorld {
    fn action_count(&self) -> usize {
        self.def.action_count
    }

    fn obs_alphabet(&self) -> usize {
        self.def.obs_alphabet
    }

    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError> {
        if action.0 >= self.def.action_count {
            return Err(WorldError::Contract(format!(
                "action {action} out of range"
            )));
        }
        let t = self.def.sample(self.state, action.0, rng);
        self.state = t.next;
        Ok(t.obs)
    }

    fn state_index(&self) -> Option<usize> {
        Some(self.state)
    }

    fn decoded_view(&self) -> Option<String> {
        Some(format!("{} state {}", self.def.name, self.state))
    }
}

/// A finite list of explicit worlds with prior weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldFamily {
    pub worlds: Vec<Arc<ExplicitWorld>>,
    pub weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FamilyFile {
    format: String,
    worlds: Vec<FamilyMember>,
}

#[derive(Serialize, Deserialize)]
struct FamilyMember {
    weight: f64,
    world: ExplicitWorld,
}

impl WorldFamily {
    pub fn new(worlds: Vec<ExplicitWorld>, weights: Vec<f64>) -> Result<Self, ExplicitWorldError> {
        if worlds.is_empty() {
            return Err(ExplicitWorldError::EmptyFamily);
        }
        let sum: f64 = weights.iter().sum();
        if weights.len() != worlds.len()
            || weights.iter().any(|&w| w <= 0.0)
            || (sum - 1.0).abs() > PROB_TOLERANCE
        {
            return Err(ExplicitWorldError::BadWeights);
        }
        for w in &worlds {
            w.validate()?;
        }
        Ok(WorldFamily {
            worlds: worlds.into_iter().map(Arc::new).collect(),
            weights,
        })
    }

    pub fn uniform(worlds: Vec<ExplicitWorld>) -> Result<Self, ExplicitWorldError> {
        let n = worlds.len();
        Self::new(worlds, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn total_states(&self) -> usize {
        self.worlds.iter().map(|w| w.n_states).sum()
    }

    pub fn action_count(&self) -> usize {
        self.worlds
            .iter()
            .map(|w| w.action_count)
            .max()
            .unwrap_or(0)
    }

    /// Samples a member index according to the prior.
    pub fn sample_index(&self, rng: &mut Stream) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// Uniform family over the chosen members.
    pub fn subfamily(&self, indices: &[usize]) -> Result<Self, ExplicitWorldError> {
        Self::uniform(indices.iter().map(|&i| (*self.worlds[i]).clone()).collect())
    }

    pub fn to_json(&self) -> String {
        let file = FamilyFile {
            format: "family/1".into(),
            worlds: self
                .worlds
                .iter()
                .zip(&self.weights)
                .map(|(w, &weight)| FamilyMember {
                    weight,
                    world: (**w).clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("family serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExplicitWorldError> {
        let file: FamilyFile = serde_json::from_str(text)?;
        if file.format != "family/1" {
            return Err(ExplicitWorldError::FormatVersionMismatch(file.format));
        }
        let (weights, worlds) = file.worlds.into_iter().map(|m| (m.weight, m.world)).unzip();
        Self::new(worlds, weights)
    }

    pub fn read(path: &Path) -> Result<Self, ExplicitWorldError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn det(next: usize, symbol: u32, signal: GameSignal) -> Vec<Transition> {
    vec![Transition {
        prob: 1.0,
        next,
        obs: Observation::new(symbol, signal),
    }]
}

/// Two states: G (action 0 stays and wins, action 1 falls into T) and an
/// absorbing T that loses every game.
pub fn trap_world() -> ExplicitWorld {
    trap_world_with(GameSignal::Win, GameSignal::Loss)
}

pub fn trap_world_with(good: GameSignal, trap: GameSignal) -> ExplicitWorld {
    const G: usize = 0;
    const T: usize = 1;
    ExplicitWorld::new(
        "trap",
        2,
        2,
        2,
        G,
        vec![
            det(G, 0, good),
            det(T, 1, trap),
            det(T, 1, trap),
            det(T, 1, trap),
        ],
    )
    .expect("trap world is valid")
}

/// One-state world where `winning` wins every 1-step game and every other
/// action loses it.
pub fn lever_world(action_count: usize, winning: usize) -> ExplicitWorld {
    let transitions = (0..action_count)
        .map(|a| {
            let signal = if a == winning {
                GameSignal::Win
            } else {
                GameSignal::Loss
            };
            det(0, 0, signal)
        })
        .collect();
    ExplicitWorld::new(
        format!("lever{winning}"),
        1,
        action_count,
        1,
        0,
        transitions,
    )
    .expect("lever world is valid")
}

/// One state that never ends a game; every game times out.
pub fn silent_world(action_count: usize) -> ExplicitWorld {
    let transitions = (0..action_count)
        .map(|_| det(0, 0, GameSignal::NoSignal))
        .collect();
    ExplicitWorld::new("silent", 1, action_count, 1, 0, transitions).expect("silent world is valid")
}

/// The bandit world for one lookup table: each step the agent answers the
/// symbol shown last and wins iff its action equals `table[symbol]`; the
/// next symbol is uniform.
pub fn bandit_table_world(table: &[usize], action_count: usize) -> ExplicitWorld {
    let obs_count = table.len();
    let p = 1.0 / obs_count as f64;
    let mut transitions = Vec::with_capacity(obs_count * action_count);
    for &target in table {
        for a in 0..action_count {
            let signal = if a == target {
                GameSignal::Win
            } else {
                GameSignal::Loss
            };
            transitions.push(
                (0..obs_count)
                    .map(|o| Transition {
                        prob: p,
                        next: o,
                        obs: Observation::new(o as u32, signal),
                    })
                    .collect(),
            );
        }
    }
    let name = table
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("");
    ExplicitWorld::new(
        format!("bandit[{name}]"),
        obs_count,
        action_count,
        obs_count,
        0,
        transitions,
    )
    .expect("bandit world is valid")
}

/// Every table `observation -> action`, one world each, uniform prior.
/// World `i` encodes its table in base `action_count`, least significant
/// digit first.
pub fn oracle_bandit_family(obs_count: usize, action_count: usize) -> WorldFamily {
    let n = action_count.pow(obs_count as u32);
    let worlds = (0..n)
        .map(|mut code| {
            let table: Vec<usize> = (0..obs_count)
                .map(|_| {
                    let d = code % action_count;
                    code /= action_count;
                    d
                })
                .collect();
            bandit_table_world(&table, action_count)
        })
        .collect();
    WorldFamily::uniform(worlds).expect("bandit family is valid")
}

/// Two-phase recall world. Phase one shows a random bit and rewards copying
/// it; phase two shows a neutral symbol and rewards repeating the same bit.
/// Acting well in phase two needs memory of phase one.
pub fn recall_world() -> ExplicitWorld {
    // states 0,1: phase one holding bit b; states 2,3: phase two holding bit b
    let mut transitions = Vec::new();
    for b in 0..2usize {
        for a in 0..2usize {
            let signal = if a == b {
                GameSignal::Win
            } else {
                GameSignal::Loss
            };
            transitions.push(det(2 + b, 2, signal));
        }
    }
    for b in 0..2usize {
        for a in 0..2usize {
            let signal = if a == b {
                GameSignal::Win
            } else {
                GameSignal::Loss
            };
            transitions.push(
                (0..2)
                    .map(|x| Transition {
                        prob: 0.5,
                        next: x,
                        obs: Observation::new(x as u32, signal),
                    })
                    .collect(),
            );
        }
    }
    ExplicitWorld::new("recall", 4, 2, 3, 0, transitions).expect("recall world is valid")
}
