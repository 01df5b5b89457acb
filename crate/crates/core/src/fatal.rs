//! Fatal errors in tabular worlds.
//!
//! Two notions are implemented side by side:
//! * a *fatal group* is a closed set of world states (no action leads out of
//!   it) whose best achievable value is strictly below the best value from
//!   the initial state;
//! * a *fatal step* is a step of a concrete life after which the best
//!   anticipated final Success of that life went down.
//!
//! Both rest on [`optimal_values`], a backward induction over world state and
//! game clock (games left, steps into the current game).

use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::builtin::ExplicitWorld;
use crate::world::{GameSignal, LifeConfig, LifeRecord};

pub const VALUE_TOLERANCE: f64 = 1e-9;
/// Upper bound on `(games + 1) * max_steps_per_game * states` table cells.
pub const MAX_TABLE_CELLS: u64 = 40_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum FatalError {
    #[error("world {0:?} is not tabular; fatal-error analysis needs an explicit world")]
    WorldNotTabular(String),
    #[error("value table would need {cells} cells (limit {MAX_TABLE_CELLS})")]
    StateSpaceTooLarge { cells: u64 },
    #[error("life does not match the world at step {step}: {reason}")]
    TrajectoryMismatch { step: usize, reason: String },
}

/// Best expected reward still to be collected, per (games left, step in
/// current game, world state).
#[derive(Debug, Clone)]
pub struct ValueTable {
    n_states: usize,
    config: LifeConfig,
    reward_to_go: Vec<f64>,
    best_action: Vec<u32>,
}

impl ValueTable {
    fn index(&self, state: usize, games_left: u32, step_in_game: u32) -> usize {
        ((games_left as usize * self.config.max_steps_per_game as usize) + step_in_game as usize)
            * self.n_states
            + state
    }

    pub fn config(&self) -> LifeConfig {
        self.config
    }

    /// Unnormalized expected reward sum of the remaining games under optimal play.
    pub fn reward_to_go(&self, state: usize, games_left: u32, step_in_game: u32) -> f64 {
        if games_left == 0 {
            return 0.0;
        }
        self.reward_to_go[self.index(state, games_left, step_in_game)]
    }

    /// Best achievable contribution of the remaining games to final Success.
    pub fn value(&self, state: usize, games_left: u32, step_in_game: u32) -> f64 {
        self.reward_to_go(state, games_left, step_in_game) / f64::from(self.config.games)
    }

    /// Value from a state at the very start of a life.
    pub fn initial_value(&self, state: usize) -> f64 {
        self.value(state, self.config.games, 0)
    }

    /// Best anticipated final Success given the rewards already banked.
    pub fn anticipated_success(
        &self,
        banked_half_points: u64,
        state: usize,
        games_left: u32,
        step_in_game: u32,
    ) -> f64 {
        (banked_half_points as f64 / 2.0 + self.reward_to_go(state, games_left, step_in_game))
            / f64::from(self.config.games)
    }

    /// Expected reward to go after taking `action` and playing optimally afterwards.
    pub fn q(
        &self,
        world: &ExplicitWorld,
        state: usize,
        action: usize,
        games_left: u32,
        step_in_game: u32,
    ) -> f64 {
        if games_left == 0 {
            return 0.0;
        }
        q_value(world, self, state, action, games_left, step_in_game)
    }

    /// Optimal action, lowest index among ties. `None` once the life is over.
    pub fn best_action(&self, state: usize, games_left: u32, step_in_game: u32) -> Option<usize> {
        (games_left > 0)
            .then(|| self.best_action[self.index(state, games_left, step_in_game)] as usize)
    }
}

/// Reward booked on a step and the clock after it.
pub(crate) fn book(
    signal: GameSignal,
    games_left: u32,
    step_in_game: u32,
    max_steps: u32,
) -> (f64, u32, u32) {
    match signal.reward() {
        Some(r) => (r, games_left - 1, 0),
        None if step_in_game + 1 == max_steps => (0.5, games_left - 1, 0),
        None => (0.0, games_left, step_in_game + 1),
    }
}

fn q_value(
    world: &ExplicitWorld,
    table: &ValueTable,
    state: usize,
    action: usize,
    games_left: u32,
    step_in_game: u32,
) -> f64 {
    world
        .outcomes(state, action)
        .iter()
        .map(|t| {
            let (r, g, k) = book(
                t.obs.signal,
                games_left,
                step_in_game,
                table.config.max_steps_per_game,
            );
            t.prob * (r + table.reward_to_go(t.next, g, k))
        })
        .sum()
}

/// Backward induction over the whole life: the horizon is every remaining
/// game, each capped at `max_steps_per_game` steps.
pub fn optimal_values(world: &ExplicitWorld, config: LifeConfig) -> Result<ValueTable, FatalError> {
    let cells = (u64::from(config.games) + 1)
        * u64::from(config.max_steps_per_game)
        * world.n_states as u64;
    if cells > MAX_TABLE_CELLS {
        return Err(FatalError::StateSpaceTooLarge { cells });
    }
    let mut table = ValueTable {
        n_states: world.n_states,
        config,
        reward_to_go: vec![0.0; cells as usize],
        best_action: vec![0; cells as usize],
    };
    for g in 1..=config.games {
        for k in (0..config.max_steps_per_game).rev() {
            for s in 0..world.n_states {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for a in 0..world.action_count {
                    let q = q_value(world, &table, s, a, g, k);
                    if q > best {
                        best = q;
                        arg = a;
                    }
                }
                let i = table.index(s, g, k);
                table.reward_to_go[i] = best;
                table.best_action[i] = arg as u32;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatalGroup {
    pub states: Vec<usize>,
    /// Best value from any state of the group.
    pub inside_value: f64,
    /// Best value from the initial state.
    pub outside_value: f64,
}

/// True when no action leads from a state of `set` to a state outside it.
pub fn is_closed(world: &ExplicitWorld, set: &BTreeSet<usize>) -> bool {
    set.iter().all(|&s| {
        (0..world.action_count).all(|a| world.outcomes(s, a).iter().all(|t| set.contains(&t.next)))
    })
}

/// Minimal closed groups (sink components of the all-actions transition
/// graph) that are strictly worse than the initial state.
pub fn find_fatal_groups(
    world: &ExplicitWorld,
    config: LifeConfig,
) -> Result<Vec<FatalGroup>, FatalError> {
    let values = optimal_values(world, config)?;
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..world.n_states).map(|s| graph.add_node(s)).collect();
    let mut edges = BTreeSet::new();
    for s in 0..world.n_states {
        for a in 0..world.action_count {
            for t in world.outcomes(s, a) {
                edges.insert((s, t.next));
            }
        }
    }
    for &(s, t) in &edges {
        graph.add_edge(nodes[s], nodes[t], ());
    }
    let outside_value = values.initial_value(world.start);
    let mut groups = Vec::new();
    for component in tarjan_scc(&graph) {
        let set: BTreeSet<usize> = component.iter().map(|&n| graph[n]).collect();
        if !is_closed(world, &set) {
            continue;
        }
        let inside_value = set
            .iter()
            .map(|&s| values.initial_value(s))
            .fold(f64::NEG_INFINITY, f64::max);
        if inside_value < outside_value - VALUE_TOLERANCE {
            groups.push(FatalGroup {
                states: set.into_iter().collect(),
                inside_value,
                outside_value,
            });
        }
    }
    groups.sort_by(|a, b| a.states.cmp(&b.states));
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditFinding {
    pub step: usize,
    pub state: usize,
    pub value_before: f64,
    pub value_after: f64,
}

/// Best anticipated final Success before every step of `life` and after the
/// last one.
pub fn anticipated_trajectory(
    world: &ExplicitWorld,
    life: &LifeRecord,
    table: &ValueTable,
) -> Result<Vec<f64>, FatalError> {
    let config = table.config();
    let mismatch = |step: usize, reason: &str| FatalError::TrajectoryMismatch {
        step,
        reason: reason.to_string(),
    };
    if life.states.len() != life.steps.len() + 1 {
        return Err(mismatch(0, "life has no recorded state trajectory"));
    }
    if life.states[0] != world.start {
        return Err(mismatch(0, "first state is not the world's start state"));
    }
    if life.config != config {
        return Err(mismatch(0, "life was run under a different config"));
    }
    let mut games_left = config.games;
    let mut step_in_game = 0;
    let mut banked = 0u64;
    let mut out = Vec::with_capacity(life.steps.len() + 1);
    out.push(table.anticipated_success(0, world.start, games_left, 0));
    for (t, step) in life.steps.iter().enumerate() {
        let (s, next) = (life.states[t], life.states[t + 1]);
        if games_left == 0 {
            return Err(mismatch(t, "steps continue after the last game"));
        }
        if s >= world.n_states || next >= world.n_states || step.action.0 >= world.action_count {
            return Err(mismatch(t, "state or action out of range"));
        }
        if world.likelihood(s, step.action.0, next, step.observation) <= 0.0 {
            return Err(mismatch(t, "transition impossible in this world"));
        }
        let (reward, g, k) = book(
            step.observation.signal,
            games_left,
            step_in_game,
            config.max_steps_per_game,
        );
        banked += (reward * 2.0) as u64;
        games_left = g;
        step_in_game = k;
        out.push(table.anticipated_success(banked, next, games_left, step_in_game));
    }
    if games_left != 0 {
        return Err(mismatch(
            life.steps.len(),
            "life ended before its last game",
        ));
    }
    Ok(out)
}

/// Steps after which the best anticipated final Success dropped.
pub fn audit_life(
    world: &ExplicitWorld,
    life: &LifeRecord,
    config: LifeConfig,
) -> Result<Vec<AuditFinding>, FatalError> {
    let table = optimal_values(world, config)?;
    audit_with_table(world, life, &table)
}

pub fn audit_with_table(
    world: &ExplicitWorld,
    life: &LifeRecord,
    table: &ValueTable,
) -> Result<Vec<AuditFinding>, FatalError> {
    let values = anticipated_trajectory(world, life, table)?;
    Ok(values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - VALUE_TOLERANCE)
        .map(|(step, w)| AuditFinding {
            step,
            state: life.states[step],
            value_before: w[0],
            value_after: w[1],
        })
        .collect())
}

pub fn audit_csv(findings: &[AuditFinding]) -> String {
    let mut out = String::from("step,state,value_before,value_after\n");
    for f in findings {
        out.push_str(&format!(
            "{},{},{},{}\n",
            f.step, f.state, f.value_before, f.value_after
        ));
    }
    out
}

/// Where the two fatal-error definitions agree and disagree on one life.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitionComparison {
    /// Steps that moved the life into a fatal group.
    pub group_entries: Vec<usize>,
    /// Steps flagged by the value-drop audit.
    pub value_drops: Vec<usize>,
}

impl DefinitionComparison {
    pub fn only_group_entries(&self) -> Vec<usize> {
        self.group_entries
            .iter()
            .copied()
            .filter(|s| !self.value_drops.contains(s))
            .collect()
    }

    pub fn only_value_drops(&self) -> Vec<usize> {
        self.value_drops
            .iter()
            .copied()
            .filter(|s| !self.group_entries.contains(s))
            .collect()
    }
}

pub fn compare_definitions(
    world: &ExplicitWorld,
    life: &LifeRecord,
    config: LifeConfig,
) -> Result<DefinitionComparison, FatalError> {
    let groups = find_fatal_groups(world, config)?;
    let fatal: BTreeSet<usize> = groups
        .iter()
        .flat_map(|g| g.states.iter().copied())
        .collect();
    let value_drops = audit_life(world, life, config)?
        .into_iter()
        .map(|f| f.step)
        .collect();
    let group_entries = life
        .states
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !fatal.contains(&w[0]) && fatal.contains(&w[1]))
        .map(|(t, _)| t)
        .collect();
    Ok(DefinitionComparison {
        group_entries,
        value_drops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{lever_world, trap_world, Transition};
    use crate::world::Observation;

    fn cfg(g: u32, m: u32) -> LifeConfig {
        LifeConfig::new(g, m).unwrap()
    }

    #[test]
    fn always_win_world_has_value_one() {
        let w = lever_world(1, 0);
        let t = optimal_values(&w, cfg(10, 3)).unwrap();
        for g in 1..=10 {
            assert_eq!(t.reward_to_go(0, g, 0), f64::from(g));
        }
        assert_eq!(t.initial_value(0), 1.0);
    }

    #[test]
    fn trap_values() {
        let w = trap_world();
        let t = optimal_values(&w, LifeConfig::default()).unwrap();
        assert_eq!(t.initial_value(0), 1.0);
        assert_eq!(t.initial_value(1), 0.0);
        assert_eq!(t.best_action(0, 100, 0), Some(0));
    }

    #[test]
    fn trap_has_one_fatal_group() {
        let groups = find_fatal_groups(&trap_world(), LifeConfig::default()).unwrap();
        assert_eq!(
            groups,
            vec![FatalGroup {
                states: vec![1],
                inside_value: 0.0,
                outside_value: 1.0
            }]
        );
    }

    fn two_state(signal_a: GameSignal, signal_b: GameSignal, reversible: bool) -> ExplicitWorld {
        let t = |next, signal| {
            vec![Transition {
                prob: 1.0,
                next,
                obs: Observation::new(0, signal),
            }]
        };
        let back = if reversible { 0 } else { 1 };
        ExplicitWorld::new(
            "two",
            2,
            2,
            1,
            0,
            vec![
                t(0, signal_a),
                t(1, signal_a),
                t(1, signal_b),
                t(back, signal_b),
            ],
        )
        .unwrap()
    }

    #[test]
    fn reversible_world_has_no_fatal_group() {
        let w = two_state(GameSignal::Win, GameSignal::Loss, true);
        assert!(find_fatal_groups(&w, cfg(5, 2)).unwrap().is_empty());
    }

    #[test]
    fn closed_group_that_is_not_worse_is_not_fatal() {
        let w = two_state(GameSignal::Win, GameSignal::Win, false);
        assert!(find_fatal_groups(&w, cfg(5, 2)).unwrap().is_empty());
        let w = two_state(GameSignal::Win, GameSignal::Draw, false);
        assert_eq!(find_fatal_groups(&w, cfg(5, 2)).unwrap().len(), 1);
    }

    #[test]
    fn state_space_bound() {
        let w = trap_world();
        assert!(matches!(
            optimal_values(&w, cfg(100_000, 1000)),
            Err(FatalError::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn timeouts_count_as_draws_in_the_value() {
        // Single state, no signals ever: every game times out as a draw.
        let w = ExplicitWorld::new(
            "quiet",
            1,
            1,
            1,
            0,
            vec![vec![Transition {
                prob: 1.0,
                next: 0,
                obs: Observation::BLANK,
            }]],
        )
        .unwrap();
        let t = optimal_values(&w, cfg(4, 3)).unwrap();
        assert_eq!(t.initial_value(0), 0.5);
        assert_eq!(t.reward_to_go(0, 1, 2), 0.5);
    }
}
