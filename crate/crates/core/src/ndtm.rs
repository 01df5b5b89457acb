//! Nondeterministic Turing machine worlds.
//!
//! A [`WorldMachine`] has a fixed number of states, a four-symbol tape
//! (blank = 0) and a transition table keyed by `(state, tape symbol, action)`.
//! Each key holds one or two branches; the running machine picks one of them
//! uniformly on every small step. A big step runs small steps until a branch
//! emits an observation or the small-step budget runs out.

use std::sync::Arc;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::rng::Stream;
use crate::world::{ActionId, GameSignal, Observation, World, WorldError};

pub const DEFAULT_N_STATES: usize = 20;
pub const DEFAULT_TAPE_SYMBOLS: usize = 4;
pub const DEFAULT_ACTIONS: usize = 3;
pub const DEFAULT_OBS_ALPHABET: usize = 4;
pub const DEFAULT_SMALL_STEP_BUDGET: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadMove {
    Left,
    Stay,
    Right,
}

impl HeadMove {
    pub const ALL: [HeadMove; 3] = [HeadMove::Left, HeadMove::Stay, HeadMove::Right];

    pub fn delta(self) -> i64 {
        match self {
            HeadMove::Left => -1,
            HeadMove::Stay => 0,
            HeadMove::Right => 1,
        }
    }

    pub fn code(self) -> char {
        match self {
            HeadMove::Left => 'L',
            HeadMove::Stay => 'S',
            HeadMove::Right => 'R',
        }
    }

    pub fn from_code(c: char) -> Option<HeadMove> {
        match c {
            'L' => Some(HeadMove::Left),
            'S' => Some(HeadMove::Stay),
            'R' => Some(HeadMove::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Branch {
    pub next_state: u32,
    pub write: u8,
    pub head_move: HeadMove,
    pub emit: Option<Observation>,
}

/// The branch list of one table key: one branch, or two equally likely ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Entry {
    pub first: Branch,
    pub second: Option<Branch>,
}

impl Entry {
    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        std::iter::once(&self.first).chain(self.second.as_ref())
    }

    fn map(&self, f: impl Fn(&Branch) -> Branch) -> Entry {
        Entry {
            first: f(&self.first),
            second: self.second.as_ref().map(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldMachine {
    pub n_states: usize,
    pub tape_symbols: usize,
    pub action_count: usize,
    pub obs_alphabet: usize,
    pub small_step_budget: u32,
    /// Indexed by `(state * tape_symbols + symbol) * action_count + action`.
    pub table: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("invalid machine shape: {0}")]
    InvalidShape(String),
    #[error("invalid generator parameter: {0}")]
    InvalidParams(String),
}

impl WorldMachine {
    pub fn entry(&self, state: usize, symbol: usize, action: usize) -> &Entry {
        &self.table[(state * self.tape_symbols + symbol) * self.action_count + action]
    }

    pub fn entry_count(&self) -> usize {
        self.n_states * self.tape_symbols * self.action_count
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        let bad = |m: String| Err(MachineError::InvalidShape(m));
        if self.n_states == 0
            || self.tape_symbols == 0
            || self.tape_symbols > 256
            || self.action_count == 0
            || self.obs_alphabet == 0
            || self.small_step_budget == 0
        {
            return bad("all sizes must be positive (tape alphabet at most 256)".into());
        }
        if self.table.len() != self.entry_count() {
            return bad(format!(
                "table has {} entries, expected {}",
                self.table.len(),
                self.entry_count()
            ));
        }
        for e in &self.table {
            for b in e.branches() {
                if b.next_state as usize >= self.n_states || b.write as usize >= self.tape_symbols {
                    return bad("branch field out of range".into());
                }
                if let Some(o) = b.emit {
                    if o.symbol as usize >= self.obs_alphabet {
                        return bad("emitted symbol out of range".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// True when no branch carries a Win, Loss or Draw signal.
    pub fn has_game_signals(&self) -> bool {
        self.table.iter().any(|e| {
            e.branches()
                .any(|b| matches!(b.emit, Some(o) if o.signal != GameSignal::NoSignal))
        })
    }
}

/// The same machine with every emitted Win turned into Loss and vice versa.
pub fn swap_win_loss(machine: &WorldMachine) -> WorldMachine {
    WorldMachine {
        table: machine
            .table
            .iter()
            .map(|e| {
                e.map(|b| Branch {
                    emit: b
                        .emit
                        .map(|o| Observation::new(o.symbol, o.signal.swapped())),
                    ..*b
                })
            })
            .collect(),
        ..machine.clone()
    }
}

/// Generator parameters for random machines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineGenParams {
    pub tape_symbols: usize,
    pub action_count: usize,
    pub obs_alphabet: usize,
    pub small_step_budget: u32,
    pub p_second_branch: f64,
    pub p_emit: f64,
    pub p_game_signal_given_emit: f64,
    /// Probabilities of Win, Loss and Draw given that a game signal is emitted.
    pub signal_split: [f64; 3],
}

impl Default for MachineGenParams {
    fn default() -> Self {
        MachineGenParams {
            tape_symbols: DEFAULT_TAPE_SYMBOLS,
            action_count: DEFAULT_ACTIONS,
            obs_alphabet: DEFAULT_OBS_ALPHABET,
            small_step_budget: DEFAULT_SMALL_STEP_BUDGET,
            p_second_branch: 0.25,
            p_emit: 0.5,
            p_game_signal_given_emit: 0.05,
            signal_split: [0.4, 0.4, 0.2],
        }
    }
}

impl MachineGenParams {
    pub fn validate(&self) -> Result<(), MachineError> {
        let bad = |m: &str| Err(MachineError::InvalidParams(m.to_string()));
        let probs = [
            self.p_second_branch,
            self.p_emit,
            self.p_game_signal_given_emit,
            self.signal_split[0],
            self.signal_split[1],
            self.signal_split[2],
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if (self.signal_split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("signal_split must sum to 1");
        }
        if self.tape_symbols == 0
            || self.tape_symbols > 256
            || self.action_count == 0
            || self.obs_alphabet == 0
            || self.small_step_budget == 0
        {
            return bad("alphabet sizes and the small-step budget must be positive");
        }
        Ok(())
    }

    /// Win and Loss equally likely, so the generator is invariant under
    /// [`swap_win_loss`].
    pub fn is_swap_symmetric(&self) -> bool {
        self.signal_split[0] == self.signal_split[1]
    }
}

fn draw_branch(params: &MachineGenParams, n_states: usize, rng: &mut Stream) -> Branch {
    let next_state = rng.random_range(0..n_states) as u32;
    let write = rng.random_range(0..params.tape_symbols) as u8;
    let head_move = HeadMove::ALL[rng.random_range(0..3)];
    let emit = if rng.random::<f64>() < params.p_emit {
        let symbol = rng.random_range(0..params.obs_alphabet) as u32;
        let signal = if rng.random::<f64>() < params.p_game_signal_given_emit {
            let u: f64 = rng.random();
            let [win, loss, _] = params.signal_split;
            if u < win {
                GameSignal::Win
            } else if u < win + loss {
                GameSignal::Loss
            } else {
                GameSignal::Draw
            }
        } else {
            GameSignal::NoSignal
        };
        Some(Observation::new(symbol, signal))
    } else {
        None
    };
    Branch {
        next_state,
        write,
        head_move,
        emit,
    }
}

/// Draws a machine with every table key filled independently.
pub fn generate_machine(
    params: &MachineGenParams,
    n_states: usize,
    rng: &mut Stream,
) -> Result<WorldMachine, MachineError> {
    params.validate()?;
    if n_states == 0 {
        return Err(MachineError::InvalidShape(
            "n_states must be positive".into(),
        ));
    }
    let count = n_states * params.tape_symbols * params.action_count;
    let table = (0..count)
        .map(|_| {
            let two = rng.random::<f64>() < params.p_second_branch;
            let first = draw_branch(params, n_states, rng);
            let second = two.then(|| draw_branch(params, n_states, rng));
            Entry { first, second }
        })
        .collect();
    Ok(WorldMachine {
        n_states,
        tape_symbols: params.tape_symbols,
        action_count: params.action_count,
        obs_alphabet: params.obs_alphabet,
        small_step_budget: params.small_step_budget,
        table,
    })
}

/// Two-sided tape grown on demand; cells never written read as blank.
#[derive(Debug, Clone, Default)]
struct Tape {
    right: Vec<u8>,
    left: Vec<u8>,
}

impl Tape {
    fn read(&self, pos: i64) -> u8 {
        let (side, i) = self.locate(pos);
        side.get(i).copied().unwrap_or(0)
    }

    fn write(&mut self, pos: i64, v: u8) {
        let (i, side) = if pos >= 0 {
            (pos as usize, &mut self.right)
        } else {
            ((-pos - 1) as usize, &mut self.left)
        };
        if i >= side.len() {
            if v == 0 {
                return;
            }
            side.resize(i + 1, 0);
        }
        side[i] = v;
    }

    fn locate(&self, pos: i64) -> (&Vec<u8>, usize) {
        if pos >= 0 {
            (&self.right, pos as usize)
        } else {
            (&self.left, (-pos - 1) as usize)
        }
    }

    fn touched(&self) -> usize {
        self.right.len() + self.left.len()
    }
}

/// Execution state of a machine during one life.
#[derive(Debug, Clone, Default)]
pub struct MachineRuntime {
    state: usize,
    tape: Tape,
    head: i64,
    small_steps: u64,
    last_big_step_len: u32,
    draw_trace: Option<Vec<u64>>,
}

impl MachineRuntime {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records every raw draw from the branch stream, one per small step.
    pub fn with_draw_trace(mut self) -> Self {
        self.draw_trace = Some(Vec::new());
        self
    }

    pub fn draw_trace(&self) -> Option<&[u64]> {
        self.draw_trace.as_deref()
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn head(&self) -> i64 {
        self.head
    }

    pub fn total_small_steps(&self) -> u64 {
        self.small_steps
    }

    pub fn last_big_step_len(&self) -> u32 {
        self.last_big_step_len
    }

    pub fn tape_cells_touched(&self) -> usize {
        self.tape.touched()
    }

    /// Runs small steps until a branch emits or the budget is spent.
    /// Exactly one `u64` is drawn from `rng` per small step.
    pub fn big_step(
        &mut self,
        machine: &WorldMachine,
        action: ActionId,
        rng: &mut Stream,
    ) -> Observation {
        for n in 1..=machine.small_step_budget {
            let symbol = self.tape.read(self.head) as usize;
            let entry = machine.entry(self.state, symbol, action.0);
            let draw = rng.next_u64();
            if let Some(trace) = &mut self.draw_trace {
                trace.push(draw);
            }
            let branch = match &entry.second {
                Some(second) if draw & 1 == 1 => second,
                _ => &entry.first,
            };
            self.tape.write(self.head, branch.write);
            self.head += branch.head_move.delta();
            self.state = branch.next_state as usize;
            self.small_steps += 1;
            if let Some(obs) = branch.emit {
                self.last_big_step_len = n;
                return obs;
            }
        }
        self.last_big_step_len = machine.small_step_budget;
        Observation::BLANK
    }
}

/// A machine plus its runtime, usable as a [`World`].
#[derive(Debug, Clone)]
pub struct MachineWorld {
    machine: Arc<WorldMachine>,
    runtime: MachineRuntime,
}

impl MachineWorld {
    pub fn new(machine: Arc<WorldMachine>) -> Self {
        MachineWorld {
            machine,
            runtime: MachineRuntime::new(),
        }
    }

    pub fn with_runtime(machine: Arc<WorldMachine>, runtime: MachineRuntime) -> Self {
        MachineWorld { machine, runtime }
    }

    pub fn runtime(&self) -> &MachineRuntime {
        &self.runtime
    }

    pub fn machine(&self) -> &WorldMachine {
        &self.machine
    }
}

impl World for MachineWorld {
    fn action_count(&self) -> usize {
        self.machine.action_count
    }

    fn obs_alphabet(&self) -> usize {
        self.machine.obs_alphabet
    }

    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError> {
        Ok(self.runtime.big_step(&self.machine, action, rng))
    }
}
