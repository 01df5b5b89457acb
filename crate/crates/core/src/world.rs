//! The agent/world interaction contract: big steps, games, lives and Success.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

/// Game signal carried by an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameSignal {
    NoSignal,
    Win,
    Loss,
    Draw,
}

impl GameSignal {
    pub const ALL: [GameSignal; 4] = [
        GameSignal::NoSignal,
        GameSignal::Win,
        GameSignal::Loss,
        GameSignal::Draw,
    ];

    /// Reward in half points (Win 2, Draw 1, Loss 0), `None` when no game ends.
    pub fn half_points(self) -> Option<u32> {
        match self {
            GameSignal::NoSignal => None,
            GameSignal::Win => Some(2),
            GameSignal::Loss => Some(0),
            GameSignal::Draw => Some(1),
        }
    }

    pub fn reward(self) -> Option<f64> {
        self.half_points().map(|h| f64::from(h) / 2.0)
    }

    pub fn swapped(self) -> GameSignal {
        match self {
            GameSignal::Win => GameSignal::Loss,
            GameSignal::Loss => GameSignal::Win,
            other => other,
        }
    }

    pub fn code(self) -> char {
        match self {
            GameSignal::NoSignal => 'N',
            GameSignal::Win => 'W',
            GameSignal::Loss => 'L',
            GameSignal::Draw => 'D',
        }
    }

    pub fn from_code(c: char) -> Option<GameSignal> {
        match c {
            'N' => Some(GameSignal::NoSignal),
            'W' => Some(GameSignal::Win),
            'L' => Some(GameSignal::Loss),
            'D' => Some(GameSignal::Draw),
            _ => None,
        }
    }
}

/// What the world shows the agent after a big step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observation {
    pub symbol: u32,
    pub signal: GameSignal,
}

impl Observation {
    /// The designated observation the agent acts on before the first step.
    pub const BLANK: Observation = Observation {
        symbol: 0,
        signal: GameSignal::NoSignal,
    };

    pub fn new(symbol: u32, signal: GameSignal) -> Self {
        Observation { symbol, signal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifeConfig {
    pub games: u32,
    pub max_steps_per_game: u32,
}

impl Default for LifeConfig {
    fn default() -> Self {
        LifeConfig {
            games: 100,
            max_steps_per_game: 1000,
        }
    }
}

impl LifeConfig {
    pub fn new(games: u32, max_steps_per_game: u32) -> Result<Self, LifeError> {
        if games == 0 || max_steps_per_game == 0 {
            return Err(LifeError::InvalidConfig {
                games,
                max_steps_per_game,
            });
        }
        Ok(LifeConfig {
            games,
            max_steps_per_game,
        })
    }

    pub fn total_step_budget(&self) -> u64 {
        u64::from(self.games) * u64::from(self.max_steps_per_game)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Win,
    Loss,
    Draw,
    TimeoutDraw,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Loss => "loss",
            Outcome::Draw => "draw",
            Outcome::TimeoutDraw => "timeout",
        }
    }

    pub fn from_name(s: &str) -> Option<Outcome> {
        match s {
            "win" => Some(Outcome::Win),
            "loss" => Some(Outcome::Loss),
            "draw" => Some(Outcome::Draw),
            "timeout" => Some(Outcome::TimeoutDraw),
            _ => None,
        }
    }

    pub fn half_points(self) -> u32 {
        match self {
            Outcome::Win => 2,
            Outcome::Loss => 0,
            Outcome::Draw | Outcome::TimeoutDraw => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameOutcome {
    pub outcome: Outcome,
    pub length_steps: u32,
}

/// Reward of one game: Win 1, Loss 0, Draw and timeout 1/2.
pub fn reward_of(game: &GameOutcome) -> f64 {
    f64::from(game.outcome.half_points()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub action: ActionId,
    pub observation: Observation,
}

/// One complete life of an agent in a world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifeRecord {
    pub world_id: String,
    pub seed: u64,
    pub config: LifeConfig,
    pub steps: Vec<StepRecord>,
    pub games: Vec<GameOutcome>,
    /// World state before the first step and after every step, for worlds
    /// that expose one; empty otherwise.
    pub states: Vec<usize>,
}

impl LifeRecord {
    pub fn half_points(&self) -> u64 {
        total_half_points(&self.games)
    }

    pub fn success(&self) -> Result<f64, LifeError> {
        success_of_games(&self.games)
    }
}

pub fn total_half_points(games: &[GameOutcome]) -> u64 {
    games
        .iter()
        .map(|g| u64::from(g.outcome.half_points()))
        .sum()
}

/// Success of a life: arithmetic mean of its game rewards.
pub fn success(life: &LifeRecord) -> Result<f64, LifeError> {
    life.success()
}

pub fn success_of_games(games: &[GameOutcome]) -> Result<f64, LifeError> {
    if games.is_empty() {
        return Err(LifeError::EmptyLife);
    }
    Ok(total_half_points(games) as f64 / (2 * games.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("bit stream exhausted after {0} bits")]
    StreamExhausted(u64),
    #[error("world contract violated: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LifeError {
    #[error("agent emitted action {action} at step {step}, alphabet size is {action_count}")]
    AgentActionOutOfRange {
        action: usize,
        action_count: usize,
        step: u64,
    },
    #[error("world step failed at step {step}: {source}")]
    WorldStepFailure { step: u64, source: WorldError },
    #[error("life has no games")]
    EmptyLife,
    #[error("invalid life config: games={games}, max_steps_per_game={max_steps_per_game}")]
    InvalidConfig { games: u32, max_steps_per_game: u32 },
}

/// A world the agent lives in. World state persists across games.
pub trait World: Send {
    fn action_count(&self) -> usize;

    fn obs_alphabet(&self) -> usize;

    /// Advances one big step. All world randomness comes from `rng`.
    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError>;

    /// Index of the current internal state, for tabular worlds.
    fn state_index(&self) -> Option<usize> {
        None
    }

    /// Human-readable decoding of the world's current state, if supported.
    fn decoded_view(&self) -> Option<String> {
        None
    }
}

/// A stateful step device: internal memory plus the last observation decide
/// the next action.
pub trait Agent: Send {
    fn act(&mut self, observation: Observation, rng: &mut Stream) -> ActionId;
}

impl<W: World + ?Sized> World for Box<W> {
    fn action_count(&self) -> usize {
        (**self).action_count()
    }
    fn obs_alphabet(&self) -> usize {
        (**self).obs_alphabet()
    }
    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError> {
        (**self).step(action, rng)
    }
    fn state_index(&self) -> Option<usize> {
        (**self).state_index()
    }
    fn decoded_view(&self) -> Option<String> {
        (**self).decoded_view()
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn act(&mut self, observation: Observation, rng: &mut Stream) -> ActionId {
        (**self).act(observation, rng)
    }
}

/// Incremental game bookkeeping shared by batch lives and interactive sessions.
#[derive(Debug, Clone)]
pub struct GameClock {
    config: LifeConfig,
    steps_in_game: u32,
    games: Vec<GameOutcome>,
}

impl GameClock {
    pub fn new(config: LifeConfig) -> Self {
        GameClock {
            config,
            steps_in_game: 0,
            games: Vec::with_capacity(config.games as usize),
        }
    }

    /// Books one big step; returns the game that ended on it, if any.
    pub fn record(&mut self, signal: GameSignal) -> Option<GameOutcome> {
        debug_assert!(!self.finished());
        self.steps_in_game += 1;
        let outcome = match signal {
            GameSignal::Win => Some(Outcome::Win),
            GameSignal::Loss => Some(Outcome::Loss),
            GameSignal::Draw => Some(Outcome::Draw),
            GameSignal::NoSignal if self.steps_in_game == self.config.max_steps_per_game => {
                Some(Outcome::TimeoutDraw)
            }
            GameSignal::NoSignal => None,
        }?;
        let game = GameOutcome {
            outcome,
            length_steps: self.steps_in_game,
        };
        self.games.push(game);
        self.steps_in_game = 0;
        Some(game)
    }

    pub fn finished(&self) -> bool {
        self.games.len() as u32 >= self.config.games
    }

    pub fn games(&self) -> &[GameOutcome] {
        &self.games
    }

    pub fn into_games(self) -> Vec<GameOutcome> {
        self.games
    }

    pub fn steps_in_game(&self) -> u32 {
        self.steps_in_game
    }

    pub fn games_remaining(&self) -> u32 {
        self.config.games - self.games.len() as u32
    }

    pub fn config(&self) -> LifeConfig {
        self.config
    }
}

/// Runs one life. World randomness comes from sub-stream 0 of `seed`,
/// agent randomness from sub-stream 1.
pub fn run_life<W, A>(
    world: &mut W,
    agent: &mut A,
    config: LifeConfig,
    seed: u64,
) -> Result<LifeRecord, LifeError>
where
    W: World + ?Sized,
    A: Agent + ?Sized,
{
    let mut steps = Vec::new();
    let mut states = Vec::new();
    if let Some(s) = world.state_index() {
        states.push(s);
    }
    let games = drive(world, agent, config, seed, None, |world, step, _| {
        steps.push(step);
        if let Some(s) = world.state_index() {
            states.push(s);
        }
    })?;
    Ok(LifeRecord {
        world_id: String::new(),
        seed,
        config,
        steps,
        games,
        states,
    })
}

/// Same as [`run_life`] but keeps only the game outcomes.
pub fn run_games<W, A>(
    world: &mut W,
    agent: &mut A,
    config: LifeConfig,
    seed: u64,
) -> Result<Vec<GameOutcome>, LifeError>
where
    W: World + ?Sized,
    A: Agent + ?Sized,
{
    drive(world, agent, config, seed, None, |_, _, _| {})
}

/// One big step of a trace: what was done, what was seen, and the game that
/// ended on this step, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub action: ActionId,
    pub observation: Observation,
    pub ended: Option<GameOutcome>,
}

/// Runs at most `step_limit` big steps of a life, stopping earlier if all
/// games are played.
pub fn run_trace<W, A>(
    world: &mut W,
    agent: &mut A,
    config: LifeConfig,
    seed: u64,
    step_limit: u64,
) -> Result<Vec<TraceStep>, LifeError>
where
    W: World + ?Sized,
    A: Agent + ?Sized,
{
    let mut trace = Vec::new();
    drive(
        world,
        agent,
        config,
        seed,
        Some(step_limit),
        |_, s, ended| {
            trace.push(TraceStep {
                action: s.action,
                observation: s.observation,
                ended,
            })
        },
    )?;
    Ok(trace)
}

fn drive<W, A, F>(
    world: &mut W,
    agent: &mut A,
    config: LifeConfig,
    seed: u64,
    step_limit: Option<u64>,
    mut on_step: F,
) -> Result<Vec<GameOutcome>, LifeError>
where
    W: World + ?Sized,
    A: Agent + ?Sized,
    F: FnMut(&W, StepRecord, Option<GameOutcome>),
{
    if config.games == 0 || config.max_steps_per_game == 0 {
        return Err(LifeError::InvalidConfig {
            games: config.games,
            max_steps_per_game: config.max_steps_per_game,
        });
    }
    let mut world_rng = rng::stream(seed, rng::WORLD_STREAM);
    let mut agent_rng = rng::stream(seed, rng::AGENT_STREAM);
    let action_count = world.action_count();
    let mut clock = GameClock::new(config);
    let mut observation = Observation::BLANK;
    let mut step: u64 = 0;
    while !clock.finished() && step_limit.is_none_or(|l| step < l) {
        let action = agent.act(observation, &mut agent_rng);
        if action.0 >= action_count {
            return Err(LifeError::AgentActionOutOfRange {
                action: action.0,
                action_count,
                step,
            });
        }
        observation = world
            .step(action, &mut world_rng)
            .map_err(|source| LifeError::WorldStepFailure { step, source })?;
        if observation.symbol as usize >= world.obs_alphabet() {
            return Err(LifeError::WorldStepFailure {
                step,
                source: WorldError::Contract(format!(
                    "symbol {} outside alphabet of size {}",
                    observation.symbol,
                    world.obs_alphabet()
                )),
            });
        }
        let ended = clock.record(observation.signal);
        on_step(
            world,
            StepRecord {
                action,
                observation,
            },
            ended,
        );
        step += 1;
    }
    Ok(clock.into_games())
}
