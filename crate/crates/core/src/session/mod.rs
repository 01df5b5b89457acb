//! Interactive sessions: a human lives one life in a test world, one action
//! per request, scored by the same bookkeeping as batch lives.
//!
//! Wire payloads follow schema `session/1`; see [`http`] for the routes.

pub mod http;
pub mod wire;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{DeadAgent, RandomAgent};
use crate::builtin::{
    explicit_by_name, BitStream, BitstreamWorld, Opponent, OscillatingWorld, TicTacToeWorld,
};
use crate::ndtm::{generate_machine, MachineGenParams, MachineWorld, DEFAULT_N_STATES};
use crate::rng::{self, Stream};
use crate::suite::Suite;
use crate::world::{
    run_games, success_of_games, ActionId, Agent, GameClock, GameOutcome, LifeConfig, LifeRecord,
    Observation, StepRecord, World,
};

pub use wire::{CreateRequest, WorldSpec, SCHEMA};

pub const DEFAULT_HUMAN_GAMES: u32 = 9;
pub const DEFAULT_HUMAN_STEPS: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown world spec: {0}")]
    UnknownWorldSpec(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no session {0:?}")]
    SessionNotFound(String),
    #[error("session is finished")]
    SessionFinished,
    #[error("action {action} out of range, world has {action_count} actions")]
    ActionOutOfRange { action: usize, action_count: usize },
    #[error("step {got} was already taken; the session is at step {expected}")]
    StepConflict { expected: u64, got: u64 },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("world failure: {0}")]
    WorldFailure(String),
    #[error("journal: {0}")]
    Journal(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownWorldSpec(_) => "unknown_world_spec",
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::SessionNotFound(_) => "session_not_found",
            SessionError::SessionFinished => "session_finished",
            SessionError::ActionOutOfRange { .. } => "action_out_of_range",
            SessionError::StepConflict { .. } => "step_conflict",
            SessionError::BadRequest(_) => "bad_request",
            SessionError::WorldFailure(_) => "world_failure",
            SessionError::Journal(_) => "journal_failure",
        }
    }
}

/// Builds a fresh world for a spec. `suite` resolves `suite` specs.
pub fn build_world(
    spec: &WorldSpec,
    suite: Option<&Suite>,
) -> Result<Box<dyn World>, SessionError> {
    Ok(match spec {
        WorldSpec::Suite { world } => {
            let suite = suite.ok_or_else(|| {
                SessionError::UnknownWorldSpec("this server has no suite loaded".into())
            })?;
            let entry = suite
                .entries
                .iter()
                .find(|e| &e.id == world)
                .ok_or_else(|| {
                    SessionError::UnknownWorldSpec(format!("suite has no world {world:?}"))
                })?;
            Box::new(MachineWorld::new(entry.machine.clone()))
        }
        WorldSpec::Machine { n_states, index } => {
            let n = n_states.unwrap_or(DEFAULT_N_STATES);
            if n == 0 || n > 1000 {
                return Err(SessionError::InvalidConfig(
                    "n_states must lie in 1..=1000".into(),
                ));
            }
            let m = generate_machine(&MachineGenParams::default(), n, &mut rng::stream(*index, 0))
                .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
            Box::new(MachineWorld::new(Arc::new(m)))
        }
        WorldSpec::TicTacToe { opponent } => {
            let o = Opponent::parse(opponent).ok_or_else(|| {
                SessionError::UnknownWorldSpec(format!("unknown opponent {opponent:?}"))
            })?;
            Box::new(TicTacToeWorld::new(o))
        }
        WorldSpec::Bitstream { source } => {
            let s = BitStream::named(source).ok_or_else(|| {
                SessionError::UnknownWorldSpec(format!("unknown bit source {source:?}"))
            })?;
            Box::new(BitstreamWorld::new(s))
        }
        WorldSpec::Oscillating => Box::new(OscillatingWorld::new(2)),
        WorldSpec::Explicit { name } => {
            let w = explicit_by_name(name)
                .ok_or_else(|| SessionError::UnknownWorldSpec(format!("unknown world {name:?}")))?;
            Box::new(Arc::new(w).instantiate())
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Active,
    Finished,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Finished => "finished",
        }
    }
}

/// One applied big step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub step: u64,
    pub action: usize,
    pub observation: Observation,
    pub game: Option<GameOutcome>,
}

pub struct Session {
    pub id: String,
    pub request: CreateRequest,
    world: Box<dyn World>,
    rng: Stream,
    clock: GameClock,
    observation: Observation,
    history: Vec<HistoryEntry>,
    states: Vec<usize>,
    status: Status,
    journal: Option<File>,
}

impl Session {
    pub fn new(
        id: String,
        request: CreateRequest,
        suite: Option<&Suite>,
    ) -> Result<Self, SessionError> {
        let config = request.life_config()?;
        let world = build_world(&request.world, suite)?;
        let states = world.state_index().into_iter().collect();
        Ok(Session {
            id,
            rng: rng::stream(request.seed, rng::WORLD_STREAM),
            clock: GameClock::new(config),
            observation: Observation::BLANK,
            history: Vec::new(),
            states,
            status: Status::Active,
            journal: None,
            world,
            request,
        })
    }

    pub fn config(&self) -> LifeConfig {
        self.clock.config()
    }

    pub fn action_count(&self) -> usize {
        self.world.action_count()
    }

    pub fn obs_alphabet(&self) -> usize {
        self.world.obs_alphabet()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Index of the next step to be taken.
    pub fn step_index(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn games(&self) -> &[GameOutcome] {
        self.clock.games()
    }

    /// Mean reward of the games completed so far.
    pub fn running_success(&self) -> Option<f64> {
        success_of_games(self.clock.games()).ok()
    }

    pub fn decoded_view(&self) -> Option<String> {
        if self.request.reveal {
            self.world.decoded_view()
        } else {
            None
        }
    }

    pub fn reveal_supported(&self) -> bool {
        self.world.decoded_view().is_some()
    }

    fn journal(&mut self, event: Value) -> Result<(), SessionError> {
        if let Some(f) = &mut self.journal {
            writeln!(f, "{event}")
                .and_then(|_| f.flush())
                .map_err(|e| SessionError::Journal(e.to_string()))?;
        }
        Ok(())
    }

    /// Applies one big step. `expected_step` must equal [`Self::step_index`].
    pub fn act(&mut self, action: usize, expected_step: u64) -> Result<HistoryEntry, SessionError> {
        if self.status == Status::Finished {
            return Err(SessionError::SessionFinished);
        }
        if expected_step != self.step_index() {
            return Err(SessionError::StepConflict {
                expected: self.step_index(),
                got: expected_step,
            });
        }
        let action_count = self.world.action_count();
        if action >= action_count {
            return Err(SessionError::ActionOutOfRange {
                action,
                action_count,
            });
        }
        let step = self.step_index();
        self.journal(json!({"event": "action", "step": step, "action": action}))?;
        let observation = self
            .world
            .step(ActionId(action), &mut self.rng)
            .map_err(|e| SessionError::WorldFailure(e.to_string()))?;
        let game = self.clock.record(observation.signal);
        if let Some(s) = self.world.state_index() {
            self.states.push(s);
        }
        self.observation = observation;
        let entry = HistoryEntry {
            step,
            action,
            observation,
            game,
        };
        self.history.push(entry);
        if self.clock.finished() {
            self.status = Status::Finished;
        }
        Ok(entry)
    }

    pub fn finish(&mut self) -> Result<(), SessionError> {
        if self.status == Status::Active {
            self.journal(json!({"event": "finish"}))?;
            self.status = Status::Finished;
        }
        Ok(())
    }

    /// The life lived so far, as a batch run would have recorded it.
    pub fn life_record(&self) -> LifeRecord {
        LifeRecord {
            world_id: self.request.world.describe(),
            seed: self.request.seed,
            config: self.config(),
            steps: self
                .history
                .iter()
                .map(|h| StepRecord {
                    action: ActionId(h.action),
                    observation: h.observation,
                })
                .collect(),
            games: self.clock.games().to_vec(),
            states: self.states.clone(),
        }
    }
}

/// Mean Success of the reference agents living the session's full life in
/// the same world with the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub random: f64,
    pub dead: f64,
}

pub fn baselines(
    request: &CreateRequest,
    suite: Option<&Suite>,
) -> Result<Baselines, SessionError> {
    let config = request.life_config()?;
    let run = |agent: &mut dyn Agent| -> Result<f64, SessionError> {
        let mut world = build_world(&request.world, suite)?;
        let games = run_games(&mut world, agent, config, request.seed)
            .map_err(|e| SessionError::WorldFailure(e.to_string()))?;
        success_of_games(&games).map_err(|e| SessionError::WorldFailure(e.to_string()))
    };
    let actions = build_world(&request.world, suite)?.action_count();
    Ok(Baselines {
        random: run(&mut RandomAgent::new(actions))?,
        dead: run(&mut DeadAgent::new(0))?,
    })
}

/// All live sessions. Each session sits behind its own lock, so requests on
/// one session are serialized while different sessions proceed in parallel.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
    id_key: u64,
    journal_dir: Option<PathBuf>,
    suite: Option<Arc<Suite>>,
}

impl SessionStore {
    pub fn new(journal_dir: Option<PathBuf>, suite: Option<Arc<Suite>>) -> Self {
        // Ids only need to be unique per store; mixing in the journal path
        // keeps restarts with different journal dirs from colliding.
        let id_key = journal_dir
            .as_ref()
            .map(|p| {
                p.to_string_lossy()
                    .bytes()
                    .fold(0u64, |h, b| rng::derive_seed(h ^ u64::from(b), 0))
            })
            .unwrap_or(0x1d5e_55e0);
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
            id_key,
            journal_dir,
            suite,
        }
    }

    pub fn suite(&self) -> Option<&Suite> {
        self.suite.as_deref()
    }

    fn next_id(&self) -> String {
        loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let id = format!("s{:016x}", rng::derive_seed(self.id_key, n));
            if !self.sessions.read().unwrap().contains_key(&id) {
                return id;
            }
        }
    }

    fn journal_path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.jsonl"))
    }

    pub fn create(&self, request: CreateRequest) -> Result<Arc<Mutex<Session>>, SessionError> {
        let id = self.next_id();
        let mut session = Session::new(id.clone(), request, self.suite())?;
        if let Some(dir) = &self.journal_dir {
            let file = OpenOptions::new()
                .create_new(true)
                .append(true)
                .open(Self::journal_path(dir, &id))
                .map_err(|e| SessionError::Journal(e.to_string()))?;
            session.journal = Some(file);
            let req = serde_json::to_value(&session.request).expect("request serializes");
            session
                .journal(json!({"schema": SCHEMA, "event": "create", "id": id, "request": req}))?;
        }
        let session = Arc::new(Mutex::new(session));
        self.sessions.write().unwrap().insert(id, session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::SessionNotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rebuilds sessions from the journal directory by replaying their
    /// actions. Returns the number of sessions restored.
    pub fn recover(&self) -> Result<usize, SessionError> {
        let Some(dir) = &self.journal_dir else {
            return Ok(0);
        };
        let mut restored = 0;
        let entries = std::fs::read_dir(dir).map_err(|e| SessionError::Journal(e.to_string()))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let session = replay_journal(&path, self.suite())?;
            let id = session.id.clone();
            let mut session = session;
            session.journal = Some(
                OpenOptions::new()
                    .append(true)
                    .open(&path)
                    .map_err(|e| SessionError::Journal(e.to_string()))?,
            );
            self.sessions
                .write()
                .unwrap()
                .insert(id, Arc::new(Mutex::new(session)));
            restored += 1;
        }
        Ok(restored)
    }
}

/// Replays one journal file into a session (without an attached journal).
pub fn replay_journal(path: &Path, suite: Option<&Suite>) -> Result<Session, SessionError> {
    let bad = |m: String| SessionError::Journal(format!("{}: {m}", path.display()));
    let file = File::open(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| bad("empty journal".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let head: Value = serde_json::from_str(&first).map_err(|e| bad(e.to_string()))?;
    if head["schema"] != SCHEMA || head["event"] != "create" {
        return Err(bad(
            "journal does not start with a session/1 create event".into()
        ));
    }
    let id = head["id"]
        .as_str()
        .ok_or_else(|| bad("missing id".into()))?;
    let request: CreateRequest =
        serde_json::from_value(head["request"].clone()).map_err(|e| bad(e.to_string()))?;
    let mut session = Session::new(id.to_string(), request, suite)?;
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match ev["event"].as_str() {
            Some("action") => {
                let step = ev["step"]
                    .as_u64()
                    .ok_or_else(|| bad("action without step".into()))?;
                let action = ev["action"]
                    .as_u64()
                    .ok_or_else(|| bad("action without value".into()))?;
                session.act(action as usize, step)?;
            }
            Some("finish") => session.finish()?,
            _ => return Err(bad(format!("unknown event in {line:?}"))),
        }
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{success, Outcome};

    fn request(world: WorldSpec, games: u32, steps: u32, seed: u64) -> CreateRequest {
        CreateRequest {
            world,
            games: Some(games),
            max_steps_per_game: Some(steps),
            seed,
            reveal: false,
        }
    }

    #[test]
    fn human_defaults() {
        let r = CreateRequest {
            world: WorldSpec::Oscillating,
            games: None,
            max_steps_per_game: None,
            seed: 0,
            reveal: false,
        };
        assert_eq!(r.life_config().unwrap(), LifeConfig::new(9, 20).unwrap());
    }

    #[test]
    fn rejects_out_of_range_without_changing_state() {
        let mut s = Session::new(
            "x".into(),
            request(
                WorldSpec::TicTacToe {
                    opponent: "minimax".into(),
                },
                9,
                20,
                1,
            ),
            None,
        )
        .unwrap();
        assert_eq!(s.action_count(), 9);
        assert_eq!(
            s.act(9, 0),
            Err(SessionError::ActionOutOfRange {
                action: 9,
                action_count: 9
            })
        );
        assert_eq!(s.step_index(), 0);
        s.act(4, 0).unwrap();
        assert_eq!(
            s.act(0, 0),
            Err(SessionError::StepConflict {
                expected: 1,
                got: 0
            })
        );
        assert_eq!(s.history().len(), 1);
    }

    #[test]
    fn running_success_matches_batch_scoring() {
        let mut s =
            Session::new("x".into(), request(WorldSpec::Oscillating, 4, 3, 0), None).unwrap();
        for step in 0..4 {
            s.act(0, step).unwrap();
        }
        assert_eq!(s.status(), Status::Finished);
        let outcomes: Vec<Outcome> = s.games().iter().map(|g| g.outcome).collect();
        assert_eq!(
            outcomes,
            [Outcome::Win, Outcome::Loss, Outcome::Loss, Outcome::Win]
        );
        assert_eq!(s.running_success(), Some(0.5));
        assert_eq!(success(&s.life_record()).unwrap(), 0.5);
        assert_eq!(s.act(0, 4), Err(SessionError::SessionFinished));
    }

    #[test]
    fn all_draw_session_scores_half() {
        let mut s = Session::new(
            "x".into(),
            request(
                WorldSpec::Explicit {
                    name: "silent".into(),
                },
                4,
                3,
                0,
            ),
            None,
        )
        .unwrap();
        for step in 0..12 {
            s.act(0, step).unwrap();
        }
        assert_eq!(s.status(), Status::Finished);
        assert!(s.games().iter().all(|g| g.outcome == Outcome::TimeoutDraw));
        assert_eq!(s.running_success(), Some(0.5));
        assert_eq!(success(&s.life_record()).unwrap(), 0.5);
    }

    #[test]
    fn unknown_specs() {
        assert!(matches!(
            build_world(
                &WorldSpec::TicTacToe {
                    opponent: "genius".into()
                },
                None
            ),
            Err(SessionError::UnknownWorldSpec(_))
        ));
        assert!(matches!(
            build_world(
                &WorldSpec::Suite {
                    world: "w0000".into()
                },
                None
            ),
            Err(SessionError::UnknownWorldSpec(_))
        ));
    }

    #[test]
    fn journal_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::new(Some(dir.path().to_path_buf()), None);
        let s = store
            .create(request(
                WorldSpec::Bitstream {
                    source: "alternating".into(),
                },
                6,
                1,
                3,
            ))
            .unwrap();
        let id = {
            let mut s = s.lock().unwrap();
            for (step, a) in [0, 0, 1, 1].into_iter().enumerate() {
                s.act(a, step as u64).unwrap();
            }
            s.id.clone()
        };
        let again = SessionStore::new(Some(dir.path().to_path_buf()), None);
        assert_eq!(again.recover().unwrap(), 1);
        let restored = again.get(&id).unwrap();
        let restored = restored.lock().unwrap();
        let original = s.lock().unwrap();
        assert_eq!(restored.history(), original.history());
        assert_eq!(restored.games(), original.games());
    }
}
