//! JSON payloads of schema `session/1`.
//!
//! Create request:
//!
//! ```json
//! {"schema": "session/1",
//!  "world": {"kind": "tictactoe", "opponent": "minimax"},
//!  "games": 9, "max_steps_per_game": 20, "seed": 42, "reveal": false}
//! ```
//!
//! World kinds: `suite` (`world`: entry id in the server's suite), `machine`
//! (`n_states`, `index`), `tictactoe` (`opponent`: `uniform_random` or
//! `minimax`), `bitstream` (`source`: `zeros`, `ones`, `alternating`,
//! `random:<seed>`), `oscillating`, `explicit` (`name`).
//!
//! Action request: `{"action": 4, "step": 0}` where `step` is the index of
//! the step the client believes comes next; a stale index is rejected with
//! `step_conflict`, so a repeated click can never apply twice.
//!
//! Observations are `{"symbol": 2, "signal": "none"|"win"|"loss"|"draw"}`,
//! finished games `{"outcome": "win"|"loss"|"draw"|"timeout",
//! "length_steps": 5, "reward": 1.0}`, errors `{"code": ..., "message": ...}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Baselines, HistoryEntry, Session, SessionError, DEFAULT_HUMAN_GAMES, DEFAULT_HUMAN_STEPS,
};
use crate::world::{GameOutcome, GameSignal, LifeConfig, Observation};

pub const SCHEMA: &str = "session/1";

const KINDS: [&str; 6] = [
    "suite",
    "machine",
    "tictactoe",
    "bitstream",
    "oscillating",
    "explicit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WorldSpec {
    Suite {
        world: String,
    },
    Machine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_states: Option<usize>,
        #[serde(default)]
        index: u64,
    },
    #[serde(rename = "tictactoe")]
    TicTacToe {
        #[serde(default = "default_opponent")]
        opponent: String,
    },
    Bitstream {
        source: String,
    },
    Oscillating,
    Explicit {
        name: String,
    },
}

fn default_opponent() -> String {
    "minimax".into()
}

impl WorldSpec {
    pub fn describe(&self) -> String {
        match self {
            WorldSpec::Suite { world } => format!("suite:{world}"),
            WorldSpec::Machine { n_states, index } => {
                format!(
                    "machine:{}:{index}",
                    n_states.unwrap_or(crate::ndtm::DEFAULT_N_STATES)
                )
            }
            WorldSpec::TicTacToe { opponent } => format!("tictactoe:{opponent}"),
            WorldSpec::Bitstream { source } => format!("bitstream:{source}"),
            WorldSpec::Oscillating => "oscillating".into(),
            WorldSpec::Explicit { name } => format!("explicit:{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub world: WorldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub games: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps_per_game: Option<u32>,
    pub seed: u64,
    #[serde(default)]
    pub reveal: bool,
}

fn check_schema(body: &Value) -> Result<(), SessionError> {
    match body.get("schema") {
        None => Ok(()),
        Some(Value::String(s)) if s == SCHEMA => Ok(()),
        Some(other) => Err(SessionError::BadRequest(format!(
            "unsupported schema {other}, expected {SCHEMA:?}"
        ))),
    }
}

impl CreateRequest {
    pub fn from_json(body: &Value) -> Result<Self, SessionError> {
        check_schema(body)?;
        let world = body
            .get("world")
            .ok_or_else(|| SessionError::BadRequest("missing world".into()))?;
        let kind = world.get("kind").and_then(Value::as_str).unwrap_or("");
        if !KINDS.contains(&kind) {
            return Err(SessionError::UnknownWorldSpec(format!(
                "unknown world kind {kind:?}"
            )));
        }
        let mut body = body.clone();
        if let Some(map) = body.as_object_mut() {
            map.remove("schema");
        }
        serde_json::from_value(body).map_err(|e| SessionError::BadRequest(e.to_string()))
    }

    pub fn life_config(&self) -> Result<LifeConfig, SessionError> {
        LifeConfig::new(
            self.games.unwrap_or(DEFAULT_HUMAN_GAMES),
            self.max_steps_per_game.unwrap_or(DEFAULT_HUMAN_STEPS),
        )
        .map_err(|e| SessionError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionRequest {
    pub action: usize,
    pub step: u64,
}

impl ActionRequest {
    pub fn from_json(body: &Value) -> Result<Self, SessionError> {
        check_schema(body)?;
        let field = |name: &str| {
            body.get(name).and_then(Value::as_u64).ok_or_else(|| {
                SessionError::BadRequest(format!("{name} must be a non-negative integer"))
            })
        };
        Ok(ActionRequest {
            action: field("action")? as usize,
            step: field("step")?,
        })
    }
}

pub fn signal_name(s: GameSignal) -> &'static str {
    match s {
        GameSignal::NoSignal => "none",
        GameSignal::Win => "win",
        GameSignal::Loss => "loss",
        GameSignal::Draw => "draw",
    }
}

pub fn observation_json(o: Observation) -> Value {
    json!({"symbol": o.symbol, "signal": signal_name(o.signal)})
}

pub fn game_json(g: &GameOutcome) -> Value {
    json!({
        "outcome": g.outcome.name(),
        "length_steps": g.length_steps,
        "reward": f64::from(g.outcome.half_points()) / 2.0,
    })
}

fn history_json(h: &HistoryEntry) -> Value {
    json!({
        "step": h.step,
        "action": h.action,
        "observation": observation_json(h.observation),
        "game": h.game.as_ref().map(game_json),
    })
}

fn common(s: &Session) -> serde_json::Map<String, Value> {
    let config = s.config();
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("id".into(), json!(s.id));
    m.insert("status".into(), json!(s.status().name()));
    m.insert("world".into(), json!(s.request.world.describe()));
    m.insert("seed".into(), json!(s.request.seed));
    m.insert("action_count".into(), json!(s.action_count()));
    m.insert("obs_alphabet".into(), json!(s.obs_alphabet()));
    m.insert(
        "config".into(),
        json!({"games": config.games, "max_steps_per_game": config.max_steps_per_game}),
    );
    m.insert("step".into(), json!(s.step_index()));
    m.insert("observation".into(), observation_json(s.observation()));
    m.insert("games_played".into(), json!(s.games().len()));
    m.insert(
        "games_remaining".into(),
        json!(config.games as usize - s.games().len()),
    );
    let in_game = s.history().len() as u64
        - s.games()
            .iter()
            .map(|g| u64::from(g.length_steps))
            .sum::<u64>();
    m.insert(
        "steps_left_in_game".into(),
        json!(u64::from(config.max_steps_per_game) - in_game),
    );
    m.insert("running_success".into(), json!(s.running_success()));
    m.insert("reveal".into(), json!(s.request.reveal));
    m.insert("reveal_supported".into(), json!(s.reveal_supported()));
    if let Some(view) = s.decoded_view() {
        m.insert("decoded".into(), json!(view));
    }
    m
}

/// Response to create.
pub fn summary_json(s: &Session) -> Value {
    Value::Object(common(s))
}

/// Response to an action: the session summary plus the step just applied.
pub fn step_json(s: &Session, applied: &HistoryEntry) -> Value {
    let mut m = common(s);
    m.insert("applied".into(), history_json(applied));
    Value::Object(m)
}

/// Full state: summary, step history and finished games.
pub fn state_json(s: &Session) -> Value {
    let mut m = common(s);
    m.insert(
        "history".into(),
        Value::Array(s.history().iter().map(history_json).collect()),
    );
    m.insert(
        "games".into(),
        Value::Array(s.games().iter().map(game_json).collect()),
    );
    Value::Object(m)
}

pub fn finish_json(s: &Session, baselines: &Baselines) -> Value {
    let mut m = common(s);
    m.insert("success".into(), json!(s.running_success()));
    m.insert(
        "games".into(),
        Value::Array(s.games().iter().map(game_json).collect()),
    );
    m.insert(
        "baselines".into(),
        json!({"random": baselines.random, "dead": baselines.dead}),
    );
    Value::Object(m)
}

pub fn error_json(e: &SessionError) -> Value {
    json!({"schema": SCHEMA, "code": e.code(), "message": e.to_string()})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_request_parsing() {
        let r = CreateRequest::from_json(&json!({
            "schema": "session/1",
            "world": {"kind": "tictactoe"},
            "seed": 3
        }))
        .unwrap();
        assert_eq!(
            r.world,
            WorldSpec::TicTacToe {
                opponent: "minimax".into()
            }
        );
        assert_eq!(r.life_config().unwrap(), LifeConfig::new(9, 20).unwrap());
        assert!(matches!(
            CreateRequest::from_json(&json!({"world": {"kind": "chess"}, "seed": 1})),
            Err(SessionError::UnknownWorldSpec(_))
        ));
        assert!(matches!(
            CreateRequest::from_json(
                &json!({"schema": "session/2", "world": {"kind": "oscillating"}, "seed": 1})
            ),
            Err(SessionError::BadRequest(_))
        ));
        assert!(matches!(
            CreateRequest::from_json(&json!({"world": {"kind": "oscillating"}})),
            Err(SessionError::BadRequest(_))
        ));
        let zero = CreateRequest::from_json(
            &json!({"world": {"kind": "oscillating"}, "seed": 1, "games": 0}),
        )
        .unwrap();
        assert!(matches!(
            zero.life_config(),
            Err(SessionError::InvalidConfig(_))
        ));
    }

    #[test]
    fn request_round_trips_through_serde() {
        let r = CreateRequest {
            world: WorldSpec::Machine {
                n_states: Some(5),
                index: 2,
            },
            games: Some(3),
            max_steps_per_game: None,
            seed: 9,
            reveal: true,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["world"]["kind"], "machine");
        assert_eq!(CreateRequest::from_json(&v).unwrap(), r);
    }

    #[test]
    fn action_request_needs_step() {
        assert_eq!(
            ActionRequest::from_json(&json!({"action": 2, "step": 0})).unwrap(),
            ActionRequest { action: 2, step: 0 }
        );
        assert!(ActionRequest::from_json(&json!({"action": 2})).is_err());
        assert!(ActionRequest::from_json(&json!({"action": -1, "step": 0})).is_err());
    }
}
