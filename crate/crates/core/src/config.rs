//! Run configuration: a flat `key = value` file, overridable by flags.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are listed in
//! [`KEYS`]; anything else is rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::iq::DEFAULT_THRESHOLD;
use crate::ndtm::{MachineGenParams, DEFAULT_N_STATES};
use crate::world::LifeConfig;

pub const DEFAULT_SUITE_SIZE: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key:?}: expected {expected}, got {value:?}")]
    TypeError {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("a master seed is required (set master_seed or pass --seed)")]
    MissingSeed,
    #[error("config line {line}: expected key = value")]
    Syntax { line: usize },
}

pub const KEYS: [&str; 18] = [
    "master_seed",
    "suite",
    "n_states",
    "count",
    "games",
    "max_steps_per_game",
    "small_step_budget",
    "tape_symbols",
    "action_count",
    "obs_alphabet",
    "p_second_branch",
    "p_emit",
    "p_game_signal_given_emit",
    "signal_split",
    "agents",
    "out_dir",
    "threshold",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: Option<u64>,
    /// Existing suite file; when absent a suite is generated.
    pub suite: Option<PathBuf>,
    pub n_states: usize,
    pub count: usize,
    pub life: LifeConfig,
    pub gen: MachineGenParams,
    pub agents: Vec<String>,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: None,
            suite: None,
            n_states: DEFAULT_N_STATES,
            count: DEFAULT_SUITE_SIZE,
            life: LifeConfig::default(),
            gen: MachineGenParams::default(),
            agents: vec!["random".into()],
            out_dir: PathBuf::from("out"),
            threshold: DEFAULT_THRESHOLD,
            threads: None,
        }
    }
}

fn typed<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::TypeError {
        key: key.into(),
        value: value.into(),
        expected,
    })
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(
    key: &str,
    value: &str,
) -> Result<T, ConfigError> {
    let v: T = typed(key, value, "a positive integer")?;
    if v <= T::default() {
        return Err(ConfigError::TypeError {
            key: key.into(),
            value: value.into(),
            expected: "a positive integer",
        });
    }
    Ok(v)
}

fn probability(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = typed(key, value, "a probability")?;
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError::TypeError {
            key: key.into(),
            value: value.into(),
            expected: "a probability",
        });
    }
    Ok(v)
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "master_seed" => {
                self.master_seed = Some(typed(key, value, "an unsigned 64-bit integer")?)
            }
            "suite" => self.suite = (!value.is_empty()).then(|| PathBuf::from(value)),
            "n_states" => self.n_states = positive(key, value)?,
            "count" => self.count = positive(key, value)?,
            "games" => self.life.games = positive(key, value)?,
            "max_steps_per_game" => self.life.max_steps_per_game = positive(key, value)?,
            "small_step_budget" => self.gen.small_step_budget = positive(key, value)?,
            "tape_symbols" => self.gen.tape_symbols = positive(key, value)?,
            "action_count" => self.gen.action_count = positive(key, value)?,
            "obs_alphabet" => self.gen.obs_alphabet = positive(key, value)?,
            "p_second_branch" => self.gen.p_second_branch = probability(key, value)?,
            "p_emit" => self.gen.p_emit = probability(key, value)?,
            "p_game_signal_given_emit" => {
                self.gen.p_game_signal_given_emit = probability(key, value)?
            }
            "signal_split" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let err = || ConfigError::TypeError {
                    key: key.into(),
                    value: value.into(),
                    expected: "three probabilities summing to 1",
                };
                if parts.len() != 3 {
                    return Err(err());
                }
                let mut split = [0.0; 3];
                for (slot, p) in split.iter_mut().zip(parts) {
                    *slot = probability(key, p).map_err(|_| err())?;
                }
                if (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(err());
                }
                self.gen.signal_split = split;
            }
            "agents" => {
                self.agents = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "threshold" => self.threshold = typed(key, value, "a number")?,
            "threads" => self.threads = Some(positive(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Defaults, then the file, then the overrides, in that order.
    pub fn parse(
        file: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(text) = file {
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or(ConfigError::Syntax { line: i + 1 })?;
                cfg.set(k.trim(), v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.master_seed.ok_or(ConfigError::MissingSeed)
    }

    /// The file form; parsing it yields this config again.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        if let Some(s) = self.master_seed {
            kv("master_seed", s.to_string());
        }
        if let Some(p) = &self.suite {
            kv("suite", p.display().to_string());
        }
        kv("n_states", self.n_states.to_string());
        kv("count", self.count.to_string());
        kv("games", self.life.games.to_string());
        kv(
            "max_steps_per_game",
            self.life.max_steps_per_game.to_string(),
        );
        kv("small_step_budget", self.gen.small_step_budget.to_string());
        kv("tape_symbols", self.gen.tape_symbols.to_string());
        kv("action_count", self.gen.action_count.to_string());
        kv("obs_alphabet", self.gen.obs_alphabet.to_string());
        kv("p_second_branch", self.gen.p_second_branch.to_string());
        kv("p_emit", self.gen.p_emit.to_string());
        kv(
            "p_game_signal_given_emit",
            self.gen.p_game_signal_given_emit.to_string(),
        );
        let [w, l, d] = self.gen.signal_split;
        kv("signal_split", format!("{w},{l},{d}"));
        kv("agents", self.agents.join(";"));
        kv("out_dir", self.out_dir.display().to_string());
        kv("threshold", self.threshold.to_string());
        if let Some(t) = self.threads {
            kv("threads", t.to_string());
        }
        out
    }
}
