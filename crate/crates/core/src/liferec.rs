//! Line-oriented life log, format `liferec/1`.
//!
//! ```text
//! liferec/1
//! world <id>
//! seed <u64>
//! config <games> <max_steps_per_game>
//! steps <count> states <yes|no>
//! <index> <action> <symbol> <signal N|W|L|D> [<state after step>]
//! ...
//! initial_state <state>          (only when states = yes)
//! games <count>
//! <outcome win|loss|draw|timeout> <length>
//! ...
//! end
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::world::{
    ActionId, GameOutcome, GameSignal, LifeConfig, LifeRecord, Observation, Outcome, StepRecord,
};

pub const LIFEREC_VERSION: &str = "liferec/1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LifeLogError {
    #[error("unsupported life log version {0:?}")]
    FormatVersionMismatch(String),
    #[error("corrupt life log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

pub fn write_life(life: &LifeRecord) -> String {
    let mut out = String::new();
    let with_states = !life.states.is_empty();
    let _ = writeln!(out, "{LIFEREC_VERSION}");
    let _ = writeln!(out, "world {}", life.world_id);
    let _ = writeln!(out, "seed {}", life.seed);
    let _ = writeln!(
        out,
        "config {} {}",
        life.config.games, life.config.max_steps_per_game
    );
    let _ = writeln!(
        out,
        "steps {} states {}",
        life.steps.len(),
        if with_states { "yes" } else { "no" }
    );
    for (i, s) in life.steps.iter().enumerate() {
        let _ = write!(
            out,
            "{} {} {} {}",
            i,
            s.action.0,
            s.observation.symbol,
            s.observation.signal.code()
        );
        if with_states {
            let _ = write!(out, " {}", life.states[i + 1]);
        }
        out.push('\n');
    }
    if with_states {
        let _ = writeln!(out, "initial_state {}", life.states[0]);
    }
    let _ = writeln!(out, "games {}", life.games.len());
    for g in &life.games {
        let _ = writeln!(out, "{} {}", g.outcome.name(), g.length_steps);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, LifeLogError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: impl Into<String>) -> LifeLogError {
        LifeLogError::Corrupt {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>, LifeLogError> {
        let l = self.next()?;
        let mut parts = l.split(' ');
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn num<T: std::str::FromStr>(&self, s: Option<&&str>) -> Result<T, LifeLogError> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| self.err("bad number"))
    }
}

pub fn read_life(text: &str) -> Result<LifeRecord, LifeLogError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let version = lines.next()?;
    if version != LIFEREC_VERSION {
        return Err(LifeLogError::FormatVersionMismatch(version.to_string()));
    }
    let world_line = lines.next()?;
    let world_id = world_line
        .strip_prefix("world ")
        .or_else(|| (world_line == "world").then_some(""))
        .ok_or_else(|| lines.err("expected `world`"))?
        .to_string();
    let seed = lines.keyed("seed")?;
    let seed: u64 = lines.num(seed.first())?;
    let cfg = lines.keyed("config")?;
    let config = LifeConfig {
        games: lines.num(cfg.first())?,
        max_steps_per_game: lines.num(cfg.get(1))?,
    };
    let hdr = lines.keyed("steps")?;
    let n_steps: usize = lines.num(hdr.first())?;
    let with_states = match hdr.get(2) {
        Some(&"yes") => true,
        Some(&"no") => false,
        _ => return Err(lines.err("expected `states yes|no`")),
    };
    let mut steps = Vec::with_capacity(n_steps);
    let mut after_states = Vec::new();
    for i in 0..n_steps {
        let l = lines.next()?;
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != if with_states { 5 } else { 4 } {
            return Err(lines.err("wrong field count"));
        }
        let idx: usize = lines.num(f.first())?;
        if idx != i {
            return Err(lines.err("step index out of sequence"));
        }
        let signal = f[3]
            .chars()
            .next()
            .filter(|_| f[3].len() == 1)
            .and_then(GameSignal::from_code)
            .ok_or_else(|| lines.err("bad signal"))?;
        steps.push(StepRecord {
            action: ActionId(lines.num(f.get(1))?),
            observation: Observation::new(lines.num(f.get(2))?, signal),
        });
        if with_states {
            after_states.push(lines.num::<usize>(f.get(4))?);
        }
    }
    let mut states = Vec::new();
    if with_states {
        let init = lines.keyed("initial_state")?;
        states.push(lines.num(init.first())?);
        states.extend(after_states);
    }
    let g = lines.keyed("games")?;
    let n_games: usize = lines.num(g.first())?;
    let mut games = Vec::with_capacity(n_games);
    for _ in 0..n_games {
        let l = lines.next()?;
        let (name, len) = l
            .split_once(' ')
            .ok_or_else(|| lines.err("bad game line"))?;
        games.push(GameOutcome {
            outcome: Outcome::from_name(name).ok_or_else(|| lines.err("bad outcome"))?,
            length_steps: len.parse().map_err(|_| lines.err("bad length"))?,
        });
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    let total: u64 = games.iter().map(|g| u64::from(g.length_steps)).sum();
    if total != steps.len() as u64 {
        return Err(lines.err("game lengths do not add up to the step count"));
    }
    Ok(LifeRecord {
        world_id,
        seed,
        config,
        steps,
        games,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(with_states: bool) -> LifeRecord {
        LifeRecord {
            world_id: "w0003".into(),
            seed: 99,
            config: LifeConfig::new(2, 2).unwrap(),
            steps: vec![
                StepRecord {
                    action: ActionId(1),
                    observation: Observation::new(0, GameSignal::NoSignal),
                },
                StepRecord {
                    action: ActionId(2),
                    observation: Observation::new(1, GameSignal::NoSignal),
                },
                StepRecord {
                    action: ActionId(0),
                    observation: Observation::new(1, GameSignal::Win),
                },
            ],
            games: vec![
                GameOutcome {
                    outcome: Outcome::TimeoutDraw,
                    length_steps: 2,
                },
                GameOutcome {
                    outcome: Outcome::Win,
                    length_steps: 1,
                },
            ],
            states: if with_states {
                vec![0, 1, 1, 0]
            } else {
                vec![]
            },
        }
    }

    #[test]
    fn round_trip() {
        for with_states in [false, true] {
            let life = sample(with_states);
            assert_eq!(read_life(&write_life(&life)).unwrap(), life);
        }
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        let text = write_life(&sample(false));
        assert!(matches!(
            read_life(&text.replacen("liferec/1", "liferec/2", 1)),
            Err(LifeLogError::FormatVersionMismatch(_))
        ));
        let cut = &text[..text.len() - 10];
        assert!(matches!(read_life(cut), Err(LifeLogError::Corrupt { .. })));
    }
}
