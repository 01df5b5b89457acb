//! Reference agents and their textual specs.
//!
//! Spec grammar, as accepted on the command line:
//!
//! ```text
//! random
//! dead:<action>
//! freq[:k=<n>][,eps=<f>]
//! retarded[:epoch=<n>]
//! cram:<family>
//! td5:<family>[,h=<n>]
//! oscillating[:win=<a>,lose=<b>]
//! ```
//!
//! `<family>` is a path to a `family/1` JSON file or `bandit:<obs>x<actions>`.

pub mod basic;
pub mod bayes;
pub mod cramming;
pub mod frequency;
pub mod retarded;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use basic::{DeadAgent, OscillatingAgent, RandomAgent};
pub use bayes::{BayesAgent, PlanningError, MAX_BELIEF_STATES, MAX_HORIZON};
pub use cramming::{build_cramming_table, CrammingAgent, CrammingTable, MAX_CRAM_WORLDS};
pub use frequency::{Exploration, FrequencyLearner};
pub use retarded::RetardedAgent;

use crate::builtin::{oracle_bandit_family, ExplicitWorldError, WorldFamily};
use crate::world::{Agent, LifeConfig};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("bad agent spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("cannot load family: {0}")]
    Family(#[from] ExplicitWorldError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error("agent {agent} needs {needed} actions, world offers {offered}")]
    ActionMismatch {
        agent: String,
        needed: usize,
        offered: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySource {
    Bandit { obs: usize, actions: usize },
    File(PathBuf),
}

impl FamilySource {
    pub fn load(&self) -> Result<WorldFamily, AgentError> {
        match self {
            FamilySource::Bandit { obs, actions } => Ok(oracle_bandit_family(*obs, *actions)),
            FamilySource::File(path) => Ok(WorldFamily::read(path)?),
        }
    }
}

impl fmt::Display for FamilySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySource::Bandit { obs, actions } => write!(f, "bandit:{obs}x{actions}"),
            FamilySource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

fn parse_family(spec: &str, s: &str) -> Result<FamilySource, AgentError> {
    if let Some(dims) = s.strip_prefix("bandit:") {
        let bad = || AgentError::BadSpec {
            spec: spec.into(),
            reason: format!("family {s:?} should look like bandit:<obs>x<actions>"),
        };
        let (o, a) = dims.split_once('x').ok_or_else(bad)?;
        let obs: usize = o.parse().map_err(|_| bad())?;
        let actions: usize = a.parse().map_err(|_| bad())?;
        if obs == 0 || actions == 0 || (actions as f64).powi(obs as i32) > 1e6 {
            return Err(bad());
        }
        return Ok(FamilySource::Bandit { obs, actions });
    }
    if s.is_empty() {
        return Err(AgentError::BadSpec {
            spec: spec.into(),
            reason: "missing family".into(),
        });
    }
    Ok(FamilySource::File(PathBuf::from(s)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Random,
    Dead(usize),
    Frequency {
        k: usize,
        exploration: Exploration,
    },
    Retarded {
        epoch: u64,
    },
    Cramming(FamilySource),
    Bayes {
        family: FamilySource,
        horizon: usize,
    },
    Oscillating {
        win: usize,
        lose: usize,
    },
}

/// Splits `a=1,b=2` into pairs, rejecting keys not in `allowed`.
fn options<'a>(
    spec: &str,
    body: &'a str,
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a str)>, AgentError> {
    let mut out = Vec::new();
    for part in body.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| AgentError::BadSpec {
            spec: spec.into(),
            reason: format!("expected key=value, got {part:?}"),
        })?;
        if !allowed.contains(&k) {
            return Err(AgentError::BadSpec {
                spec: spec.into(),
                reason: format!("unknown option {k:?}"),
            });
        }
        out.push((k, v));
    }
    Ok(out)
}

fn number<T: FromStr>(spec: &str, key: &str, v: &str) -> Result<T, AgentError> {
    v.parse().map_err(|_| AgentError::BadSpec {
        spec: spec.into(),
        reason: format!("{key} must be a number, got {v:?}"),
    })
}

impl FromStr for AgentSpec {
    type Err = AgentError;

    fn from_str(spec: &str) -> Result<Self, AgentError> {
        let (name, body) = spec.split_once(':').unwrap_or((spec, ""));
        let parsed = match name {
            "random" if body.is_empty() => AgentSpec::Random,
            "dead" => AgentSpec::Dead(if body.is_empty() {
                0
            } else {
                number(spec, "action", body)?
            }),
            "freq" => {
                let mut k = 2;
                let mut exploration = Exploration::Decaying;
                for (key, v) in options(spec, body, &["k", "eps"])? {
                    match key {
                        "k" => k = number(spec, key, v)?,
                        _ => {
                            let e: f64 = number(spec, key, v)?;
                            if !(0.0..=1.0).contains(&e) {
                                return Err(AgentError::BadSpec {
                                    spec: spec.into(),
                                    reason: "eps must lie in [0, 1]".into(),
                                });
                            }
                            exploration = Exploration::Fixed(e);
                        }
                    }
                }
                AgentSpec::Frequency { k, exploration }
            }
            "retarded" => {
                let mut epoch = 4;
                for (key, v) in options(spec, body, &["epoch"])? {
                    epoch = number(spec, key, v)?;
                }
                if epoch == 0 {
                    return Err(AgentError::BadSpec {
                        spec: spec.into(),
                        reason: "epoch must be positive".into(),
                    });
                }
                AgentSpec::Retarded { epoch }
            }
            "cram" => AgentSpec::Cramming(parse_family(spec, body)?),
            "td5" => {
                let (fam, opts) = match body.rsplit_once(",h=") {
                    Some((f, h)) => (f, Some(h)),
                    None => (body, None),
                };
                let horizon = match opts {
                    Some(h) => number(spec, "h", h)?,
                    None => 2,
                };
                AgentSpec::Bayes {
                    family: parse_family(spec, fam)?,
                    horizon,
                }
            }
            "oscillating" => {
                let (mut win, mut lose) = (0, 1);
                for (key, v) in options(spec, body, &["win", "lose"])? {
                    match key {
                        "win" => win = number(spec, key, v)?,
                        _ => lose = number(spec, key, v)?,
                    }
                }
                AgentSpec::Oscillating { win, lose }
            }
            _ => {
                return Err(AgentError::BadSpec {
                    spec: spec.into(),
                    reason: "unknown agent".into(),
                })
            }
        };
        Ok(parsed)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Random => write!(f, "random"),
            AgentSpec::Dead(a) => write!(f, "dead:{a}"),
            AgentSpec::Frequency { k, exploration } => match exploration {
                Exploration::Decaying => write!(f, "freq:k={k}"),
                Exploration::Fixed(e) => write!(f, "freq:k={k},eps={e}"),
            },
            AgentSpec::Retarded { epoch } => write!(f, "retarded:epoch={epoch}"),
            AgentSpec::Cramming(fam) => write!(f, "cram:{fam}"),
            AgentSpec::Bayes { family, horizon } => write!(f, "td5:{family},h={horizon}"),
            AgentSpec::Oscillating { win, lose } => write!(f, "oscillating:win={win},lose={lose}"),
        }
    }
}

/// Builds fresh agents for a spec. Expensive preparation (loading a family,
/// planning the cramming table) happens once, in [`AgentFactory::new`].
#[derive(Debug, Clone)]
pub struct AgentFactory {
    spec: AgentSpec,
    family: Option<Arc<WorldFamily>>,
    cramming: Option<Arc<CrammingTable>>,
}

impl AgentFactory {
    pub fn new(spec: AgentSpec, config: LifeConfig) -> Result<Self, AgentError> {
        let mut factory = AgentFactory {
            spec,
            family: None,
            cramming: None,
        };
        match &factory.spec {
            AgentSpec::Cramming(src) => {
                let family = Arc::new(src.load()?);
                factory.cramming = Some(build_cramming_table(family, config)?);
            }
            AgentSpec::Bayes { family, horizon } => {
                let family = Arc::new(family.load()?);
                // Surface size errors now rather than once per life.
                BayesAgent::new(family.clone(), *horizon)?;
                factory.family = Some(family);
            }
            _ => {}
        }
        Ok(factory)
    }

    pub fn parse(spec: &str, config: LifeConfig) -> Result<Self, AgentError> {
        AgentFactory::new(spec.parse()?, config)
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.to_string()
    }

    fn needs(&self, needed: usize, offered: usize) -> Result<(), AgentError> {
        if needed > offered {
            return Err(AgentError::ActionMismatch {
                agent: self.name(),
                needed,
                offered,
            });
        }
        Ok(())
    }

    pub fn build(
        &self,
        action_count: usize,
        obs_alphabet: usize,
    ) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match &self.spec {
            AgentSpec::Random => Box::new(RandomAgent::new(action_count)),
            AgentSpec::Dead(a) => {
                self.needs(a + 1, action_count)?;
                Box::new(DeadAgent::new(*a))
            }
            AgentSpec::Frequency { k, exploration } => {
                Box::new(FrequencyLearner::new(action_count, *k, *exploration))
            }
            AgentSpec::Retarded { epoch } => Box::new(RetardedAgent::new(
                action_count,
                obs_alphabet.max(1),
                *epoch,
            )),
            AgentSpec::Cramming(_) => {
                let table = self.cramming.clone().expect("prepared in new");
                self.needs(table.family().action_count(), action_count)?;
                Box::new(CrammingAgent::new(table))
            }
            AgentSpec::Bayes { horizon, .. } => {
                let family = self.family.clone().expect("prepared in new");
                self.needs(family.action_count(), action_count)?;
                Box::new(BayesAgent::new(family, *horizon)?)
            }
            AgentSpec::Oscillating { win, lose } => {
                self.needs(win.max(lose) + 1, action_count)?;
                Box::new(OscillatingAgent::new(*win, *lose))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_round_trip() {
        for s in [
            "random",
            "dead:2",
            "freq:k=2",
            "freq:k=0,eps=0.1",
            "retarded:epoch=4",
            "cram:bandit:2x3",
            "td5:bandit:2x3,h=2",
            "td5:families/a.json,h=1",
            "oscillating:win=0,lose=1",
        ] {
            let spec: AgentSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn shorthand_defaults() {
        assert_eq!("dead".parse::<AgentSpec>().unwrap(), AgentSpec::Dead(0));
        assert_eq!(
            "freq".parse::<AgentSpec>().unwrap(),
            AgentSpec::Frequency {
                k: 2,
                exploration: Exploration::Decaying
            }
        );
        assert_eq!(
            "retarded".parse::<AgentSpec>().unwrap(),
            AgentSpec::Retarded { epoch: 4 }
        );
        assert_eq!(
            "td5:bandit:2x3".parse::<AgentSpec>().unwrap(),
            AgentSpec::Bayes {
                family: FamilySource::Bandit { obs: 2, actions: 3 },
                horizon: 2
            }
        );
    }

    #[test]
    fn bad_specs_rejected() {
        for s in [
            "",
            "genius",
            "dead:x",
            "freq:q=1",
            "freq:eps=2",
            "cram:",
            "cram:bandit:2",
            "retarded:epoch=0",
        ] {
            assert!(s.parse::<AgentSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn dead_action_checked_against_world() {
        let f = AgentFactory::parse("dead:5", LifeConfig::default()).unwrap();
        assert!(matches!(
            f.build(3, 4),
            Err(AgentError::ActionMismatch { .. })
        ));
        assert!(f.build(6, 4).is_ok());
    }
}
