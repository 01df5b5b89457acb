//! Test-world suites and their text format `suite/1`.
//!
//! ```text
//! suite/1
//! generator splitmix64+chacha8
//! master_seed <u64>
//! n_states <n>
//! tape_symbols <n>
//! action_count <n>
//! obs_alphabet <n>
//! small_step_budget <n>
//! p_second_branch <f64>
//! p_emit <f64>
//! p_game_signal_given_emit <f64>
//! signal_split <win> <loss> <draw>
//! layout plain|paired|custom
//! count <machines>
//! machine <index> <id> slot <slot>
//! e <state> <symbol> <action> <branch>[ | <branch>]      (one line per table key)
//! ...
//! end
//! ```
//!
//! A branch is `<next_state> <write> <L|S|R> <emit>`, where emit is `-` or the
//! observed symbol followed by its signal code, e.g. `3W` or `0N`.
//! Machine `i` of a plain suite is generated from stream `(master_seed, i)`.
//! A paired suite holds `count / 2` generated machines each followed by its
//! Win/Loss swap; both members of a pair share a seed slot.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::ndtm::{
    generate_machine, swap_win_loss, Branch, Entry, HeadMove, MachineError, MachineGenParams,
    WorldMachine,
};
use crate::rng::{self, GENERATOR_NAME};
use crate::world::{GameSignal, Observation};

pub const SUITE_VERSION: &str = "suite/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Plain,
    Paired,
    Custom,
}

impl Layout {
    fn name(self) -> &'static str {
        match self {
            Layout::Plain => "plain",
            Layout::Paired => "paired",
            Layout::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteHeader {
    pub generator: String,
    pub master_seed: u64,
    pub n_states: usize,
    pub params: MachineGenParams,
    pub layout: Layout,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub id: String,
    /// Life seeds are derived from this slot, so entries sharing a slot are
    /// run on the same random streams.
    pub seed_slot: u64,
    pub machine: Arc<WorldMachine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub header: SuiteHeader,
    pub entries: Vec<SuiteEntry>,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("suite count must be at least 1")]
    InvalidCount,
    #[error("unsupported suite format version {0:?}")]
    FormatVersionMismatch(String),
    #[error("corrupt suite at line {line}: {reason}")]
    CorruptSuite { line: usize, reason: String },
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("suite i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn machine_id(i: usize) -> String {
    format!("w{i:04}")
}

/// Generates `count` machines; machine `i` uses stream `(master_seed, i)`.
pub fn generate_suite(
    params: &MachineGenParams,
    n_states: usize,
    count: usize,
    master_seed: u64,
) -> Result<Suite, SuiteError> {
    if count == 0 {
        return Err(SuiteError::InvalidCount);
    }
    let entries = (0..count)
        .map(|i| {
            let m = generate_machine(params, n_states, &mut rng::stream(master_seed, i as u64))?;
            Ok(SuiteEntry {
                id: machine_id(i),
                seed_slot: i as u64,
                machine: Arc::new(m),
            })
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;
    Ok(Suite {
        header: SuiteHeader {
            generator: GENERATOR_NAME.to_string(),
            master_seed,
            n_states,
            params: *params,
            layout: Layout::Plain,
            count,
        },
        entries,
    })
}

/// A suite closed under [`swap_win_loss`]: `pairs` generated machines, each
/// followed by its swap, both members sharing one seed slot.
pub fn generate_paired_suite(
    params: &MachineGenParams,
    n_states: usize,
    pairs: usize,
    master_seed: u64,
) -> Result<Suite, SuiteError> {
    let base = generate_suite(params, n_states, pairs, master_seed)?;
    let mut entries = Vec::with_capacity(2 * pairs);
    for (i, e) in base.entries.into_iter().enumerate() {
        let swapped = Arc::new(swap_win_loss(&e.machine));
        entries.push(SuiteEntry {
            id: format!("p{i:04}a"),
            seed_slot: i as u64,
            machine: e.machine,
        });
        entries.push(SuiteEntry {
            id: format!("p{i:04}b"),
            seed_slot: i as u64,
            machine: swapped,
        });
    }
    Ok(Suite {
        header: SuiteHeader {
            layout: Layout::Paired,
            count: 2 * pairs,
            ..base.header
        },
        entries,
    })
}

impl Suite {
    /// A suite of hand-built machines; not regenerable from its header.
    pub fn from_machines(machines: Vec<WorldMachine>) -> Result<Suite, SuiteError> {
        let first = machines.first().ok_or(SuiteError::InvalidCount)?;
        let params = MachineGenParams {
            tape_symbols: first.tape_symbols,
            action_count: first.action_count,
            obs_alphabet: first.obs_alphabet,
            small_step_budget: first.small_step_budget,
            ..Default::default()
        };
        let header = SuiteHeader {
            generator: GENERATOR_NAME.to_string(),
            master_seed: 0,
            n_states: first.n_states,
            params,
            layout: Layout::Custom,
            count: machines.len(),
        };
        let entries = machines
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                m.validate()?;
                Ok(SuiteEntry {
                    id: machine_id(i),
                    seed_slot: i as u64,
                    machine: Arc::new(m),
                })
            })
            .collect::<Result<Vec<_>, SuiteError>>()?;
        Ok(Suite { header, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rebuilds the suite from its header alone.
    pub fn regenerate(&self) -> Result<Option<Suite>, SuiteError> {
        let h = &self.header;
        Ok(match h.layout {
            Layout::Plain => Some(generate_suite(
                &h.params,
                h.n_states,
                h.count,
                h.master_seed,
            )?),
            Layout::Paired => Some(generate_paired_suite(
                &h.params,
                h.n_states,
                h.count / 2,
                h.master_seed,
            )?),
            Layout::Custom => None,
        })
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let p = &h.params;
        let mut out = String::new();
        let _ = writeln!(out, "{SUITE_VERSION}");
        let _ = writeln!(out, "generator {}", h.generator);
        let _ = writeln!(out, "master_seed {}", h.master_seed);
        let _ = writeln!(out, "n_states {}", h.n_states);
        let _ = writeln!(out, "tape_symbols {}", p.tape_symbols);
        let _ = writeln!(out, "action_count {}", p.action_count);
        let _ = writeln!(out, "obs_alphabet {}", p.obs_alphabet);
        let _ = writeln!(out, "small_step_budget {}", p.small_step_budget);
        let _ = writeln!(out, "p_second_branch {}", p.p_second_branch);
        let _ = writeln!(out, "p_emit {}", p.p_emit);
        let _ = writeln!(
            out,
            "p_game_signal_given_emit {}",
            p.p_game_signal_given_emit
        );
        let _ = writeln!(
            out,
            "signal_split {} {} {}",
            p.signal_split[0], p.signal_split[1], p.signal_split[2]
        );
        let _ = writeln!(out, "layout {}", h.layout.name());
        let _ = writeln!(out, "count {}", self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            let m = &e.machine;
            let _ = writeln!(
                out,
                "machine {i} {} slot {} states {}",
                e.id, e.seed_slot, m.n_states
            );
            for s in 0..m.n_states {
                for sym in 0..m.tape_symbols {
                    for a in 0..m.action_count {
                        let entry = m.entry(s, sym, a);
                        let _ = write!(out, "e {s} {sym} {a} ");
                        write_branch(&mut out, &entry.first);
                        if let Some(b) = &entry.second {
                            out.push_str(" | ");
                            write_branch(&mut out, b);
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Suite, SuiteError> {
        Parser::new(text).suite()
    }
}

fn write_branch(out: &mut String, b: &Branch) {
    let _ = write!(out, "{} {} {} ", b.next_state, b.write, b.head_move.code());
    match b.emit {
        None => out.push('-'),
        Some(o) => {
            let _ = write!(out, "{}{}", o.symbol, o.signal.code());
        }
    }
}

pub fn write_suite(suite: &Suite, path: &Path) -> Result<(), SuiteError> {
    std::fs::write(path, suite.to_text())?;
    Ok(())
}

pub fn read_suite(path: &Path) -> Result<Suite, SuiteError> {
    Suite::parse(&std::fs::read_to_string(path)?)
}

struct Parser<'a> {
    lines: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lines: text.lines(),
            line: 0,
        }
    }

    fn corrupt(&self, reason: impl Into<String>) -> SuiteError {
        SuiteError::CorruptSuite {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str, SuiteError> {
        self.line += 1;
        self.lines
            .next()
            .ok_or_else(|| self.corrupt("unexpected end of file"))
    }

    fn field(&mut self, key: &str) -> Result<&'a str, SuiteError> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.corrupt(format!("expected `{key}`")))
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, SuiteError> {
        let raw = self.field(key)?;
        raw.parse()
            .map_err(|_| self.corrupt(format!("bad value for `{key}`")))
    }

    fn suite(mut self) -> Result<Suite, SuiteError> {
        let version = self.lines.next().unwrap_or("");
        self.line = 1;
        if version != SUITE_VERSION {
            if version.starts_with("suite/") {
                return Err(SuiteError::FormatVersionMismatch(version.to_string()));
            }
            return Err(self.corrupt("missing suite version line"));
        }
        let generator = self.field("generator")?.to_string();
        let master_seed = self.value("master_seed")?;
        let n_states = self.value("n_states")?;
        let tape_symbols = self.value("tape_symbols")?;
        let action_count = self.value("action_count")?;
        let obs_alphabet = self.value("obs_alphabet")?;
        let small_step_budget = self.value("small_step_budget")?;
        let p_second_branch = self.value("p_second_branch")?;
        let p_emit = self.value("p_emit")?;
        let p_game_signal_given_emit = self.value("p_game_signal_given_emit")?;
        let split: Vec<f64> = self
            .field("signal_split")?
            .split(' ')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| self.corrupt("bad signal_split"))?;
        let signal_split: [f64; 3] = split
            .try_into()
            .map_err(|_| self.corrupt("signal_split needs three values"))?;
        let layout = match self.field("layout")? {
            "plain" => Layout::Plain,
            "paired" => Layout::Paired,
            "custom" => Layout::Custom,
            _ => return Err(self.corrupt("unknown layout")),
        };
        let count: usize = self.value("count")?;
        let params = MachineGenParams {
            tape_symbols,
            action_count,
            obs_alphabet,
            small_step_budget,
            p_second_branch,
            p_emit,
            p_game_signal_given_emit,
            signal_split,
        };
        params.validate()?;
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            entries.push(self.machine(i, &params)?);
        }
        if self.next()? != "end" {
            return Err(self.corrupt("expected `end`"));
        }
        Ok(Suite {
            header: SuiteHeader {
                generator,
                master_seed,
                n_states,
                params,
                layout,
                count,
            },
            entries,
        })
    }

    fn machine(
        &mut self,
        index: usize,
        params: &MachineGenParams,
    ) -> Result<SuiteEntry, SuiteError> {
        let head: Vec<&str> = self.next()?.split(' ').collect();
        let ok = head.len() == 7
            && head[0] == "machine"
            && head[1].parse() == Ok(index)
            && head[3] == "slot"
            && head[5] == "states";
        if !ok {
            return Err(self.corrupt(format!("bad header for machine {index}")));
        }
        let id = head[2].to_string();
        let seed_slot = head[4].parse().map_err(|_| self.corrupt("bad slot"))?;
        let n_states: usize = head[6]
            .parse()
            .map_err(|_| self.corrupt("bad state count"))?;
        let mut table = Vec::with_capacity(n_states * params.tape_symbols * params.action_count);
        for s in 0..n_states {
            for sym in 0..params.tape_symbols {
                for a in 0..params.action_count {
                    let l = self.next()?;
                    table.push(self.entry(l, [s, sym, a])?);
                }
            }
        }
        let machine = WorldMachine {
            n_states,
            tape_symbols: params.tape_symbols,
            action_count: params.action_count,
            obs_alphabet: params.obs_alphabet,
            small_step_budget: params.small_step_budget,
            table,
        };
        machine
            .validate()
            .map_err(|e| self.corrupt(e.to_string()))?;
        Ok(SuiteEntry {
            id,
            seed_slot,
            machine: Arc::new(machine),
        })
    }

    fn entry(&self, line: &str, key: [usize; 3]) -> Result<Entry, SuiteError> {
        let rest = line
            .strip_prefix("e ")
            .ok_or_else(|| self.corrupt("expected table entry"))?;
        let mut parts = rest.splitn(4, ' ');
        for k in key {
            if parts.next().and_then(|v| v.parse().ok()) != Some(k) {
                return Err(self.corrupt("table entry out of order"));
            }
        }
        let branches = parts
            .next()
            .ok_or_else(|| self.corrupt("missing branches"))?;
        let mut iter = branches.split(" | ");
        let first = self.branch(iter.next().unwrap_or(""))?;
        let second = iter.next().map(|b| self.branch(b)).transpose()?;
        if iter.next().is_some() {
            return Err(self.corrupt("more than two branches"));
        }
        Ok(Entry { first, second })
    }

    fn branch(&self, text: &str) -> Result<Branch, SuiteError> {
        let f: Vec<&str> = text.split(' ').collect();
        if f.len() != 4 {
            return Err(self.corrupt("branch needs four fields"));
        }
        let bad = || self.corrupt(format!("bad branch `{text}`"));
        let mv = f[2].chars().next().filter(|_| f[2].len() == 1);
        let emit = if f[3] == "-" {
            None
        } else {
            let (sym, sig) = f[3].split_at(f[3].len().saturating_sub(1));
            let signal = sig
                .chars()
                .next()
                .and_then(GameSignal::from_code)
                .ok_or_else(bad)?;
            Some(Observation::new(sym.parse().map_err(|_| bad())?, signal))
        };
        Ok(Branch {
            next_state: f[0].parse().map_err(|_| bad())?,
            write: f[1].parse().map_err(|_| bad())?,
            head_move: mv.and_then(HeadMove::from_code).ok_or_else(bad)?,
            emit,
        })
    }
}
