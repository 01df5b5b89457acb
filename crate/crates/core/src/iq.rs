//! IQ estimation over test-world suites, the qualification threshold, and
//! the limit-IQ construction.
//!
//! Estimates are computed from integer half points, so a suite whose lives
//! sum to exactly half the maximum reports exactly 0.5.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::{AgentError, AgentFactory};
use crate::builtin::{OscillatingWorld, WorldFamily};
use crate::ndtm::{generate_machine, MachineGenParams, MachineWorld};
use crate::rng::{self, GENERATOR_NAME};
use crate::suite::{Suite, SuiteEntry};
use crate::world::{
    run_games, run_life, success_of_games, total_half_points, Agent, GameOutcome, LifeConfig,
    LifeError, LifeRecord, World,
};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const REPORT_VERSION: &str = "iqreport/1";
pub const WORLDS_VERSION: &str = "iqworlds/1";
pub const THREADS_ENV: &str = "IQBENCH_THREADS";
/// Sub-stream of a life seed that picks the family member for that life.
pub const FAMILY_PICK_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("suite is empty")]
    EmptySuite,
    #[error("series has {0} points, at least 4 are needed")]
    SeriesTooShort(usize),
    #[error("tail fraction must lie in (0, 1], got {0}")]
    BadTailFraction(f64),
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("life in world {world}: {source}")]
    Life { world: String, source: LifeError },
    #[error("world generation: {0}")]
    Machine(#[from] crate::ndtm::MachineError),
}

/// Parameters an IQ value was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct IqParams {
    /// `ndtm` for machine suites, `family` for explicit world families.
    pub worlds: String,
    pub n_states: usize,
    pub life: LifeConfig,
    /// Only meaningful for machine worlds.
    pub small_step_budget: Option<u32>,
    pub suite_size: usize,
    pub master_seed: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldResult {
    pub world_id: String,
    pub seed_slot: u64,
    pub games: u32,
    pub half_points: u64,
}

impl WorldResult {
    pub fn success(&self) -> f64 {
        self.half_points as f64 / (2.0 * f64::from(self.games))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqReport {
    pub agent: String,
    pub estimate: f64,
    pub per_world: Vec<WorldResult>,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub params: IqParams,
}

impl IqReport {
    fn from_results(agent: String, per_world: Vec<WorldResult>, params: IqParams) -> Self {
        let n = per_world.len() as f64;
        let half: u64 = per_world.iter().map(|w| w.half_points).sum();
        let games: u64 = per_world.iter().map(|w| u64::from(w.games)).sum();
        let estimate = half as f64 / (2 * games) as f64;
        let stderr = if per_world.len() > 1 {
            let var = per_world
                .iter()
                .map(|w| (w.success() - estimate).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let ci95 = (
            (estimate - 1.96 * stderr).max(0.0),
            (estimate + 1.96 * stderr).min(1.0),
        );
        IqReport {
            agent,
            estimate,
            per_world,
            stderr,
            ci95,
            params,
        }
    }

    pub fn successes(&self) -> Vec<f64> {
        self.per_world.iter().map(WorldResult::success).collect()
    }
}

pub fn qualifies(estimate: f64, threshold: f64) -> bool {
    estimate > threshold
}

/// Strictly above the threshold (0.7 by default).
pub fn qualifies_as_ai(report: &IqReport, threshold: f64) -> bool {
    qualifies(report.estimate, threshold)
}

static THREAD_OVERRIDE: AtomicUsize = AtomicUsize::new(0);

/// Caps worker threads for this process, taking precedence over
/// `IQBENCH_THREADS`. Zero clears the cap.
pub fn set_worker_threads(n: usize) {
    THREAD_OVERRIDE.store(n, Ordering::Relaxed);
}

/// Worker pool sized by [`set_worker_threads`] or `IQBENCH_THREADS`, else by
/// the number of cores. The thread count never affects results.
pub fn worker_pool() -> rayon::ThreadPool {
    let threads = match THREAD_OVERRIDE.load(Ordering::Relaxed) {
        0 => std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0),
        n => n,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Seed of the life lived in the world at `slot`.
pub fn life_seed(master_seed: u64, slot: u64) -> u64 {
    rng::derive_seed(master_seed, slot)
}

fn build_for(factory: &AgentFactory, world: &dyn World) -> Result<Box<dyn Agent>, AgentError> {
    factory.build(world.action_count(), world.obs_alphabet())
}

/// Full record of the life an agent lives in one suite entry.
pub fn life_on_entry(
    factory: &AgentFactory,
    entry: &SuiteEntry,
    config: LifeConfig,
    master_seed: u64,
) -> Result<LifeRecord, IqError> {
    let mut world = MachineWorld::new(entry.machine.clone());
    let mut agent = build_for(factory, &world)?;
    let seed = life_seed(master_seed, entry.seed_slot);
    let mut life =
        run_life(&mut world, &mut agent, config, seed).map_err(|source| IqError::Life {
            world: entry.id.clone(),
            source,
        })?;
    life.world_id = entry.id.clone();
    Ok(life)
}

/// Mean Success over the suite, one life per world, fresh agent per life.
pub fn estimate_iq(
    factory: &AgentFactory,
    suite: &Suite,
    config: LifeConfig,
    master_seed: u64,
) -> Result<IqReport, IqError> {
    estimate_iq_with(&factory.name(), suite, config, master_seed, |world| {
        Ok(build_for(factory, world)?)
    })
}

/// [`estimate_iq`] for agents not expressible as a spec.
pub fn estimate_iq_with<F>(
    agent_name: &str,
    suite: &Suite,
    config: LifeConfig,
    master_seed: u64,
    make_agent: F,
) -> Result<IqReport, IqError>
where
    F: Fn(&dyn World) -> Result<Box<dyn Agent>, IqError> + Sync,
{
    if suite.is_empty() {
        return Err(IqError::EmptySuite);
    }
    let per_world = worker_pool().install(|| {
        suite
            .entries
            .par_iter()
            .map(|entry| {
                let mut world = MachineWorld::new(entry.machine.clone());
                let mut agent = make_agent(&world)?;
                let seed = life_seed(master_seed, entry.seed_slot);
                let games = run_games(&mut world, &mut agent, config, seed).map_err(|source| {
                    IqError::Life {
                        world: entry.id.clone(),
                        source,
                    }
                })?;
                Ok(world_result(entry.id.clone(), entry.seed_slot, &games))
            })
            .collect::<Result<Vec<_>, IqError>>()
    })?;
    let h = &suite.header;
    let params = IqParams {
        worlds: "ndtm".into(),
        n_states: h.n_states,
        life: config,
        small_step_budget: Some(h.params.small_step_budget),
        suite_size: suite.len(),
        master_seed,
        generator: h.generator.clone(),
    };
    Ok(IqReport::from_results(
        agent_name.to_string(),
        per_world,
        params,
    ))
}

fn world_result(world_id: String, seed_slot: u64, games: &[GameOutcome]) -> WorldResult {
    WorldResult {
        world_id,
        seed_slot,
        games: games.len() as u32,
        half_points: total_half_points(games),
    }
}

/// Index of the family member lived in during life `life`.
pub fn family_pick(family: &WorldFamily, master_seed: u64, life: u64) -> usize {
    family.sample_index(&mut rng::stream(
        life_seed(master_seed, life),
        FAMILY_PICK_STREAM,
    ))
}

/// Mean Success over `lives` lives, each in a member drawn from the family
/// prior. Life `i` uses seed slot `i`, so two agents evaluated with the same
/// master seed meet the same worlds on the same world streams.
pub fn estimate_family_iq(
    factory: &AgentFactory,
    family: &WorldFamily,
    config: LifeConfig,
    master_seed: u64,
    lives: usize,
) -> Result<IqReport, IqError> {
    if lives == 0 || family.is_empty() {
        return Err(IqError::EmptySuite);
    }
    let per_world = worker_pool().install(|| {
        (0..lives as u64)
            .into_par_iter()
            .map(|i| {
                let def = &family.worlds[family_pick(family, master_seed, i)];
                let mut world = def.instantiate();
                let mut agent = build_for(factory, &world)?;
                let games = run_games(&mut world, &mut agent, config, life_seed(master_seed, i))
                    .map_err(|source| IqError::Life {
                        world: def.name.clone(),
                        source,
                    })?;
                Ok(world_result(def.name.clone(), i, &games))
            })
            .collect::<Result<Vec<_>, IqError>>()
    })?;
    let params = IqParams {
        worlds: "family".into(),
        n_states: family.worlds.iter().map(|w| w.n_states).max().unwrap_or(0),
        life: config,
        small_step_budget: None,
        suite_size: lives,
        master_seed,
        generator: GENERATOR_NAME.into(),
    };
    Ok(IqReport::from_results(factory.name(), per_world, params))
}

fn fmt_budget(b: Option<u32>) -> String {
    b.map_or_else(|| "-".into(), |b| b.to_string())
}

/// Single-row report: a version line, a parameter line, the column header and
/// one data row.
pub fn report_csv(report: &IqReport, threshold: f64) -> String {
    let p = &report.params;
    let mut out = String::new();
    writeln!(out, "# {REPORT_VERSION}").unwrap();
    writeln!(
        out,
        "# params worlds={} n_states={} games={} max_steps_per_game={} small_step_budget={} suite_size={} master_seed={} generator={}",
        p.worlds,
        p.n_states,
        p.life.games,
        p.life.max_steps_per_game,
        fmt_budget(p.small_step_budget),
        p.suite_size,
        p.master_seed,
        p.generator
    )
    .unwrap();
    out.push_str(
        "agent,worlds,n_states,games,max_steps_per_game,small_step_budget,suite_size,master_seed,estimate,stderr,ci_low,ci_high,threshold,qualifies\n",
    );
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        report.agent,
        p.worlds,
        p.n_states,
        p.life.games,
        p.life.max_steps_per_game,
        fmt_budget(p.small_step_budget),
        p.suite_size,
        p.master_seed,
        report.estimate,
        report.stderr,
        report.ci95.0,
        report.ci95.1,
        threshold,
        qualifies_as_ai(report, threshold)
    )
    .unwrap();
    out
}

pub fn per_world_csv(report: &IqReport) -> String {
    let mut out = format!("# {WORLDS_VERSION}\nagent,world,seed_slot,games,half_points,success\n");
    for w in &report.per_world {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            report.agent,
            w.world_id,
            w.seed_slot,
            w.games,
            w.half_points,
            w.success()
        )
        .unwrap();
    }
    out
}

/// One point of a limit-IQ schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub n_states: usize,
    pub life: LifeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub schedule: Vec<SchedulePoint>,
    pub successes: Vec<f64>,
    /// `running_means[i]` is the mean of the first `i + 1` successes.
    pub running_means: Vec<f64>,
}

impl ConvergenceSeries {
    pub fn from_successes(schedule: Vec<SchedulePoint>, successes: Vec<f64>) -> Self {
        let mut sum = 0.0;
        let running_means = successes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                sum += s;
                sum / (i + 1) as f64
            })
            .collect();
        ConvergenceSeries {
            schedule,
            successes,
            running_means,
        }
    }

    pub fn limits(&self, tail_fraction: f64) -> Result<LimitSummary, IqError> {
        liminf_limsup_new_iq(&self.running_means, tail_fraction)
    }
}

/// Doubles complexity and lifespan at each point, starting from `start`.
pub fn doubling_schedule(start: SchedulePoint, len: usize) -> Vec<SchedulePoint> {
    (0..len as u32)
        .map(|k| SchedulePoint {
            n_states: start.n_states << k,
            life: LifeConfig {
                games: start.life.games,
                max_steps_per_game: start.life.max_steps_per_game << k,
            },
        })
        .collect()
}

/// One life per schedule point, in a fresh world generated at that point's
/// complexity. World `k` is generated from stream `(master_seed, 2k)` and
/// lived with seed slot `2k + 1`.
pub fn limit_iq_series(
    factory: &AgentFactory,
    schedule: &[SchedulePoint],
    params: &MachineGenParams,
    master_seed: u64,
) -> Result<ConvergenceSeries, IqError> {
    if schedule.is_empty() {
        return Err(IqError::BadSchedule("schedule is empty".into()));
    }
    for w in schedule.windows(2) {
        if w[1].n_states < w[0].n_states
            || w[1].life.total_step_budget() < w[0].life.total_step_budget()
        {
            return Err(IqError::BadSchedule(
                "complexity and lifespan must not decrease".into(),
            ));
        }
    }
    let successes = worker_pool().install(|| {
        schedule
            .par_iter()
            .enumerate()
            .map(|(k, point)| {
                let k = k as u64;
                let machine =
                    generate_machine(params, point.n_states, &mut rng::stream(master_seed, 2 * k))?;
                let mut world = MachineWorld::new(Arc::new(machine));
                let mut agent = build_for(factory, &world)?;
                let games = run_games(
                    &mut world,
                    &mut agent,
                    point.life,
                    life_seed(master_seed, 2 * k + 1),
                )
                .map_err(|source| IqError::Life {
                    world: format!("limit{k}"),
                    source,
                })?;
                success_of_games(&games).map_err(|source| IqError::Life {
                    world: format!("limit{k}"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, IqError>>()
    })?;
    Ok(ConvergenceSeries::from_successes(
        schedule.to_vec(),
        successes,
    ))
}

/// Finite-window surrogate for (liminf, limsup) and their midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSummary {
    pub lower: f64,
    pub upper: f64,
    pub new_iq: f64,
    pub tail_len: usize,
}

/// Min and max over the trailing `tail_fraction` of the series (at least one
/// point), and their mean.
pub fn liminf_limsup_new_iq(means: &[f64], tail_fraction: f64) -> Result<LimitSummary, IqError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(IqError::BadTailFraction(tail_fraction));
    }
    if means.len() < 4 {
        return Err(IqError::SeriesTooShort(means.len()));
    }
    let tail_len = ((means.len() as f64 * tail_fraction).ceil() as usize).clamp(1, means.len());
    let tail = &means[means.len() - tail_len..];
    let lower = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LimitSummary {
        lower,
        upper,
        new_iq: (lower + upper) / 2.0,
        tail_len,
    })
}

/// Game count at the end of dyadic block `i`: `2^(i+1) - 1`.
pub fn block_end(i: u32) -> u64 {
    (1u64 << (i + 1)) - 1
}

/// Running mean Success at the end of each dyadic block `0..=depth`, read
/// off one life of one-step games.
pub fn checkpoint_means(games: &[GameOutcome], depth: u32) -> Vec<f64> {
    let mut half = 0u64;
    let mut out = Vec::new();
    let mut next = 0;
    for (i, g) in games.iter().enumerate() {
        half += u64::from(g.outcome.half_points());
        if i as u64 + 1 == block_end(next) {
            out.push(half as f64 / (2 * (i + 1)) as f64);
            if next == depth {
                break;
            }
            next += 1;
        }
    }
    out
}

/// The oscillating world lived for `depth + 1` dyadic blocks by the given
/// agent; returns the checkpoint means.
pub fn oscillating_world_checkpoints(
    agent: &mut dyn Agent,
    depth: u32,
    seed: u64,
) -> Result<Vec<f64>, IqError> {
    let config = LifeConfig::new(block_end(depth) as u32, 1).map_err(|source| IqError::Life {
        world: "oscillating".into(),
        source,
    })?;
    let mut world = OscillatingWorld::new(1);
    let games = run_games(&mut world, agent, config, seed).map_err(|source| IqError::Life {
        world: "oscillating".into(),
        source,
    })?;
    Ok(checkpoint_means(&games, depth))
}

/// Checkpoint means of an agent living in any world of one-step games.
pub fn agent_checkpoints(
    world: &mut dyn World,
    agent: &mut dyn Agent,
    depth: u32,
    seed: u64,
) -> Result<Vec<f64>, IqError> {
    let config = LifeConfig::new(block_end(depth) as u32, 1).map_err(|source| IqError::Life {
        world: "checkpoints".into(),
        source,
    })?;
    let games = run_games(world, agent, config, seed).map_err(|source| IqError::Life {
        world: "checkpoints".into(),
        source,
    })?;
    Ok(checkpoint_means(&games, depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RandomAgent;

    fn report(successes_hp: &[u64], games: u32) -> IqReport {
        let per_world = successes_hp
            .iter()
            .enumerate()
            .map(|(i, &h)| WorldResult {
                world_id: format!("w{i}"),
                seed_slot: i as u64,
                games,
                half_points: h,
            })
            .collect();
        let params = IqParams {
            worlds: "ndtm".into(),
            n_states: 20,
            life: LifeConfig::default(),
            small_step_budget: Some(100),
            suite_size: successes_hp.len(),
            master_seed: 0,
            generator: GENERATOR_NAME.into(),
        };
        IqReport::from_results("t".into(), per_world, params)
    }

    #[test]
    fn threshold_is_strict() {
        assert!(qualifies(0.71, 0.7));
        assert!(!qualifies(0.70, 0.7));
        assert!(!qualifies(0.5, 0.7));
        assert!(qualifies(0.700001, 0.7));
    }

    #[test]
    fn report_statistics() {
        // successes 1.0, 0.5, 0.0
        let r = report(&[4, 2, 0], 2);
        assert_eq!(r.estimate, 0.5);
        let sd = 0.5f64;
        assert!((r.stderr - sd / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.ci95, (0.0, (0.5 + 1.96 * r.stderr).min(1.0)));
        let one = report(&[2], 1);
        assert_eq!((one.estimate, one.stderr, one.ci95), (1.0, 0.0, (1.0, 1.0)));
    }

    #[test]
    fn csv_carries_version_and_defaults() {
        let csv = report_csv(&report(&[1, 1], 1), DEFAULT_THRESHOLD);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# iqreport/1");
        assert!(lines[1].contains("n_states=20 games=100 max_steps_per_game=1000"));
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(",0.7,false"));
        let worlds = per_world_csv(&report(&[1, 2], 1));
        assert_eq!(worlds.lines().count(), 4);
    }

    #[test]
    fn limit_summary() {
        assert!(matches!(
            liminf_limsup_new_iq(&[0.5; 3], 0.5),
            Err(IqError::SeriesTooShort(3))
        ));
        assert!(liminf_limsup_new_iq(&[0.5; 4], 0.0).is_err());
        let s = liminf_limsup_new_iq(&[0.0, 1.0, 0.2, 0.4, 0.3, 0.5], 0.5).unwrap();
        assert_eq!((s.lower, s.upper, s.tail_len), (0.3, 0.5, 3));
        assert!((s.new_iq - 0.4).abs() < 1e-15);
    }

    #[test]
    fn running_means() {
        let s = ConvergenceSeries::from_successes(vec![], vec![1.0, 0.0, 0.5]);
        assert_eq!(s.running_means, vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn oscillating_checkpoints_match_small_sums() {
        let mut agent = RandomAgent::new(1);
        let means = oscillating_world_checkpoints(&mut agent, 4, 0).unwrap();
        let expect = [1.0, 1.0 / 3.0, 5.0 / 7.0, 5.0 / 15.0, 21.0 / 31.0];
        for (m, e) in means.iter().zip(expect) {
            assert!((m - e).abs() < 1e-15, "{means:?}");
        }
        assert_eq!(means.len(), 5);
    }

    #[test]
    fn doubling() {
        let s = doubling_schedule(
            SchedulePoint {
                n_states: 2,
                life: LifeConfig::new(5, 10).unwrap(),
            },
            3,
        );
        assert_eq!(s[2].n_states, 8);
        assert_eq!(s[2].life.max_steps_per_game, 40);
    }
}
