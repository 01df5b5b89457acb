//! Discounted universal-intelligence measures, applied to the same machine
//! worlds: the per-step discounted value, the naive complexity-weighted sum
//! (which diverges), its per-complexity averaged correction, and a
//! bounded-reward "monotone success" variant.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::{AgentError, AgentFactory};
use crate::iq::{estimate_iq, life_seed, worker_pool, IqError};
use crate::ndtm::{generate_machine, MachineError, MachineGenParams, MachineWorld};
use crate::rng::{self, Stream};
use crate::suite::Suite;
use crate::world::{
    run_games, run_trace, ActionId, Agent, GameSignal, LifeConfig, LifeError, Observation, World,
    WorldError,
};

pub const ALT_REPORT_VERSION: &str = "altreport/1";

#[derive(Debug, Error)]
pub enum AltError {
    #[error("gamma must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("horizon must be positive")]
    BadHorizon,
    #[error("budget must lie in (0, 1], got {0}")]
    BadBudget(f64),
    #[error("complexity range must be non-empty and start at 1 or above")]
    BadRange,
    #[error("at least two agents are needed")]
    TooFewAgents,
    #[error(transparent)]
    Life(#[from] LifeError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Iq(#[from] IqError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountParams {
    pub gamma: f64,
    pub horizon: u64,
}

impl Default for DiscountParams {
    fn default() -> Self {
        DiscountParams {
            gamma: 0.99,
            horizon: 1000,
        }
    }
}

impl DiscountParams {
    pub fn new(gamma: f64, horizon: u64) -> Result<Self, AltError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(AltError::BadGamma(gamma));
        }
        if horizon == 0 {
            return Err(AltError::BadHorizon);
        }
        Ok(DiscountParams { gamma, horizon })
    }
}

/// `(1 - gamma) * sum_t gamma^t r_t` over a reward sequence.
pub fn discounted_sum(rewards: &[f64], gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    (1.0 - gamma) * total
}

/// Discounted value of the first `horizon` big steps. The reward of a game is
/// booked on the step it ends; other steps carry 0.
pub fn discounted_value(
    world: &mut dyn World,
    agent: &mut dyn Agent,
    params: DiscountParams,
    max_steps_per_game: u32,
    seed: u64,
) -> Result<f64, AltError> {
    let games = u32::try_from(params.horizon).unwrap_or(u32::MAX);
    let config = LifeConfig::new(games, max_steps_per_game)?;
    let trace = run_trace(world, agent, config, seed, params.horizon)?;
    let rewards: Vec<f64> = trace
        .iter()
        .map(|t| {
            t.ended
                .map_or(0.0, |g| f64::from(g.outcome.half_points()) / 2.0)
        })
        .collect();
    Ok(discounted_sum(&rewards, params.gamma))
}

/// Shape of a machine table, for counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineShape {
    pub n_states: usize,
    pub tape_symbols: usize,
    pub action_count: usize,
    pub obs_alphabet: usize,
    pub emits: bool,
}

impl MachineShape {
    pub fn from_params(params: &MachineGenParams, n_states: usize) -> Self {
        MachineShape {
            n_states,
            tape_symbols: params.tape_symbols,
            action_count: params.action_count,
            obs_alphabet: params.obs_alphabet,
            emits: params.p_emit > 0.0,
        }
    }

    /// Distinct branches: next state, written symbol, head move, emit.
    pub fn branch_options(&self) -> f64 {
        let emit = if self.emits {
            1.0 + 4.0 * self.obs_alphabet as f64
        } else {
            1.0
        };
        self.n_states as f64 * self.tape_symbols as f64 * 3.0 * emit
    }

    /// Distinct entries: one branch, or an unordered pair of branches.
    pub fn entry_options(&self) -> f64 {
        let b = self.branch_options();
        b + b * (b + 1.0) / 2.0
    }

    pub fn keys(&self) -> f64 {
        (self.n_states * self.tape_symbols * self.action_count) as f64
    }
}

/// log2 of the number of distinct machine tables of the given shape.
pub fn log2_machine_count(shape: &MachineShape) -> f64 {
    shape.keys() * shape.entry_options().log2()
}

/// Machine `j` at complexity `c` comes from stream `(seed', 2j)` and is lived
/// with seed slot `2j + 1`, where `seed' = derive_seed(seed, c)`.
fn sample_values(
    factory: &AgentFactory,
    gen: &MachineGenParams,
    c: usize,
    samples: usize,
    seed: u64,
    discount: DiscountParams,
    max_steps_per_game: u32,
) -> Result<Vec<f64>, AltError> {
    let level_seed = rng::derive_seed(seed, c as u64);
    (0..samples as u64)
        .into_par_iter()
        .map(|j| {
            let machine = generate_machine(gen, c, &mut rng::stream(level_seed, 2 * j))?;
            let mut world = MachineWorld::new(Arc::new(machine));
            let mut agent = factory.build(world.action_count(), world.obs_alphabet())?;
            discounted_value(
                &mut world,
                &mut agent,
                discount,
                max_steps_per_game,
                life_seed(level_seed, 2 * j + 1),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityTerm {
    pub c: usize,
    pub log2_count: f64,
    pub mean_value: f64,
    /// `log2(count * 2^-c * mean)`; negative infinity when the mean is 0.
    pub log2_term: f64,
}

impl ComplexityTerm {
    pub fn new(c: usize, log2_count: f64, mean_value: f64) -> Self {
        ComplexityTerm {
            c,
            log2_count,
            mean_value,
            log2_term: log2_count - c as f64 + mean_value.log2(),
        }
    }

    pub fn term(&self) -> f64 {
        self.log2_term.exp2()
    }
}

/// Settings shared by the sampled complexity studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    pub gen: MachineGenParams,
    pub samples_per_c: usize,
    pub discount: DiscountParams,
    pub max_steps_per_game: u32,
    pub seed: u64,
}

impl SamplingParams {
    pub fn new(samples_per_c: usize, seed: u64) -> Self {
        SamplingParams {
            gen: MachineGenParams::default(),
            samples_per_c,
            discount: DiscountParams::default(),
            max_steps_per_game: LifeConfig::default().max_steps_per_game,
            seed,
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn mean_values(
    factory: &AgentFactory,
    cs: &[usize],
    sampling: &SamplingParams,
) -> Result<Vec<f64>, AltError> {
    if cs.is_empty() || cs.contains(&0) {
        return Err(AltError::BadRange);
    }
    worker_pool().install(|| {
        cs.iter()
            .map(|&c| {
                sample_values(
                    factory,
                    &sampling.gen,
                    c,
                    sampling.samples_per_c,
                    sampling.seed,
                    sampling.discount,
                    sampling.max_steps_per_game,
                )
                .map(|v| mean(&v))
            })
            .collect()
    })
}

/// Terms of the naive sum over every machine of each complexity, weighted by
/// `2^-c`. The count grows far faster than the weight shrinks.
pub fn naive_universal_terms(
    factory: &AgentFactory,
    c_range: std::ops::RangeInclusive<usize>,
    sampling: &SamplingParams,
) -> Result<Vec<ComplexityTerm>, AltError> {
    let cs: Vec<usize> = c_range.collect();
    let means = mean_values(factory, &cs, sampling)?;
    Ok(cs
        .iter()
        .zip(means)
        .map(|(&c, m)| {
            let count = log2_machine_count(&MachineShape::from_params(&sampling.gen, c));
            ComplexityTerm::new(c, count, m)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedIq {
    /// Normalized: `sum w_c mean_c / sum w_c`.
    pub value: f64,
    /// Unnormalized: `sum w_c mean_c`.
    pub unnormalized: f64,
    pub expected_complexity: f64,
    pub mean_values: Vec<f64>,
}

/// Weights `ratio^c` for `c = 1..=c_max`.
pub fn complexity_weights(c_max: usize, ratio: f64) -> Vec<f64> {
    (1..=c_max as i32).map(|c| ratio.powi(c)).collect()
}

pub fn expected_complexity(c_max: usize, ratio: f64) -> f64 {
    let w = complexity_weights(c_max, ratio);
    let num: f64 = w.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum();
    num / w.iter().sum::<f64>()
}

/// Closed form of [`expected_complexity`] as `c_max` grows without bound:
/// `sum c q^c / sum q^c = 1 / (1 - q)`.
pub fn analytic_expected_complexity(ratio: f64) -> f64 {
    1.0 / (1.0 - ratio)
}

/// Combines already-measured per-complexity means.
pub fn corrected_from_means(mean_values: Vec<f64>, ratio: f64) -> CorrectedIq {
    let w = complexity_weights(mean_values.len(), ratio);
    let unnormalized: f64 = w.iter().zip(&mean_values).map(|(w, m)| w * m).sum();
    CorrectedIq {
        value: unnormalized / w.iter().sum::<f64>(),
        unnormalized,
        expected_complexity: expected_complexity(mean_values.len(), ratio),
        mean_values,
    }
}

/// Average value per complexity level, then a `ratio^c` weighted mean over
/// levels `1..=c_max`.
pub fn corrected_universal_iq(
    factory: &AgentFactory,
    c_max: usize,
    ratio: f64,
    sampling: &SamplingParams,
) -> Result<CorrectedIq, AltError> {
    let cs: Vec<usize> = (1..=c_max).collect();
    Ok(corrected_from_means(
        mean_values(factory, &cs, sampling)?,
        ratio,
    ))
}

/// Passes a world through unchanged while accumulating a bounded, monotone
/// success: each Win adds `1/G` until the budget is used up, and nothing
/// else ever subtracts.
#[derive(Debug, Clone)]
pub struct MonotoneWrapper<W> {
    inner: W,
    budget: f64,
    games: u32,
    wins: u64,
    trace: Vec<f64>,
}

impl<W: World> MonotoneWrapper<W> {
    pub fn new(inner: W, budget: f64, games: u32) -> Result<Self, AltError> {
        if !(budget > 0.0 && budget <= 1.0) {
            return Err(AltError::BadBudget(budget));
        }
        Ok(MonotoneWrapper {
            inner,
            budget,
            games: games.max(1),
            wins: 0,
            trace: Vec::new(),
        })
    }

    pub fn cumulative(&self) -> f64 {
        (self.wins as f64 / f64::from(self.games)).min(self.budget)
    }

    /// Cumulative success after every step.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn inner(&self) -> &W {
        &self.inner
    }
}

impl<W: World> World for MonotoneWrapper<W> {
    fn action_count(&self) -> usize {
        self.inner.action_count()
    }

    fn obs_alphabet(&self) -> usize {
        self.inner.obs_alphabet()
    }

    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError> {
        let obs = self.inner.step(action, rng)?;
        if obs.signal == GameSignal::Win {
            self.wins += 1;
        }
        let c = self.cumulative();
        self.trace.push(c);
        Ok(obs)
    }

    fn state_index(&self) -> Option<usize> {
        self.inner.state_index()
    }
}

/// Final monotone success of one life.
pub fn monotone_success(
    world: impl World,
    agent: &mut dyn Agent,
    config: LifeConfig,
    budget: f64,
    seed: u64,
) -> Result<(f64, Vec<f64>), AltError> {
    let mut wrapped = MonotoneWrapper::new(world, budget, config.games)?;
    run_games(&mut wrapped, agent, config, seed)?;
    Ok((wrapped.cumulative(), wrapped.trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRow {
    pub agent: String,
    pub measure: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub rows: Vec<SeparationRow>,
    pub params: String,
}

pub const MEASURES: [&str; 3] = ["iq", "discounted", "monotone"];

impl SeparationReport {
    pub fn value(&self, agent: &str, measure: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.agent == agent && r.measure == measure)
            .map(|r| r.value)
    }

    /// Max minus min across agents for one measure.
    pub fn spread(&self, measure: &str) -> f64 {
        let vals = self
            .rows
            .iter()
            .filter(|r| r.measure == measure)
            .map(|r| r.value);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {ALT_REPORT_VERSION}\n");
        for m in MEASURES {
            writeln!(out, "# spread {m}={}", self.spread(m)).unwrap();
        }
        out.push_str("agent,measure,value,params\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.agent, r.measure, r.value, self.params).unwrap();
        }
        out
    }
}

/// Every agent under the IQ, the discounted value and the monotone success,
/// on one suite with shared life seeds.
pub fn separation_report(
    factories: &[AgentFactory],
    suite: &Suite,
    config: LifeConfig,
    discount: DiscountParams,
    master_seed: u64,
) -> Result<SeparationReport, AltError> {
    if factories.len() < 2 {
        return Err(AltError::TooFewAgents);
    }
    let mut rows = Vec::new();
    for f in factories {
        let iq = estimate_iq(f, suite, config, master_seed)?;
        let per_world: Vec<(f64, f64)> = worker_pool().install(|| {
            suite
                .entries
                .par_iter()
                .map(|e| {
                    let seed = life_seed(master_seed, e.seed_slot);
                    let mut world = MachineWorld::new(e.machine.clone());
                    let mut agent = f.build(world.action_count(), world.obs_alphabet())?;
                    let d = discounted_value(
                        &mut world,
                        &mut agent,
                        discount,
                        config.max_steps_per_game,
                        seed,
                    )?;
                    let world = MachineWorld::new(e.machine.clone());
                    let mut agent = f.build(world.action_count(), world.obs_alphabet())?;
                    let (m, _) = monotone_success(world, &mut agent, config, 1.0, seed)?;
                    Ok((d, m))
                })
                .collect::<Result<Vec<_>, AltError>>()
        })?;
        let n = per_world.len() as f64;
        let name = f.name();
        rows.push(SeparationRow {
            agent: name.clone(),
            measure: "iq",
            value: iq.estimate,
        });
        rows.push(SeparationRow {
            agent: name.clone(),
            measure: "discounted",
            value: per_world.iter().map(|p| p.0).sum::<f64>() / n,
        });
        rows.push(SeparationRow {
            agent: name,
            measure: "monotone",
            value: per_world.iter().map(|p| p.1).sum::<f64>() / n,
        });
    }
    let params = format!(
        "n_states={};games={};max_steps_per_game={};gamma={};horizon={};suite_size={};master_seed={}",
        suite.header.n_states,
        config.games,
        config.max_steps_per_game,
        discount.gamma,
        discount.horizon,
        suite.len(),
        master_seed
    );
    Ok(SeparationReport { rows, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::DeadAgent;
    use crate::builtin::{lever_world, OscillatingWorld};

    #[test]
    fn discounted_closed_forms() {
        let g = 0.9;
        assert!((discounted_sum(&[1.0], g) - 0.1).abs() < 1e-15);
        let ones = vec![1.0; 50];
        assert!((discounted_sum(&ones, g) - (1.0 - g.powi(50))).abs() < 1e-12);
        assert_eq!(discounted_sum(&[], g), 0.0);
    }

    #[test]
    fn tiny_gamma_keeps_the_first_reward() {
        let world = Arc::new(lever_world(2, 0));
        let mut tab = world.instantiate();
        let p = DiscountParams::new(0.01, 100).unwrap();
        let v = discounted_value(&mut tab, &mut DeadAgent::new(0), p, 10, 1).unwrap();
        assert!((v - 1.0).abs() < 0.02, "{v}");
        let mut tab = world.instantiate();
        let v = discounted_value(&mut tab, &mut DeadAgent::new(1), p, 10, 1).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn param_validation() {
        assert!(DiscountParams::new(0.0, 1).is_err());
        assert!(DiscountParams::new(1.0, 1).is_err());
        assert!(DiscountParams::new(0.5, 0).is_err());
        assert!(MonotoneWrapper::new(OscillatingWorld::new(1), 0.0, 3).is_err());
        assert!(MonotoneWrapper::new(OscillatingWorld::new(1), 1.5, 3).is_err());
    }

    #[test]
    fn count_grows_with_states() {
        let gen = MachineGenParams::default();
        let c1 = log2_machine_count(&MachineShape::from_params(&gen, 1));
        let c2 = log2_machine_count(&MachineShape::from_params(&gen, 2));
        assert!(c2 - c1 > 1.0);
    }

    #[test]
    fn complexity_weights_have_mean_two() {
        assert!((expected_complexity(30, 0.5) - 2.0).abs() < 1e-6);
        assert_eq!(analytic_expected_complexity(0.5), 2.0);
        let c = corrected_from_means(vec![0.3; 12], 0.5);
        assert!((c.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn monotone_wrapper_caps_at_budget() {
        let world = Arc::new(lever_world(1, 0));
        let config = LifeConfig::new(10, 1).unwrap();
        let (full, trace) =
            monotone_success(world.instantiate(), &mut DeadAgent::new(0), config, 1.0, 0).unwrap();
        assert_eq!(full, 1.0);
        assert!(trace.windows(2).all(|w| w[0] <= w[1]));
        let (capped, trace) =
            monotone_success(world.instantiate(), &mut DeadAgent::new(0), config, 0.25, 0).unwrap();
        assert_eq!(capped, 0.25);
        assert_eq!(trace[2], 0.25);
        assert_eq!(trace[9], 0.25);
    }
}
