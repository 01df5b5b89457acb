//! Acceptance criteria 1-14. Runs without the test harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use iqbench::agents::{AgentFactory, OscillatingAgent};
use iqbench::alt::{
    analytic_expected_complexity, corrected_universal_iq, expected_complexity, monotone_success,
    naive_universal_terms, SamplingParams,
};
use iqbench::builtin::{lever_world, oracle_bandit_family, trap_world, ExplicitWorld, Transition};
use iqbench::fatal::{audit_life, find_fatal_groups, optimal_values};
use iqbench::iq::{
    self, estimate_family_iq, estimate_iq, liminf_limsup_new_iq, oscillating_world_checkpoints,
    qualifies, qualifies_as_ai, report_csv, IqReport, DEFAULT_THRESHOLD,
};
use iqbench::ndtm::{generate_machine, MachineGenParams, MachineWorld, DEFAULT_N_STATES};
use iqbench::rng::{stream, Stream};
use iqbench::suite::{generate_paired_suite, generate_suite, Suite};
use iqbench::world::{
    run_games, run_life, ActionId, Agent, GameSignal, LifeConfig, Observation, World,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn factory(spec: &str, life: LifeConfig) -> AgentFactory {
    AgentFactory::parse(spec, life).unwrap()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Paired per-world differences `a - b`: mean and standard error.
fn paired_diff(a: &IqReport, b: &IqReport) -> (f64, f64) {
    let d: Vec<f64> = a
        .per_world
        .iter()
        .zip(&b.per_world)
        .map(|(x, y)| {
            assert_eq!(x.seed_slot, y.seed_slot);
            x.success() - y.success()
        })
        .collect();
    let (m, sd) = mean_sd(&d);
    (m, sd / (d.len() as f64).sqrt())
}

/// One-sided 95% normal quantile.
const Z95: f64 = 1.645;

struct Shared {
    ordinary: Suite,
    ordinary_random: IqReport,
}

fn shared() -> Shared {
    let ordinary =
        generate_suite(&MachineGenParams::default(), DEFAULT_N_STATES, 200, 2024).unwrap();
    let ordinary_random = estimate_iq(
        &factory("random", LifeConfig::default()),
        &ordinary,
        LifeConfig::default(),
        7,
    )
    .unwrap();
    Shared {
        ordinary,
        ordinary_random,
    }
}

fn c1_baseline_half(sh: &Shared) -> Outcome {
    let start = Instant::now();
    let life = LifeConfig::default();
    let paired =
        generate_paired_suite(&MachineGenParams::default(), DEFAULT_N_STATES, 100, 99).unwrap();
    let random = estimate_iq(&factory("random", life), &paired, life, 5).unwrap();
    let dead = estimate_iq(&factory("dead:0", life), &paired, life, 5).unwrap();
    let r = &sh.ordinary_random;
    let within = (r.estimate - 0.5).abs() <= 3.0 * r.stderr;
    let elapsed = start.elapsed();
    check(
        random.estimate == 0.5
            && dead.estimate == 0.5
            && within
            && elapsed < Duration::from_secs(120),
        format!(
            "paired random={} dead={}; ordinary {:.4} ± {:.4} (|Δ| ≤ 3σ: {within}); {:.1?}",
            random.estimate, dead.estimate, r.estimate, r.stderr, elapsed
        ),
    )
}

fn c2_threshold(sh: &Shared) -> Outcome {
    let mut at = sh.ordinary_random.clone();
    at.estimate = 0.70;
    let mut above = at.clone();
    above.estimate = 0.700001;
    let ok = !qualifies_as_ai(&at, DEFAULT_THRESHOLD)
        && qualifies_as_ai(&above, DEFAULT_THRESHOLD)
        && !qualifies(0.70, 0.7)
        && qualifies(0.700001, 0.7);
    check(ok, "0.70 -> false, 0.700001 -> true".into())
}

fn c3_defaults(sh: &Shared) -> Outcome {
    let csv = report_csv(&sh.ordinary_random, DEFAULT_THRESHOLD);
    let params = csv.lines().nth(1).unwrap_or_default();
    let ok = LifeConfig::default() == LifeConfig::new(100, 1000).unwrap()
        && DEFAULT_N_STATES == 20
        && params.contains("n_states=20")
        && params.contains("games=100")
        && params.contains("max_steps_per_game=1000");
    check(ok, params.to_string())
}

fn c4_oscillation() -> Outcome {
    let start = Instant::now();
    let mut dead = factory("dead:0", LifeConfig::default())
        .build(1, 1)
        .unwrap();
    let world = oscillating_world_checkpoints(dead.as_mut(), 16, 0).unwrap();
    let mut lever = Arc::new(lever_world(2, 0)).instantiate();
    let mut osc = OscillatingAgent::new(0, 1);
    let agent = iq::agent_checkpoints(&mut lever, &mut osc, 16, 0).unwrap();
    let w = liminf_limsup_new_iq(&world, 0.5).unwrap();
    let a = liminf_limsup_new_iq(&agent, 0.5).unwrap();
    let close = |s: &iq::LimitSummary| {
        (s.upper - 2.0 / 3.0).abs() <= 0.01
            && (s.lower - 1.0 / 3.0).abs() <= 0.01
            && (s.new_iq - 0.5).abs() <= 0.01
    };
    let elapsed = start.elapsed();
    check(
        close(&w) && close(&a) && elapsed < Duration::from_secs(10),
        format!(
            "world liminf {:.4} limsup {:.4} new_iq {:.4}; agent new_iq {:.4}; {:.1?}",
            w.lower, w.upper, w.new_iq, a.new_iq, elapsed
        ),
    )
}

fn c5_complexity_two() -> Outcome {
    let mut sampling = SamplingParams::new(2, 3);
    sampling.max_steps_per_game = 20;
    sampling.discount.horizon = 50;
    let c = corrected_universal_iq(
        &factory("random", LifeConfig::default()),
        30,
        0.5,
        &sampling,
    )
    .unwrap();
    let ok = (c.expected_complexity - 2.0).abs() < 1e-6
        && (expected_complexity(30, 0.5) - 2.0).abs() < 1e-6
        && analytic_expected_complexity(0.5) == 2.0;
    check(
        ok,
        format!(
            "c_max=30: {:.9}; closed form {}",
            c.expected_complexity,
            analytic_expected_complexity(0.5)
        ),
    )
}

fn c6_divergence() -> Outcome {
    let sampling = SamplingParams::new(20, 6);
    let terms =
        naive_universal_terms(&factory("random", LifeConfig::default()), 1..=6, &sampling).unwrap();
    let logs: Vec<f64> = terms.iter().map(|t| t.log2_term).collect();
    let increasing = logs.windows(2).all(|w| w[1] > w[0]);
    check(
        increasing,
        format!(
            "log2 terms {}",
            logs.iter()
                .map(|l| format!("{l:.1}"))
                .collect::<Vec<_>>()
                .join(" < ")
        ),
    )
}

fn c7_monotone() -> Outcome {
    let specs = ["random", "dead:1", "freq", "retarded", "oscillating"];
    let mut rng = stream(77, 0);
    let mut violations = 0;
    for i in 0..1000u64 {
        let params = MachineGenParams {
            p_second_branch: rng.random_range(0.0..0.6),
            p_emit: rng.random_range(0.2..1.0),
            p_game_signal_given_emit: rng.random_range(0.05..0.6),
            ..MachineGenParams::default()
        };
        let n = rng.random_range(1..8);
        let machine = generate_machine(&params, n, &mut rng).unwrap();
        let life = LifeConfig::new(rng.random_range(1..20), rng.random_range(1..30)).unwrap();
        let budget = rng.random_range(0.05..=1.0);
        let spec = specs[rng.random_range(0..specs.len())];
        let world = MachineWorld::new(Arc::new(machine));
        let mut agent = factory(spec, life)
            .build(world.action_count(), world.obs_alphabet())
            .unwrap();
        let (last, trace) = monotone_success(world, agent.as_mut(), life, budget, i).unwrap();
        let bad = trace.windows(2).any(|w| w[1] < w[0])
            || trace.iter().any(|&v| !(0.0..=budget + 1e-12).contains(&v))
            || trace.last().is_some_and(|&t| t != last);
        violations += usize::from(bad);
    }
    check(
        violations == 0,
        format!("{violations} violations in 1000 lives"),
    )
}

/// Expected wins of the Bayes-optimal player in the 2-symbol, 3-action
/// bandit family over `games` one-step games, by enumerating every symbol
/// sequence. The k-th meeting of a symbol is won with probability 1/3, 2/3,
/// then 1: each miss rules out one candidate.
fn bandit_optimal_success(games: u32) -> f64 {
    let win_at = |k: usize| match k {
        0 => 1.0 / 3.0,
        1 => 2.0 / 3.0,
        _ => 1.0,
    };
    let rest = games - 1;
    let mut total = 0.0;
    for code in 0u32..(1 << rest) {
        let mut seen = [0usize; 2];
        let mut wins = 0.0;
        for t in 0..games {
            let s = if t == 0 {
                0
            } else {
                ((code >> (t - 1)) & 1) as usize
            };
            wins += win_at(seen[s]);
            seen[s] += 1;
        }
        total += wins;
    }
    total / f64::from(1u32 << rest) / f64::from(games)
}

fn c8_bayes() -> Outcome {
    let start = Instant::now();
    let life = LifeConfig::new(12, 5).unwrap();
    let family = oracle_bandit_family(2, 3);
    let bayes =
        estimate_family_iq(&factory("td5:bandit:2x3,h=2", life), &family, life, 8, 200).unwrap();
    let random = estimate_family_iq(&factory("random", life), &family, life, 8, 200).unwrap();
    let (d, se) = paired_diff(&bayes, &random);
    let exact = bandit_optimal_success(life.games);
    let ok = d - Z95 * se > 0.0
        && (bayes.estimate - exact).abs() <= 2.0 * bayes.stderr
        && start.elapsed() < Duration::from_secs(60);
    check(
        ok,
        format!(
            "bayes {:.4} vs random {:.4} (Δ {d:.4}, se {se:.4}); exact {exact:.4}, |Δ| ≤ 2σ={:.4}; {:.1?}",
            bayes.estimate,
            random.estimate,
            2.0 * bayes.stderr,
            start.elapsed()
        ),
    )
}

fn c9_cramming(dir: &Path) -> Outcome {
    let life = LifeConfig::new(20, 5).unwrap();
    let all = oracle_bandit_family(2, 3);
    let train = all.subfamily(&[0, 1, 2, 3]).unwrap();
    let fresh = all.subfamily(&[4, 5, 6, 7]).unwrap();
    let path = dir.join("train.json");
    std::fs::write(&path, train.to_json()).unwrap();
    let cram = factory(&format!("cram:{}", path.display()), life);
    let a = estimate_family_iq(&cram, &train, life, 9, 200).unwrap();
    let b = estimate_family_iq(&cram, &fresh, life, 9, 200).unwrap();
    let gap = a.estimate - b.estimate;
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    check(
        gap - Z95 * se > 0.1,
        format!(
            "training {:.4} fresh {:.4} gap {gap:.4} (lower 95% bound {:.4})",
            a.estimate,
            b.estimate,
            gap - Z95 * se
        ),
    )
}

fn c10_retarded(sh: &Shared) -> Outcome {
    let life = LifeConfig::default();
    let ret = estimate_iq(&factory("retarded", life), &sh.ordinary, life, 7).unwrap();
    let r = &sh.ordinary_random;
    let overlap = ret.ci95.0 <= r.ci95.1 && r.ci95.0 <= ret.ci95.1;

    let world = lever_world(2, 1);
    let tiny = LifeConfig::new(1000, 1).unwrap();
    let mut w = Arc::new(world).instantiate();
    let mut agent = factory("retarded", tiny)
        .build(w.action_count(), w.obs_alphabet())
        .unwrap();
    let games = run_games(&mut w, agent.as_mut(), tiny, 3).unwrap();
    let tail = &games[games.len() / 2..];
    let tail_success = tail
        .iter()
        .map(|g| f64::from(g.outcome.half_points()))
        .sum::<f64>()
        / (2 * tail.len()) as f64;
    check(
        overlap && tail_success >= 0.95,
        format!(
            "CI retarded [{:.4}, {:.4}] vs random [{:.4}, {:.4}]; tiny-world tail success {tail_success:.4}",
            ret.ci95.0, ret.ci95.1, r.ci95.0, r.ci95.1
        ),
    )
}

/// Plays a fixed action list, then action 0.
struct Script(Vec<usize>, usize);

impl Agent for Script {
    fn act(&mut self, _: Observation, _: &mut Stream) -> ActionId {
        let a = self.0.get(self.1).copied().unwrap_or(0);
        self.1 += 1;
        ActionId(a)
    }
}

/// Strongly connected worlds whose every transition emits the same signal:
/// no action can ever lower the best anticipated Success.
fn reversible_flat_world(rng: &mut Stream) -> ExplicitWorld {
    let n = rng.random_range(1..=4);
    let actions = rng.random_range(1..=3);
    let signal = GameSignal::ALL[rng.random_range(0..4)];
    let mut transitions = Vec::new();
    for s in 0..n {
        for a in 0..actions {
            // Action 0 cycles through the states, so every state reaches every other.
            let first = if a == 0 {
                (s + 1) % n
            } else {
                rng.random_range(0..n)
            };
            let mut outs = vec![Transition {
                prob: 0.5,
                next: first,
                obs: Observation::new(rng.random_range(0..2), signal),
            }];
            outs.push(Transition {
                prob: 0.5,
                next: rng.random_range(0..n),
                obs: Observation::new(rng.random_range(0..2), signal),
            });
            transitions.push(outs);
        }
    }
    ExplicitWorld::new("flat", n, actions, 2, 0, transitions).unwrap()
}

fn c11_fatal() -> Outcome {
    let life = LifeConfig::new(20, 10).unwrap();
    let trap = trap_world();
    let groups = find_fatal_groups(&trap, life).unwrap();
    let one_group = groups.len() == 1 && groups[0].states == vec![1];
    let mut exact_flags = true;
    for enter in [0usize, 3, 19] {
        let mut script = vec![0; enter];
        script.push(1);
        let mut w = Arc::new(trap.clone()).instantiate();
        let life_rec = run_life(&mut w, &mut Script(script, 0), life, 1).unwrap();
        let flagged: Vec<usize> = audit_life(&trap, &life_rec, life)
            .unwrap()
            .iter()
            .map(|f| f.step)
            .collect();
        exact_flags &= flagged == vec![enter];
    }
    let mut rng = stream(11, 0);
    let mut findings = 0;
    let mut groups_found = 0;
    for i in 0..500u64 {
        let world = reversible_flat_world(&mut rng);
        let cfg = LifeConfig::new(rng.random_range(1..6), rng.random_range(1..6)).unwrap();
        groups_found += find_fatal_groups(&world, cfg).unwrap().len();
        let mut w = Arc::new(world.clone()).instantiate();
        let mut agent = factory("random", cfg)
            .build(world.action_count, world.obs_alphabet)
            .unwrap();
        let rec = run_life(&mut w, agent.as_mut(), cfg, i).unwrap();
        findings += audit_life(&world, &rec, cfg).unwrap().len();
    }
    check(
        one_group && exact_flags && findings == 0 && groups_found == 0,
        format!(
            "trap groups {:?}, exact step flags {exact_flags}; flat worlds: {findings} findings, {groups_found} groups in 500 lives",
            groups.iter().map(|g| &g.states).collect::<Vec<_>>()
        ),
    )
}

fn random_tabular(rng: &mut Stream) -> ExplicitWorld {
    let n = rng.random_range(1..=3);
    let mut transitions = Vec::new();
    for _ in 0..n * 2 {
        let k = rng.random_range(1..=2);
        let p: f64 = if k == 1 {
            1.0
        } else {
            rng.random_range(0.1..0.9)
        };
        let probs = if k == 1 { vec![1.0] } else { vec![p, 1.0 - p] };
        transitions.push(
            probs
                .into_iter()
                .map(|prob| Transition {
                    prob,
                    next: rng.random_range(0..n),
                    obs: Observation::new(
                        rng.random_range(0..2),
                        GameSignal::ALL[rng.random_range(0..4)],
                    ),
                })
                .collect(),
        );
    }
    ExplicitWorld::new("tab", n, 2, 2, 0, transitions).unwrap()
}

/// Best expected reward over every deterministic policy keyed by (state,
/// games left, step in game), each evaluated by pushing the state
/// distribution forward through the life.
fn brute_force_optimum(w: &ExplicitWorld, games: u32, steps: u32) -> f64 {
    let (n, g, m) = (w.n_states, games as usize, steps as usize);
    let key = |s: usize, gl: usize, k: usize| ((gl - 1) * m + k) * n + s;
    let keys = n * g * m;
    let mut best = f64::NEG_INFINITY;
    for policy in 0u32..(1 << keys) {
        let mut mass = vec![0.0; keys];
        mass[key(w.start, g, 0)] = 1.0;
        let mut reward = 0.0;
        for gl in (1..=g).rev() {
            for k in 0..m {
                for s in 0..n {
                    let p = mass[key(s, gl, k)];
                    if p == 0.0 {
                        continue;
                    }
                    let a = ((policy >> key(s, gl, k)) & 1) as usize;
                    for t in w.outcomes(s, a) {
                        let q = p * t.prob;
                        let (r, ends) = match t.obs.signal {
                            GameSignal::Win => (1.0, true),
                            GameSignal::Draw => (0.5, true),
                            GameSignal::Loss => (0.0, true),
                            GameSignal::NoSignal if k + 1 == m => (0.5, true),
                            GameSignal::NoSignal => (0.0, false),
                        };
                        reward += q * r;
                        if !ends {
                            mass[key(t.next, gl, k + 1)] += q;
                        } else if gl > 1 {
                            mass[key(t.next, gl - 1, 0)] += q;
                        }
                    }
                }
            }
        }
        best = best.max(reward);
    }
    best
}

fn c12_value_oracle() -> Outcome {
    let shapes = [
        (1, 6),
        (6, 1),
        (2, 3),
        (3, 2),
        (2, 2),
        (1, 4),
        (4, 1),
        (3, 1),
    ];
    let mut rng = stream(12, 0);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let w = random_tabular(&mut rng);
        let (g, m) = shapes[i % shapes.len()];
        let table = optimal_values(&w, LifeConfig::new(g, m).unwrap()).unwrap();
        let brute = brute_force_optimum(&w, g, m);
        worst = worst.max((table.reward_to_go(w.start, g, 0) - brute).abs());
    }
    check(
        worst <= 1e-9,
        format!("max |dp - brute force| = {worst:e} over 20 worlds"),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c13_reproducible(dir: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_iqbench");
    let config = dir.join("run.cfg");
    std::fs::write(
        &config,
        "master_seed = 31\ncount = 24\ngames = 20\nmax_steps_per_game = 200\nagents = random;freq;retarded\n",
    )
    .unwrap();
    let run = |out: &Path, threads: &str| {
        for args in [
            vec!["gen-suite", "--paired", "--output"],
            vec!["eval", "--logs", "--agent", "freq:k=3"],
            vec!["compare"],
        ] {
            let mut cmd = Command::new(bin);
            cmd.arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(out)
                .args(["--threads", threads]);
            for a in &args {
                cmd.arg(a);
            }
            if args[0] == "gen-suite" {
                cmd.arg(out.join("paired.txt"));
            }
            let status = cmd.output().unwrap();
            assert!(
                status.status.success(),
                "{}",
                String::from_utf8_lossy(&status.stderr)
            );
        }
        read_tree(out)
    };
    let a = run(&dir.join("a"), "1");
    let b = run(&dir.join("b"), "1");
    let c = run(&dir.join("c"), "3");
    check(
        a == b && a == c && a.len() >= 28,
        format!(
            "{} files identical across two runs and across thread counts: {}",
            a.len(),
            a == b && a == c
        ),
    )
}

fn c14_learning() -> Outcome {
    let params = MachineGenParams {
        p_second_branch: 0.0,
        p_emit: 0.9,
        p_game_signal_given_emit: 0.2,
        ..MachineGenParams::default()
    };
    let suite = generate_suite(&params, 5, 200, 14).unwrap();
    let life = LifeConfig::new(100, 100).unwrap();
    let freq = estimate_iq(&factory("freq", life), &suite, life, 14).unwrap();
    let random = estimate_iq(&factory("random", life), &suite, life, 14).unwrap();
    let (d, se) = paired_diff(&freq, &random);
    check(
        d - Z95 * se > 0.05,
        format!(
            "freq {:.4} random {:.4}; Δ {d:.4}, lower 95% bound {:.4}",
            freq.estimate,
            random.estimate,
            d - Z95 * se
        ),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let sh = shared();
    let criteria: Vec<(&str, Criterion)> = vec![
        (
            "baseline IQ is one half",
            Box::new(|| c1_baseline_half(&sh)),
        ),
        ("strict 0.7 threshold", Box::new(|| c2_threshold(&sh))),
        ("defaults in report headers", Box::new(|| c3_defaults(&sh))),
        ("oscillation limits", Box::new(c4_oscillation)),
        ("expected complexity 2", Box::new(c5_complexity_two)),
        ("naive sum diverges", Box::new(c6_divergence)),
        ("monotone success never decreases", Box::new(c7_monotone)),
        ("Bayes-optimal dominance", Box::new(c8_bayes)),
        ("cramming gap", Box::new(|| c9_cramming(dir.path()))),
        ("retarded program", Box::new(|| c10_retarded(&sh))),
        ("fatal-error definitions", Box::new(c11_fatal)),
        ("optimal-value oracle", Box::new(c12_value_oracle)),
        ("reproducibility", Box::new(|| c13_reproducible(dir.path()))),
        ("learning effect", Box::new(c14_learning)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {tag}: {name} ({:.1?}) {detail}",
            i + 1,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
