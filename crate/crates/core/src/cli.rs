//! The `iqbench` command line.
//!
//! Every subcommand reads a [`RunConfig`] built from defaults, then the
//! `--config` file, then `--seed`, `--out`, `--threads` and `--set key=value`
//! flags. Exit status is 0 on success, 1 on a usage or configuration error
//! and 2 when the run itself fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::agents::{AgentError, AgentFactory, AgentSpec, OscillatingAgent};
use crate::alt::{self, DiscountParams, SamplingParams};
use crate::builtin::{explicit_by_name, lever_world, ExplicitWorld, WorldFamily};
use crate::config::{ConfigError, RunConfig};
use crate::fatal;
use crate::iq::{self, SchedulePoint};
use crate::liferec;
use crate::session::{self, SessionStore};
use crate::suite::{self, Suite};

#[derive(Debug, Parser)]
#[command(
    name = "iqbench",
    version,
    about = "Machine IQ over random NDTM worlds"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides `master_seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads` and IQBENCH_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Any config key, e.g. `--set games=10`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.to_string()))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a test-world suite file.
    GenSuite {
        /// Swap-closed suite: `count / 2` machines each followed by its Win/Loss swap.
        #[arg(long)]
        paired: bool,
        /// Destination; defaults to `<out>/suite.txt`.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Estimate one agent's IQ and write report.csv and worlds.csv.
    Eval {
        /// Agent spec; defaults to the first configured agent.
        #[arg(long)]
        agent: Option<String>,
        /// Evaluate on an explicit world family instead of machine worlds.
        #[arg(long, value_name = "FILE")]
        family: Option<PathBuf>,
        /// Lives drawn from the family.
        #[arg(long, default_value_t = 200)]
        lives: usize,
        /// Also write one liferec/1 log per world under `<out>/lives/`.
        #[arg(long)]
        logs: bool,
    },
    /// Evaluate several agents on one suite and write compare.csv.
    Compare {
        /// Agent specs; defaults to the configured agents.
        #[arg(long = "agent")]
        agents: Vec<String>,
    },
    /// Success along a doubling schedule of complexity and lifespan.
    LimitIq {
        #[arg(long)]
        agent: Option<String>,
        /// Schedule length.
        #[arg(long, default_value_t = 6)]
        points: usize,
        /// Fraction of the series used for the limit bounds.
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
    /// Complexity-weighted and discounted alternatives to the IQ.
    AltMeasures {
        /// Agent specs; the separation report needs at least two.
        #[arg(long = "agent")]
        agents: Vec<String>,
        /// Largest complexity level sampled.
        #[arg(long, default_value_t = 6)]
        c_max: usize,
        /// Machines sampled per complexity level.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Weight ratio between consecutive complexity levels.
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        /// Steps per discounted life.
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
    },
    /// Fatal groups of an explicit world and an audit of one agent's life in it.
    FatalAudit {
        /// Built-in world name (`trap`, `lever:3:1`, ...) or a family file.
        #[arg(long)]
        world: String,
        #[arg(long)]
        agent: Option<String>,
    },
    /// Running means at the ends of dyadic blocks.
    OscillationDemo {
        #[arg(long, default_value_t = 16)]
        depth: u32,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
    /// Serve the session HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Journal directory; sessions found there are recovered on start.
        #[arg(long, value_name = "DIR")]
        journal_dir: Option<PathBuf>,
        /// Suite file whose entries `suite` sessions can address.
        #[arg(long, value_name = "FILE")]
        suite: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::BadSpec { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (program name first) and runs the command; returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let text = match &g.config {
        Some(p) => Some(
            fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut overrides = g.set.clone();
    if let Some(s) = g.seed {
        overrides.push(("master_seed".into(), s.to_string()));
    }
    if let Some(o) = &g.out {
        overrides.push(("out_dir".into(), o.display().to_string()));
    }
    if let Some(t) = g.threads {
        overrides.push(("threads".into(), t.to_string()));
    }
    let cfg = RunConfig::parse(text.as_deref(), &overrides)?;
    if let Some(t) = cfg.threads {
        iq::set_worker_threads(t);
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> CliResult {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::GenSuite { paired, output } => gen_suite(&cfg, paired, output),
        Command::Eval {
            agent,
            family,
            lives,
            logs,
        } => eval(&cfg, agent, family, lives, logs),
        Command::Compare { agents } => compare(&cfg, agents),
        Command::LimitIq {
            agent,
            points,
            tail,
        } => limit_iq(&cfg, agent, points, tail),
        Command::AltMeasures {
            agents,
            c_max,
            samples,
            ratio,
            gamma,
            horizon,
        } => alt_measures(&cfg, agents, c_max, samples, ratio, gamma, horizon),
        Command::FatalAudit { world, agent } => fatal_audit(&cfg, &world, agent),
        Command::OscillationDemo { depth, tail } => oscillation_demo(&cfg, depth, tail),
        Command::Serve {
            addr,
            journal_dir,
            suite,
        } => serve(&cfg, addr, journal_dir, suite),
    }
}

fn write_out(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn first_agent(cfg: &RunConfig, agent: Option<String>) -> Result<String, CliError> {
    agent
        .or_else(|| cfg.agents.first().cloned())
        .ok_or_else(|| CliError::Usage("no agent given".into()))
}

fn factory(cfg: &RunConfig, spec: &str) -> Result<AgentFactory, CliError> {
    Ok(AgentFactory::parse(spec, cfg.life)?)
}

fn build_suite(cfg: &RunConfig, paired: bool) -> Result<Suite, CliError> {
    let seed = cfg.seed()?;
    let suite = if paired {
        if !cfg.count.is_multiple_of(2) {
            return Err(CliError::Usage(format!(
                "a paired suite needs an even count, got {}",
                cfg.count
            )));
        }
        suite::generate_paired_suite(&cfg.gen, cfg.n_states, cfg.count / 2, seed)
    } else {
        suite::generate_suite(&cfg.gen, cfg.n_states, cfg.count, seed)
    };
    suite.map_err(|e| match e {
        suite::SuiteError::Machine(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.into()),
    })
}

/// The configured suite file, or a suite generated from the config and
/// written to `<out>/suite.txt`.
fn suite_for_run(cfg: &RunConfig) -> Result<Suite, CliError> {
    match &cfg.suite {
        Some(path) => {
            Ok(suite::read_suite(path)
                .with_context(|| format!("reading suite {}", path.display()))?)
        }
        None => {
            let s = build_suite(cfg, false)?;
            write_out(&cfg.out_dir.join("suite.txt"), &s.to_text())?;
            Ok(s)
        }
    }
}

fn gen_suite(cfg: &RunConfig, paired: bool, output: Option<PathBuf>) -> CliResult {
    let suite = build_suite(cfg, paired)?;
    let path = output.unwrap_or_else(|| cfg.out_dir.join("suite.txt"));
    write_out(&path, &suite.to_text())?;
    println!("wrote {} machines to {}", suite.len(), path.display());
    Ok(())
}

fn eval(
    cfg: &RunConfig,
    agent: Option<String>,
    family: Option<PathBuf>,
    lives: usize,
    logs: bool,
) -> CliResult {
    let spec = first_agent(cfg, agent)?;
    let f = factory(cfg, &spec)?;
    let seed = cfg.seed()?;
    let report = match &family {
        Some(path) => {
            if logs {
                return Err(CliError::Usage(
                    "--logs applies to machine suites only".into(),
                ));
            }
            let fam = WorldFamily::read(path)
                .with_context(|| format!("reading family {}", path.display()))?;
            iq::estimate_family_iq(&f, &fam, cfg.life, seed, lives).map_err(anyhow::Error::from)?
        }
        None => {
            let suite = suite_for_run(cfg)?;
            if logs {
                for entry in &suite.entries {
                    let life = iq::life_on_entry(&f, entry, cfg.life, seed)
                        .map_err(anyhow::Error::from)?;
                    let path = cfg
                        .out_dir
                        .join("lives")
                        .join(format!("{}.liferec", entry.id));
                    write_out(&path, &liferec::write_life(&life))?;
                }
            }
            iq::estimate_iq(&f, &suite, cfg.life, seed).map_err(anyhow::Error::from)?
        }
    };
    let csv = iq::report_csv(&report, cfg.threshold);
    write_out(&cfg.out_dir.join("report.csv"), &csv)?;
    write_out(&cfg.out_dir.join("worlds.csv"), &iq::per_world_csv(&report))?;
    print!("{csv}");
    Ok(())
}

fn compare(cfg: &RunConfig, agents: Vec<String>) -> CliResult {
    let specs = if agents.is_empty() {
        cfg.agents.clone()
    } else {
        agents
    };
    if specs.is_empty() {
        return Err(CliError::Usage("no agents given".into()));
    }
    let factories = specs
        .iter()
        .map(|s| factory(cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = cfg.seed()?;
    let suite = suite_for_run(cfg)?;
    let mut out = String::new();
    for (i, f) in factories.iter().enumerate() {
        let report = iq::estimate_iq(f, &suite, cfg.life, seed).map_err(anyhow::Error::from)?;
        let csv = iq::report_csv(&report, cfg.threshold);
        if i == 0 {
            out.push_str(&csv);
        } else {
            // Same suite and config, so only the data row differs.
            out.push_str(csv.lines().last().unwrap_or_default());
            out.push('\n');
        }
    }
    write_out(&cfg.out_dir.join("compare.csv"), &out)?;
    print!("{out}");
    Ok(())
}

fn limit_iq(cfg: &RunConfig, agent: Option<String>, points: usize, tail: f64) -> CliResult {
    if points < 4 {
        return Err(CliError::Usage(format!(
            "--points must be at least 4, got {points}"
        )));
    }
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(CliError::Usage(format!(
            "--tail must be in (0, 1], got {tail}"
        )));
    }
    let spec = first_agent(cfg, agent)?;
    let f = factory(cfg, &spec)?;
    let seed = cfg.seed()?;
    let start = SchedulePoint {
        n_states: cfg.n_states,
        life: cfg.life,
    };
    let schedule = iq::doubling_schedule(start, points);
    let series = iq::limit_iq_series(&f, &schedule, &cfg.gen, seed).map_err(anyhow::Error::from)?;
    let summary = series.limits(tail).map_err(anyhow::Error::from)?;
    let mut out = String::from("# limitiq/1\n");
    writeln!(
        out,
        "# agent={} master_seed={seed} lower={} upper={} new_iq={} tail_len={}",
        f.name(),
        summary.lower,
        summary.upper,
        summary.new_iq,
        summary.tail_len
    )
    .unwrap();
    out.push_str("k,n_states,games,max_steps_per_game,success,running_mean\n");
    for (k, p) in series.schedule.iter().enumerate() {
        writeln!(
            out,
            "{k},{},{},{},{},{}",
            p.n_states,
            p.life.games,
            p.life.max_steps_per_game,
            series.successes[k],
            series.running_means[k]
        )
        .unwrap();
    }
    write_out(&cfg.out_dir.join("limit_iq.csv"), &out)?;
    print!("{out}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn alt_measures(
    cfg: &RunConfig,
    agents: Vec<String>,
    c_max: usize,
    samples: usize,
    ratio: f64,
    gamma: f64,
    horizon: u64,
) -> CliResult {
    if c_max == 0 || samples == 0 {
        return Err(CliError::Usage(
            "--c-max and --samples must be positive".into(),
        ));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CliError::Usage(format!(
            "--ratio must be in (0, 1), got {ratio}"
        )));
    }
    let discount =
        DiscountParams::new(gamma, horizon).map_err(|e| CliError::Usage(e.to_string()))?;
    let specs = if agents.is_empty() {
        cfg.agents.clone()
    } else {
        agents
    };
    if specs.is_empty() {
        return Err(CliError::Usage("no agents given".into()));
    }
    let factories = specs
        .iter()
        .map(|s| factory(cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = cfg.seed()?;
    let sampling = SamplingParams {
        gen: cfg.gen,
        samples_per_c: samples,
        discount,
        max_steps_per_game: cfg.life.max_steps_per_game,
        seed,
    };

    let mut naive = format!(
        "# {}\nagent,c,log2_count,mean_value,log2_term\n",
        alt::ALT_REPORT_VERSION
    );
    let mut corrected = format!(
        "# {}\nagent,c_max,ratio,value,unnormalized,expected_complexity\n",
        alt::ALT_REPORT_VERSION
    );
    for f in &factories {
        let name = f.name();
        for t in alt::naive_universal_terms(f, 1..=c_max, &sampling).map_err(anyhow::Error::from)? {
            writeln!(
                naive,
                "{name},{},{},{},{}",
                t.c, t.log2_count, t.mean_value, t.log2_term
            )
            .unwrap();
        }
        let c =
            alt::corrected_universal_iq(f, c_max, ratio, &sampling).map_err(anyhow::Error::from)?;
        writeln!(
            corrected,
            "{name},{c_max},{ratio},{},{},{}",
            c.value, c.unnormalized, c.expected_complexity
        )
        .unwrap();
    }
    write_out(&cfg.out_dir.join("naive_terms.csv"), &naive)?;
    write_out(&cfg.out_dir.join("corrected_iq.csv"), &corrected)?;
    print!("{naive}{corrected}");

    if factories.len() >= 2 {
        let suite = suite_for_run(cfg)?;
        let report = alt::separation_report(&factories, &suite, cfg.life, discount, seed)
            .map_err(anyhow::Error::from)?;
        let csv = report.to_csv();
        write_out(&cfg.out_dir.join("separation.csv"), &csv)?;
        print!("{csv}");
    } else {
        eprintln!("note: separation report skipped, it needs at least two agents");
    }
    Ok(())
}

fn audit_targets(world: &str) -> Result<Vec<Arc<ExplicitWorld>>, CliError> {
    if let Some(w) = explicit_by_name(world) {
        return Ok(vec![Arc::new(w)]);
    }
    let path = Path::new(world);
    if path.is_file() {
        let fam = WorldFamily::read(path)
            .with_context(|| format!("reading family {}", path.display()))?;
        return Ok(fam.worlds);
    }
    Err(CliError::Usage(format!(
        "unknown world {world:?}: not a built-in explicit world or a family file"
    )))
}

fn fatal_audit(cfg: &RunConfig, world: &str, agent: Option<String>) -> CliResult {
    let worlds = audit_targets(world)?;
    let spec = first_agent(cfg, agent)?;
    let f = factory(cfg, &spec)?;
    let seed = cfg.seed()?;
    let mut groups_csv = String::from("world,group,states,inside_value,outside_value\n");
    let mut audit_csv = String::from("world,step,state,value_before,value_after\n");
    let mut compare_csv = String::from("world,group_entries,value_drops,only_group,only_drop\n");
    let steps = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    for (i, def) in worlds.iter().enumerate() {
        let groups = fatal::find_fatal_groups(def, cfg.life).map_err(anyhow::Error::from)?;
        for (g, group) in groups.iter().enumerate() {
            writeln!(
                groups_csv,
                "{},{g},{},{},{}",
                def.name,
                steps(&group.states),
                group.inside_value,
                group.outside_value
            )
            .unwrap();
        }
        let mut tab = def.instantiate();
        let mut agent = f.build(def.action_count, def.obs_alphabet)?;
        let life = crate::world::run_life(
            &mut tab,
            &mut agent,
            cfg.life,
            iq::life_seed(seed, i as u64),
        )
        .map_err(anyhow::Error::from)?;
        for finding in fatal::audit_life(def, &life, cfg.life).map_err(anyhow::Error::from)? {
            writeln!(
                audit_csv,
                "{},{},{},{},{}",
                def.name, finding.step, finding.state, finding.value_before, finding.value_after
            )
            .unwrap();
        }
        let cmp = fatal::compare_definitions(def, &life, cfg.life).map_err(anyhow::Error::from)?;
        writeln!(
            compare_csv,
            "{},{},{},{},{}",
            def.name,
            steps(&cmp.group_entries),
            steps(&cmp.value_drops),
            steps(&cmp.only_group_entries()),
            steps(&cmp.only_value_drops())
        )
        .unwrap();
    }
    write_out(&cfg.out_dir.join("fatal_groups.csv"), &groups_csv)?;
    write_out(&cfg.out_dir.join("audit.csv"), &audit_csv)?;
    write_out(&cfg.out_dir.join("definitions.csv"), &compare_csv)?;
    print!("{groups_csv}{audit_csv}{compare_csv}");
    Ok(())
}

fn oscillation_demo(cfg: &RunConfig, depth: u32, tail: f64) -> CliResult {
    if !(3..=30).contains(&depth) {
        return Err(CliError::Usage(format!(
            "--depth must be in 3..=30, got {depth}"
        )));
    }
    // Both lives below are deterministic; the seed only feeds the agent
    // stream, which neither agent reads.
    let seed = cfg.master_seed.unwrap_or(0);
    let mut dead = AgentFactory::new(AgentSpec::Dead(0), cfg.life)?.build(1, 1)?;
    let world_means = iq::oscillating_world_checkpoints(dead.as_mut(), depth, seed)
        .map_err(anyhow::Error::from)?;
    let mut lever = Arc::new(lever_world(2, 0)).instantiate();
    let mut osc = OscillatingAgent::new(0, 1);
    let agent_means =
        iq::agent_checkpoints(&mut lever, &mut osc, depth, seed).map_err(anyhow::Error::from)?;
    let w = iq::liminf_limsup_new_iq(&world_means, tail).map_err(anyhow::Error::from)?;
    let a = iq::liminf_limsup_new_iq(&agent_means, tail).map_err(anyhow::Error::from)?;
    let mut out = String::from("# oscillation/1\n");
    writeln!(
        out,
        "# world lower={} upper={} new_iq={} tail_len={}",
        w.lower, w.upper, w.new_iq, w.tail_len
    )
    .unwrap();
    writeln!(
        out,
        "# agent lower={} upper={} new_iq={} tail_len={}",
        a.lower, a.upper, a.new_iq, a.tail_len
    )
    .unwrap();
    out.push_str("block,games,world_mean,agent_mean\n");
    for (i, (wm, am)) in world_means.iter().zip(&agent_means).enumerate() {
        writeln!(out, "{i},{},{wm},{am}", iq::block_end(i as u32)).unwrap();
    }
    write_out(&cfg.out_dir.join("oscillation.csv"), &out)?;
    print!("{out}");
    Ok(())
}

fn serve(
    cfg: &RunConfig,
    addr: SocketAddr,
    journal_dir: Option<PathBuf>,
    suite_path: Option<PathBuf>,
) -> CliResult {
    let suite = match suite_path.or_else(|| cfg.suite.clone()) {
        Some(p) => Some(Arc::new(
            suite::read_suite(&p).with_context(|| format!("reading suite {}", p.display()))?,
        )),
        None => None,
    };
    let store = Arc::new(SessionStore::new(journal_dir, suite));
    let recovered = store.recover().map_err(anyhow::Error::from)?;
    if recovered > 0 {
        eprintln!("recovered {recovered} sessions");
    }
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(session::http::serve(store, addr))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["iqbench", "frobnicate"]), 1);
        assert_eq!(run(["iqbench"]), 1);
        assert_eq!(run(["iqbench", "--help"]), 0);
        // Randomized commands refuse to run without a seed.
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(["iqbench", "gen-suite", "--out", out]), 1);
        assert_eq!(
            run(["iqbench", "eval", "--seed", "1", "--agent", "wizard", "--out", out]),
            1
        );
        assert_eq!(
            run(["iqbench", "eval", "--seed", "1", "--set", "gmaes=3", "--out", out]),
            1
        );
    }

    #[test]
    fn missing_suite_file_is_a_runtime_failure() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.txt");
        let set = format!("suite={}", missing.display());
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run(["iqbench", "eval", "--seed", "1", "--set", &set, "--out", out]),
            2
        );
    }
}
