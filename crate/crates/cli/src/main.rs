use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use recovering_bandits::env::{GammaMode, Preset, RewardDistribution, RewardShape, StateVector};
use recovering_bandits::harness::{
    self, run_experiment, AgentKind, AgentSpec, ExperimentConfig, ExperimentResult, PresetRef,
    ScenarioRef,
};
use recovering_bandits::oracle::{
    reachable_states, value_iteration, OraclePolicy, DEFAULT_EPSILON,
};

#[derive(Parser)]
#[command(name = "rbench", version, about = "Recovering-bandit benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario against every agent, then write the summary CSVs.
    Sweep(SweepArgs),
    /// Print the optimal policy and per-round oracle reward for a scenario.
    Oracle(OracleArgs),
    /// Recompute summary CSVs from stored run records.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated presets, e.g. `small3,6-hetero`.
    #[arg(long, value_delimiter = ',', required = true)]
    scenarios: Vec<Preset>,
    /// Comma-separated agents: `ss-sarsa`, `sarsa`, `q-learning`, `rgpts`
    /// (uses `--d`) or `rgpts-dN`.
    #[arg(long, value_delimiter = ',', required = true)]
    agents: Vec<String>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 100)]
    n_sims: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value = "bernoulli")]
    distribution: RewardDistribution,
    /// Reward shape for the non-small presets.
    #[arg(long)]
    shape: Option<RewardShape>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value = "discounted")]
    gamma_mode: GammaMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: Preset,
    #[arg(long)]
    shape: Option<RewardShape>,
    #[arg(long, default_value = "bernoulli")]
    distribution: RewardDistribution,
    /// Rounds of oracle reward to print.
    #[arg(long, default_value_t = 12)]
    rounds: usize,
    /// Solve by value iteration even when a closed form exists.
    #[arg(long)]
    exact: bool,
    /// Discount for value iteration.
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
}

/// Largest state set printed as a policy table.
const TABLE_STATE_CAP: u64 = 1_000_000;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Sweep(args) => sweep(args),
        Command::Oracle(args) => oracle(args),
        Command::Report { input, out } => {
            let all = harness::report(&input, &out)?;
            println!("{} series written to {}", all.len(), out.display());
            Ok(())
        }
    }
}

fn summarize(res: &ExperimentResult) {
    let s = &res.stats;
    let last = s
        .checkpoints
        .last()
        .map(|c| c.summary.median)
        .unwrap_or(0.0);
    let rate = s
        .optimal_rate()
        .map(|r| format!(", optimal rate {r:.2}"))
        .unwrap_or_default();
    println!(
        "{} on {}: {} runs, final median {} {last:.4}{rate}",
        res.agent,
        res.scenario.name(),
        s.n_runs,
        s.metric.as_str()
    );
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let text =
        fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_json_str(&text)
        .with_context(|| format!("parsing {}", config.display()))?;
    if out.is_some() {
        cfg.output = out;
    }
    let res = run_experiment(&cfg)?;
    summarize(&res);
    Ok(())
}

fn parse_agent(raw: &str, d: usize) -> Result<AgentSpec> {
    if let Some(n) = raw.strip_prefix("rgpts-d") {
        let d: usize = n
            .parse()
            .with_context(|| format!("bad lookahead in '{raw}'"))?;
        return Ok(AgentSpec::rgpts(d));
    }
    let kind: AgentKind = raw.parse()?;
    Ok(match kind {
        AgentKind::Rgpts => AgentSpec::rgpts(d),
        kind => AgentSpec::new(kind),
    })
}

fn sweep(args: SweepArgs) -> Result<()> {
    let agents = args
        .agents
        .iter()
        .map(|a| parse_agent(a, args.d))
        .collect::<Result<Vec<_>>>()?;
    for &preset in &args.scenarios {
        let shape = match preset {
            Preset::Small3 => None,
            _ => args.shape,
        };
        let scenario = PresetRef {
            preset,
            shape,
            distribution: args.distribution,
            horizon: args.horizon,
        };
        for &spec in &agents {
            let mut cfg =
                ExperimentConfig::new(ScenarioRef::Preset(scenario.clone()), spec, args.n_sims);
            cfg.base_seed = args.base_seed;
            cfg.gamma_mode = args.gamma_mode;
            let name = cfg.resolve_scenario()?.name().to_owned();
            cfg.output = Some(args.out.join(&name).join(spec.label()));
            let res = run_experiment(&cfg)?;
            summarize(&res);
        }
    }
    let all = harness::report(&args.out, &args.out)?;
    println!("{} series summarized in {}", all.len(), args.out.display());
    Ok(())
}

fn states_label(s: &[usize]) -> String {
    let parts: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("({})", parts.join(","))
}

fn print_table(
    mut states: Vec<StateVector>,
    mut arm: impl FnMut(&StateVector) -> Result<usize>,
) -> Result<()> {
    states.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));
    println!("state -> arm");
    for s in &states {
        println!("{} -> {}", states_label(s.as_slice()), arm(s)? + 1);
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    if !(0.0..1.0).contains(&args.gamma) {
        bail!("--gamma must lie in [0, 1)");
    }
    let shape = match args.scenario {
        Preset::Small3 => None,
        _ => args.shape,
    };
    let scn = args
        .scenario
        .scenario(shape, args.distribution, None, GammaMode::Discounted)?;
    println!(
        "scenario {}: K={}, s_max={}",
        scn.name(),
        scn.arms(),
        scn.s_max()
    );

    let closed = OraclePolicy::for_scenario(&scn).filter(|_| !args.exact);
    let (pulls, rewards): (Vec<usize>, Vec<f64>) = match closed {
        Some(policy) => {
            println!("closed-form policy: {}", serde_json::to_string(&policy)?);
            if !matches!(policy, OraclePolicy::Cyclic { .. }) {
                let states = reachable_states(&scn, TABLE_STATE_CAP)?;
                print_table(states, |s| Ok(policy.actor(scn.s_max()).act(s)))?;
            }
            let mut actor = policy.actor(scn.s_max());
            let mut s = scn.initial_state().clone();
            (0..args.rounds)
                .map(|_| {
                    let a = actor.act(&s);
                    let r = scn.mean(a, s.get(a));
                    s.advance(a, scn.s_max());
                    (a, r)
                })
                .unzip()
        }
        None => {
            let exact = value_iteration(&scn, args.gamma, DEFAULT_EPSILON)?;
            println!(
                "value iteration: gamma {}, {} reachable states, {} sweeps",
                args.gamma,
                exact.states().len(),
                exact.iterations()
            );
            print_table(exact.states().to_vec(), |s| {
                exact.policy(s).context("state missing from solution")
            })?;
            let pulls = exact.greedy_rollout(scn.initial_state(), args.rounds)?;
            let mut s = scn.initial_state().clone();
            let rewards = pulls
                .iter()
                .map(|&a| {
                    let r = scn.mean(a, s.get(a));
                    s.advance(a, scn.s_max());
                    r
                })
                .collect();
            (pulls, rewards)
        }
    };
    println!("round arm reward");
    for (t, (a, r)) in pulls.iter().zip(&rewards).enumerate() {
        println!("{} {} {r:.6}", t + 1, a + 1);
    }
    if let Some(policy) = OraclePolicy::for_scenario(&scn) {
        let avg = policy.long_run_average(&scn);
        println!(
            "long-run average reward {avg} ({:.6})",
            *avg.numer() as f64 / *avg.denom() as f64
        );
    }
    Ok(())
}
