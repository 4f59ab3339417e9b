//! Command line for the laboratory: run configured experiments, evaluate the
//! finite-time bound, solve expected models exactly, and replay the
//! two-player equivalence check.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use daq::agents::AgentConfig;
use daq::analysis::{finite_time_bound, greedy_policy, value_iteration, BoundParams};
use daq::config::parse_experiment;
use daq::envs::{Env, GridVariant};
use daq::game::{verify_equivalence, TargetOrder};
use daq::harness::run_experiment;
use daq::schedule::{ExplorationSchedule, StepSizeSchedule};

#[derive(Parser)]
#[command(
    name = "daq",
    version,
    about = "Tabular laboratory for shifted-ensemble (dummy-adversarial) Q-learning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configured experiment and summarize (optionally write) curves.
    Run(RunArgs),
    /// Evaluate the finite-time error bound, optionally sweeping t.
    Bound(BoundArgs),
    /// Solve an environment's expected model by value iteration.
    Oracle(OracleArgs),
    /// Replay an ensemble learner against its two-player twin; exits
    /// nonzero if any table entry ever differs.
    EquivCheck(EquivArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (flat key = value format).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output prefix for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    /// Constant step size, in (0, 1).
    #[arg(long)]
    alpha: f64,
    /// Discount, in [0, 1).
    #[arg(long)]
    gamma: f64,
    /// Number of estimators.
    #[arg(long)]
    n: usize,
    /// Number of state–action pairs.
    #[arg(long)]
    size_sa: usize,
    /// Smallest effective update probability.
    #[arg(long)]
    d_min: f64,
    /// Largest effective update probability.
    #[arg(long)]
    d_max: f64,
    /// Step count (sweep start when --t-max is given).
    #[arg(long)]
    t: u64,
    /// Sweep end (inclusive); emits CSV rows t,term1,term2,term3,total.
    #[arg(long)]
    t_max: Option<u64>,
    /// Sweep stride.
    #[arg(long, default_value_t = 1)]
    t_step: u64,
    /// Write the sweep CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnvArgs {
    /// Environment: grid, sutton, or weng.
    #[arg(long)]
    env: String,
    /// Grid reward placement: h (noisy steps) or w (noisy goal).
    #[arg(long)]
    reward_variant: Option<String>,
    /// Sutton chain: action count at state B.
    #[arg(long)]
    k: Option<usize>,
    /// Sutton chain: mean reward at state B.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Loop chain: inner state count.
    #[arg(long)]
    m: Option<usize>,
}

impl EnvArgs {
    fn build(&self) -> Result<Env> {
        let reject = |flag: &str, relevant: &str| {
            bail!("--{flag} only applies to the {relevant} environment")
        };
        match self.env.as_str() {
            "grid" => {
                if self.k.is_some() || self.mu.is_some() {
                    return reject("k/--mu", "sutton");
                }
                if self.m.is_some() {
                    return reject("m", "weng");
                }
                match self.reward_variant.as_deref() {
                    Some("h") => Ok(Env::grid(GridVariant::NoisyStep)),
                    Some("w") => Ok(Env::grid(GridVariant::NoisyGoal)),
                    Some(other) => bail!("--reward-variant must be h or w, got {other:?}"),
                    None => bail!("grid needs --reward-variant h|w"),
                }
            }
            "sutton" => {
                if self.reward_variant.is_some() {
                    return reject("reward-variant", "grid");
                }
                if self.m.is_some() {
                    return reject("m", "weng");
                }
                let k = self.k.context("sutton needs --k")?;
                let mu = self.mu.context("sutton needs --mu")?;
                Ok(Env::sutton(k, mu)?)
            }
            "weng" => {
                if self.reward_variant.is_some() {
                    return reject("reward-variant", "grid");
                }
                if self.k.is_some() || self.mu.is_some() {
                    return reject("k/--mu", "sutton");
                }
                let m = self.m.context("weng needs --m")?;
                Ok(Env::weng(m)?)
            }
            other => bail!("--env must be grid, sutton, or weng; got {other:?}"),
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Constant added to every reward.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    /// Convergence tolerance on the sup-norm residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: u64,
}

#[derive(Args)]
struct EquivArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Per-estimator reward shifts, comma-separated (length = ensemble size).
    #[arg(long, allow_hyphen_values = true)]
    shifts: String,
    /// Joint target order: maxmin or minmax.
    #[arg(long)]
    order: String,
    /// Transitions to replay.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Constant step size.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Constant exploration rate.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Discount; defaults to the environment's convention.
    #[arg(long)]
    gamma: Option<f64>,
}

fn main() -> Result<()> {
    // Rust ignores SIGPIPE by default, turning `daq ... | head` into a
    // broken-pipe panic; restore the conventional silent exit.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match Cli::parse().cmd {
        Cmd::Run(a) => run(a),
        Cmd::Bound(a) => bound(a),
        Cmd::Oracle(a) => oracle(a),
        Cmd::EquivCheck(a) => equiv_check(a),
    }
}

fn run(a: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg =
        parse_experiment(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(runs) = a.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = a.out {
        cfg.out_prefix = Some(out);
    }
    if let Some(workers) = a.workers {
        cfg.workers = Some(workers);
    }
    cfg.validate()?;

    let set = run_experiment(&cfg)?;
    println!(
        "env: {:?}  episodes: {}  runs: {}  seed: {}",
        cfg.env, cfg.episodes, cfg.runs, cfg.base_seed
    );
    for curve in &set.curves {
        let last = curve.mean.len() - 1;
        println!(
            "{}: final mean {:.6}, final moving avg {:.6}, truncated episodes {}/{}",
            curve.label,
            curve.mean[last],
            curve.moving_avg[last],
            curve.truncated_episodes,
            curve.total_episodes
        );
    }
    if let Some(prefix) = &cfg.out_prefix {
        println!("wrote curves under prefix {}", prefix.display());
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Result<()> {
    let params = BoundParams::new(a.alpha, a.gamma, a.n, a.size_sa, a.d_min, a.d_max, a.t)?;
    match a.t_max {
        None => {
            let terms = finite_time_bound(&params)?;
            println!("rho: {}", params.rho());
            println!("term1: {}", terms.term1);
            println!("term2: {}", terms.term2);
            println!("term3: {}", terms.term3);
            println!("total: {}", terms.total());
        }
        Some(t_max) => {
            if t_max < a.t {
                bail!("--t-max must be at least --t");
            }
            if a.t_step == 0 {
                bail!("--t-step must be at least 1");
            }
            let mut csv = String::from("t,term1,term2,term3,total\n");
            let mut t = a.t;
            loop {
                let terms = finite_time_bound(&BoundParams { t, ..params })?;
                csv.push_str(&format!(
                    "{t},{},{},{},{}\n",
                    terms.term1,
                    terms.term2,
                    terms.term3,
                    terms.total()
                ));
                match t.checked_add(a.t_step) {
                    Some(next) if next <= t_max => t = next,
                    _ => break,
                }
            }
            match &a.out {
                Some(path) => {
                    std::fs::write(path, csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let env = a.env.build()?;
    let mdp = env.expected_mdp();
    let sol = value_iteration(&mdp, a.shift, a.tol, a.max_iter)?;
    let greedy = greedy_policy(&sol.q, mdp.actions_per_state(), 1e-9);
    println!("env: {env:?}  gamma: {}  shift: {}", mdp.gamma, a.shift);
    println!("iterations: {}  residual: {}", sol.iterations, sol.residual);
    println!("state  action values  greedy actions");
    for (s, greedy_set) in greedy.iter().enumerate() {
        let values: Vec<String> = (0..mdp.n_actions_at(s))
            .map(|a| sol.q.get(s, a).to_string())
            .collect();
        let set: Vec<String> = greedy_set.iter().map(usize::to_string).collect();
        println!("{s}  [{}]  {{{}}}", values.join(", "), set.join(", "));
    }
    Ok(())
}

fn equiv_check(a: EquivArgs) -> Result<()> {
    let env = a.env.build()?;
    let order = match a.order.as_str() {
        "maxmin" => TargetOrder::Maxmin,
        "minmax" => TargetOrder::Minmax,
        other => bail!("--order must be maxmin or minmax, got {other:?}"),
    };
    let shifts: Vec<f64> = a
        .shifts
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad shift {s:?}"))
        })
        .collect::<Result<_>>()?;
    let kind = match order {
        TargetOrder::Maxmin => daq::agents::AlgorithmKind::DaqMaxmin,
        TargetOrder::Minmax => daq::agents::AlgorithmKind::DaqMinmax,
    };
    let cfg = AgentConfig::new(kind, a.gamma.unwrap_or(env.default_gamma()))
        .with_shifts(shifts)
        .with_step_size(StepSizeSchedule::Constant(a.alpha))
        .with_exploration(ExplorationSchedule::Constant(a.epsilon));
    let report = verify_equivalence(&env, &cfg, a.steps, a.seed)?;
    println!("steps: {}", report.steps_run);
    println!("max deviation: {}", report.max_deviation);
    match report.first_divergence {
        None => {
            println!("exact: the ensemble and its two-player twin agree bit for bit");
            Ok(())
        }
        Some(d) => {
            println!(
                "first divergence at step {}: state {} action {} estimator {}: \
                 ensemble {} vs game {}",
                d.step, d.state, d.action, d.estimator, d.agent_value, d.game_value
            );
            bail!("the replayed tables deviate");
        }
    }
}
