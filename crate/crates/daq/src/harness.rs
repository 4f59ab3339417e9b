//! Experiment driver: single-episode rollouts, seeded multi-run aggregation,
//! and CSV emission.
//!
//! Runs are parallelized in fixed-size chunks whose results are folded in
//! run order, so any worker count — including fully serial — produces
//! byte-identical output. Seeds are derived per label and per run from the
//! base seed, so adding an agent or reordering runs never perturbs the
//! others' streams.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agents::{Agent, AgentConfig};
use crate::envs::Env;
use crate::error::DaqError;
use crate::rng::{derive_seed, RngStream};
use crate::table::ActionId;

/// Outcome of one episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    /// Sum of raw environment rewards — shifts never enter metrics.
    pub total_reward: f64,
    pub steps: usize,
    /// The episode's first selected action.
    pub first_action: ActionId,
    /// True when the step cap ended the episode instead of the environment.
    pub truncated: bool,
}

/// Plays one episode from the start state, updating the agent after every
/// transition, and advances the agent's episode counter at the end (step-cap
/// truncation included). `max_steps` must be at least 1.
pub fn run_episode(
    agent: &mut Agent,
    env: &Env,
    rng: &mut RngStream,
    max_steps: usize,
) -> EpisodeStats {
    debug_assert!(max_steps >= 1);
    let mut s = env.start();
    let mut total_reward = 0.0;
    let mut steps = 0;
    let mut first_action = 0;
    let mut truncated = true;
    while steps < max_steps {
        let a = agent.act(s, rng);
        if steps == 0 {
            first_action = a;
        }
        let sel = agent.pre_update_draw(rng);
        let out = env.step(s, a, rng);
        agent.apply_update(s, a, sel, out, rng);
        total_reward += out.reward;
        steps += 1;
        match out.next {
            Some(s2) => s = s2,
            None => {
                truncated = false;
                break;
            }
        }
    }
    agent.finish_episode();
    EpisodeStats {
        total_reward,
        steps,
        first_action,
        truncated,
    }
}

/// Per-episode scalar extracted from an episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    /// Total raw reward divided by steps taken.
    AvgRewardPerStep,
    /// 1 when the episode opened with the given action, else 0.
    StartActionRatio(ActionId),
}

impl MetricKind {
    pub fn of(&self, stats: &EpisodeStats) -> f64 {
        match *self {
            MetricKind::AvgRewardPerStep => stats.total_reward / stats.steps as f64,
            MetricKind::StartActionRatio(a) => {
                if stats.first_action == a {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// An agent configuration with the name it carries through outputs.
#[derive(Clone, Debug)]
pub struct LabeledAgent {
    pub label: String,
    pub cfg: AgentConfig,
}

/// A full experiment: one environment, several labeled agents, `runs`
/// independent seeds each.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub env: Env,
    pub agents: Vec<LabeledAgent>,
    pub episodes: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub metric: MetricKind,
    pub moving_average_window: usize,
    pub max_steps_per_episode: usize,
    /// When set, [`run_experiment`] also writes CSV files under this prefix.
    pub out_prefix: Option<PathBuf>,
    /// Worker threads; `None` defers to `DAQ_WORKERS` and then to the global
    /// thread pool.
    pub workers: Option<usize>,
}

pub const DEFAULT_MOVING_AVERAGE_WINDOW: usize = 100;
pub const DEFAULT_MAX_STEPS_PER_EPISODE: usize = 100_000;

/// Characters allowed in an agent label (also keeps filenames sane).
fn label_ok(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ' '))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), DaqError> {
        let fail = |msg: String| Err(DaqError::InvalidConfig(msg));
        if self.agents.is_empty() {
            return fail("need at least one agent".into());
        }
        if self.episodes == 0 || self.runs == 0 {
            return fail("episodes and runs must be at least 1".into());
        }
        if self.moving_average_window == 0 {
            return fail("moving average window must be at least 1".into());
        }
        if self.max_steps_per_episode == 0 {
            return fail("per-episode step cap must be at least 1".into());
        }
        if self.workers == Some(0) {
            return fail("worker count must be at least 1".into());
        }
        if let MetricKind::StartActionRatio(a) = self.metric {
            let valid = self.env.n_actions(self.env.start());
            if a >= valid {
                return fail(format!(
                    "start action {a} is out of range; the start state has {valid} actions"
                ));
            }
        }
        for agent in &self.agents {
            if !label_ok(&agent.label) {
                return fail(format!(
                    "label {:?} is empty or uses characters outside [A-Za-z0-9_. -]",
                    agent.label
                ));
            }
            agent.cfg.validate()?;
        }
        let mut labels: Vec<&str> = self.agents.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.agents.len() {
            return fail("agent labels must be unique".into());
        }
        Ok(())
    }
}

/// Aggregated learning curve for one labeled agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    /// Per-episode metric mean over runs.
    pub mean: Vec<f64>,
    /// Per-episode standard error of the mean (0 for a single run).
    pub stderr: Vec<f64>,
    /// Moving average of `mean` with the configured window (growing head).
    pub moving_avg: Vec<f64>,
    pub truncated_episodes: u64,
    pub total_episodes: u64,
}

/// All curves of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSet {
    pub curves: Vec<Curve>,
    pub episodes: usize,
    pub runs: usize,
}

/// Runs stay bounded in memory: at most this many per-run series are alive
/// at once per label.
const RUN_CHUNK: usize = 32;

/// Executes every labeled agent for `runs` seeded repetitions and aggregates
/// per-episode metrics. Writes CSV files when `out_prefix` is set.
///
/// Seeding: run `r` of label index `l` uses
/// `derive_seed(derive_seed(base_seed, l), r)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CurveSet, DaqError> {
    cfg.validate()?;
    let workers = resolve_workers(cfg)?;
    let pool = match workers {
        None => None,
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| DaqError::InvalidConfig(format!("thread pool: {e}")))?,
        ),
    };

    let mut curves = Vec::with_capacity(cfg.agents.len());
    for (label_idx, labeled) in cfg.agents.iter().enumerate() {
        let label_seed = derive_seed(cfg.base_seed, label_idx as u64);
        let mut sum = vec![0.0; cfg.episodes];
        let mut sum_sq = vec![0.0; cfg.episodes];
        let mut truncated_episodes = 0u64;

        let mut chunk_results: Vec<(Vec<f64>, u64)> = Vec::with_capacity(RUN_CHUNK);
        for chunk_start in (0..cfg.runs).step_by(RUN_CHUNK) {
            let chunk_end = (chunk_start + RUN_CHUNK).min(cfg.runs);
            let job = |run: usize| -> Result<(Vec<f64>, u64), DaqError> {
                single_run(cfg, &labeled.cfg, derive_seed(label_seed, run as u64))
            };
            chunk_results.clear();
            let collected: Result<Vec<_>, _> = match &pool {
                Some(pool) => {
                    pool.install(|| (chunk_start..chunk_end).into_par_iter().map(job).collect())
                }
                None => (chunk_start..chunk_end).into_par_iter().map(job).collect(),
            };
            chunk_results.extend(collected?);
            // Sequential fold in ascending run order keeps the sums exact
            // regardless of worker count.
            for (series, truncated) in &chunk_results {
                for (e, v) in series.iter().enumerate() {
                    sum[e] += v;
                    sum_sq[e] += v * v;
                }
                truncated_episodes += truncated;
            }
        }

        let runs = cfg.runs as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / runs).collect();
        let stderr: Vec<f64> = if cfg.runs < 2 {
            vec![0.0; cfg.episodes]
        } else {
            sum_sq
                .iter()
                .zip(&mean)
                .map(|(sq, m)| {
                    let var = ((sq - runs * m * m) / (runs - 1.0)).max(0.0);
                    (var / runs).sqrt()
                })
                .collect()
        };
        let moving_avg = moving_average(&mean, cfg.moving_average_window);
        curves.push(Curve {
            label: labeled.label.clone(),
            mean,
            stderr,
            moving_avg,
            truncated_episodes,
            total_episodes: (cfg.runs * cfg.episodes) as u64,
        });
    }

    let set = CurveSet {
        curves,
        episodes: cfg.episodes,
        runs: cfg.runs,
    };
    if let Some(prefix) = &cfg.out_prefix {
        emit_csv(&set, prefix)?;
    }
    Ok(set)
}

/// One seeded run: `episodes` episodes, returning the per-episode metric
/// series and the number of truncated episodes.
fn single_run(
    cfg: &ExperimentConfig,
    agent_cfg: &AgentConfig,
    seed: u64,
) -> Result<(Vec<f64>, u64), DaqError> {
    let mut rng = RngStream::seed_from(seed);
    let mut agent = Agent::new(agent_cfg.clone(), cfg.env.actions_per_state(), &mut rng)?;
    let mut series = Vec::with_capacity(cfg.episodes);
    let mut truncated = 0u64;
    for _ in 0..cfg.episodes {
        let stats = run_episode(&mut agent, &cfg.env, &mut rng, cfg.max_steps_per_episode);
        series.push(cfg.metric.of(&stats));
        truncated += stats.truncated as u64;
    }
    Ok((series, truncated))
}

fn resolve_workers(cfg: &ExperimentConfig) -> Result<Option<usize>, DaqError> {
    if cfg.workers.is_some() {
        return Ok(cfg.workers);
    }
    match std::env::var("DAQ_WORKERS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(DaqError::InvalidConfig(format!(
                "DAQ_WORKERS must be a positive integer, got {raw:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Trailing mean with a growing head: entry `k` averages
/// `series[max(0, k + 1 − window) ..= k]`.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    (0..series.len())
        .map(|k| {
            let start = (k + 1).saturating_sub(window);
            let slice = &series[start..=k];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one CSV per curve (`{prefix}.{label}.csv`, header
/// `episode,mean,stderr,moving_avg`, full-precision values, episodes numbered
/// from 1) plus an index file `{prefix}.index.csv` mapping labels to files.
/// Returns the label → path pairs.
pub fn emit_csv(set: &CurveSet, prefix: &Path) -> Result<Vec<(String, PathBuf)>, DaqError> {
    let prefix_name = prefix
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| DaqError::InvalidConfig(format!("bad output prefix {prefix:?}")))?
        .to_string();
    let dir = prefix.parent().unwrap_or(Path::new(""));
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(dir)
            .map_err(|e| DaqError::io(format!("creating {}", dir.display()), e))?;
    }

    let mut named: Vec<(String, PathBuf)> = Vec::with_capacity(set.curves.len());
    for curve in &set.curves {
        let file = dir.join(format!("{prefix_name}.{}.csv", sanitize_label(&curve.label)));
        if named.iter().any(|(_, f)| f == &file) {
            return Err(DaqError::InvalidConfig(format!(
                "labels collide after sanitizing: {}",
                file.display()
            )));
        }
        let mut body = String::from("episode,mean,stderr,moving_avg\n");
        for e in 0..curve.mean.len() {
            body.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                curve.mean[e],
                curve.stderr[e],
                curve.moving_avg[e]
            ));
        }
        std::fs::write(&file, body)
            .map_err(|e| DaqError::io(format!("writing {}", file.display()), e))?;
        named.push((curve.label.clone(), file));
    }

    let index = dir.join(format!("{prefix_name}.index.csv"));
    let mut body = String::from("label,file\n");
    for (label, file) in &named {
        let name = file.file_name().unwrap().to_str().unwrap();
        body.push_str(&format!("{label},{name}\n"));
    }
    std::fs::write(&index, body)
        .map_err(|e| DaqError::io(format!("writing {}", index.display()), e))?;
    Ok(named)
}
