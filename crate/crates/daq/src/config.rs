//! Flat `key = value` experiment files.
//!
//! Lines are trimmed; blank lines and `#` comments are skipped; the first
//! `=` splits key from value. Unknown or duplicate keys are errors. Example:
//!
//! ```text
//! env.name = grid
//! env.reward_variant = h
//! episodes = 10000
//! runs = 500
//! metric = avg_reward_per_step
//!
//! agent.0.kind = daq_maxmin
//! agent.0.shifts = -5, -10
//! agent.0.step_size = visit_polynomial:0.8
//! agent.0.exploration = count_based
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::agents::{AgentConfig, AlgorithmKind, InitScheme, UpdateMode};
use crate::envs::{Env, GridVariant};
use crate::error::DaqError;
use crate::harness::{
    ExperimentConfig, LabeledAgent, MetricKind, DEFAULT_MAX_STEPS_PER_EPISODE,
    DEFAULT_MOVING_AVERAGE_WINDOW,
};
use crate::schedule::{ExplorationSchedule, StepSizeSchedule};

fn err(msg: impl Into<String>) -> DaqError {
    DaqError::InvalidConfig(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str, what: &str) -> Result<T, DaqError> {
    raw.trim()
        .parse()
        .map_err(|_| err(format!("{key}: expected {what}, got {raw:?}")))
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>, DaqError> {
    raw.split(',')
        .map(|part| parse_num::<f64>(key, part, "a number"))
        .collect()
}

/// Splits `prefix:rest`, returning (`prefix`, maybe `rest`).
fn split_tag(raw: &str) -> (&str, Option<&str>) {
    match raw.split_once(':') {
        Some((head, rest)) => (head.trim(), Some(rest.trim())),
        None => (raw.trim(), None),
    }
}

fn parse_step_size(key: &str, raw: &str) -> Result<StepSizeSchedule, DaqError> {
    match split_tag(raw) {
        ("constant", Some(v)) => Ok(StepSizeSchedule::Constant(parse_num(key, v, "a number")?)),
        ("visit_polynomial", Some(v)) => Ok(StepSizeSchedule::VisitPolynomial {
            exponent: parse_num(key, v, "a number")?,
        }),
        ("episode_harmonic", Some(v)) => {
            let parts = parse_f64_list(key, v)?;
            if parts.len() != 2 {
                return Err(err(format!("{key}: episode_harmonic takes c,d")));
            }
            Ok(StepSizeSchedule::EpisodeHarmonic {
                c: parts[0],
                d: parts[1],
            })
        }
        _ => Err(err(format!(
            "{key}: expected constant:<a>, visit_polynomial:<p>, or \
             episode_harmonic:<c>,<d>, got {raw:?}"
        ))),
    }
}

fn parse_exploration(key: &str, raw: &str) -> Result<ExplorationSchedule, DaqError> {
    match split_tag(raw) {
        ("constant", Some(v)) => Ok(ExplorationSchedule::Constant(parse_num(
            key, v, "a number",
        )?)),
        ("count_based", None) => Ok(ExplorationSchedule::CountBased),
        _ => Err(err(format!(
            "{key}: expected constant:<eps> or count_based, got {raw:?}"
        ))),
    }
}

fn parse_init(key: &str, raw: &str) -> Result<InitScheme, DaqError> {
    match split_tag(raw) {
        ("zeros", None) => Ok(InitScheme::Zeros),
        ("uniform", Some(v)) => {
            let parts = parse_f64_list(key, v)?;
            if parts.len() != 2 {
                return Err(err(format!("{key}: uniform takes lo,hi")));
            }
            Ok(InitScheme::Uniform {
                lo: parts[0],
                hi: parts[1],
            })
        }
        _ => Err(err(format!(
            "{key}: expected zeros or uniform:<lo>,<hi>, got {raw:?}"
        ))),
    }
}

fn parse_kind(key: &str, raw: &str) -> Result<AlgorithmKind, DaqError> {
    match raw {
        "q_learning" => Ok(AlgorithmKind::QLearning),
        "double_q" => Ok(AlgorithmKind::DoubleQ),
        "maxmin" => Ok(AlgorithmKind::Maxmin),
        "minmax" => Ok(AlgorithmKind::Minmax),
        "daq_maxmin" => Ok(AlgorithmKind::DaqMaxmin),
        "daq_minmax" => Ok(AlgorithmKind::DaqMinmax),
        _ => Err(err(format!(
            "{key}: expected one of q_learning, double_q, maxmin, minmax, \
             daq_maxmin, daq_minmax; got {raw:?}"
        ))),
    }
}

/// The canonical config token for an algorithm kind (also the default label).
pub fn kind_token(kind: AlgorithmKind) -> &'static str {
    match kind {
        AlgorithmKind::QLearning => "q_learning",
        AlgorithmKind::DoubleQ => "double_q",
        AlgorithmKind::Maxmin => "maxmin",
        AlgorithmKind::Minmax => "minmax",
        AlgorithmKind::DaqMaxmin => "daq_maxmin",
        AlgorithmKind::DaqMinmax => "daq_minmax",
    }
}

fn parse_metric(key: &str, raw: &str) -> Result<MetricKind, DaqError> {
    match split_tag(raw) {
        ("avg_reward_per_step", None) => Ok(MetricKind::AvgRewardPerStep),
        ("start_action_ratio", Some(v)) => Ok(MetricKind::StartActionRatio(parse_num(
            key, v, "an action index",
        )?)),
        _ => Err(err(format!(
            "{key}: expected avg_reward_per_step or start_action_ratio:<action>, got {raw:?}"
        ))),
    }
}

const TOP_LEVEL_KEYS: [&str; 13] = [
    "env.name",
    "env.reward_variant",
    "env.k",
    "env.mu",
    "env.m",
    "episodes",
    "runs",
    "base_seed",
    "metric",
    "moving_average_window",
    "max_steps_per_episode",
    "out",
    "workers",
];
const AGENT_FIELDS: [&str; 9] = [
    "label",
    "kind",
    "n",
    "shifts",
    "mode",
    "step_size",
    "exploration",
    "gamma",
    "init",
];

/// Parses an experiment description; see the module docs for the format.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, DaqError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("line {}: expected key = value", lineno + 1)));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(err(format!("line {}: empty key or value", lineno + 1)));
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(err(format!("duplicate key {key}")));
        }
        pairs.push((key, value));
    }

    for (key, _) in &pairs {
        let known = TOP_LEVEL_KEYS.contains(&key.as_str())
            || key.strip_prefix("agent.").is_some_and(|rest| {
                rest.split_once('.').is_some_and(|(idx, field)| {
                    idx.parse::<usize>().is_ok() && AGENT_FIELDS.contains(&field)
                })
            });
        if !known {
            return Err(err(format!("unknown key {key}")));
        }
    }

    let take = |key: &str| -> Option<String> {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
    };
    let mut used: Vec<String> = Vec::new();
    let mut claim = |key: &str| used.push(key.to_string());

    // Environment.
    let env_name = take("env.name").ok_or_else(|| err("missing key env.name"))?;
    claim("env.name");
    let env = match env_name.as_str() {
        "grid" => {
            let variant = take("env.reward_variant")
                .ok_or_else(|| err("grid needs env.reward_variant = h | w"))?;
            claim("env.reward_variant");
            match variant.as_str() {
                "h" => Env::grid(GridVariant::NoisyStep),
                "w" => Env::grid(GridVariant::NoisyGoal),
                other => {
                    return Err(err(format!(
                        "env.reward_variant: expected h or w, got {other:?}"
                    )))
                }
            }
        }
        "sutton" => {
            let k = take("env.k").ok_or_else(|| err("sutton needs env.k"))?;
            let mu = take("env.mu").ok_or_else(|| err("sutton needs env.mu"))?;
            claim("env.k");
            claim("env.mu");
            Env::sutton(
                parse_num("env.k", &k, "a positive integer")?,
                parse_num("env.mu", &mu, "a number")?,
            )?
        }
        "weng" => {
            let m = take("env.m").ok_or_else(|| err("weng needs env.m"))?;
            claim("env.m");
            Env::weng(parse_num("env.m", &m, "a positive integer")?)?
        }
        other => {
            return Err(err(format!(
                "env.name: expected grid, sutton, or weng; got {other:?}"
            )))
        }
    };

    // Scalars.
    let episodes = take("episodes").ok_or_else(|| err("missing key episodes"))?;
    claim("episodes");
    let episodes = parse_num("episodes", &episodes, "a positive integer")?;
    let runs = take("runs").ok_or_else(|| err("missing key runs"))?;
    claim("runs");
    let runs = parse_num("runs", &runs, "a positive integer")?;
    let base_seed = match take("base_seed") {
        Some(v) => {
            claim("base_seed");
            parse_num("base_seed", &v, "an unsigned integer")?
        }
        None => 0,
    };
    let metric = match take("metric") {
        Some(v) => {
            claim("metric");
            parse_metric("metric", &v)?
        }
        None => MetricKind::AvgRewardPerStep,
    };
    let moving_average_window = match take("moving_average_window") {
        Some(v) => {
            claim("moving_average_window");
            parse_num("moving_average_window", &v, "a positive integer")?
        }
        None => DEFAULT_MOVING_AVERAGE_WINDOW,
    };
    let max_steps_per_episode = match take("max_steps_per_episode") {
        Some(v) => {
            claim("max_steps_per_episode");
            parse_num("max_steps_per_episode", &v, "a positive integer")?
        }
        None => DEFAULT_MAX_STEPS_PER_EPISODE,
    };
    let out_prefix = take("out").map(|v| {
        claim("out");
        PathBuf::from(v)
    });
    let workers = match take("workers") {
        Some(v) => {
            claim("workers");
            Some(parse_num("workers", &v, "a positive integer")?)
        }
        None => None,
    };

    // Agents: agent.<idx>.<field>.
    let mut agent_fields: BTreeMap<usize, Vec<(String, String)>> = BTreeMap::new();
    for (key, value) in &pairs {
        let Some(rest) = key.strip_prefix("agent.") else {
            continue;
        };
        let Some((idx, field)) = rest.split_once('.') else {
            return Err(err(format!("{key}: expected agent.<index>.<field>")));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("{key}: bad agent index {idx:?}")))?;
        claim(key);
        agent_fields
            .entry(idx)
            .or_default()
            .push((field.to_string(), value.clone()));
    }
    if agent_fields.is_empty() {
        return Err(err("no agents configured; add agent.0.kind = …"));
    }

    let mut agents = Vec::with_capacity(agent_fields.len());
    for (idx, fields) in &agent_fields {
        let field = |name: &str| -> Option<&str> {
            fields
                .iter()
                .find(|(f, _)| f == name)
                .map(|(_, v)| v.as_str())
        };
        let keyname = |name: &str| format!("agent.{idx}.{name}");
        let kind_raw = field("kind").ok_or_else(|| err(format!("missing {}", keyname("kind"))))?;
        let kind = parse_kind(&keyname("kind"), kind_raw)?;
        let gamma = match field("gamma") {
            Some(v) => parse_num(&keyname("gamma"), v, "a number")?,
            None => env.default_gamma(),
        };
        let mut cfg = AgentConfig::new(kind, gamma);
        if let Some(v) = field("n") {
            cfg = cfg.with_estimators(parse_num(&keyname("n"), v, "a positive integer")?);
        }
        if let Some(v) = field("shifts") {
            let shifts = parse_f64_list(&keyname("shifts"), v)?;
            if field("n").is_some() && shifts.len() != cfg.n_estimators {
                return Err(err(format!(
                    "agent.{idx}: n = {} but {} shifts given",
                    cfg.n_estimators,
                    shifts.len()
                )));
            }
            cfg = cfg.with_shifts(shifts);
        }
        if let Some(v) = field("mode") {
            cfg = cfg.with_mode(match v {
                "async" => UpdateMode::Async,
                "sync" => UpdateMode::Sync,
                other => {
                    return Err(err(format!(
                        "{}: expected async or sync, got {other:?}",
                        keyname("mode")
                    )))
                }
            });
        }
        if let Some(v) = field("step_size") {
            cfg = cfg.with_step_size(parse_step_size(&keyname("step_size"), v)?);
        }
        if let Some(v) = field("exploration") {
            cfg = cfg.with_exploration(parse_exploration(&keyname("exploration"), v)?);
        }
        if let Some(v) = field("init") {
            cfg = cfg.with_init(parse_init(&keyname("init"), v)?);
        }
        let label = field("label")
            .map(str::to_string)
            .unwrap_or_else(|| kind_token(kind).to_string());
        agents.push(LabeledAgent { label, cfg });
    }

    for (key, _) in &pairs {
        if !used.contains(key) {
            return Err(err(format!("key {key} does not apply here")));
        }
    }

    let cfg = ExperimentConfig {
        env,
        agents,
        episodes,
        runs,
        base_seed,
        metric,
        moving_average_window,
        max_steps_per_episode,
        out_prefix,
        workers,
    };
    cfg.validate()?;
    Ok(cfg)
}
