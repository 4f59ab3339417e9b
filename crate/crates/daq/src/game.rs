//! Two-player view of the shifted ensemble: an augmented zero-sum game in
//! which a dummy opponent picks which reward shift applies, while the kernel
//! is untouched. Minimax Q-learning on the joint table, driven by the same
//! random stream, reproduces the ensemble learner bit for bit — the
//! equivalence checker replays both sides and reports any deviation.

use crate::agents::{Agent, AgentConfig, AlgorithmKind, InitScheme, UpdateMode};
use crate::envs::{Env, TabularMdp};
use crate::error::DaqError;
use crate::policy::epsilon_greedy;
use crate::rng::RngStream;
use crate::table::{ActionId, StateId, TransitionOutcome, VisitCounters};

/// Which player optimizes first in the joint target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetOrder {
    /// `max_a min_i`: the user moves, the opponent answers.
    Maxmin,
    /// `min_i max_a`: the opponent moves, the user answers.
    Minmax,
}

impl TargetOrder {
    /// The joint-target order a given ensemble kind realizes, if any.
    pub fn for_kind(kind: AlgorithmKind) -> Option<TargetOrder> {
        match kind {
            AlgorithmKind::Maxmin | AlgorithmKind::DaqMaxmin => Some(TargetOrder::Maxmin),
            AlgorithmKind::Minmax | AlgorithmKind::DaqMinmax => Some(TargetOrder::Minmax),
            _ => None,
        }
    }
}

/// A base environment extended with an opponent whose action selects the
/// reward shift; transitions are untouched.
#[derive(Clone, Debug)]
pub struct AugmentedGame {
    env: Env,
    shifts: Vec<f64>,
}

impl AugmentedGame {
    pub fn new(env: Env, shifts: Vec<f64>) -> Result<Self, DaqError> {
        if shifts.is_empty() {
            return Err(DaqError::InvalidParam(
                "the opponent needs at least one action".into(),
            ));
        }
        if shifts.iter().any(|b| !b.is_finite()) {
            return Err(DaqError::InvalidParam("shifts must be finite".into()));
        }
        Ok(Self { env, shifts })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn n_adversary_actions(&self) -> usize {
        self.shifts.len()
    }

    /// Joint step: user plays `a`, opponent plays `i`. Consumes exactly the
    /// base environment's draws; the reward gains the opponent's shift.
    pub fn step(
        &self,
        s: StateId,
        a: ActionId,
        i: usize,
        rng: &mut RngStream,
    ) -> TransitionOutcome {
        let base = self.env.step(s, a, rng);
        TransitionOutcome {
            next: base.next,
            reward: base.reward + self.shifts[i],
        }
    }
}

/// Joint action values `Q(s, a, i)` over user action `a` and opponent action
/// `i`, with the per-state valid-action prefix baked in.
#[derive(Clone, Debug, PartialEq)]
pub struct GameQ {
    n_states: usize,
    n_actions: usize,
    n_adversary: usize,
    actions_per_state: Vec<usize>,
    values: Vec<f64>,
}

impl GameQ {
    pub fn new(actions_per_state: Vec<usize>, n_adversary: usize) -> Self {
        assert!(!actions_per_state.is_empty() && n_adversary >= 1);
        let n_states = actions_per_state.len();
        let n_actions = *actions_per_state.iter().max().unwrap();
        Self {
            n_states,
            n_actions,
            n_adversary,
            actions_per_state,
            values: vec![0.0; n_states * n_actions * n_adversary],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_adversary(&self) -> usize {
        self.n_adversary
    }

    pub fn n_actions_at(&self, s: StateId) -> usize {
        self.actions_per_state[s]
    }

    #[inline]
    fn idx(&self, s: StateId, a: ActionId, i: usize) -> usize {
        (s * self.n_actions + a) * self.n_adversary + i
    }

    pub fn get(&self, s: StateId, a: ActionId, i: usize) -> f64 {
        self.values[self.idx(s, a, i)]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, i: usize, v: f64) {
        let idx = self.idx(s, a, i);
        self.values[idx] = v;
    }

    /// Fills with independent uniform draws over `[lo, hi)` in opponent-major
    /// order — the same draw sequence an estimator-major ensemble
    /// initialization consumes.
    pub fn init_uniform_opponent_major(&mut self, lo: f64, hi: f64, rng: &mut RngStream) {
        let span = hi - lo;
        for i in 0..self.n_adversary {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let v = lo + span * rng.uniform_f64();
                    self.set(s, a, i, v);
                }
            }
        }
    }

    /// Scores for the user's behavior policy: per-action sums over the
    /// opponent's replies, in ascending opponent order.
    pub fn sum_over_adversary_into(&self, s: StateId, n_valid: usize, out: &mut Vec<f64>) {
        out.clear();
        for a in 0..n_valid {
            let mut total = 0.0;
            for i in 0..self.n_adversary {
                total += self.get(s, a, i);
            }
            out.push(total);
        }
    }

    /// Joint bootstrap value at `s` under the given order, over the state's
    /// valid action prefix.
    pub fn target(&self, order: TargetOrder, s: StateId) -> f64 {
        let n_valid = self.actions_per_state[s];
        match order {
            TargetOrder::Maxmin => {
                let mut best = f64::NEG_INFINITY;
                for a in 0..n_valid {
                    let mut low = f64::INFINITY;
                    for i in 0..self.n_adversary {
                        low = low.min(self.get(s, a, i));
                    }
                    best = best.max(low);
                }
                best
            }
            TargetOrder::Minmax => {
                let mut outer = f64::INFINITY;
                for i in 0..self.n_adversary {
                    let mut high = f64::NEG_INFINITY;
                    for a in 0..n_valid {
                        high = high.max(self.get(s, a, i));
                    }
                    outer = outer.min(high);
                }
                outer
            }
        }
    }

    /// Per-state sets of user actions maximizing the opponent-pessimal value
    /// `min_i Q(s, a, i)`, with ties wider than `tie_eps` collapsed.
    pub fn user_greedy_sets(&self, tie_eps: f64) -> Vec<Vec<ActionId>> {
        (0..self.n_states)
            .map(|s| {
                let n_valid = self.actions_per_state[s];
                let score = |a: usize| {
                    (0..self.n_adversary)
                        .map(|i| self.get(s, a, i))
                        .fold(f64::INFINITY, f64::min)
                };
                let best = (0..n_valid).map(score).fold(f64::NEG_INFINITY, f64::max);
                (0..n_valid).filter(|&a| score(a) >= best - tie_eps).collect()
            })
            .collect()
    }
}

/// One temporal-difference update of the joint table for the transition
/// `(s, a, i) → outcome`; `outcome.reward` already contains the opponent's
/// shift. Terminal transitions drop the bootstrap term.
#[allow(clippy::too_many_arguments)]
pub fn minimax_q_update(
    gq: &mut GameQ,
    s: StateId,
    a: ActionId,
    i: usize,
    outcome: TransitionOutcome,
    alpha: f64,
    gamma: f64,
    order: TargetOrder,
) {
    let target = match outcome.next {
        None => 0.0,
        Some(s2) => gq.target(order, s2),
    };
    let q = gq.get(s, a, i);
    let new = q + alpha * (outcome.reward + gamma * target - q);
    gq.set(s, a, i, new);
}

/// Where two replayed learners first disagreed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub state: StateId,
    pub action: ActionId,
    pub estimator: usize,
    pub agent_value: f64,
    pub game_value: f64,
}

/// Result of replaying an ensemble learner against its two-player twin.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub steps_run: usize,
    /// Largest absolute table difference seen at any step (0 when exact).
    pub max_deviation: f64,
    pub first_divergence: Option<Divergence>,
}

impl EquivalenceReport {
    pub fn exact(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Replays an asynchronous ensemble learner and minimax Q-learning on the
/// augmented game from the same seed, comparing the full tables after every
/// step. The two must match bit for bit: the opponent's uniform action draw
/// sits in the estimator draw's slot, and its shift rides on the reward.
pub fn verify_equivalence(
    env: &Env,
    cfg: &AgentConfig,
    steps: usize,
    seed: u64,
) -> Result<EquivalenceReport, DaqError> {
    let Some(order) = TargetOrder::for_kind(cfg.kind) else {
        return Err(DaqError::InvalidConfig(format!(
            "{:?} has no two-player twin; use a maxmin or minmax ensemble",
            cfg.kind
        )));
    };
    if cfg.mode != UpdateMode::Async {
        return Err(DaqError::InvalidConfig(
            "the two-player twin models the per-step estimator draw; \
             synchronized updates have none"
                .into(),
        ));
    }
    cfg.validate()?;

    let n = cfg.n_estimators;
    let layout = env.actions_per_state();

    let mut rng_a = RngStream::seed_from(seed);
    let mut agent = Agent::new(cfg.clone(), layout.clone(), &mut rng_a)?;

    let mut rng_b = RngStream::seed_from(seed);
    let game = AugmentedGame::new(env.clone(), cfg.shifts.clone())?;
    let mut gq = GameQ::new(layout.clone(), n);
    if let InitScheme::Uniform { lo, hi } = cfg.init {
        gq.init_uniform_opponent_major(lo, hi, &mut rng_b);
    }
    let mut counters = VisitCounters::new(n, env.n_states(), env.max_actions());
    let mut episode: u64 = 0;

    let mut s_a = env.start();
    let mut s_b = env.start();
    let mut sums: Vec<f64> = Vec::new();
    let mut ties: Vec<ActionId> = Vec::new();

    let mut max_deviation: f64 = 0.0;
    let mut first_divergence = None;

    for step in 0..steps {
        // Ensemble side.
        let act_a = agent.act(s_a, &mut rng_a);
        let sel = agent.pre_update_draw(&mut rng_a);
        let out_a = env.step(s_a, act_a, &mut rng_a);
        agent.apply_update(s_a, act_a, sel, out_a, &mut rng_a);

        // Game side, same draw slots.
        let visits = counters.visit_state(s_b);
        let eps = cfg.exploration.epsilon(visits);
        gq.sum_over_adversary_into(s_b, env.n_actions(s_b), &mut sums);
        let act_b = epsilon_greedy(&sums, eps, &mut rng_b, &mut ties);
        let adv = rng_b.uniform_int(n);
        let out_b = game.step(s_b, act_b, adv, &mut rng_b);
        let count = counters.record_update(adv, s_b, act_b);
        let alpha = cfg.step_size.step_size(count, episode);
        minimax_q_update(&mut gq, s_b, act_b, adv, out_b, alpha, cfg.gamma, order);

        // Compare the full tables.
        for s in 0..env.n_states() {
            for a in 0..env.n_actions(s) {
                for i in 0..n {
                    let va = agent.multi_q().table(i).get(s, a);
                    let vb = gq.get(s, a, i);
                    let dev = (va - vb).abs();
                    max_deviation = max_deviation.max(dev);
                    if va != vb && first_divergence.is_none() {
                        first_divergence = Some(Divergence {
                            step,
                            state: s,
                            action: a,
                            estimator: i,
                            agent_value: va,
                            game_value: vb,
                        });
                    }
                }
            }
        }

        s_a = match out_a.next {
            Some(s2) => s2,
            None => {
                agent.finish_episode();
                env.start()
            }
        };
        s_b = match out_b.next {
            Some(s2) => s2,
            None => {
                episode += 1;
                env.start()
            }
        };
    }

    Ok(EquivalenceReport {
        steps_run: steps,
        max_deviation,
        first_divergence,
    })
}

/// Converged joint values plus convergence metadata.
#[derive(Clone, Debug)]
pub struct AugmentedOracle {
    pub q: GameQ,
    pub iterations: u64,
    pub residual: f64,
}

/// Value iteration on the augmented game's expected model:
/// `Q(s, a, i) = R(s, a) + b_i + γ·E[target(s')]` with the joint target under
/// `order`. Termination follows the same semantics as the base oracle: for
/// γ < 1 it is absorption into a zero-reward state where the opponent keeps
/// playing (value `min_i b_i / (1 − γ)`); for γ = 1 the episode truly ends and
/// divergent shift choices surface as `NoConvergence`.
pub fn augmented_value_iteration(
    mdp: &TabularMdp,
    shifts: &[f64],
    order: TargetOrder,
    tol: f64,
    max_iter: u64,
) -> Result<AugmentedOracle, DaqError> {
    mdp.validate()?;
    if shifts.is_empty() || shifts.iter().any(|b| !b.is_finite()) {
        return Err(DaqError::InvalidParam(
            "need a nonempty list of finite shifts".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DaqError::InvalidParam(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(DaqError::InvalidParam("max_iter must be at least 1".into()));
    }
    let gamma = mdp.gamma;
    let b_min = shifts.iter().copied().fold(f64::INFINITY, f64::min);
    let terminal_value = if gamma < 1.0 { b_min / (1.0 - gamma) } else { 0.0 };

    let n_states = mdp.n_states();
    let n = shifts.len();
    let mut gq = GameQ::new(mdp.actions_per_state().to_vec(), n);
    let mut next = gq.clone();
    let mut v = vec![0.0; n_states];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < max_iter {
        iterations += 1;
        for (s, value) in v.iter_mut().enumerate() {
            *value = gq.target(order, s);
        }
        residual = 0.0;
        for s in 0..n_states {
            for a in 0..mdp.n_actions_at(s) {
                let row = mdp.transition_row(s, a);
                let mut expected = row[n_states] * terminal_value;
                for (s2, &p) in row[..n_states].iter().enumerate() {
                    expected += p * v[s2];
                }
                for (i, &b) in shifts.iter().enumerate() {
                    let value = mdp.expected_reward(s, a) + b + gamma * expected;
                    residual = residual.max((value - gq.get(s, a, i)).abs());
                    next.set(s, a, i, value);
                }
            }
        }
        std::mem::swap(&mut gq, &mut next);
        if residual < tol {
            return Ok(AugmentedOracle {
                q: gq,
                iterations,
                residual,
            });
        }
    }
    Err(DaqError::NoConvergence {
        iterations,
        residual,
    })
}
