//! Tabular learners: shifted-ensemble Q-learning in both target orders,
//! plus plain, double, maxmin, and minmax Q-learning baselines.
//!
//! Every learner follows one per-step draw contract so that equal-seed runs
//! of structurally identical algorithms replay the same random stream:
//! exploration draw(s) in [`Agent::act`], then the estimator draw in
//! [`Agent::pre_update_draw`] (asynchronous modes only — exactly one integer
//! draw, even with a single estimator), then the environment's transition and
//! reward draws, then any target tie-break draw inside
//! [`Agent::apply_update`] (double Q-learning only).

use crate::error::DaqError;
use crate::policy::epsilon_greedy;
use crate::rng::RngStream;
use crate::schedule::{ExplorationSchedule, StepSizeSchedule};
use crate::table::{ActionId, MultiQ, StateId, TransitionOutcome, VisitCounters};

/// Which update rule the agent runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    /// Single estimator, max bootstrap.
    QLearning,
    /// Two estimators; each update bootstraps through the other estimator's
    /// argmax. Always asynchronous, always unshifted.
    DoubleQ,
    /// Unshifted ensemble with the max-of-min bootstrap.
    Maxmin,
    /// Unshifted ensemble with the min-of-max bootstrap.
    Minmax,
    /// Shifted ensemble, max-of-min bootstrap.
    DaqMaxmin,
    /// Shifted ensemble, min-of-max bootstrap.
    DaqMinmax,
}

impl AlgorithmKind {
    /// Whether per-estimator reward shifts are part of the algorithm.
    pub fn is_shifted(self) -> bool {
        matches!(self, AlgorithmKind::DaqMaxmin | AlgorithmKind::DaqMinmax)
    }

    pub fn default_estimators(self) -> usize {
        match self {
            AlgorithmKind::QLearning => 1,
            _ => 2,
        }
    }
}

/// Whether an update step touches one estimator or all of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// One uniformly drawn estimator per step.
    Async,
    /// Every estimator updates from a shared pre-update target snapshot.
    Sync,
}

/// Initial contents of the value tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    Zeros,
    /// Independent uniform draws over `[lo, hi)`, estimator-major.
    Uniform { lo: f64, hi: f64 },
}

/// Full specification of a learner.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub kind: AlgorithmKind,
    pub n_estimators: usize,
    /// Per-estimator reward shifts; must be all-zero unless the kind is
    /// shifted.
    pub shifts: Vec<f64>,
    pub mode: UpdateMode,
    pub step_size: StepSizeSchedule,
    pub exploration: ExplorationSchedule,
    pub gamma: f64,
    pub init: InitScheme,
}

impl AgentConfig {
    /// Defaults: the kind's conventional estimator count, zero shifts,
    /// asynchronous updates, constant α = 0.1 and ε = 0.1, zero
    /// initialization.
    pub fn new(kind: AlgorithmKind, gamma: f64) -> Self {
        let n = kind.default_estimators();
        Self {
            kind,
            n_estimators: n,
            shifts: vec![0.0; n],
            mode: UpdateMode::Async,
            step_size: StepSizeSchedule::Constant(0.1),
            exploration: ExplorationSchedule::Constant(0.1),
            gamma,
            init: InitScheme::Zeros,
        }
    }

    /// Sets the shifts; the estimator count follows the vector's length.
    pub fn with_shifts(mut self, shifts: Vec<f64>) -> Self {
        self.n_estimators = shifts.len();
        self.shifts = shifts;
        self
    }

    /// Sets the estimator count, resetting all shifts to zero.
    pub fn with_estimators(mut self, n: usize) -> Self {
        self.n_estimators = n;
        self.shifts = vec![0.0; n];
        self
    }

    pub fn with_mode(mut self, mode: UpdateMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_step_size(mut self, step_size: StepSizeSchedule) -> Self {
        self.step_size = step_size;
        self
    }

    pub fn with_exploration(mut self, exploration: ExplorationSchedule) -> Self {
        self.exploration = exploration;
        self
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<(), DaqError> {
        let fail = |msg: String| Err(DaqError::InvalidConfig(msg));
        if self.n_estimators == 0 {
            return fail("need at least one estimator".into());
        }
        if self.shifts.len() != self.n_estimators {
            return fail(format!(
                "{} shifts for {} estimators",
                self.shifts.len(),
                self.n_estimators
            ));
        }
        if self.shifts.iter().any(|b| !b.is_finite()) {
            return fail("shifts must be finite".into());
        }
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return fail(format!("discount must lie in [0, 1], got {}", self.gamma));
        }
        match self.kind {
            AlgorithmKind::QLearning => {
                if self.n_estimators != 1 {
                    return fail("plain Q-learning uses exactly one estimator".into());
                }
            }
            AlgorithmKind::DoubleQ => {
                if self.n_estimators != 2 {
                    return fail("double Q-learning uses exactly two estimators".into());
                }
                if self.mode != UpdateMode::Async {
                    return fail(
                        "double Q-learning draws one estimator per step; \
                         synchronized updates are undefined for it"
                            .into(),
                    );
                }
            }
            _ => {}
        }
        if !self.kind.is_shifted() && self.shifts.iter().any(|&b| b != 0.0) {
            return fail(format!(
                "{:?} does not take reward shifts; set them to zero",
                self.kind
            ));
        }
        if self.mode == UpdateMode::Sync
            && self.n_estimators >= 2
            && self.shifts.iter().all(|&b| b == 0.0)
            && self.init == InitScheme::Zeros
        {
            return fail(
                "synchronized estimators with zero shifts and zero initialization \
                 stay identical forever; use uniform initialization or nonzero shifts"
                    .into(),
            );
        }
        if let InitScheme::Uniform { lo, hi } = self.init {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return fail(format!(
                    "uniform initialization needs finite lo < hi, got [{lo}, {hi})"
                ));
            }
        }
        self.step_size.validate()?;
        self.exploration.validate()?;
        Ok(())
    }
}

/// Which estimators the pending update will touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateSelector {
    All,
    One(usize),
}

/// A learner bound to a fixed state/action layout.
#[derive(Clone, Debug)]
pub struct Agent {
    cfg: AgentConfig,
    actions_per_state: Vec<usize>,
    mq: MultiQ,
    counters: VisitCounters,
    episode: u64,
    sums: Vec<f64>,
    ties: Vec<ActionId>,
}

impl Agent {
    /// Builds the agent, drawing initial table values from `rng` when the
    /// config asks for uniform initialization (estimator-major order).
    pub fn new(
        cfg: AgentConfig,
        actions_per_state: Vec<usize>,
        rng: &mut RngStream,
    ) -> Result<Self, DaqError> {
        cfg.validate()?;
        if actions_per_state.is_empty() {
            return Err(DaqError::InvalidConfig("need at least one state".into()));
        }
        let n_states = actions_per_state.len();
        let max_actions = *actions_per_state.iter().max().unwrap();
        if actions_per_state.contains(&0) {
            return Err(DaqError::InvalidConfig(
                "every state needs at least one action".into(),
            ));
        }
        let mut mq = MultiQ::zeros(n_states, max_actions, cfg.shifts.clone());
        if let InitScheme::Uniform { lo, hi } = cfg.init {
            mq.init_uniform(lo, hi, rng);
        }
        let counters = VisitCounters::new(cfg.n_estimators, n_states, max_actions);
        Ok(Self {
            cfg,
            actions_per_state,
            mq,
            counters,
            episode: 0,
            sums: Vec::with_capacity(max_actions),
            ties: Vec::with_capacity(max_actions),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn multi_q(&self) -> &MultiQ {
        &self.mq
    }

    pub fn counters(&self) -> &VisitCounters {
        &self.counters
    }

    /// Completed episodes (drives episode-based step-size schedules).
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// ε-greedy over the estimator-sum scores at `s`. Counts the state visit
    /// first, so count-based exploration sees the visit being decided.
    pub fn act(&mut self, s: StateId, rng: &mut RngStream) -> ActionId {
        let n_valid = self.actions_per_state[s];
        let visits = self.counters.visit_state(s);
        let eps = self.cfg.exploration.epsilon(visits);
        self.mq.action_sums_into(s, n_valid, &mut self.sums);
        epsilon_greedy(&self.sums, eps, rng, &mut self.ties)
    }

    /// Draws which estimator(s) the next update touches. Asynchronous modes
    /// consume exactly one integer draw — even with a single estimator — so
    /// that ensemble sizes replay interchangeably; synchronized mode consumes
    /// none. Call between action selection and the environment step.
    pub fn pre_update_draw(&mut self, rng: &mut RngStream) -> UpdateSelector {
        match self.cfg.mode {
            UpdateMode::Async => UpdateSelector::One(rng.uniform_int(self.cfg.n_estimators)),
            UpdateMode::Sync => UpdateSelector::All,
        }
    }

    /// Applies the update for the observed transition. `rng` is consumed only
    /// by double Q-learning's target tie-break (exactly one integer draw on
    /// non-terminal transitions, none on terminal ones).
    pub fn apply_update(
        &mut self,
        s: StateId,
        a: ActionId,
        sel: UpdateSelector,
        outcome: TransitionOutcome,
        rng: &mut RngStream,
    ) {
        if self.cfg.kind == AlgorithmKind::DoubleQ {
            let UpdateSelector::One(i) = sel else {
                unreachable!("double Q-learning validates to asynchronous mode");
            };
            self.double_q_update(s, a, i, outcome, rng);
            return;
        }
        // The target snapshot is taken before any table changes, so in
        // synchronized mode every estimator sees the same bootstrap value.
        let target = match outcome.next {
            None => 0.0,
            Some(s2) => bootstrap(self.cfg.kind, &self.mq, s2, self.actions_per_state[s2]),
        };
        match sel {
            UpdateSelector::One(i) => self.single_update(i, s, a, outcome.reward, target),
            UpdateSelector::All => {
                for i in 0..self.cfg.n_estimators {
                    self.single_update(i, s, a, outcome.reward, target);
                }
            }
        }
    }

    fn single_update(&mut self, i: usize, s: StateId, a: ActionId, r: f64, target_v: f64) {
        let count = self.counters.record_update(i, s, a);
        let alpha = self.cfg.step_size.step_size(count, self.episode);
        let q = self.mq.table(i).get(s, a);
        // Reward and shift are summed first so the two-player replay of the
        // same stream (which observes the shift inside the reward) computes a
        // bit-identical value.
        let shifted_r = r + self.mq.shifts()[i];
        let new = q + alpha * (shifted_r + self.cfg.gamma * target_v - q);
        self.mq.table_mut(i).set(s, a, new);
    }

    fn double_q_update(
        &mut self,
        s: StateId,
        a: ActionId,
        i: usize,
        outcome: TransitionOutcome,
        rng: &mut RngStream,
    ) {
        let j = 1 - i;
        let count = self.counters.record_update(i, s, a);
        let alpha = self.cfg.step_size.step_size(count, self.episode);
        let target = match outcome.next {
            None => outcome.reward,
            Some(s2) => {
                let n_valid = self.actions_per_state[s2];
                self.mq.table(i).argmax_set_into(s2, n_valid, &mut self.ties);
                // One integer draw even for a unique argmax, per the contract.
                let a_star = self.ties[rng.uniform_int(self.ties.len())];
                outcome.reward + self.cfg.gamma * self.mq.table(j).get(s2, a_star)
            }
        };
        let q = self.mq.table(i).get(s, a);
        let new = q + alpha * (target - q);
        self.mq.table_mut(i).set(s, a, new);
    }

    /// Marks the current episode finished; episode-based schedules advance.
    pub fn finish_episode(&mut self) {
        self.episode += 1;
    }
}

/// Ensemble bootstrap value at `s` over its first `n_valid` actions:
/// plain Q-learning takes `max_a Q_0`, the maxmin family takes
/// `max_a min_i Q_i`, the minmax family takes `min_i max_a Q_i`.
///
/// Double Q-learning resolves its target inside the update step (it needs a
/// tie-break draw), so it has no ensemble bootstrap here.
pub fn bootstrap(kind: AlgorithmKind, mq: &MultiQ, s: StateId, n_valid: usize) -> f64 {
    debug_assert!(n_valid >= 1);
    match kind {
        AlgorithmKind::QLearning => mq.table(0).max_over(s, n_valid),
        AlgorithmKind::Maxmin | AlgorithmKind::DaqMaxmin => {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_valid {
                let mut low = f64::INFINITY;
                for i in 0..mq.n_estimators() {
                    low = low.min(mq.table(i).get(s, a));
                }
                best = best.max(low);
            }
            best
        }
        AlgorithmKind::Minmax | AlgorithmKind::DaqMinmax => {
            let mut outer = f64::INFINITY;
            for i in 0..mq.n_estimators() {
                outer = outer.min(mq.table(i).max_over(s, n_valid));
            }
            outer
        }
        AlgorithmKind::DoubleQ => {
            unreachable!("double Q-learning's target lives in its update rule")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Env, GridVariant};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn daq_cfg(gamma: f64) -> AgentConfig {
        AgentConfig::new(AlgorithmKind::DaqMaxmin, gamma).with_shifts(vec![-5.0, -10.0])
    }

    #[test]
    fn config_validation() {
        assert!(daq_cfg(0.95).validate().is_ok());
        // Wrong estimator counts.
        assert!(AgentConfig::new(AlgorithmKind::QLearning, 0.9)
            .with_estimators(2)
            .validate()
            .is_err());
        assert!(AgentConfig::new(AlgorithmKind::DoubleQ, 0.9)
            .with_estimators(3)
            .validate()
            .is_err());
        // Shifts on unshifted kinds.
        assert!(AgentConfig::new(AlgorithmKind::Maxmin, 0.9)
            .with_shifts(vec![-1.0, 0.0])
            .validate()
            .is_err());
        // Double Q-learning cannot synchronize.
        assert!(AgentConfig::new(AlgorithmKind::DoubleQ, 0.9)
            .with_mode(UpdateMode::Sync)
            .validate()
            .is_err());
        // Synchronized + zero shifts + zero init is degenerate…
        assert!(AgentConfig::new(AlgorithmKind::Maxmin, 0.9)
            .with_mode(UpdateMode::Sync)
            .validate()
            .is_err());
        // …but uniform init or nonzero shifts fix it.
        assert!(AgentConfig::new(AlgorithmKind::Maxmin, 0.9)
            .with_mode(UpdateMode::Sync)
            .with_init(InitScheme::Uniform { lo: -1.0, hi: 1.0 })
            .validate()
            .is_ok());
        assert!(daq_cfg(0.95).with_mode(UpdateMode::Sync).validate().is_ok());
        // Bad discounts and init ranges.
        assert!(daq_cfg(1.5).validate().is_err());
        assert!(daq_cfg(0.9)
            .with_init(InitScheme::Uniform { lo: 1.0, hi: 1.0 })
            .validate()
            .is_err());
    }

    #[test]
    fn bootstrap_two_estimator_example() {
        // Q_0 row: [1, 0]; Q_1 row: [0, 2].
        let mut mq = MultiQ::zeros(1, 2, vec![0.0, 0.0]);
        mq.table_mut(0).set(0, 0, 1.0);
        mq.table_mut(1).set(0, 1, 2.0);
        // Per-action minima are [0, 0] → maxmin target 0.
        assert_eq!(bootstrap(AlgorithmKind::DaqMaxmin, &mq, 0, 2), 0.0);
        // Per-estimator maxima are [1, 2] → minmax target 1.
        assert_eq!(bootstrap(AlgorithmKind::DaqMinmax, &mq, 0, 2), 1.0);
        assert_eq!(bootstrap(AlgorithmKind::QLearning, &mq, 0, 2), 1.0);
    }

    #[test]
    fn terminal_update_keeps_shift_and_drops_bootstrap() {
        let mut rng = RngStream::seed_from(7);
        // Plain Q-learning, α = 0.1, terminal reward +5 from zero: → 0.5.
        let cfg = AgentConfig::new(AlgorithmKind::QLearning, 1.0);
        let mut agent = Agent::new(cfg, vec![2, 2], &mut rng).unwrap();
        let sel = agent.pre_update_draw(&mut rng);
        agent.apply_update(
            0,
            1,
            sel,
            TransitionOutcome {
                next: None,
                reward: 5.0,
            },
            &mut rng,
        );
        assert_eq!(agent.multi_q().table(0).get(0, 1), 0.5);

        // Shifted ensemble: the shift still applies on terminal steps.
        let mut agent = Agent::new(daq_cfg(0.95), vec![2, 2], &mut rng).unwrap();
        agent.apply_update(
            0,
            0,
            UpdateSelector::One(1),
            TransitionOutcome {
                next: None,
                reward: 5.0,
            },
            &mut rng,
        );
        // α·(r + b_1) = 0.1·(5 − 10) = −0.5.
        assert_eq!(agent.multi_q().table(1).get(0, 0), -0.5);
        assert_eq!(agent.multi_q().table(0).get(0, 0), 0.0);
    }

    #[test]
    fn nonterminal_update_bootstraps_through_the_ensemble() {
        let mut rng = RngStream::seed_from(8);
        let mut agent = Agent::new(daq_cfg(0.95), vec![2, 2], &mut rng).unwrap();
        // Prime state 1 so the maxmin target there is 0.4 = max(min(1, .4), min(0, 2)).
        agent.mq.table_mut(0).set(1, 0, 1.0);
        agent.mq.table_mut(1).set(1, 0, 0.4);
        agent.mq.table_mut(1).set(1, 1, 2.0);
        agent.apply_update(
            0,
            1,
            UpdateSelector::One(0),
            TransitionOutcome {
                next: Some(1),
                reward: 2.0,
            },
            &mut rng,
        );
        // 0 + 0.1·(2 − 5 + 0.95·0.4) = −0.262.
        assert_relative_eq!(
            agent.multi_q().table(0).get(0, 1),
            -0.262,
            max_relative = 1e-12
        );
    }

    #[test]
    fn async_draw_is_uniform_and_sync_draws_nothing() {
        let mut rng = RngStream::seed_from(9);
        let mut agent = Agent::new(daq_cfg(0.95), vec![2], &mut rng).unwrap();
        let mut counts = [0u32; 2];
        for _ in 0..4000 {
            match agent.pre_update_draw(&mut rng) {
                UpdateSelector::One(i) => counts[i] += 1,
                UpdateSelector::All => panic!("asynchronous mode must pick one"),
            }
        }
        assert!(counts.iter().all(|&c| c > 1850), "counts {counts:?}");

        let mut rng = RngStream::seed_from(10);
        let mut twin = RngStream::seed_from(10);
        let mut sync_agent = Agent::new(
            daq_cfg(0.95).with_mode(UpdateMode::Sync),
            vec![2],
            &mut rng,
        )
        .unwrap();
        assert_eq!(sync_agent.pre_update_draw(&mut rng), UpdateSelector::All);
        // Construction consumed no draws (zero init) and neither did the
        // selector: the streams still agree.
        assert_eq!(rng.next_u64(), twin.next_u64());
    }

    #[test]
    fn sync_updates_every_estimator_from_one_snapshot() {
        let mut rng = RngStream::seed_from(11);
        let mut agent = Agent::new(
            daq_cfg(0.95).with_mode(UpdateMode::Sync),
            vec![2, 2],
            &mut rng,
        )
        .unwrap();
        agent.mq.table_mut(0).set(1, 0, 1.0);
        agent.mq.table_mut(1).set(1, 0, 0.4);
        agent.apply_update(
            0,
            0,
            UpdateSelector::All,
            TransitionOutcome {
                next: Some(1),
                reward: 2.0,
            },
            &mut rng,
        );
        // Shared snapshot target 0.4; estimator 0: 0.1·(2 − 5 + 0.38) = −0.262,
        // estimator 1: 0.1·(2 − 10 + 0.38) = −0.762.
        assert_relative_eq!(agent.mq.table(0).get(0, 0), -0.262, max_relative = 1e-12);
        assert_relative_eq!(agent.mq.table(1).get(0, 0), -0.762, max_relative = 1e-12);
        assert_eq!(agent.counters().update_count(0, 0, 0), 1);
        assert_eq!(agent.counters().update_count(1, 0, 0), 1);
    }

    #[test]
    fn double_q_bootstraps_through_the_other_estimator() {
        // Seed chosen so the estimator draw picks i = 0.
        let seed = (0..u64::MAX)
            .find(|&s| RngStream::seed_from(s).uniform_int(2) == 0)
            .unwrap();
        let mut rng = RngStream::seed_from(seed);
        let cfg = AgentConfig::new(AlgorithmKind::DoubleQ, 0.95);
        let mut agent = Agent::new(cfg, vec![2, 2], &mut rng).unwrap();
        // At the successor state 1: Q_0 = [2, 0] (unique argmax 0), Q_1(1, 0) = 7.
        agent.mq.table_mut(0).set(1, 0, 2.0);
        agent.mq.table_mut(1).set(1, 0, 7.0);
        agent.mq.table_mut(1).set(1, 1, 100.0); // must not be consulted
        let sel = agent.pre_update_draw(&mut rng);
        assert_eq!(sel, UpdateSelector::One(0));
        agent.apply_update(
            0,
            0,
            sel,
            TransitionOutcome {
                next: Some(1),
                reward: 1.0,
            },
            &mut rng,
        );
        // 0.1·(1 + 0.95·7) = 0.765.
        assert_relative_eq!(agent.mq.table(0).get(0, 0), 0.765, max_relative = 1e-12);
        assert_eq!(agent.mq.table(1).get(0, 0), 0.0);
    }

    #[test]
    fn double_q_tie_draw_accounting() {
        let cfg = AgentConfig::new(AlgorithmKind::DoubleQ, 0.95);
        // Non-terminal: exactly one tie-break draw even for a unique argmax.
        let mut rng = RngStream::seed_from(21);
        let mut agent = Agent::new(cfg.clone(), vec![2, 2], &mut rng).unwrap();
        agent.mq.table_mut(0).set(1, 1, 3.0);
        let sel = agent.pre_update_draw(&mut rng);
        let mut twin = rng.clone();
        agent.apply_update(
            0,
            0,
            sel,
            TransitionOutcome {
                next: Some(1),
                reward: 0.0,
            },
            &mut rng,
        );
        twin.next_u64();
        assert_eq!(rng.next_u64(), twin.next_u64());

        // Terminal: no draw at all.
        let mut rng = RngStream::seed_from(22);
        let mut agent = Agent::new(cfg, vec![2, 2], &mut rng).unwrap();
        let sel = agent.pre_update_draw(&mut rng);
        let mut twin = rng.clone();
        agent.apply_update(
            0,
            0,
            sel,
            TransitionOutcome {
                next: None,
                reward: 1.0,
            },
            &mut rng,
        );
        assert_eq!(rng.next_u64(), twin.next_u64());
    }

    /// Drives one agent for `steps` environment transitions and returns it.
    fn rollout(env: &Env, cfg: AgentConfig, seed: u64, steps: usize) -> Agent {
        let mut rng = RngStream::seed_from(seed);
        let mut agent = Agent::new(cfg, env.actions_per_state(), &mut rng).unwrap();
        let mut s = env.start();
        for _ in 0..steps {
            let a = agent.act(s, &mut rng);
            let sel = agent.pre_update_draw(&mut rng);
            let out = env.step(s, a, &mut rng);
            agent.apply_update(s, a, sel, out, &mut rng);
            s = match out.next {
                Some(s2) => s2,
                None => {
                    agent.finish_episode();
                    env.start()
                }
            };
        }
        agent
    }

    #[test]
    fn single_estimator_ensembles_replay_plain_q_learning_bitwise() {
        let env = Env::sutton(8, -0.1).unwrap();
        let q = rollout(&env, AgentConfig::new(AlgorithmKind::QLearning, 1.0), 5, 400);
        for kind in [
            AlgorithmKind::Maxmin,
            AlgorithmKind::Minmax,
            AlgorithmKind::DaqMaxmin,
            AlgorithmKind::DaqMinmax,
        ] {
            let cfg = AgentConfig::new(kind, 1.0).with_estimators(1);
            let other = rollout(&env, cfg, 5, 400);
            let lhs: Vec<u64> = q.multi_q().table(0).values().iter().map(|v| v.to_bits()).collect();
            let rhs: Vec<u64> =
                other.multi_q().table(0).values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(lhs, rhs, "{kind:?} with one estimator diverged");
        }
    }

    #[test]
    fn synchronized_equal_shifts_keep_estimators_identical() {
        let env = Env::grid(GridVariant::NoisyStep);
        let cfg = AgentConfig::new(AlgorithmKind::DaqMaxmin, 0.95)
            .with_shifts(vec![-3.0, -3.0])
            .with_mode(UpdateMode::Sync);
        let agent = rollout(&env, cfg, 13, 2000);
        let a: Vec<u64> = agent.multi_q().table(0).values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = agent.multi_q().table(1).values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn shift_moved_into_the_reward_changes_nothing() {
        // Only the sum r + b_i enters an update, so raising every shift by c
        // while lowering every observed reward by c must reproduce the same
        // learning trajectory (up to rounding in the regrouped sum).
        let env = Env::grid(GridVariant::NoisyStep);
        let base = rollout(&env, daq_cfg(0.95), 17, 1500);
        let c = 2.5;
        let cfg = daq_cfg(0.95).with_shifts(vec![-5.0 + c, -10.0 + c]);
        let mut rng = RngStream::seed_from(17);
        let mut agent = Agent::new(cfg, env.actions_per_state(), &mut rng).unwrap();
        let mut s = env.start();
        for _ in 0..1500 {
            let a = agent.act(s, &mut rng);
            let sel = agent.pre_update_draw(&mut rng);
            let mut out = env.step(s, a, &mut rng);
            out.reward -= c;
            agent.apply_update(s, a, sel, out, &mut rng);
            s = match out.next {
                Some(s2) => s2,
                None => {
                    agent.finish_episode();
                    env.start()
                }
            };
        }
        for i in 0..2 {
            for (x, y) in base
                .multi_q()
                .table(i)
                .values()
                .iter()
                .zip(agent.multi_q().table(i).values())
            {
                assert_relative_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn count_based_exploration_sees_the_current_visit() {
        let mut rng = RngStream::seed_from(30);
        let cfg = AgentConfig::new(AlgorithmKind::QLearning, 1.0)
            .with_exploration(ExplorationSchedule::CountBased);
        let mut agent = Agent::new(cfg, vec![3], &mut rng).unwrap();
        // First visit: ε = 1/√1 = 1, so the action comes from the uniform
        // branch — replay the draw pair to prove it.
        let mut twin = rng.clone();
        let a = agent.act(0, &mut rng);
        let _gate = twin.uniform_f64(); // always below ε = 1
        assert_eq!(a, twin.uniform_int(3));
        assert_eq!(agent.counters().state_count(0), 1);
    }

    #[test]
    fn finish_episode_advances_episode_schedules() {
        let mut rng = RngStream::seed_from(31);
        let cfg = AgentConfig::new(AlgorithmKind::QLearning, 1.0)
            .with_step_size(StepSizeSchedule::EpisodeHarmonic { c: 10.0, d: 100.0 });
        let mut agent = Agent::new(cfg, vec![1, 1], &mut rng).unwrap();
        let done = TransitionOutcome {
            next: None,
            reward: 1.0,
        };
        let sel = agent.pre_update_draw(&mut rng);
        agent.apply_update(0, 0, sel, done, &mut rng);
        // Episode 0: α = 10/100 → value 0.1.
        assert_relative_eq!(agent.mq.table(0).get(0, 0), 0.1, max_relative = 1e-12);
        agent.finish_episode();
        assert_eq!(agent.episode(), 1);
        let sel = agent.pre_update_draw(&mut rng);
        agent.apply_update(1, 0, sel, done, &mut rng);
        // Episode 1: α = 10/101.
        assert_relative_eq!(
            agent.mq.table(0).get(1, 0),
            10.0 / 101.0,
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn bootstrap_matches_enumeration(
            n in 1usize..4,
            n_valid in 1usize..5,
            values in proptest::collection::vec(-10.0f64..10.0, 3 * 5),
        ) {
            let mut mq = MultiQ::zeros(1, 5, vec![0.0; n]);
            for i in 0..n {
                for a in 0..5 {
                    mq.table_mut(i).set(0, a, values[(i % 3) * 5 + a]);
                }
            }
            let naive_maxmin = (0..n_valid)
                .map(|a| {
                    (0..n)
                        .map(|i| mq.table(i).get(0, a))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let naive_minmax = (0..n)
                .map(|i| {
                    (0..n_valid)
                        .map(|a| mq.table(i).get(0, a))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(bootstrap(AlgorithmKind::DaqMaxmin, &mq, 0, n_valid), naive_maxmin);
            prop_assert_eq!(bootstrap(AlgorithmKind::Maxmin, &mq, 0, n_valid), naive_maxmin);
            prop_assert_eq!(bootstrap(AlgorithmKind::DaqMinmax, &mq, 0, n_valid), naive_minmax);
            prop_assert_eq!(bootstrap(AlgorithmKind::Minmax, &mq, 0, n_valid), naive_minmax);
            // The two orders always satisfy max-of-min ≤ min-of-max.
            prop_assert!(naive_maxmin <= naive_minmax);
        }

        #[test]
        fn discounted_iterates_stay_bounded(
            seed in 0u64..1000,
            steps in 1usize..300,
        ) {
            // Rewards in [−1, 1], shifts in [−2, 2], γ = 0.9 ⇒ iterates from
            // zero can never leave ±(1 + 2)/(1 − 0.9) = ±30.
            let mut rng = RngStream::seed_from(seed);
            let cfg = AgentConfig::new(AlgorithmKind::DaqMaxmin, 0.9)
                .with_shifts(vec![2.0, -2.0]);
            let mut agent = Agent::new(cfg, vec![3, 3, 3], &mut rng).unwrap();
            for _ in 0..steps {
                let s = rng.uniform_int(3);
                let a = agent.act(s, &mut rng);
                let sel = agent.pre_update_draw(&mut rng);
                let next = if rng.uniform_f64() < 0.2 {
                    None
                } else {
                    Some(rng.uniform_int(3))
                };
                let reward = rng.uniform_f64() * 2.0 - 1.0;
                agent.apply_update(s, a, sel, TransitionOutcome { next, reward }, &mut rng);
            }
            for i in 0..2 {
                for &v in agent.multi_q().table(i).values() {
                    prop_assert!(v.abs() <= 30.0 + 1e-9, "value {v} escaped the bound");
                }
            }
        }
    }
}
