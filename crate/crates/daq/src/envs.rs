//! The three benchmark environments and their expected-model views.
//!
//! Each environment is a small tabular MDP with a fixed start state and a
//! terminal absorption (`TransitionOutcome.next == None`). Valid actions at a
//! state are always the prefix `{0, …, n_actions(s)−1}` of the global action
//! set; learners and oracles must restrict maxima to that prefix.
//!
//! Per-step draw order is fixed and documented on [`Env::step`]: the
//! transition draw (if any) precedes the reward draw (if any).

use crate::error::DaqError;
use crate::rng::RngStream;
use crate::table::{ActionId, StateId, TransitionOutcome};

const GRID_SIDE: usize = 3;
const GRID_STATES: usize = GRID_SIDE * GRID_SIDE;
/// Lower-left corner, id = y·3 + x.
const GRID_START: StateId = 0;
/// Upper-right corner.
const GRID_GOAL: StateId = GRID_STATES - 1;

/// Reward noise placement for the grid task. Config codes: `h` = NoisyStep,
/// `w` = NoisyGoal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridVariant {
    /// Every non-terminal step pays −12 or +10 with equal probability
    /// (mean −1); any action taken at the goal terminates with +5.
    NoisyStep,
    /// Every non-terminal step pays −1; any action taken at the goal
    /// terminates with −35 or +45 with equal probability (mean +5).
    NoisyGoal,
}

/// A benchmark environment instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Env {
    /// 3×3 grid; start lower-left, goal upper-right; actions up/down/left/right
    /// (0–3), off-grid moves stay put; acting at the goal ends the episode.
    Grid { variant: GridVariant },
    /// Two-state chain: at A (state 0) `left` (0) moves to B (state 1) and
    /// `right` (1) terminates, both with reward 0; at B all `k` actions
    /// terminate with reward ~ Normal(μ, 1).
    Sutton { k: usize, mu: f64 },
    /// Loop chain: at state 0 `left` (0) jumps uniformly into {1, …, m} and
    /// `right` (1) terminates, both with reward 0; at inner states `right`
    /// returns to 0 and `left` terminates, both with reward ~ Normal(−0.1, 1).
    Weng { m: usize },
}

impl Env {
    pub fn grid(variant: GridVariant) -> Self {
        Env::Grid { variant }
    }

    pub fn sutton(k: usize, mu: f64) -> Result<Self, DaqError> {
        if k < 1 {
            return Err(DaqError::InvalidParam(
                "sutton chain needs at least one action at B".into(),
            ));
        }
        if !mu.is_finite() {
            return Err(DaqError::InvalidParam(format!(
                "sutton reward mean must be finite, got {mu}"
            )));
        }
        Ok(Env::Sutton { k, mu })
    }

    pub fn weng(m: usize) -> Result<Self, DaqError> {
        if m < 1 {
            return Err(DaqError::InvalidParam(
                "weng chain needs at least one inner state".into(),
            ));
        }
        Ok(Env::Weng { m })
    }

    pub fn n_states(&self) -> usize {
        match *self {
            Env::Grid { .. } => GRID_STATES,
            Env::Sutton { .. } => 2,
            Env::Weng { m } => m + 1,
        }
    }

    /// Global action-set size (the widest state's count).
    pub fn max_actions(&self) -> usize {
        match *self {
            Env::Grid { .. } => 4,
            Env::Sutton { k, .. } => k.max(2),
            Env::Weng { .. } => 2,
        }
    }

    /// Number of valid actions at `s` (always a prefix of the global set).
    pub fn n_actions(&self, s: StateId) -> usize {
        match *self {
            Env::Grid { .. } => 4,
            Env::Sutton { k, .. } => {
                if s == 0 {
                    2
                } else {
                    k
                }
            }
            Env::Weng { .. } => 2,
        }
    }

    pub fn actions_per_state(&self) -> Vec<usize> {
        (0..self.n_states()).map(|s| self.n_actions(s)).collect()
    }

    /// Episodes always begin here: the grid's lower-left corner, or the hub
    /// state of either chain.
    pub fn start(&self) -> StateId {
        match *self {
            Env::Grid { .. } => GRID_START,
            _ => 0,
        }
    }

    /// Conventional discount for the task: 0.95 for the grid, 1 for the
    /// episodic chains.
    pub fn default_gamma(&self) -> f64 {
        match *self {
            Env::Grid { .. } => 0.95,
            _ => 1.0,
        }
    }

    /// Samples one transition.
    ///
    /// Draw accounting (raw 64-bit outputs consumed):
    /// - grid NoisyStep: non-goal 1 (reward sign), goal 0;
    /// - grid NoisyGoal: non-goal 0, goal 1 (reward sign);
    /// - sutton: state A 0, state B 2 (one normal);
    /// - weng: state 0 `left` 1 (landing state), `right` 0; inner states 2
    ///   (one normal).
    ///
    /// Two-point rewards map `u < 0.5` to the lower value.
    pub fn step(&self, s: StateId, a: ActionId, rng: &mut RngStream) -> TransitionOutcome {
        debug_assert!(s < self.n_states() && a < self.n_actions(s));
        match *self {
            Env::Grid { variant } => {
                if s == GRID_GOAL {
                    let reward = match variant {
                        GridVariant::NoisyStep => 5.0,
                        GridVariant::NoisyGoal => {
                            if rng.uniform_f64() < 0.5 {
                                -35.0
                            } else {
                                45.0
                            }
                        }
                    };
                    return TransitionOutcome { next: None, reward };
                }
                let (x, y) = (s % GRID_SIDE, s / GRID_SIDE);
                let (nx, ny) = match a {
                    0 => (x, (y + 1).min(GRID_SIDE - 1)), // up
                    1 => (x, y.saturating_sub(1)),        // down
                    2 => (x.saturating_sub(1), y),        // left
                    _ => ((x + 1).min(GRID_SIDE - 1), y), // right
                };
                let reward = match variant {
                    GridVariant::NoisyStep => {
                        if rng.uniform_f64() < 0.5 {
                            -12.0
                        } else {
                            10.0
                        }
                    }
                    GridVariant::NoisyGoal => -1.0,
                };
                TransitionOutcome {
                    next: Some(ny * GRID_SIDE + nx),
                    reward,
                }
            }
            Env::Sutton { mu, .. } => {
                if s == 0 {
                    let next = if a == 0 { Some(1) } else { None };
                    TransitionOutcome { next, reward: 0.0 }
                } else {
                    TransitionOutcome {
                        next: None,
                        reward: mu + rng.standard_normal(),
                    }
                }
            }
            Env::Weng { m } => {
                if s == 0 {
                    if a == 0 {
                        TransitionOutcome {
                            next: Some(1 + rng.uniform_int(m)),
                            reward: 0.0,
                        }
                    } else {
                        TransitionOutcome {
                            next: None,
                            reward: 0.0,
                        }
                    }
                } else {
                    let reward = -0.1 + rng.standard_normal();
                    let next = if a == 0 { None } else { Some(0) };
                    TransitionOutcome { next, reward }
                }
            }
        }
    }

    /// Expected model: transition probabilities and mean rewards, with the
    /// task's conventional discount attached.
    pub fn expected_mdp(&self) -> TabularMdp {
        let mut mdp = TabularMdp::zeros(
            self.n_states(),
            self.max_actions(),
            self.actions_per_state(),
            self.default_gamma(),
        );
        match *self {
            Env::Grid { .. } => {
                for s in 0..GRID_STATES {
                    for a in 0..4 {
                        if s == GRID_GOAL {
                            mdp.set_transition(s, a, None, 1.0);
                            mdp.set_expected_reward(s, a, 5.0);
                        } else {
                            let (x, y) = (s % GRID_SIDE, s / GRID_SIDE);
                            let (nx, ny) = match a {
                                0 => (x, (y + 1).min(GRID_SIDE - 1)),
                                1 => (x, y.saturating_sub(1)),
                                2 => (x.saturating_sub(1), y),
                                _ => ((x + 1).min(GRID_SIDE - 1), y),
                            };
                            mdp.set_transition(s, a, Some(ny * GRID_SIDE + nx), 1.0);
                            mdp.set_expected_reward(s, a, -1.0);
                        }
                    }
                }
            }
            Env::Sutton { k, mu } => {
                mdp.set_transition(0, 0, Some(1), 1.0);
                mdp.set_expected_reward(0, 0, 0.0);
                mdp.set_transition(0, 1, None, 1.0);
                mdp.set_expected_reward(0, 1, 0.0);
                for a in 0..k {
                    mdp.set_transition(1, a, None, 1.0);
                    mdp.set_expected_reward(1, a, mu);
                }
            }
            Env::Weng { m } => {
                for inner in 1..=m {
                    mdp.set_transition(0, 0, Some(inner), 1.0 / m as f64);
                    mdp.set_transition(inner, 0, None, 1.0);
                    mdp.set_expected_reward(inner, 0, -0.1);
                    mdp.set_transition(inner, 1, Some(0), 1.0);
                    mdp.set_expected_reward(inner, 1, -0.1);
                }
                mdp.set_expected_reward(0, 0, 0.0);
                mdp.set_transition(0, 1, None, 1.0);
                mdp.set_expected_reward(0, 1, 0.0);
            }
        }
        mdp
    }
}

/// Dense expected model: `P(s, a, ·)` over successors plus a terminal column,
/// mean rewards `R(s, a)`, per-state valid-action counts, and a discount.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    actions_per_state: Vec<usize>,
    pub gamma: f64,
    /// Row-major `(s, a)` rows of length `n_states + 1`; the last column is
    /// the terminal absorption probability.
    p: Vec<f64>,
    r: Vec<f64>,
}

impl TabularMdp {
    pub fn zeros(
        n_states: usize,
        n_actions: usize,
        actions_per_state: Vec<usize>,
        gamma: f64,
    ) -> Self {
        assert_eq!(actions_per_state.len(), n_states);
        assert!(actions_per_state.iter().all(|&c| c >= 1 && c <= n_actions));
        Self {
            n_states,
            n_actions,
            actions_per_state,
            gamma,
            p: vec![0.0; n_states * n_actions * (n_states + 1)],
            r: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_actions_at(&self, s: StateId) -> usize {
        self.actions_per_state[s]
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    #[inline]
    fn row_index(&self, s: StateId, a: ActionId) -> usize {
        (s * self.n_actions + a) * (self.n_states + 1)
    }

    pub fn set_transition(&mut self, s: StateId, a: ActionId, next: Option<StateId>, prob: f64) {
        let col = next.unwrap_or(self.n_states);
        let idx = self.row_index(s, a) + col;
        self.p[idx] = prob;
    }

    pub fn transition_prob(&self, s: StateId, a: ActionId, next: Option<StateId>) -> f64 {
        let col = next.unwrap_or(self.n_states);
        self.p[self.row_index(s, a) + col]
    }

    /// Successor-probability row for `(s, a)`: `n_states` entries then the
    /// terminal column.
    pub fn transition_row(&self, s: StateId, a: ActionId) -> &[f64] {
        let idx = self.row_index(s, a);
        &self.p[idx..idx + self.n_states + 1]
    }

    pub fn set_expected_reward(&mut self, s: StateId, a: ActionId, r: f64) {
        self.r[s * self.n_actions + a] = r;
    }

    pub fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.r[s * self.n_actions + a]
    }

    /// Checks that every valid `(s, a)` row is a probability distribution.
    pub fn validate(&self) -> Result<(), DaqError> {
        for s in 0..self.n_states {
            for a in 0..self.actions_per_state[s] {
                let row = self.transition_row(s, a);
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(DaqError::InvalidParam(format!(
                        "transition probabilities for ({s}, {a}) outside [0, 1]"
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(DaqError::InvalidParam(format!(
                        "transition row for ({s}, {a}) sums to {total}"
                    )));
                }
            }
        }
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return Err(DaqError::InvalidParam(format!(
                "discount must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry_and_termination() {
        let env = Env::grid(GridVariant::NoisyGoal);
        assert_eq!(env.n_states(), 9);
        assert_eq!(env.start(), 0);
        let mut rng = RngStream::seed_from(1);

        // Off-grid moves stay put: down and left from the start corner.
        for a in [1, 2] {
            let out = env.step(0, a, &mut rng);
            assert_eq!(out.next, Some(0));
            assert_eq!(out.reward, -1.0);
        }
        // up from (0,0) lands on (0,1) = state 3; right lands on state 1.
        assert_eq!(env.step(0, 0, &mut rng).next, Some(3));
        assert_eq!(env.step(0, 3, &mut rng).next, Some(1));
        // Every action at the goal terminates.
        for a in 0..4 {
            let out = env.step(8, a, &mut rng);
            assert_eq!(out.next, None);
            assert!(out.reward == -35.0 || out.reward == 45.0);
        }
    }

    #[test]
    fn grid_noisy_step_rewards() {
        let env = Env::grid(GridVariant::NoisyStep);
        let mut rng = RngStream::seed_from(2);
        let (mut lo, mut hi) = (0, 0);
        for _ in 0..1000 {
            let out = env.step(4, 0, &mut rng);
            match out.reward {
                -12.0 => lo += 1,
                10.0 => hi += 1,
                r => panic!("unexpected step reward {r}"),
            }
        }
        assert!(lo > 400 && hi > 400, "lo={lo} hi={hi}");
        assert_eq!(env.step(8, 2, &mut rng).reward, 5.0);
    }

    #[test]
    fn sutton_structure() {
        let env = Env::sutton(8, -0.1).unwrap();
        assert_eq!(env.n_states(), 2);
        assert_eq!(env.max_actions(), 8);
        assert_eq!(env.n_actions(0), 2);
        assert_eq!(env.n_actions(1), 8);
        let mut rng = RngStream::seed_from(3);
        // A-right terminates with zero reward, A-left reaches B with zero reward.
        assert_eq!(
            env.step(0, 1, &mut rng),
            TransitionOutcome {
                next: None,
                reward: 0.0
            }
        );
        assert_eq!(
            env.step(0, 0, &mut rng),
            TransitionOutcome {
                next: Some(1),
                reward: 0.0
            }
        );
        let mut sum = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let out = env.step(1, 5, &mut rng);
            assert_eq!(out.next, None);
            sum += out.reward;
        }
        let mean = sum / n as f64;
        assert!((mean + 0.1).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn weng_structure() {
        let env = Env::weng(8).unwrap();
        assert_eq!(env.n_states(), 9);
        let mut rng = RngStream::seed_from(4);
        assert_eq!(
            env.step(0, 1, &mut rng),
            TransitionOutcome {
                next: None,
                reward: 0.0
            }
        );
        for _ in 0..500 {
            let out = env.step(0, 0, &mut rng);
            let s = out.next.unwrap();
            assert!((1..=8).contains(&s));
            assert_eq!(out.reward, 0.0);
        }
        // Inner states: right returns to the hub, left terminates.
        assert_eq!(env.step(3, 1, &mut rng).next, Some(0));
        assert_eq!(env.step(3, 0, &mut rng).next, None);
    }

    #[test]
    fn step_consumes_documented_draw_counts() {
        let cases: Vec<(Env, StateId, ActionId, usize)> = vec![
            (Env::grid(GridVariant::NoisyStep), 4, 0, 1),
            (Env::grid(GridVariant::NoisyStep), 8, 0, 0),
            (Env::grid(GridVariant::NoisyGoal), 4, 0, 0),
            (Env::grid(GridVariant::NoisyGoal), 8, 0, 1),
            (Env::sutton(8, -0.1).unwrap(), 0, 0, 0),
            (Env::sutton(8, -0.1).unwrap(), 1, 3, 2),
            (Env::weng(8).unwrap(), 0, 0, 1),
            (Env::weng(8).unwrap(), 0, 1, 0),
            (Env::weng(8).unwrap(), 2, 1, 2),
        ];
        for (env, s, a, draws) in cases {
            let mut rng = RngStream::seed_from(99);
            let mut twin = RngStream::seed_from(99);
            env.step(s, a, &mut rng);
            for _ in 0..draws {
                twin.next_u64();
            }
            assert_eq!(
                rng.next_u64(),
                twin.next_u64(),
                "draw count mismatch for {env:?} at ({s}, {a})"
            );
        }
    }

    #[test]
    fn expected_models_are_distributions() {
        for env in [
            Env::grid(GridVariant::NoisyStep),
            Env::grid(GridVariant::NoisyGoal),
            Env::sutton(8, -0.1).unwrap(),
            Env::weng(8).unwrap(),
        ] {
            env.expected_mdp().validate().unwrap();
        }
    }

    #[test]
    fn expected_model_spot_checks() {
        let grid = Env::grid(GridVariant::NoisyStep).expected_mdp();
        assert_eq!(grid.gamma, 0.95);
        assert_eq!(grid.expected_reward(0, 0), -1.0); // noisy ±(−12, +10) averages −1
        assert_eq!(grid.expected_reward(8, 2), 5.0);
        assert_eq!(grid.transition_prob(8, 1, None), 1.0);
        assert_eq!(grid.transition_prob(0, 3, Some(1)), 1.0);

        let weng = Env::weng(4).unwrap().expected_mdp();
        assert_eq!(weng.gamma, 1.0);
        for inner in 1..=4 {
            assert_eq!(weng.transition_prob(0, 0, Some(inner)), 0.25);
        }
        assert_eq!(weng.transition_prob(2, 1, Some(0)), 1.0);
        assert_eq!(weng.expected_reward(2, 1), -0.1);

        let sutton = Env::sutton(8, 0.1).unwrap().expected_mdp();
        assert_eq!(sutton.transition_prob(0, 0, Some(1)), 1.0);
        assert_eq!(sutton.expected_reward(1, 7), 0.1);
    }

    #[test]
    fn grid_variants_share_the_expected_model() {
        let h = Env::grid(GridVariant::NoisyStep).expected_mdp();
        let w = Env::grid(GridVariant::NoisyGoal).expected_mdp();
        assert_eq!(h, w);
    }

    #[test]
    fn constructor_validation() {
        assert!(Env::sutton(0, -0.1).is_err());
        assert!(Env::sutton(8, f64::NAN).is_err());
        assert!(Env::weng(0).is_err());
        assert!(Env::weng(1).is_ok());
    }
}
