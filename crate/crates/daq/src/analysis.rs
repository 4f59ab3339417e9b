//! Exact oracles: value iteration on expected models, greedy-policy
//! extraction, the reward-shift bias identity check, and the finite-time
//! error bound.

use crate::envs::TabularMdp;
use crate::error::DaqError;
use crate::table::{ActionId, QTable, StateId};

/// Converged action values plus convergence metadata.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub q: QTable,
    /// Lowest-index maximizing action per state.
    pub policy: Vec<ActionId>,
    pub iterations: u64,
    pub residual: f64,
}

/// Value iteration for `Q(s, a) = R(s, a) + shift + γ·E[max_a' Q(s', a')]`.
///
/// The shift models a constant added to every reward of the *continuing*
/// chain: for γ < 1, episode termination is absorption into a zero-reward
/// state whose shifted value is `shift / (1 − γ)`, so every entry of the
/// solution moves by exactly `shift / (1 − γ)`. For γ = 1 the chain must be
/// episodic (a terminating transition reachable from every state) and the
/// shift is collected only until termination; divergent cases (for example a
/// positive shift that makes looping profitable) surface as `NoConvergence`.
///
/// Entries for invalid actions (`a ≥ n_actions_at(s)`) are left at zero and
/// never read.
pub fn value_iteration(
    mdp: &TabularMdp,
    shift: f64,
    tol: f64,
    max_iter: u64,
) -> Result<OracleResult, DaqError> {
    mdp.validate()?;
    if !shift.is_finite() {
        return Err(DaqError::InvalidParam(format!(
            "reward shift must be finite, got {shift}"
        )));
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
    if gamma == 1.0 && !terminal_reachable_everywhere(mdp) {
        return Err(DaqError::InvalidParam(
            "undiscounted value iteration needs a terminating transition \
             reachable from every state"
                .into(),
        ));
    }
    let terminal_value = if gamma < 1.0 { shift / (1.0 - gamma) } else { 0.0 };

    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let mut q = QTable::zeros(n_states, n_actions);
    let mut next = QTable::zeros(n_states, n_actions);
    let mut v = vec![0.0; n_states];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < max_iter {
        iterations += 1;
        for (s, value) in v.iter_mut().enumerate() {
            *value = q.max_over(s, mdp.n_actions_at(s));
        }
        residual = 0.0;
        for s in 0..n_states {
            for a in 0..mdp.n_actions_at(s) {
                let row = mdp.transition_row(s, a);
                let mut expected = row[n_states] * terminal_value;
                for (s2, &p) in row[..n_states].iter().enumerate() {
                    expected += p * v[s2];
                }
                let value = mdp.expected_reward(s, a) + shift + gamma * expected;
                residual = residual.max((value - q.get(s, a)).abs());
                next.set(s, a, value);
            }
        }
        std::mem::swap(&mut q, &mut next);
        if residual < tol {
            let policy = (0..n_states)
                .map(|s| first_argmax(&q, s, mdp.n_actions_at(s)))
                .collect();
            return Ok(OracleResult {
                q,
                policy,
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

fn first_argmax(q: &QTable, s: StateId, n_valid: usize) -> ActionId {
    let mut best = 0;
    for a in 1..n_valid {
        if q.get(s, a) > q.get(s, best) {
            best = a;
        }
    }
    best
}

/// True when every state can reach a terminating transition under some
/// action sequence.
fn terminal_reachable_everywhere(mdp: &TabularMdp) -> bool {
    let n = mdp.n_states();
    let mut reach = vec![false; n];
    loop {
        let mut changed = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            'actions: for a in 0..mdp.n_actions_at(s) {
                let row = mdp.transition_row(s, a);
                if row[n] > 0.0 {
                    reach[s] = true;
                    changed = true;
                    break 'actions;
                }
                for (s2, &p) in row[..n].iter().enumerate() {
                    if p > 0.0 && reach[s2] {
                        reach[s] = true;
                        changed = true;
                        break 'actions;
                    }
                }
            }
        }
        if !changed {
            return reach.iter().all(|&r| r);
        }
    }
}

/// Per-state sets of actions within `tie_eps` of the state's best value.
pub fn greedy_policy(
    q: &QTable,
    actions_per_state: &[usize],
    tie_eps: f64,
) -> Vec<Vec<ActionId>> {
    assert_eq!(actions_per_state.len(), q.n_states());
    actions_per_state
        .iter()
        .enumerate()
        .map(|(s, &n_valid)| {
            let best = q.max_over(s, n_valid);
            (0..n_valid).filter(|&a| q.get(s, a) >= best - tie_eps).collect()
        })
        .collect()
}

/// Outcome of checking `Q*_b = Q* + b/(1 − γ)` on an expected model.
#[derive(Clone, Debug)]
pub struct ShiftBiasReport {
    /// The predicted uniform offset `b / (1 − γ)`.
    pub offset: f64,
    /// Largest deviation from the predicted offset over valid entries.
    pub max_offset_error: f64,
    /// Whether shifted and unshifted greedy action sets coincide everywhere.
    pub argmax_match: bool,
    /// `max_offset_error <= tol && argmax_match`.
    pub passed: bool,
}

const ORACLE_TOL: f64 = 1e-12;
const ORACLE_MAX_ITER: u64 = 1_000_000;
const GREEDY_TIE_EPS: f64 = 1e-9;

/// Verifies that shifting every reward by `b` moves the converged action
/// values by exactly `b / (1 − γ)` and leaves greedy action sets unchanged.
/// Requires γ < 1.
pub fn shift_bias_check(mdp: &TabularMdp, b: f64, tol: f64) -> Result<ShiftBiasReport, DaqError> {
    if mdp.gamma >= 1.0 {
        return Err(DaqError::InvalidParam(
            "the shift bias identity b/(1 − γ) needs γ < 1".into(),
        ));
    }
    let base = value_iteration(mdp, 0.0, ORACLE_TOL, ORACLE_MAX_ITER)?;
    let shifted = value_iteration(mdp, b, ORACLE_TOL, ORACLE_MAX_ITER)?;
    let offset = b / (1.0 - mdp.gamma);
    let mut max_offset_error: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions_at(s) {
            let err = (shifted.q.get(s, a) - base.q.get(s, a) - offset).abs();
            max_offset_error = max_offset_error.max(err);
        }
    }
    let argmax_match = greedy_policy(&base.q, mdp.actions_per_state(), GREEDY_TIE_EPS)
        == greedy_policy(&shifted.q, mdp.actions_per_state(), GREEDY_TIE_EPS);
    Ok(ShiftBiasReport {
        offset,
        max_offset_error,
        argmax_match,
        passed: max_offset_error <= tol && argmax_match,
    })
}

/// Inputs to the finite-time error bound.
///
/// `d_min`/`d_max` are the extremes of the effective update distribution:
/// over state–action–estimator triples for asynchronous updates (use
/// [`BoundParams::async_uniform`] to derive them from a state–action
/// distribution under uniform estimator choice), or over state–action pairs
/// alone for synchronized updates ([`BoundParams::sync`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub alpha: f64,
    pub gamma: f64,
    pub n_estimators: usize,
    pub size_sa: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub t: u64,
}

impl BoundParams {
    pub fn new(
        alpha: f64,
        gamma: f64,
        n_estimators: usize,
        size_sa: usize,
        d_min: f64,
        d_max: f64,
        t: u64,
    ) -> Result<Self, DaqError> {
        let p = Self {
            alpha,
            gamma,
            n_estimators,
            size_sa,
            d_min,
            d_max,
            t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Asynchronous updates with the estimator drawn uniformly: a behavior
    /// distribution with extremes `d_min_sa`/`d_max_sa` over state–action
    /// pairs induces extremes `d/N` over state–action–estimator triples.
    pub fn async_uniform(
        alpha: f64,
        gamma: f64,
        n_estimators: usize,
        size_sa: usize,
        d_min_sa: f64,
        d_max_sa: f64,
        t: u64,
    ) -> Result<Self, DaqError> {
        if n_estimators == 0 {
            return Err(DaqError::InvalidParam("need at least one estimator".into()));
        }
        let n = n_estimators as f64;
        Self::new(alpha, gamma, n_estimators, size_sa, d_min_sa / n, d_max_sa / n, t)
    }

    /// Synchronized updates touch every estimator each step, so the effective
    /// distribution is the state–action distribution itself.
    pub fn sync(
        alpha: f64,
        gamma: f64,
        n_estimators: usize,
        size_sa: usize,
        d_min_sa: f64,
        d_max_sa: f64,
        t: u64,
    ) -> Result<Self, DaqError> {
        Self::new(alpha, gamma, n_estimators, size_sa, d_min_sa, d_max_sa, t)
    }

    pub fn validate(&self) -> Result<(), DaqError> {
        let fail = |msg: String| Err(DaqError::InvalidParam(msg));
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("step size must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return fail(format!("discount must lie in [0, 1), got {}", self.gamma));
        }
        if self.n_estimators == 0 {
            return fail("need at least one estimator".into());
        }
        if self.size_sa == 0 {
            return fail("need at least one state-action pair".into());
        }
        if !(self.d_min.is_finite() && self.d_max.is_finite()) {
            return fail("distribution extremes must be finite".into());
        }
        if !(0.0 < self.d_min && self.d_min <= self.d_max && self.d_max <= 1.0) {
            return fail(format!(
                "need 0 < d_min <= d_max <= 1, got d_min={} d_max={}",
                self.d_min, self.d_max
            ));
        }
        Ok(())
    }

    /// Contraction factor `ρ = 1 − α·d_min·(1 − γ)`; inside (0, 1) whenever
    /// the parameters validate.
    pub fn rho(&self) -> f64 {
        1.0 - self.alpha * self.d_min * (1.0 - self.gamma)
    }
}

/// The three summands of the finite-time bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerms {
    /// Step-size floor: scales with √α and persists as t → ∞.
    pub term1: f64,
    /// Initialization decay: geometric with ratio ρ per step.
    pub term2: f64,
    /// Bootstrap-coupling decay: geometric with ratio √ρ per step.
    pub term3: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2 + self.term3
    }
}

/// Finite-time sup-norm error bound after `t` constant-step updates.
///
/// With ρ = 1 − α·d_min·(1 − γ), D = |S×A|, and N estimators:
///
/// - term1 = 27·d_max·D·N / (d_min^{3/2}·(1 − γ)^{5/2}) · √α
/// - term2 = 6·D^{3/2}·N^{3/2} / (1 − γ) · ρ^t
/// - term3 = 24·γ·d_max·D^{2/3}·N^{2/3} / (1 − γ) · 3/(d_min·(1 − γ)) · ρ^{t/2 − 1}
pub fn finite_time_bound(p: &BoundParams) -> Result<BoundTerms, DaqError> {
    p.validate()?;
    let rho = p.rho();
    let sa = p.size_sa as f64;
    let n = p.n_estimators as f64;
    let horizon = 1.0 - p.gamma;
    let t = p.t as f64;
    // √α is applied last so that quartering α scales term1 by exactly 1/2.
    let term1 =
        27.0 * p.d_max * sa * n / (p.d_min.powf(1.5) * horizon.powf(2.5)) * p.alpha.sqrt();
    let term2 = 6.0 * sa.powf(1.5) * n.powf(1.5) / horizon * rho.powf(t);
    let term3 = 24.0 * p.gamma * p.d_max * sa.powf(2.0 / 3.0) * n.powf(2.0 / 3.0) / horizon
        * (3.0 / (p.d_min * horizon))
        * rho.powf(t / 2.0 - 1.0);
    Ok(BoundTerms { term1, term2, term3 })
}
