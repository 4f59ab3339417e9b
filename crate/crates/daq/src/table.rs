//! Q-value storage shared by every learner: single tables, estimator stacks,
//! and visit counters.

use crate::rng::RngStream;

/// Index into the state set `{0, …, |S|−1}`.
pub type StateId = usize;
/// Index into the action set `{0, …, |A|−1}`.
pub type ActionId = usize;

/// One environment transition: the successor (`None` ends the episode) and the
/// raw, unshifted reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionOutcome {
    pub next: Option<StateId>,
    pub reward: f64,
}

/// Dense `|S| × |A|` action-value table, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states >= 1 && n_actions >= 1);
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Flat row-major view of all entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `max_{a < n_valid} Q(s, a)`.
    pub fn max_over(&self, s: StateId, n_valid: usize) -> f64 {
        debug_assert!(n_valid >= 1 && n_valid <= self.n_actions);
        self.row(s)[..n_valid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact-tie argmax set over the first `n_valid` actions.
    pub fn argmax_set_into(&self, s: StateId, n_valid: usize, out: &mut Vec<ActionId>) {
        out.clear();
        let mut best = f64::NEG_INFINITY;
        for (a, &v) in self.row(s)[..n_valid].iter().enumerate() {
            if v > best {
                best = v;
                out.clear();
                out.push(a);
            } else if v == best {
                out.push(a);
            }
        }
    }
}

/// A stack of `N ≥ 1` same-shape Q-tables plus the per-estimator reward shifts
/// `b_i` applied during updates.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiQ {
    tables: Vec<QTable>,
    shifts: Vec<f64>,
}

impl MultiQ {
    /// Zero-initialized stack; `shifts.len()` fixes the estimator count.
    pub fn zeros(n_states: usize, n_actions: usize, shifts: Vec<f64>) -> Self {
        assert!(!shifts.is_empty(), "need at least one estimator");
        assert!(shifts.iter().all(|b| b.is_finite()));
        let tables = shifts
            .iter()
            .map(|_| QTable::zeros(n_states, n_actions))
            .collect();
        Self { tables, shifts }
    }

    pub fn n_estimators(&self) -> usize {
        self.tables.len()
    }

    pub fn n_states(&self) -> usize {
        self.tables[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.tables[0].n_actions()
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn table(&self, i: usize) -> &QTable {
        &self.tables[i]
    }

    pub fn table_mut(&mut self, i: usize) -> &mut QTable {
        &mut self.tables[i]
    }

    /// `Σ_i Q_i(s, a)`, summed in estimator order.
    #[inline]
    pub fn action_sum(&self, s: StateId, a: ActionId) -> f64 {
        self.tables.iter().map(|t| t.get(s, a)).sum()
    }

    /// Fills `out` with `Σ_i Q_i(s, a)` for `a < n_valid`.
    pub fn action_sums_into(&self, s: StateId, n_valid: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..n_valid).map(|a| self.action_sum(s, a)));
    }

    /// Refills every entry with `lo + (hi−lo)·u`, drawing estimator-major and
    /// row-major within each table. The draw order is part of the replay
    /// contract for seeded comparisons.
    pub fn init_uniform(&mut self, lo: f64, hi: f64, rng: &mut RngStream) {
        assert!(lo.is_finite() && hi.is_finite() && lo <= hi);
        for table in &mut self.tables {
            for v in table.values_mut() {
                *v = lo + (hi - lo) * rng.uniform_f64();
            }
        }
    }
}

/// Visit counters: one per state (drives exploration schedules) and one per
/// estimator-(s, a) cell (drives step-size schedules). Counts include the
/// visit or update being processed, so the first use observes a count of 1.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitCounters {
    n_actions: usize,
    state: Vec<u64>,
    sa: Vec<Vec<u64>>,
}

impl VisitCounters {
    pub fn new(n_estimators: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            state: vec![0; n_states],
            sa: vec![vec![0; n_states * n_actions]; n_estimators],
        }
    }

    /// Increments the visit count of `s` and returns the new count.
    #[inline]
    pub fn visit_state(&mut self, s: StateId) -> u64 {
        self.state[s] += 1;
        self.state[s]
    }

    pub fn state_count(&self, s: StateId) -> u64 {
        self.state[s]
    }

    /// Increments estimator `i`'s update count for `(s, a)` and returns it.
    #[inline]
    pub fn record_update(&mut self, i: usize, s: StateId, a: ActionId) -> u64 {
        let c = &mut self.sa[i][s * self.n_actions + a];
        *c += 1;
        *c
    }

    pub fn update_count(&self, i: usize, s: StateId, a: ActionId) -> u64 {
        self.sa[i][s * self.n_actions + a]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qtable_indexing_round_trips() {
        let mut q = QTable::zeros(3, 4);
        q.set(2, 3, 1.5);
        q.set(0, 0, -2.0);
        assert_eq!(q.get(2, 3), 1.5);
        assert_eq!(q.get(0, 0), -2.0);
        assert_eq!(q.row(2), &[0.0, 0.0, 0.0, 1.5]);
    }

    #[test]
    fn max_over_respects_valid_prefix() {
        let mut q = QTable::zeros(1, 3);
        q.set(0, 0, -1.0);
        q.set(0, 1, -3.0);
        q.set(0, 2, 7.0);
        assert_eq!(q.max_over(0, 3), 7.0);
        assert_eq!(q.max_over(0, 2), -1.0);
    }

    #[test]
    fn argmax_set_collects_exact_ties() {
        let mut q = QTable::zeros(1, 4);
        q.set(0, 1, 2.0);
        q.set(0, 3, 2.0);
        let mut out = Vec::new();
        q.argmax_set_into(0, 4, &mut out);
        assert_eq!(out, vec![1, 3]);
    }

    #[test]
    fn multiq_sums_in_estimator_order() {
        let mut mq = MultiQ::zeros(2, 2, vec![-1.0, -2.0]);
        mq.table_mut(0).set(0, 1, 1.0);
        mq.table_mut(1).set(0, 1, 2.5);
        assert_eq!(mq.action_sum(0, 1), 3.5);
        let mut sums = Vec::new();
        mq.action_sums_into(0, 2, &mut sums);
        assert_eq!(sums, vec![0.0, 3.5]);
        assert_eq!(mq.shifts(), &[-1.0, -2.0]);
    }

    #[test]
    fn uniform_init_draw_order_is_estimator_major() {
        let mut mq = MultiQ::zeros(2, 2, vec![0.0, 0.0]);
        let mut rng = RngStream::seed_from(13);
        mq.init_uniform(-1.0, 1.0, &mut rng);

        let mut twin = RngStream::seed_from(13);
        for i in 0..2 {
            for s in 0..2 {
                for a in 0..2 {
                    let want = -1.0 + 2.0 * twin.uniform_f64();
                    assert_eq!(mq.table(i).get(s, a).to_bits(), want.to_bits());
                    assert!((-1.0..1.0).contains(&mq.table(i).get(s, a)));
                }
            }
        }
    }

    #[test]
    fn counters_include_current_use() {
        let mut c = VisitCounters::new(2, 3, 2);
        assert_eq!(c.visit_state(1), 1);
        assert_eq!(c.visit_state(1), 2);
        assert_eq!(c.state_count(1), 2);
        assert_eq!(c.state_count(0), 0);
        assert_eq!(c.record_update(1, 2, 0), 1);
        assert_eq!(c.record_update(1, 2, 0), 2);
        assert_eq!(c.update_count(0, 2, 0), 0);
        assert_eq!(c.update_count(1, 2, 0), 2);
    }
}
