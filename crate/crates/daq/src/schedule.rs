//! Step-size and exploration schedules.
//!
//! Schedules are pure functions of counter values; the caller passes counts
//! that already include the current visit or update (first use sees 1).

use crate::error::DaqError;

/// Learning-rate schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSizeSchedule {
    /// Fixed α in (0, 1].
    Constant(f64),
    /// `α = 1 / n(s,a)^p` from the per-estimator update count.
    VisitPolynomial { exponent: f64 },
    /// `α = c / (episode + d)` from the 0-based episode index.
    EpisodeHarmonic { c: f64, d: f64 },
}

impl StepSizeSchedule {
    pub fn validate(&self) -> Result<(), DaqError> {
        match *self {
            StepSizeSchedule::Constant(a) => {
                if !(a.is_finite() && a > 0.0 && a <= 1.0) {
                    return Err(DaqError::InvalidParam(format!(
                        "constant step size must lie in (0, 1], got {a}"
                    )));
                }
            }
            StepSizeSchedule::VisitPolynomial { exponent } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(DaqError::InvalidParam(format!(
                        "visit-polynomial exponent must be positive, got {exponent}"
                    )));
                }
            }
            StepSizeSchedule::EpisodeHarmonic { c, d } => {
                if !(c.is_finite() && d.is_finite() && c > 0.0 && d > 0.0 && c <= d) {
                    return Err(DaqError::InvalidParam(format!(
                        "episode-harmonic needs 0 < c <= d so that α stays in (0, 1], got c={c} d={d}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Step size for an update whose per-estimator `(s,a)` count (including
    /// this update) is `update_count`, during 0-based `episode`.
    #[inline]
    pub fn step_size(&self, update_count: u64, episode: u64) -> f64 {
        match *self {
            StepSizeSchedule::Constant(a) => a,
            StepSizeSchedule::VisitPolynomial { exponent } => {
                debug_assert!(update_count >= 1);
                1.0 / (update_count as f64).powf(exponent)
            }
            StepSizeSchedule::EpisodeHarmonic { c, d } => c / (episode as f64 + d),
        }
    }
}

/// Exploration-rate schedule for ε-greedy behavior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExplorationSchedule {
    /// Fixed ε in [0, 1].
    Constant(f64),
    /// `ε(s) = 1 / n(s)^(1/2)` from the state visit count.
    CountBased,
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<(), DaqError> {
        if let ExplorationSchedule::Constant(e) = *self {
            if !(e.is_finite() && (0.0..=1.0).contains(&e)) {
                return Err(DaqError::InvalidParam(format!(
                    "constant exploration rate must lie in [0, 1], got {e}"
                )));
            }
        }
        Ok(())
    }

    /// ε for a visit whose state count (including this visit) is `state_visits`.
    #[inline]
    pub fn epsilon(&self, state_visits: u64) -> f64 {
        match *self {
            ExplorationSchedule::Constant(e) => e,
            ExplorationSchedule::CountBased => {
                debug_assert!(state_visits >= 1);
                1.0 / (state_visits as f64).sqrt()
            }
        }
    }
}
