//! Tabular Q-learning laboratory.
//!
//! Implements dummy-adversarial Q-learning (DAQ) — tabular Q-learning with an
//! ensemble of estimators that receive distinct constant reward shifts — next
//! to the classic baselines (Q-learning, double Q-learning, maxmin and minmax
//! ensembles), three small benchmark environments, exact oracles (value
//! iteration, bias identities, a finite-time error bound), a zero-sum-game
//! cross-check, and a seeded experiment harness with CSV output.

pub mod agents;
pub mod analysis;
pub mod config;
pub mod envs;
pub mod error;
pub mod game;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod schedule;
pub mod table;

pub use error::DaqError;
