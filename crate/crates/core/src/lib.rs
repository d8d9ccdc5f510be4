//! Multi-teacher policy advice for average-reward tabular MDPs.
//!
//! The crate provides:
//!
//! - [`mdp`]: tabular MDP representation, validation, simulation, and exact
//!   average-reward planning (relative value iteration).
//! - [`estimation`]: visitation counters, the empirical transition model,
//!   and per-pair L1 confidence radii.
//! - [`regal`]: span-constrained optimistic planning over a confidence set
//!   and the per-iteration learning update built on it.
//! - [`advice`]: teacher policies with budgets, majority-vote grand
//!   teachers, the mixed-policy advice loop, and a best-teacher baseline.
//! - [`analysis`]: regret curves, regret ratios, empirical Bernstein
//!   intervals, negative-transfer detection, one-way diameter, and the
//!   regret-bound envelope.
//! - [`domains`]: the grid-world, combination-lock, and block-dude
//!   benchmarks.
//! - [`experiment`]: the seeded experiment harness with CSV/JSON/SVG output.

pub mod advice;
pub mod analysis;
pub mod domains;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod mdp;
pub mod regal;

pub use error::{Error, Result};
pub use mdp::{
    evaluate_policy_average_reward, policy_gain_by_state, relative_value_iteration, span, validate,
    DeterministicPolicy, GainBias, Rollout, StepRecord, TabularMdp,
};
