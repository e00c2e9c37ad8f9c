//! Loss-averse multi-armed bandits and the oscillating-Brownian-motion limit.
//!
//! A decision-maker repeatedly pulls one of several zero-mean arms and
//! evaluates the √n-weighted average payoff through a loss-averse utility
//! index: concave above a reference point `c`, convex below it, with the
//! convex branch steepened by `1/θ`. When `θ` equals the ratio of the
//! smallest to the largest arm volatility, the n-horizon optimal value
//! converges to `∫ φ(y) q(y) dy`, where `q` is the time-1 density of an
//! oscillating Brownian motion: a driftless diffusion whose volatility
//! switches between two constants at the threshold `c`.
//!
//! The crate provides, for desk-scale verification of those limits:
//!
//! - [`utility`]: the loss-averse index `φ` and its behavioral
//!   loss-aversion measure.
//! - [`obm`]: exact transition and time-1 densities of the oscillating
//!   Brownian motion, upper tail probabilities, and Euler–Maruyama path
//!   sampling.
//! - [`value`]: the limiting value by adaptive quadrature and, for the
//!   exponential index, in closed form.
//! - [`bandit`]: bandit environments (fixed arm menus and the two-armed
//!   learning model), Bayesian belief updates, path probabilities, and the
//!   switching strategies.
//! - [`dp`]: exact finite-horizon optimal values by backward induction
//!   over lattice states, upper indicator probabilities, and the
//!   rectangularity identity.
//! - [`mc`]: reproducible Monte Carlo simulation of strategies under
//!   their induced laws.
//!
//! Everything is deterministic: densities and values are pure functions,
//! and all sampling is keyed by explicit `(seed, stream)` pairs.

pub mod bandit;
pub mod dp;
mod error;
pub mod mc;
pub mod obm;
pub mod quad;
pub mod rng;
pub mod utility;
pub mod value;

pub use bandit::{
    ArmChoice, ArmSpec, BeliefState, DecisionRule, DecisionTable, Environment, EnvironmentConfig,
    History, NoLearningEnv, OutcomePmf, Strategy, TwoArmedEnv, ValidationReport,
};
pub use dp::{DpOptions, DpRun, DpTable};
pub use error::{Error, Result};
pub use mc::{PosteriorReport, Scaling, SimOptions, SimReport, TruthAssignment};
pub use obm::{ObmParams, ObmPath};
pub use utility::{Phi1Spec, Tolerances, UtilityIndex};
pub use value::{ValueMethod, ValueResult};
