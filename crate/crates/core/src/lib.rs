//! Online inference for stochastic approximation driven by Markovian data.
//!
//! The SA recursion `x_{t+1} = x_t − η_t H(x_t, ξ_t)` is run on a single
//! data trajectory ([`streams`], [`sa`]). Confidence intervals for a linear
//! functional `θᵀx*` come from random scaling: the averaged iterate is
//! normalized by a functional of its own partial-sum path ([`inference`]),
//! and the resulting pivot is compared with simulated quantiles of the same
//! functional of Brownian motion ([`critical_values`]).
//!
//! [`harness`] runs Monte-Carlo coverage studies over the three bundled
//! problems (linear regression with AR noise, logistic regression with AR
//! covariates, asynchronous Q-learning), and [`bootstrap`] provides the
//! multiplier-bootstrap baseline for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bootstrap;
pub mod critical_values;
pub mod error;
pub mod harness;
pub mod inference;
pub mod mdp;
pub mod rng;
pub mod sa;
pub mod streams;

pub use error::{Error, Result};
pub use inference::{
    confidence_interval, ConfidenceInterval, Functional, IntegralRule, Projection,
    RandomScalingAccumulator, RandomScalingTracker,
};
pub use sa::{run, Oracle, Observer, SaRun, StepSchedule};
