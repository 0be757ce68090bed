//! Flexible-length cascading bandits with position-dependent rewards and losses.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: the reward model and its expectation, Bayes oracles,
//! the topic-coverage model, the two UCB policies with online Newton
//! updates, baseline policies, and seeded environment samplers.
//!
//! File formats, configuration and the experiment runner live in the
//! companion `cascade-sim` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod coverage;
pub mod env;
mod error;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    feedback_signs, project_feedback, ActionSet, FeedbackSign, OutcomeVector, ProjectedFeedback, RetrySequence,
    RewardProfile,
};
