//! Active inverse reinforcement learning by generalized binary search.
//!
//! A finite set of candidate rewards is turned into a hypothesis space of
//! greedy-action labelings. A learner keeps a posterior over that space,
//! chooses which state to ask an expert about, and updates on noisy answers.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod cache;
pub mod env;
pub mod error;
pub mod experiment;
pub mod hypothesis;
pub mod lp;
pub mod mdp;
pub mod oracle;
pub mod strategy;

pub use error::{Error, Result};
