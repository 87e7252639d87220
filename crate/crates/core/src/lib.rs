//! Preference-based reinforcement learning with simulated teachers.
//!
//! The crate bundles small continuous-control tasks, a configurable simulated
//! teacher, an ensemble reward model trained from pairwise preferences, query
//! samplers, feedback schedules, two policy learners and the evaluation
//! statistics used to compare them.

pub mod agents;
pub mod envsim;
pub mod error;
pub mod evalstats;
pub mod harness;
pub mod nn;
pub mod reward_model;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod teacher;

pub use error::{Error, Result};
