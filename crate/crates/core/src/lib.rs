//! Networked Markov potential games: κ-hop truncated independent natural
//! policy gradient, exact oracles that certify its locality bounds, and an
//! experiment harness.

pub mod environments;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod harness;
pub mod learning;
pub mod model;
pub mod network;
pub mod rollout;

pub use error::{Error, Result};
