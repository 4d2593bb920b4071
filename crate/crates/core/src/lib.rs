//! Measurement-based as-you-go relay placement along a line.
//!
//! A deployment agent walks away from a sink and, at each step, measures the
//! transmit power a link back to the previously placed nodes would need. It
//! must decide on the spot whether to place a relay. This crate provides the
//! channel model, optimal threshold policies for memory-1 and memory-`n`
//! relaying, a Monte Carlo deployment simulator, policy persistence and an
//! HTTP assistant service that a walking user can query step by step.

pub mod adjacent;
pub mod assistant;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod memory;
pub mod oracle;
pub mod policy;
pub mod service;
pub mod sim;
pub mod store;

pub use error::{Error, Result};
