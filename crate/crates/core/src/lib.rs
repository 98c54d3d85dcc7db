//! Dynamic demographic microsimulation of persons and households.
//!
//! The engine evolves a synthetic population through yearly life-course
//! events and places every newly formed or newly arrived household with a
//! greedy household-size alignment step, so that the simulated household-size
//! distribution tracks an exogenous target.

pub mod alignment;
mod csvutil;
pub mod error;
pub mod events;
pub mod migration;
pub mod pipeline;
pub mod population;
pub mod reporting;
pub mod stochastic;
pub mod synthesis;

pub use error::{Error, Result};
