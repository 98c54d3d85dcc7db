//! Seeded random streams, sampling primitives and coefficient-table models.

pub mod models;
mod rng;
mod sampling;

pub use models::{
    logistic_prob, multinomial_probs, rate_lookup, Covariates, LogisticModel, ModelRegistry,
    MultinomialModel, RateTable, Term,
};
pub use rng::{RngStream, StreamLabel};
pub use sampling::{
    bernoulli, inclusion_probabilities, systematic_pps, weighted_choose, weighted_index,
    weighted_sample,
};
