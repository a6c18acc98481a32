//! Short-term ride-hailing demand forecasting.
//!
//! The crate covers the whole experiment: a slot-table data model with
//! request aggregation ([`data`]), a seeded synthetic city ([`synth`]),
//! RReliefF attribute weighting ([`relieff`]), CART regression trees
//! ([`cart`]), bagging and random forests ([`ensemble`]), gradient-boosted
//! trees ([`gbdt`]), a feedforward network ([`ann`]), the evaluation metrics
//! ([`eval`]) and an end-to-end pipeline driver ([`pipeline`]).

pub mod ann;
pub mod cart;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod kv;
pub mod pipeline;
pub mod relieff;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
