//! Heterogeneity-aware fairness analysis for talk ratings.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod fair_model;
pub mod hem_gesture;
pub mod hem_stats;
pub mod hem_verbal;
pub mod pipeline;
pub mod seeds;
pub mod synth;
pub mod topic_model;

pub use error::{Error, Result};
