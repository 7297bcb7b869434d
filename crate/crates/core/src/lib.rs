//! Demand forecasting with stacked regression ensembles.
//!
//! The crate covers the whole experiment: CSV ingestion and preprocessing,
//! elastic-net regression, variance-reduction trees, random forests,
//! gradient boosting, two-level stacking, and the repeated-subset evaluation
//! with ANOVA and t-tests.
//!
//! Every random choice draws from a ChaCha stream seeded by hashing a parent
//! seed with a fixed label (see [`seed`]), so results depend only on the
//! master seed.

pub mod dataset;
pub mod ensemble;
mod error;
pub mod evalstat;
pub mod linear;
pub mod model;
pub mod seed;
pub mod stacking;
pub mod tree;

pub use error::{Error, Result};
