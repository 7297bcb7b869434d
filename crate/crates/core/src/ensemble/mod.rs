//! Tree ensembles: bagged random forests and gradient-boosted trees.

mod forest;
mod gbt;

pub use forest::{bootstrap_sample, fit_forest, BootstrapSample, ForestConfig, ForestModel, OobSummary};
pub use gbt::{fit_gbt, GbtConfig, GbtModel};
