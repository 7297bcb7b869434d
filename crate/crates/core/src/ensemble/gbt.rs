//! Gradient-boosted regression trees under squared-error loss.
//!
//! Stage `s` fits a tree to the residuals `y − F_{s−1}(x)` and updates
//! `F_s = F_{s−1} + α·tree_s`. The residual is the negative gradient of
//! `Σ(y − F)²` up to the constant factor 2, which `α` absorbs.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureFrame;
use crate::error::{Error, Result};
use crate::seed::labeled_rng;
use crate::tree::{fit_tree_presorted, Presorted, RegressionTree, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_stages: 100,
            learning_rate: 0.1,
            tree: TreeConfig::with_max_depth(3),
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::Config("n_stages must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub initial_prediction: f64,
    pub learning_rate: f64,
    pub stages: Vec<RegressionTree>,
    /// `Σ(y − F_s(x))²` on the training rows after each stage.
    pub stage_losses: Vec<f64>,
}

impl GbtModel {
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        let mut out = vec![self.initial_prediction; frame.n_rows()];
        for tree in &self.stages {
            for (o, p) in out.iter_mut().zip(tree.predict(frame)?) {
                *o += self.learning_rate * p;
            }
        }
        Ok(out)
    }
}

pub fn fit_gbt(frame: &FeatureFrame, y: &[f64], cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    let n = frame.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("boosting needs at least 2 rows, got {n}")));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("{} targets for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boosting targets".into()));
    }
    let initial = y.iter().sum::<f64>() / n as f64;
    let mut current = vec![initial; n];
    let mut stages = Vec::with_capacity(cfg.n_stages);
    let mut stage_losses = Vec::with_capacity(cfg.n_stages);
    let presorted = Presorted::of(frame);
    for s in 0..cfg.n_stages {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let mut rng = labeled_rng(cfg.seed, &format!("gbt/stage/{s}"));
        let tree = fit_tree_presorted(frame, &residuals, &cfg.tree, &mut rng, &presorted)?;
        for (f, p) in current.iter_mut().zip(tree.predict(frame)?) {
            *f += cfg.learning_rate * p;
        }
        stage_losses.push(y.iter().zip(&current).map(|(t, f)| (t - f).powi(2)).sum());
        stages.push(tree);
    }
    Ok(GbtModel {
        initial_prediction: initial,
        learning_rate: cfg.learning_rate,
        stages,
        stage_losses,
    })
}
