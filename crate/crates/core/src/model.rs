//! Learner configurations, the fitted-model sum type, and model files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDesc, FeatureFrame, FeatureKind, FeatureValues};
use crate::ensemble::{fit_forest, fit_gbt, ForestConfig, ForestModel, GbtConfig, GbtModel};
use crate::error::{Error, Result};
use crate::linear::{ElasticNetConfig, LinearModel};
use crate::seed::seeded_rng;
use crate::stacking::StackedModel;
use crate::tree::{fit_tree, RegressionTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "LR")]
    Linear,
    #[serde(rename = "DT")]
    Tree,
    #[serde(rename = "RF")]
    Forest,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "PASS")]
    Passthrough,
}

impl LearnerKind {
    pub fn abbreviation(self) -> &'static str {
        match self {
            LearnerKind::Linear => "LR",
            LearnerKind::Tree => "DT",
            LearnerKind::Forest => "RF",
            LearnerKind::Gbt => "GBT",
            LearnerKind::Passthrough => "PASS",
        }
    }

    pub fn from_abbreviation(s: &str) -> Option<Self> {
        match s {
            "LR" => Some(LearnerKind::Linear),
            "DT" => Some(LearnerKind::Tree),
            "RF" => Some(LearnerKind::Forest),
            "GBT" => Some(LearnerKind::Gbt),
            "PASS" => Some(LearnerKind::Passthrough),
            _ => None,
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

/// One concrete hyperparameter setting for a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerConfig {
    Linear(ElasticNetConfig),
    Tree(TreeConfig),
    Forest(ForestConfig),
    Gbt(GbtConfig),
    /// Echoes a numeric feature unchanged.
    Passthrough {
        feature: String,
    },
}

impl LearnerConfig {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerConfig::Linear(_) => LearnerKind::Linear,
            LearnerConfig::Tree(_) => LearnerKind::Tree,
            LearnerConfig::Forest(_) => LearnerKind::Forest,
            LearnerConfig::Gbt(_) => LearnerKind::Gbt,
            LearnerConfig::Passthrough { .. } => LearnerKind::Passthrough,
        }
    }

    /// Fits on `(frame, y)`. `seed` replaces any seed in the config.
    pub fn fit(&self, frame: &FeatureFrame, y: &[f64], seed: u64) -> Result<Model> {
        Ok(match self {
            LearnerConfig::Linear(cfg) => Model::Linear(LinearModel::fit(frame, y, cfg)?.0),
            LearnerConfig::Tree(cfg) => Model::Tree(fit_tree(frame, y, cfg, &mut seeded_rng(seed))?),
            LearnerConfig::Forest(cfg) => Model::Forest(fit_forest(frame, y, &ForestConfig { seed, ..cfg.clone() })?),
            LearnerConfig::Gbt(cfg) => Model::Gbt(fit_gbt(frame, y, &GbtConfig { seed, ..cfg.clone() })?),
            LearnerConfig::Passthrough { feature } => {
                let f = frame
                    .feature(feature)
                    .ok_or_else(|| Error::MissingColumn(feature.clone()))?;
                if !matches!(f.values, FeatureValues::Numeric(_)) {
                    return Err(Error::InvalidInput(format!(
                        "passthrough feature `{feature}` must be numeric"
                    )));
                }
                if y.len() != frame.n_rows() {
                    return Err(Error::LengthMismatch(format!(
                        "{} targets for {} rows",
                        y.len(),
                        frame.n_rows()
                    )));
                }
                Model::Passthrough(Passthrough {
                    feature: FeatureDesc {
                        name: feature.clone(),
                        kind: FeatureKind::Numeric,
                    },
                })
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            LearnerConfig::Linear(c) => format!("LR(lambda={}, l1_ratio={})", c.lambda, c.l1_ratio),
            LearnerConfig::Tree(c) => format!("DT(max_depth={})", depth_label(c.max_depth)),
            LearnerConfig::Forest(c) => format!("RF(n_trees={})", c.n_trees),
            LearnerConfig::Gbt(c) => format!(
                "GBT(stages={}, rate={}, max_depth={})",
                c.n_stages,
                c.learning_rate,
                depth_label(c.tree.max_depth)
            ),
            LearnerConfig::Passthrough { feature } => format!("PASS({feature})"),
        }
    }
}

fn depth_label(depth: Option<usize>) -> String {
    depth.map_or_else(|| "unlimited".to_string(), |d| d.to_string())
}

/// Predicts the value of one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passthrough {
    pub feature: FeatureDesc,
}

/// Any fitted regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Linear(LinearModel),
    Tree(RegressionTree),
    Forest(ForestModel),
    Gbt(GbtModel),
    Passthrough(Passthrough),
    Stacked(Box<StackedModel>),
}

impl Model {
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict(frame),
            Model::Tree(m) => m.predict(frame),
            Model::Forest(m) => m.predict(frame),
            Model::Gbt(m) => m.predict(frame),
            Model::Passthrough(m) => {
                let pos = frame.resolve(std::slice::from_ref(&m.feature))?[0];
                match &frame.features()[pos].values {
                    FeatureValues::Numeric(v) => Ok(v.clone()),
                    FeatureValues::Categorical { .. } => unreachable!("resolve checked the kind"),
                }
            }
            Model::Stacked(m) => m.predict(frame),
        }
    }

    /// Features the model reads from its input frame.
    pub fn input_features(&self) -> Vec<FeatureDesc> {
        match self {
            Model::Linear(m) => m.encoding.inputs.clone(),
            Model::Tree(m) => m.features.clone(),
            Model::Forest(m) => m.trees.first().map(|t| t.features.clone()).unwrap_or_default(),
            Model::Gbt(m) => m.stages.first().map(|t| t.features.clone()).unwrap_or_default(),
            Model::Passthrough(m) => vec![m.feature.clone()],
            Model::Stacked(m) => {
                let mut out: Vec<FeatureDesc> = Vec::new();
                for member in &m.first_level {
                    for f in member.model.input_features() {
                        if !out.contains(&f) {
                            out.push(f);
                        }
                    }
                }
                out
            }
        }
    }
}

const MODEL_FORMAT: &str = "demandstack-model";
const MODEL_VERSION: u32 = 1;

/// On-disk model container (pretty-printed JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Target column the model predicts.
    pub target: String,
    /// Features the model reads, for validating prediction input.
    pub features: Vec<FeatureDesc>,
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model, target: impl Into<String>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            target: target.into(),
            features: model.input_features(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;

    #[test]
    fn passthrough_echoes_feature() {
        let frame = FeatureFrame::from_rows(&["a", "b"], &[vec![1.0, 7.0], vec![2.0, 8.0]]).unwrap();
        let cfg = LearnerConfig::Passthrough { feature: "b".into() };
        let model = cfg.fit(&frame, &[0.0, 0.0], 0).unwrap();
        assert_eq!(model.predict(&frame).unwrap(), vec![7.0, 8.0]);
    }

    #[test]
    fn passthrough_rejects_categorical() {
        let frame = FeatureFrame::new(1, vec![Feature::categorical("c", &["x"])]).unwrap();
        let cfg = LearnerConfig::Passthrough { feature: "c".into() };
        assert!(cfg.fit(&frame, &[0.0], 0).is_err());
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64 * 0.37, ((i * 5) % 7) as f64 / 3.0])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0].sin() + r[1]).collect();
        let frame = FeatureFrame::from_rows(&["a", "b"], &rows).unwrap();
        for cfg in [
            LearnerConfig::Linear(ElasticNetConfig::default()),
            LearnerConfig::Tree(TreeConfig::default()),
            LearnerConfig::Forest(ForestConfig::default()),
            LearnerConfig::Gbt(GbtConfig::default()),
        ] {
            let model = cfg.fit(&frame, &y, 5).unwrap();
            let text = ModelFile::new(model.clone(), "demand").to_json().unwrap();
            let back = ModelFile::from_json(&text).unwrap();
            assert_eq!(back.model, model);
            assert_eq!(back.model.predict(&frame).unwrap(), model.predict(&frame).unwrap());
        }
    }

    #[test]
    fn rejects_foreign_format() {
        let text = r#"{"format":"x","version":1,"target":"d","features":[],"model":{"passthrough":{"feature":{"name":"a","kind":"numeric"}}}}"#;
        assert!(ModelFile::from_json(text).is_err());
    }
}
