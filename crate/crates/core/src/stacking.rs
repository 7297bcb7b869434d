//! Two-level stacked generalization.
//!
//! First-level learners are fit on the training rows, choosing each
//! learner's hyperparameters by k-fold cross-validated RMSE (random forests
//! skip this and report their out-of-bag RMSE instead). Their predictions on
//! the validation rows become the features of the second-level learner.
//!
//! Members are kept sorted by label and every learner's seed is derived from
//! its label, so the order in which specs are passed never changes the result.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, Feature, FeatureFrame, FoldPlan};
use crate::error::{Error, Result};
use crate::evalstat::rmse;
use crate::model::{LearnerConfig, LearnerKind, Model};
use crate::seed::derive_seed;

/// Upper bound on folds used when a second-level grid needs selecting.
const SECOND_LEVEL_FOLDS: usize = 10;

/// A named learner and its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub label: String,
    pub grid: Vec<LearnerConfig>,
}

impl LearnerSpec {
    pub fn new(label: impl Into<String>, grid: Vec<LearnerConfig>) -> Self {
        LearnerSpec {
            label: label.into(),
            grid,
        }
    }

    pub fn single(label: impl Into<String>, config: LearnerConfig) -> Self {
        Self::new(label, vec![config])
    }

    pub fn kind(&self) -> Result<LearnerKind> {
        let first = self
            .grid
            .first()
            .ok_or_else(|| Error::Config(format!("learner `{}` has an empty grid", self.label)))?;
        let kind = first.kind();
        if self.grid.iter().any(|c| c.kind() != kind) {
            return Err(Error::Config(format!(
                "learner `{}` mixes learner kinds in its grid",
                self.label
            )));
        }
        Ok(kind)
    }
}

/// How the chosen configuration was scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Grid of one; fit directly.
    Direct,
    /// Mean fold RMSE of every candidate, in grid order.
    CrossValidated { scores: Vec<f64>, chosen: usize },
    /// Out-of-bag RMSE of every candidate, in grid order.
    OutOfBag { scores: Vec<Option<f64>>, chosen: usize },
}

/// A fitted learner with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub label: String,
    pub config: LearnerConfig,
    pub selection: Selection,
    pub model: Model,
}

impl Member {
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        self.model.predict(frame)
    }

    /// The score used for selection, if any.
    pub fn selection_score(&self) -> Option<f64> {
        match &self.selection {
            Selection::Direct => None,
            Selection::CrossValidated { scores, chosen } => Some(scores[*chosen]),
            Selection::OutOfBag { scores, chosen } => scores[*chosen],
        }
    }
}

/// Picks a configuration from `spec.grid` and refits it on all rows.
///
/// Grids of more than one candidate are scored by mean RMSE over the folds
/// of `folds` (forests by out-of-bag RMSE); the first lowest score wins.
pub fn select_and_fit(
    spec: &LearnerSpec,
    frame: &FeatureFrame,
    y: &[f64],
    folds: &FoldPlan,
    seed: u64,
) -> Result<Member> {
    let kind = spec.kind()?;
    if y.len() != frame.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} targets for {} rows",
            y.len(),
            frame.n_rows()
        )));
    }
    let wrap = |e| Error::training(&spec.label, e);
    let learner_seed = derive_seed(seed, &spec.label);

    if spec.grid.len() == 1 {
        let config = spec.grid[0].clone();
        let model = config.fit(frame, y, learner_seed).map_err(wrap)?;
        let selection = match &model {
            Model::Forest(f) => Selection::OutOfBag {
                scores: vec![f.oob_rmse()],
                chosen: 0,
            },
            _ => Selection::Direct,
        };
        return Ok(Member {
            label: spec.label.clone(),
            config,
            selection,
            model,
        });
    }

    if kind == LearnerKind::Forest {
        let models = spec
            .grid
            .par_iter()
            .map(|c| c.fit(frame, y, learner_seed))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let scores: Vec<Option<f64>> = models
            .iter()
            .map(|m| match m {
                Model::Forest(f) => f.oob_rmse(),
                _ => None,
            })
            .collect();
        let chosen = argmin(scores.iter().map(|s| s.unwrap_or(f64::INFINITY)));
        let model = models.into_iter().nth(chosen).expect("chosen index is in range");
        return Ok(Member {
            label: spec.label.clone(),
            config: spec.grid[chosen].clone(),
            selection: Selection::OutOfBag { scores, chosen },
            model,
        });
    }

    if folds.n_rows() != frame.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "fold plan covers {} rows but the frame has {}",
            folds.n_rows(),
            frame.n_rows()
        )));
    }
    let fold_data: Vec<_> = (0..folds.k)
        .map(|f| {
            let (kept, held) = folds.fold(f);
            let kept_y: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
            let held_y: Vec<f64> = held.iter().map(|&i| y[i]).collect();
            (frame.select(&kept), kept_y, frame.select(&held), held_y)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|c| (0..folds.k).map(move |f| (c, f)))
        .collect();
    let fold_rmse = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (kept_frame, kept_y, held_frame, held_y) = &fold_data[f];
            let fold_seed = derive_seed(learner_seed, &format!("cv/{c}/{f}"));
            let model = spec.grid[c].fit(kept_frame, kept_y, fold_seed)?;
            rmse(&model.predict(held_frame)?, held_y)
        })
        .collect::<Result<Vec<f64>>>()
        .map_err(wrap)?;
    let scores: Vec<f64> = fold_rmse
        .chunks(folds.k)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let chosen = argmin(scores.iter().copied());
    let config = spec.grid[chosen].clone();
    let model = config.fit(frame, y, learner_seed).map_err(wrap)?;
    Ok(Member {
        label: spec.label.clone(),
        config,
        selection: Selection::CrossValidated { scores, chosen },
        model,
    })
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn check_labels(specs: &[LearnerSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in specs {
        if !seen.insert(s.label.as_str()) {
            return Err(Error::Config(format!("duplicate learner label `{}`", s.label)));
        }
    }
    Ok(())
}

/// Fits every first-level learner on the training rows. Returns the
/// members sorted by label.
pub fn train_first_level(
    frame: &FeatureFrame,
    y: &[f64],
    specs: &[LearnerSpec],
    folds: &FoldPlan,
    seed: u64,
) -> Result<Vec<Member>> {
    if specs.is_empty() {
        return Err(Error::Config("no first-level learners given".into()));
    }
    check_labels(specs)?;
    if folds.n_rows() != frame.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "fold plan covers {} rows but the training frame has {}",
            folds.n_rows(),
            frame.n_rows()
        )));
    }
    let mut sorted: Vec<&LearnerSpec> = specs.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));
    sorted
        .par_iter()
        .map(|spec| select_and_fit(spec, frame, y, folds, seed))
        .collect()
}

/// One numeric column per member, named by its label, in member order.
pub fn build_meta_features(members: &[Member], frame: &FeatureFrame) -> Result<FeatureFrame> {
    let features = members
        .iter()
        .map(|m| Ok(Feature::numeric(m.label.clone(), m.predict(frame)?)))
        .collect::<Result<Vec<_>>>()?;
    FeatureFrame::new(frame.n_rows(), features)
}

/// Fitted first- and second-level learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    /// Sorted by label.
    pub first_level: Vec<Member>,
    pub second_level: Member,
    /// Meta-feature column names, equal to the first-level labels in order.
    pub meta_layout: Vec<String>,
}

impl StackedModel {
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        predict_stacked(self, frame)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.first_level.iter().map(|m| m.label.as_str()).collect()
    }
}

/// Fits the second level on already-trained first-level members.
///
/// `members` may be any subset of a [`train_first_level`] result; they are
/// re-sorted by label.
pub fn fit_second_level(
    mut members: Vec<Member>,
    validation: &FeatureFrame,
    validation_y: &[f64],
    second: &LearnerSpec,
    seed: u64,
) -> Result<StackedModel> {
    if validation.n_rows() == 0 {
        return Err(Error::Empty("the validation set is empty".into()));
    }
    if members.is_empty() {
        return Err(Error::Config("no first-level members given".into()));
    }
    members.sort_by(|a, b| a.label.cmp(&b.label));
    for pair in members.windows(2) {
        if pair[0].label == pair[1].label {
            return Err(Error::Config(format!("duplicate learner label `{}`", pair[0].label)));
        }
    }
    let meta = build_meta_features(&members, validation)?;
    let level2_seed = derive_seed(seed, "level2");
    let k = SECOND_LEVEL_FOLDS.min(validation.n_rows());
    let folds = if second.grid.len() > 1 && second.kind()? != LearnerKind::Forest {
        if k < 2 {
            return Err(Error::InvalidInput(
                "need at least 2 validation rows to select second-level hyperparameters".into(),
            ));
        }
        kfold(validation.n_rows(), k, derive_seed(level2_seed, "folds"))?
    } else {
        FoldPlan {
            k: 1,
            assignments: vec![0; validation.n_rows()],
        }
    };
    let second_level = select_and_fit(second, &meta, validation_y, &folds, level2_seed)?;
    let meta_layout = members.iter().map(|m| m.label.clone()).collect();
    Ok(StackedModel {
        first_level: members,
        second_level,
        meta_layout,
    })
}

/// Training and validation data for [`train_stacked`].
#[derive(Debug, Clone, Copy)]
pub struct StackingData<'a> {
    pub train: &'a FeatureFrame,
    pub train_y: &'a [f64],
    pub validation: &'a FeatureFrame,
    pub validation_y: &'a [f64],
}

/// Fits the first level on the training rows and the second level on the
/// first level's validation predictions.
pub fn train_stacked(
    data: StackingData<'_>,
    first: &[LearnerSpec],
    second: &LearnerSpec,
    folds: &FoldPlan,
    seed: u64,
) -> Result<StackedModel> {
    if data.validation.n_rows() == 0 {
        return Err(Error::Empty("the validation set is empty".into()));
    }
    let members = train_first_level(data.train, data.train_y, first, folds, seed)?;
    fit_second_level(members, data.validation, data.validation_y, second, seed)
}

pub fn predict_stacked(model: &StackedModel, frame: &FeatureFrame) -> Result<Vec<f64>> {
    let meta = build_meta_features(&model.first_level, frame)?;
    model.second_level.predict(&meta)
}
