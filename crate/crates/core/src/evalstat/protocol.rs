//! Repeated evaluation over random subsets of the training pool.
//!
//! Each repetition draws a subset of the training rows, fits every entry and
//! scores it on the fixed test rows. Stacked entries see (subset, validation);
//! single learners are fit on subset ∪ validation. First-level learners
//! shared between stacked entries are fit once per repetition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rmse;
use crate::dataset::{kfold, subsample_subsets, Dataset, FeatureFrame, SplitIndices};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::seed::derive_seed;
use crate::stacking::{fit_second_level, select_and_fit, train_first_level, LearnerSpec, Member};

/// One column of the run matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum ProtocolEntry {
    Stacked {
        name: String,
        first: Vec<LearnerSpec>,
        second: LearnerSpec,
    },
    Single {
        name: String,
        spec: LearnerSpec,
    },
}

impl ProtocolEntry {
    pub fn name(&self) -> &str {
        match self {
            ProtocolEntry::Stacked { name, .. } | ProtocolEntry::Single { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub repetitions: usize,
    pub subset_fraction: f64,
    /// Cross-validation folds for grid selection (capped at the row count).
    pub folds: usize,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            repetitions: 20,
            subset_fraction: 0.8,
            folds: 10,
            seed: 0,
        }
    }
}

/// Test-set RMSE per repetition (rows) and entry (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RunMatrix {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.columns.len())
            .map(|j| self.rows.iter().map(|r| r[j]).sum::<f64>() / self.rows.len() as f64)
            .collect()
    }

    /// Header of entry names, then one line per repetition.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .expect("writing to memory");
        }
        let bytes = w.into_inner().expect("writing to memory");
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        out
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:.4}")).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:>4}", "rep");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
        for (i, r) in cells.iter().enumerate() {
            let _ = write!(out, "{:>4}", i);
            for (c, w) in r.iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

fn fold_count(requested: usize, n: usize) -> Result<usize> {
    let k = requested.min(n);
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "cannot cross-validate {n} rows with {requested} folds"
        )));
    }
    Ok(k)
}

fn gather(y: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| y[i]).collect()
}

/// Distinct first-level specs across all stacked entries, keyed by label.
fn shared_first_level(entries: &[ProtocolEntry]) -> Result<Vec<LearnerSpec>> {
    let mut by_label: BTreeMap<&str, &LearnerSpec> = BTreeMap::new();
    for e in entries {
        if let ProtocolEntry::Stacked { first, .. } = e {
            for spec in first {
                match by_label.get(spec.label.as_str()) {
                    Some(existing) if *existing != spec => {
                        return Err(Error::Config(format!(
                            "first-level label `{}` is used with two different grids",
                            spec.label
                        )))
                    }
                    _ => {
                        by_label.insert(&spec.label, spec);
                    }
                }
            }
        }
    }
    Ok(by_label.into_values().cloned().collect())
}

struct Rows<'a> {
    frame: &'a FeatureFrame,
    y: &'a [f64],
}

impl Rows<'_> {
    fn pick(&self, rows: &[usize]) -> (FeatureFrame, Vec<f64>) {
        (self.frame.select(rows), gather(self.y, rows))
    }
}

fn first_level_on(
    all: &Rows<'_>,
    train_rows: &[usize],
    specs: &[LearnerSpec],
    folds: usize,
    seed: u64,
) -> Result<Vec<Member>> {
    let (frame, y) = all.pick(train_rows);
    let plan = kfold(
        train_rows.len(),
        fold_count(folds, train_rows.len())?,
        derive_seed(seed, "folds"),
    )?;
    train_first_level(&frame, &y, specs, &plan, seed)
}

fn pick_members(pool: &[Member], wanted: &[LearnerSpec]) -> Vec<Member> {
    wanted
        .iter()
        .map(|s| {
            pool.iter()
                .find(|m| m.label == s.label)
                .cloned()
                .expect("every wanted label was trained")
        })
        .collect()
}

fn single_on(all: &Rows<'_>, rows: &[usize], spec: &LearnerSpec, folds: usize, seed: u64) -> Result<Model> {
    let (frame, y) = all.pick(rows);
    let plan = kfold(
        rows.len(),
        fold_count(folds, rows.len())?,
        derive_seed(seed, "single/folds"),
    )?;
    Ok(select_and_fit(spec, &frame, &y, &plan, seed)?.model)
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    all
}

/// Fits one entry on `train_rows` (plus `validation_rows`) of a full
/// feature frame, the way a single repetition of [`run_protocol`] does.
pub fn fit_entry(
    frame: &FeatureFrame,
    y: &[f64],
    train_rows: &[usize],
    validation_rows: &[usize],
    entry: &ProtocolEntry,
    folds: usize,
    seed: u64,
) -> Result<Model> {
    let all = Rows { frame, y };
    let wrap = |e| Error::training(entry.name(), e);
    match entry {
        ProtocolEntry::Stacked { first, second, .. } => {
            let members = first_level_on(&all, train_rows, first, folds, seed).map_err(wrap)?;
            let (vframe, vy) = all.pick(validation_rows);
            let model = fit_second_level(members, &vframe, &vy, second, seed).map_err(wrap)?;
            Ok(Model::Stacked(Box::new(model)))
        }
        ProtocolEntry::Single { spec, .. } => {
            single_on(&all, &union_sorted(train_rows, validation_rows), spec, folds, seed).map_err(wrap)
        }
    }
}

/// Runs every entry over `cfg.repetitions` random training subsets and
/// records test-set RMSE.
pub fn run_protocol(
    d: &Dataset,
    split: &SplitIndices,
    entries: &[ProtocolEntry],
    cfg: &ProtocolConfig,
) -> Result<RunMatrix> {
    if cfg.repetitions < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 repetitions, got {}",
            cfg.repetitions
        )));
    }
    if entries.is_empty() {
        return Err(Error::Config("no entries to evaluate".into()));
    }
    let mut names: Vec<&str> = entries.iter().map(ProtocolEntry::name).collect();
    names.sort_unstable();
    if let Some(pair) = names.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::Config(format!("duplicate entry name `{}`", pair[0])));
    }
    if split.test.is_empty() {
        return Err(Error::Empty("the test set is empty".into()));
    }
    let n = d.n_rows();
    if let Some(&bad) = split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .find(|&&i| i >= n)
    {
        return Err(Error::InvalidInput(format!(
            "split row {bad} out of range for {n} rows"
        )));
    }

    let frame = d.feature_frame()?;
    let y = d.targets()?;
    let all = Rows { frame: &frame, y: &y };
    let (test_frame, test_y) = all.pick(&split.test);
    let (val_frame, val_y) = all.pick(&split.validation);
    let shared = shared_first_level(entries)?;
    let subsets = subsample_subsets(
        &split.train,
        cfg.repetitions,
        cfg.subset_fraction,
        derive_seed(cfg.seed, "protocol/subsets"),
    )?;

    let rows = subsets
        .par_iter()
        .enumerate()
        .map(|(r, subset)| {
            let rep_seed = derive_seed(cfg.seed, &format!("protocol/rep/{r}"));
            let pool = if shared.is_empty() {
                Vec::new()
            } else {
                first_level_on(&all, subset, &shared, cfg.folds, rep_seed)
                    .map_err(|e| Error::training(format!("repetition {r}, first level"), e))?
            };
            let single_rows = union_sorted(subset, &split.validation);
            entries
                .par_iter()
                .map(|entry| {
                    let model = match entry {
                        ProtocolEntry::Stacked { first, second, .. } => {
                            let members = pick_members(&pool, first);
                            fit_second_level(members, &val_frame, &val_y, second, rep_seed)
                                .map(|m| Model::Stacked(Box::new(m)))
                        }
                        ProtocolEntry::Single { spec, .. } => single_on(&all, &single_rows, spec, cfg.folds, rep_seed),
                    };
                    model
                        .and_then(|m| rmse(&m.predict(&test_frame)?, &test_y))
                        .map_err(|e| Error::training(format!("{} (repetition {r})", entry.name()), e))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunMatrix {
        columns: entries.iter().map(|e| e.name().to_string()).collect(),
        rows,
    })
}
