//! Experiment configuration file (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. Learner seeds inside grid entries are ignored: every seed is derived
//! from the top-level `seed`.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use demandstack::dataset::{GroundTruth, PreprocessParams, SyntheticSpec, DEFAULT_FRACTIONS};
use demandstack::ensemble::{ForestConfig, GbtConfig};
use demandstack::linear::ElasticNetConfig;
use demandstack::model::LearnerKind;
use demandstack::seed::derive_seed;
use demandstack::tree::TreeConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub protocol: ProtocolSection,
    pub learners: LearnerGrids,
    pub tables: TablesConfig,
    pub stats: StatsConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            data: DataConfig::default(),
            split: SplitConfig::default(),
            protocol: ProtocolSection::default(),
            learners: LearnerGrids::default(),
            tables: TablesConfig::default(),
            stats: StatsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Exactly one of `synthetic` and `csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub synthetic: Option<SyntheticSection>,
    pub csv: Option<CsvSection>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            synthetic: Some(SyntheticSection::default()),
            csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_products: usize,
    pub weeks: usize,
    pub noise_std: f64,
    pub start_year: u32,
    pub truth: GroundTruth,
    /// Applied to the generated weekly table. Aggregation is off by default
    /// since the table is already weekly.
    pub preprocess: PreprocessParams,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        SyntheticSection {
            n_products: spec.n_products,
            weeks: spec.weeks,
            noise_std: spec.noise_std,
            start_year: spec.start_year,
            truth: spec.truth,
            preprocess: PreprocessParams {
                aggregate: false,
                ..Default::default()
            },
        }
    }
}

impl SyntheticSection {
    pub fn spec(&self, master_seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_products: self.n_products,
            weeks: self.weeks,
            noise_std: self.noise_std,
            seed: derive_seed(master_seed, "synthetic"),
            start_year: self.start_year,
            truth: self.truth.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSection {
    pub path: PathBuf,
    /// Schema config (columns, drop list, preprocessing parameters).
    pub schema: PathBuf,
    /// View-event tables used to derive the popularity feature.
    #[serde(default)]
    pub views: Vec<PathBuf>,
    /// Set to false when `path` is already preprocessed.
    #[serde(default = "yes")]
    pub preprocess: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub repetitions: usize,
    pub subset_fraction: f64,
    pub folds: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            repetitions: 20,
            subset_fraction: 0.8,
            folds: 10,
        }
    }
}

/// Hyperparameter grid per learner. The same grids serve both levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerGrids {
    pub lr: Vec<ElasticNetConfig>,
    pub dt: Vec<TreeConfig>,
    pub rf: Vec<ForestConfig>,
    pub gbt: Vec<GbtConfig>,
}

impl Default for LearnerGrids {
    fn default() -> Self {
        let lr = |lambda| ElasticNetConfig {
            lambda,
            ..Default::default()
        };
        let gbt = |learning_rate, n_stages| GbtConfig {
            learning_rate,
            n_stages,
            ..Default::default()
        };
        LearnerGrids {
            lr: vec![lr(0.1), lr(0.3), lr(1.0)],
            dt: vec![
                TreeConfig::with_max_depth(3),
                TreeConfig::with_max_depth(6),
                TreeConfig::default(),
            ],
            rf: vec![ForestConfig::default()],
            gbt: vec![gbt(0.05, 50), gbt(0.05, 100), gbt(0.1, 50), gbt(0.1, 100)],
        }
    }
}

/// Which combinations make up each report table. Learners are named
/// `LR`, `DT`, `RF` and `GBT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesConfig {
    /// First-level learners of the table 1 sweep.
    pub full: Vec<LearnerKind>,
    /// Second-level learners swept in table 1.
    pub level2: Vec<LearnerKind>,
    /// Single learners of table 2.
    pub singles: Vec<LearnerKind>,
    /// Second-level learner for tables 3 and 4.
    pub combo_level2: LearnerKind,
    pub binaries: Vec<Vec<LearnerKind>>,
    pub triples: Vec<Vec<LearnerKind>>,
}

impl Default for TablesConfig {
    fn default() -> Self {
        use LearnerKind::{Forest as RF, Gbt as GBT, Linear as LR, Tree as DT};
        TablesConfig {
            full: vec![DT, GBT, RF, LR],
            level2: vec![DT, GBT, RF, LR],
            singles: vec![DT, GBT, RF, LR],
            combo_level2: LR,
            binaries: vec![
                vec![GBT, DT],
                vec![GBT, LR],
                vec![LR, DT],
                vec![DT, RF],
                vec![GBT, RF],
                vec![LR, RF],
            ],
            triples: vec![
                vec![DT, RF, GBT],
                vec![RF, DT, LR],
                vec![GBT, LR, DT],
                vec![LR, RF, GBT],
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    #[default]
    Welch,
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub t_test: TTestVariant,
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            t_test: TTestVariant::Welch,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub save_models: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            save_models: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads, resolves relative paths against the file's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(csv) = &mut self.data.csv {
            fix(&mut csv.path);
            fix(&mut csv.schema);
            csv.views.iter_mut().for_each(fix);
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.synthetic, &self.data.csv) {
            (Some(_), Some(_)) => bail!("[data] must set only one of `synthetic` and `csv`"),
            (None, None) => bail!("[data] must set one of `synthetic` and `csv`"),
            (None, Some(csv)) => {
                for p in std::iter::once(&csv.path).chain([&csv.schema]).chain(&csv.views) {
                    ensure!(p.is_file(), "file {} does not exist", p.display());
                }
            }
            (Some(_), None) => {}
        }
        let total: f64 = self.split.fractions.iter().sum();
        ensure!(
            (total - 1.0).abs() <= 1e-9,
            "split fractions {:?} sum to {total}, expected 1",
            self.split.fractions
        );
        ensure!(
            self.protocol.repetitions >= 2,
            "protocol.repetitions must be at least 2"
        );
        ensure!(self.protocol.folds >= 2, "protocol.folds must be at least 2");
        ensure!(
            self.protocol.subset_fraction > 0.0 && self.protocol.subset_fraction < 1.0,
            "protocol.subset_fraction must lie in (0, 1)"
        );
        ensure!(
            self.stats.alpha > 0.0 && self.stats.alpha < 1.0,
            "stats.alpha must lie in (0, 1)"
        );
        for (name, empty) in [
            ("lr", self.learners.lr.is_empty()),
            ("dt", self.learners.dt.is_empty()),
            ("rf", self.learners.rf.is_empty()),
            ("gbt", self.learners.gbt.is_empty()),
        ] {
            ensure!(!empty, "learners.{name} needs at least one configuration");
        }
        let t = &self.tables;
        let all = std::iter::once(&t.full)
            .chain([&t.level2, &t.singles])
            .chain(&t.binaries)
            .chain(&t.triples)
            .flatten()
            .chain([&t.combo_level2]);
        for kind in all {
            ensure!(
                *kind != LearnerKind::Passthrough,
                "tables may only name LR, DT, RF and GBT"
            );
        }
        for combo in std::iter::once(&t.full).chain(&t.binaries).chain(&t.triples) {
            ensure!(!combo.is_empty(), "empty learner combination in [tables]");
            let mut sorted = combo.clone();
            sorted.sort();
            sorted.dedup();
            ensure!(
                sorted.len() == combo.len(),
                "learner combination {combo:?} repeats a learner"
            );
        }
        Ok(())
    }
}
