//! Random forest regression with bootstrap sampling and out-of-bag scoring.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureFrame;
use crate::error::{Error, Result};
use crate::seed::labeled_rng;
use crate::tree::{fit_tree_on, RegressionTree, TreeConfig};

/// One bootstrap draw: `in_bag` holds `n` indices drawn with replacement,
/// `out_of_bag` the sorted indices never drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSample {
    pub in_bag: Vec<usize>,
    pub out_of_bag: Vec<usize>,
}

impl BootstrapSample {
    pub fn oob_fraction(&self) -> f64 {
        self.out_of_bag.len() as f64 / self.in_bag.len() as f64
    }
}

pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BootstrapSample> {
    if n == 0 {
        return Err(Error::Empty("bootstrap of zero rows".into()));
    }
    let in_bag: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut drawn = vec![false; n];
    for &i in &in_bag {
        drawn[i] = true;
    }
    let out_of_bag = (0..n).filter(|&i| !drawn[i]).collect();
    Ok(BootstrapSample { in_bag, out_of_bag })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features considered per node; `None` means `floor(sqrt(p))`.
    pub feature_subset_size: Option<usize>,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 20,
            feature_subset_size: None,
            tree: TreeConfig::default(),
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn subset_size(&self, p: usize) -> usize {
        self.feature_subset_size
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
    }
}

/// Out-of-bag evaluation of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobSummary {
    /// RMSE over rows covered by at least one out-of-bag tree; `None` if no
    /// row is covered.
    pub rmse: Option<f64>,
    pub covered: usize,
    pub uncovered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub bootstrap: Vec<BootstrapSample>,
    pub oob: OobSummary,
}

impl ForestModel {
    /// Mean of the member trees' predictions.
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        let mut total = vec![0.0; frame.n_rows()];
        for tree in &self.trees {
            for (t, p) in total.iter_mut().zip(tree.predict(frame)?) {
                *t += p;
            }
        }
        let k = self.trees.len() as f64;
        Ok(total.into_iter().map(|t| t / k).collect())
    }

    pub fn oob_rmse(&self) -> Option<f64> {
        self.oob.rmse
    }
}

/// Fits `cfg.n_trees` trees in parallel. Tree `i` draws its bootstrap and
/// feature subsets from the stream labeled `forest/tree/{i}`, so results do
/// not depend on scheduling.
pub fn fit_forest(frame: &FeatureFrame, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    let n = frame.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("a forest needs at least 2 rows, got {n}")));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("{} targets for {n} rows", y.len())));
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    let p = frame.n_features();
    let k = cfg.subset_size(p);
    if k == 0 || k > p.max(1) {
        return Err(Error::Config(format!("feature_subset_size {k} must lie in 1..={p}")));
    }
    let tree_cfg = TreeConfig {
        feature_subset_size: (p > 0).then_some(k),
        ..cfg.tree.clone()
    };

    let fitted: Vec<(RegressionTree, BootstrapSample)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = labeled_rng(cfg.seed, &format!("forest/tree/{i}"));
            let sample = bootstrap_sample(n, &mut rng)?;
            let tree = fit_tree_on(frame, y, &sample.in_bag, &tree_cfg, &mut rng)?;
            Ok((tree, sample))
        })
        .collect::<Result<_>>()?;
    let (trees, bootstrap): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let oob = out_of_bag(&trees, &bootstrap, frame, y)?;
    Ok(ForestModel { trees, bootstrap, oob })
}

fn out_of_bag(
    trees: &[RegressionTree],
    samples: &[BootstrapSample],
    frame: &FeatureFrame,
    y: &[f64],
) -> Result<OobSummary> {
    let n = frame.n_rows();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (tree, sample) in trees.iter().zip(samples) {
        if sample.out_of_bag.is_empty() {
            continue;
        }
        let preds = tree.predict(&frame.select(&sample.out_of_bag))?;
        for (&row, p) in sample.out_of_bag.iter().zip(preds) {
            sum[row] += p;
            count[row] += 1;
        }
    }
    let covered: Vec<usize> = (0..n).filter(|&r| count[r] > 0).collect();
    let rmse = (!covered.is_empty()).then(|| {
        let sse: f64 = covered.iter().map(|&r| (sum[r] / count[r] as f64 - y[r]).powi(2)).sum();
        (sse / covered.len() as f64).sqrt()
    });
    Ok(OobSummary {
        rmse,
        covered: covered.len(),
        uncovered: n - covered.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::seeded_rng;
    use crate::tree::TreeNode;

    #[test]
    fn single_row_bootstrap() {
        let s = bootstrap_sample(1, &mut seeded_rng(0)).unwrap();
        assert_eq!(s.in_bag, vec![0]);
        assert!(s.out_of_bag.is_empty());
        assert!(bootstrap_sample(0, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn oob_is_complement_of_in_bag() {
        let s = bootstrap_sample(500, &mut seeded_rng(3)).unwrap();
        assert_eq!(s.in_bag.len(), 500);
        for i in 0..500 {
            assert_eq!(s.in_bag.contains(&i), !s.out_of_bag.contains(&i));
        }
    }

    fn stub(values: &[f64]) -> ForestModel {
        ForestModel {
            trees: values.iter().map(|&v| RegressionTree::constant(v, 1)).collect(),
            bootstrap: Vec::new(),
            oob: OobSummary {
                rmse: None,
                covered: 0,
                uncovered: 0,
            },
        }
    }

    #[test]
    fn prediction_is_tree_mean() {
        let frame = FeatureFrame::from_rows(&["x"], &[vec![0.0]]).unwrap();
        assert_eq!(stub(&[2.0, 4.0]).predict(&frame).unwrap(), vec![3.0]);
        assert_eq!(stub(&[1.0, 2.0, 3.0, 4.0]).predict(&frame).unwrap(), vec![2.5]);
    }

    #[test]
    fn constant_target_gives_leaves_and_zero_oob() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let frame = FeatureFrame::from_rows(&["a", "b"], &rows).unwrap();
        let model = fit_forest(&frame, &[5.0; 30], &ForestConfig::default()).unwrap();
        assert!(model.trees.iter().all(|t| matches!(t.root, TreeNode::Leaf { .. })));
        assert_eq!(model.oob.rmse, Some(0.0));
    }

    #[test]
    fn one_tree_forest_equals_tree() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * i) % 11) as f64).collect();
        let frame = FeatureFrame::from_rows(&["a", "b"], &rows).unwrap();
        let cfg = ForestConfig {
            n_trees: 1,
            ..Default::default()
        };
        let model = fit_forest(&frame, &y, &cfg).unwrap();
        assert_eq!(model.predict(&frame).unwrap(), model.trees[0].predict(&frame).unwrap());
    }

    #[test]
    fn rejects_oversized_subset() {
        let frame = FeatureFrame::from_rows(&["a"], &[vec![1.0], vec![2.0]]).unwrap();
        let cfg = ForestConfig {
            feature_subset_size: Some(2),
            ..Default::default()
        };
        assert!(matches!(fit_forest(&frame, &[1.0, 2.0], &cfg), Err(Error::Config(_))));
    }
}
