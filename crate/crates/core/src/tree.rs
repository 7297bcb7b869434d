//! Regression trees grown by variance reduction.
//!
//! A node's variance is the population variance of its targets. A candidate
//! feature `X` partitions the node into groups `c`; its split variance is
//! `Σ_c P(c)·σ²_c` and its variance reduction is `σ² − Σ_c P(c)·σ²_c`.
//! Categorical features split multiway (one child per category present in
//! the node) and are used at most once per root-to-leaf path. Numeric
//! features split in two at the midpoint between consecutive distinct
//! values (`x ≤ t` goes left) and may be reused.
//!
//! Reductions within `1e-12·σ²` of each other are ties: the earlier feature
//! in frame order wins, and for numeric features the smaller threshold wins.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDesc, FeatureFrame, FeatureValues};
use crate::error::{Error, Result};

/// Relative tolerance under which two reductions are considered equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NumericSplit {
    #[default]
    BinaryThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// A node whose variance is below this becomes a leaf.
    pub variance_threshold: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub numeric_split: NumericSplit,
    /// Features drawn (without replacement) at each node; `None` uses all.
    pub feature_subset_size: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            variance_threshold: 0.0,
            max_depth: None,
            min_samples_leaf: 1,
            numeric_split: NumericSplit::BinaryThreshold,
            feature_subset_size: None,
        }
    }
}

impl TreeConfig {
    pub fn with_max_depth(depth: usize) -> Self {
        TreeConfig {
            max_depth: Some(depth),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold.is_finite() && self.variance_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "variance_threshold must be >= 0, got {}",
                self.variance_threshold
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        if self.feature_subset_size == Some(0) {
            return Err(Error::Config("feature_subset_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryChild {
    pub category: String,
    pub node: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        prediction: f64,
        n: usize,
    },
    Categorical {
        feature: usize,
        n: usize,
        /// Index into `children` used for categories unseen at this node.
        fallback: usize,
        children: Vec<CategoryChild>,
    },
    Numeric {
        feature: usize,
        n: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn n(&self) -> usize {
        match self {
            TreeNode::Leaf { n, .. } | TreeNode::Categorical { n, .. } | TreeNode::Numeric { n, .. } => *n,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Categorical { children, .. } => 1 + children.iter().map(|c| c.node.depth()).max().unwrap_or(0),
            TreeNode::Numeric { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { .. } => out.push(node),
                TreeNode::Categorical { children, .. } => stack.extend(children.iter().rev().map(|c| &c.node)),
                TreeNode::Numeric { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }
}

/// A fitted tree with the features it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub features: Vec<FeatureDesc>,
    pub root: TreeNode,
}

impl RegressionTree {
    /// A one-leaf tree predicting `value`.
    pub fn constant(value: f64, n: usize) -> Self {
        RegressionTree {
            features: Vec::new(),
            root: TreeNode::Leaf { prediction: value, n },
        }
    }

    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        let positions = frame.resolve(&self.features)?;
        let columns: Vec<&FeatureValues> = positions.iter().map(|&p| &frame.features()[p].values).collect();
        Ok((0..frame.n_rows())
            .map(|row| predict_row(&self.root, &columns, row))
            .collect())
    }
}

fn predict_row(mut node: &TreeNode, columns: &[&FeatureValues], row: usize) -> f64 {
    loop {
        match node {
            TreeNode::Leaf { prediction, .. } => return *prediction,
            TreeNode::Numeric {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let FeatureValues::Numeric(v) = columns[*feature] else {
                    unreachable!("resolved kinds match")
                };
                node = if v[row] <= *threshold { left } else { right };
            }
            TreeNode::Categorical {
                feature,
                fallback,
                children,
                ..
            } => {
                let FeatureValues::Categorical { codes, levels } = columns[*feature] else {
                    unreachable!("resolved kinds match")
                };
                let category = &levels[codes[row] as usize];
                node = children
                    .iter()
                    .find(|c| &c.category == category)
                    .map_or(&children[*fallback].node, |c| &c.node);
            }
        }
    }
}

/// Population variance `Σ(y − μ)²/n`.
pub fn node_variance(targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Empty("variance of an empty target vector".into()));
    }
    let n = targets.len() as f64;
    let mu = targets.iter().sum::<f64>() / n;
    Ok(targets.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n)
}

/// `Σ_c P(c)·σ²_c` over the groups formed by equal feature values.
pub fn split_variance<K: Eq + Hash>(feature_values: &[K], targets: &[f64]) -> Result<f64> {
    if feature_values.len() != targets.len() {
        return Err(Error::LengthMismatch(format!(
            "{} feature values, {} targets",
            feature_values.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::Empty("split variance of an empty node".into()));
    }
    let mut groups: HashMap<&K, Vec<f64>> = HashMap::new();
    let mut order: Vec<&K> = Vec::new();
    for (k, &y) in feature_values.iter().zip(targets) {
        groups
            .entry(k)
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(y);
    }
    let n = targets.len() as f64;
    let mut total = 0.0;
    for k in order {
        let g = &groups[k];
        total += g.len() as f64 / n * node_variance(g)?;
    }
    Ok(total)
}

/// `σ² − σ²_X`, clamped at zero against rounding.
pub fn variance_reduction<K: Eq + Hash>(feature_values: &[K], targets: &[f64]) -> Result<f64> {
    let within = split_variance(feature_values, targets)?;
    Ok((node_variance(targets)? - within).max(0.0))
}

/// The split a node would take.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    /// Threshold for numeric features; `None` for a multiway categorical split.
    pub threshold: Option<f64>,
    pub reduction: f64,
}

/// Split the root would take on `(frame, y)` considering every feature,
/// or `None` if no admissible split reduces variance.
pub fn root_split(frame: &FeatureFrame, y: &[f64], cfg: &TreeConfig) -> Result<Option<SplitChoice>> {
    cfg.validate()?;
    check_inputs(frame, y)?;
    let rows: Vec<usize> = (0..frame.n_rows()).collect();
    let fitter = Fitter::new(frame, y, &rows, cfg);
    let pos: Vec<usize> = (0..rows.len()).collect();
    let sorted = fitter.presort().0;
    let stats = NodeStats::of(&fitter.y, &pos);
    let candidates: Vec<usize> = (0..frame.n_features()).collect();
    Ok(fitter.best_split(&pos, &sorted, &stats, &candidates))
}

fn check_inputs(frame: &FeatureFrame, y: &[f64]) -> Result<()> {
    if frame.n_rows() == 0 {
        return Err(Error::Empty("cannot fit a tree on zero rows".into()));
    }
    if y.len() != frame.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} targets for {} rows",
            y.len(),
            frame.n_rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tree targets".into()));
    }
    Ok(())
}

/// Fits a tree on all rows of `frame`.
pub fn fit_tree<R: Rng + ?Sized>(
    frame: &FeatureFrame,
    y: &[f64],
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<RegressionTree> {
    fit_tree_presorted(frame, y, cfg, rng, &Presorted::of(frame))
}

/// Per numeric feature, row positions sorted by value (ties by position).
/// Depends only on the feature values, so boosting computes it once.
#[derive(Debug, Clone)]
pub(crate) struct Presorted(SortedLists);

/// One sorted position list per numeric feature, `None` for categorical ones.
type SortedLists = Vec<Option<Vec<usize>>>;

impl Presorted {
    pub(crate) fn of(frame: &FeatureFrame) -> Self {
        Presorted(
            frame
                .features()
                .iter()
                .map(|f| match &f.values {
                    FeatureValues::Numeric(v) => Some(sorted_positions(v)),
                    FeatureValues::Categorical { .. } => None,
                })
                .collect(),
        )
    }
}

fn sorted_positions(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    order
}

/// [`fit_tree`] with the presorted order of `frame` supplied by the caller.
pub(crate) fn fit_tree_presorted<R: Rng + ?Sized>(
    frame: &FeatureFrame,
    y: &[f64],
    cfg: &TreeConfig,
    rng: &mut R,
    presorted: &Presorted,
) -> Result<RegressionTree> {
    cfg.validate()?;
    check_inputs(frame, y)?;
    check_subset_size(frame, cfg)?;
    let rows: Vec<usize> = (0..frame.n_rows()).collect();
    let fitter = Fitter::new(frame, y, &rows, cfg);
    let used = vec![false; frame.n_features()];
    let root = fitter.grow(rows, presorted.0.clone(), used, 0, rng);
    Ok(RegressionTree {
        features: frame.descs(),
        root,
    })
}

fn check_subset_size(frame: &FeatureFrame, cfg: &TreeConfig) -> Result<()> {
    if let Some(k) = cfg.feature_subset_size {
        if k > frame.n_features() {
            return Err(Error::Config(format!(
                "feature_subset_size {k} exceeds the {} available features",
                frame.n_features()
            )));
        }
    }
    Ok(())
}

/// Fits a tree on the rows listed in `rows` (repeats allowed, as in a
/// bootstrap sample).
pub fn fit_tree_on<R: Rng + ?Sized>(
    frame: &FeatureFrame,
    y: &[f64],
    rows: &[usize],
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<RegressionTree> {
    cfg.validate()?;
    check_inputs(frame, y)?;
    if rows.is_empty() {
        return Err(Error::Empty("cannot fit a tree on zero rows".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= frame.n_rows()) {
        return Err(Error::InvalidInput(format!("row index {bad} out of range")));
    }
    check_subset_size(frame, cfg)?;
    let fitter = Fitter::new(frame, y, rows, cfg);
    let pos: Vec<usize> = (0..rows.len()).collect();
    let sorted = fitter.presort().0;
    let used = vec![false; frame.n_features()];
    let root = fitter.grow(pos, sorted, used, 0, rng);
    Ok(RegressionTree {
        features: frame.descs(),
        root,
    })
}

enum Col<'a> {
    Num(Vec<f64>),
    Cat { codes: Vec<u32>, levels: &'a [String] },
}

struct NodeStats {
    n: usize,
    mean: f64,
    variance: f64,
}

impl NodeStats {
    fn of(y: &[f64], pos: &[usize]) -> Self {
        let n = pos.len();
        let mean = pos.iter().map(|&p| y[p]).sum::<f64>() / n as f64;
        let variance = pos.iter().map(|&p| (y[p] - mean).powi(2)).sum::<f64>() / n as f64;
        NodeStats { n, mean, variance }
    }
}

/// Training state; rows are addressed by sample position `0..rows.len()`.
struct Fitter<'a> {
    cols: Vec<Col<'a>>,
    y: Vec<f64>,
    cfg: &'a TreeConfig,
}

impl<'a> Fitter<'a> {
    fn new(frame: &'a FeatureFrame, y: &[f64], rows: &[usize], cfg: &'a TreeConfig) -> Self {
        let cols = frame
            .features()
            .iter()
            .map(|f| match &f.values {
                FeatureValues::Numeric(v) => Col::Num(rows.iter().map(|&r| v[r]).collect()),
                FeatureValues::Categorical { codes, levels } => Col::Cat {
                    codes: rows.iter().map(|&r| codes[r]).collect(),
                    levels,
                },
            })
            .collect();
        Fitter {
            cols,
            y: rows.iter().map(|&r| y[r]).collect(),
            cfg,
        }
    }

    fn presort(&self) -> Presorted {
        Presorted(
            self.cols
                .iter()
                .map(|c| match c {
                    Col::Num(v) => Some(sorted_positions(v)),
                    Col::Cat { .. } => None,
                })
                .collect(),
        )
    }

    fn leaf(&self, stats: &NodeStats) -> TreeNode {
        TreeNode::Leaf {
            prediction: stats.mean,
            n: stats.n,
        }
    }

    fn grow<R: Rng + ?Sized>(
        &self,
        pos: Vec<usize>,
        sorted: SortedLists,
        used: Vec<bool>,
        depth: usize,
        rng: &mut R,
    ) -> TreeNode {
        let stats = NodeStats::of(&self.y, &pos);
        let msl = self.cfg.min_samples_leaf;
        if stats.variance == 0.0
            || stats.variance < self.cfg.variance_threshold
            || self.cfg.max_depth.is_some_and(|d| depth >= d)
            || stats.n < 2 * msl
        {
            return self.leaf(&stats);
        }

        let p = self.cols.len();
        let mut candidates: Vec<usize> = match self.cfg.feature_subset_size {
            Some(k) if k < p => {
                let mut picked = index::sample(rng, p, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..p).collect(),
        };
        candidates.retain(|&f| !used[f]);

        let Some(choice) = self.best_split(&pos, &sorted, &stats, &candidates) else {
            return self.leaf(&stats);
        };

        match (&self.cols[choice.feature], choice.threshold) {
            (Col::Num(v), Some(t)) => {
                let goes_left = |q: usize| v[q] <= t;
                let (lp, rp): (Vec<usize>, Vec<usize>) = pos.iter().partition(|&&q| goes_left(q));
                let (ls, rs) = split_sorted(sorted, |q| usize::from(!goes_left(q)), 2);
                let left = self.grow(lp, ls, used.clone(), depth + 1, rng);
                let right = self.grow(rp, rs, used, depth + 1, rng);
                TreeNode::Numeric {
                    feature: choice.feature,
                    n: stats.n,
                    threshold: t,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            (Col::Cat { codes, levels }, None) => {
                // children ordered by category code
                let mut present: Vec<u32> = pos.iter().map(|&q| codes[q]).collect();
                present.sort_unstable();
                present.dedup();
                let mut slot = vec![usize::MAX; levels.len()];
                for (i, &c) in present.iter().enumerate() {
                    slot[c as usize] = i;
                }
                let mut child_pos = vec![Vec::new(); present.len()];
                for &q in &pos {
                    child_pos[slot[codes[q] as usize]].push(q);
                }
                let child_sorted = split_sorted_many(sorted, |q| slot[codes[q] as usize], present.len());
                let mut used = used;
                used[choice.feature] = true;
                // most populous child, first on ties
                let fallback =
                    child_pos.iter().enumerate().fold(
                        0,
                        |best, (i, cp)| if cp.len() > child_pos[best].len() { i } else { best },
                    );
                let mut children = Vec::with_capacity(present.len());
                for (i, (cp, cs)) in child_pos.into_iter().zip(child_sorted).enumerate() {
                    let node = self.grow(cp, cs, used.clone(), depth + 1, rng);
                    children.push(CategoryChild {
                        category: levels[present[i] as usize].clone(),
                        node,
                    });
                }
                TreeNode::Categorical {
                    feature: choice.feature,
                    n: stats.n,
                    fallback,
                    children,
                }
            }
            _ => unreachable!("split kind matches column kind"),
        }
    }

    fn best_split(
        &self,
        pos: &[usize],
        sorted: &[Option<Vec<usize>>],
        stats: &NodeStats,
        candidates: &[usize],
    ) -> Option<SplitChoice> {
        let tol = TIE_TOLERANCE * stats.variance;
        let mut best: Option<SplitChoice> = None;
        for &f in candidates {
            let found = match &self.cols[f] {
                Col::Num(v) => self.numeric_split(v, sorted[f].as_deref().expect("numeric presorted"), stats, tol),
                Col::Cat { codes, levels } => self.categorical_split(codes, levels, pos, stats),
            };
            if let Some((threshold, reduction)) = found {
                if reduction > tol && best.is_none_or(|b| reduction > b.reduction + tol) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        reduction,
                    });
                }
            }
        }
        best
    }

    /// Best midpoint threshold by scanning the node's sorted positions.
    fn numeric_split(&self, v: &[f64], order: &[usize], stats: &NodeStats, tol: f64) -> Option<(Option<f64>, f64)> {
        let n = order.len();
        let msl = self.cfg.min_samples_leaf;
        let centered = |k: usize| self.y[order[k]] - stats.mean;
        let total_s: f64 = (0..n).map(centered).sum();
        let total_q: f64 = (0..n).map(|k| centered(k).powi(2)).sum();
        let nf = n as f64;
        let mut s = 0.0;
        let mut q = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for k in 1..n {
            let c = centered(k - 1);
            s += c;
            q += c * c;
            let (lo, hi) = (v[order[k - 1]], v[order[k]]);
            if lo == hi || k < msl || n - k < msl {
                continue;
            }
            let kl = k as f64;
            let kr = nf - kl;
            let sse_left = (q - s * s / kl).max(0.0);
            let sse_right = ((total_q - q) - (total_s - s).powi(2) / kr).max(0.0);
            let reduction = stats.variance - (sse_left + sse_right) / nf;
            if best.is_none_or(|(_, r)| reduction > r + tol) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((threshold, reduction));
            }
        }
        best.map(|(t, r)| (Some(t), r))
    }

    fn categorical_split(
        &self,
        codes: &[u32],
        levels: &[String],
        pos: &[usize],
        stats: &NodeStats,
    ) -> Option<(Option<f64>, f64)> {
        // (count, Σc, Σc²) per category code
        let mut groups = vec![(0usize, 0.0f64, 0.0f64); levels.len()];
        for &q in pos {
            let c = self.y[q] - stats.mean;
            let g = &mut groups[codes[q] as usize];
            g.0 += 1;
            g.1 += c;
            g.2 += c * c;
        }
        let present = groups.iter().filter(|g| g.0 > 0);
        if present.clone().count() < 2 || present.clone().any(|g| g.0 < self.cfg.min_samples_leaf) {
            return None;
        }
        let within: f64 = present.map(|&(k, s, q)| (q - s * s / k as f64).max(0.0)).sum::<f64>() / stats.n as f64;
        Some((None, stats.variance - within))
    }
}

fn split_sorted<F: Fn(usize) -> usize>(sorted: SortedLists, child: F, k: usize) -> (SortedLists, SortedLists) {
    let mut parts = split_sorted_many(sorted, child, k);
    let right = parts.pop().expect("two parts");
    let left = parts.pop().expect("two parts");
    (left, right)
}

/// Stable partition of every presorted list into `k` children.
fn split_sorted_many<F: Fn(usize) -> usize>(sorted: SortedLists, child: F, k: usize) -> Vec<SortedLists> {
    let mut out: Vec<Vec<Option<Vec<usize>>>> = (0..k).map(|_| Vec::with_capacity(sorted.len())).collect();
    for list in sorted {
        match list {
            Some(order) => {
                let mut parts = vec![Vec::new(); k];
                for q in order {
                    parts[child(q)].push(q);
                }
                for (o, p) in out.iter_mut().zip(parts) {
                    o.push(Some(p));
                }
            }
            None => out.iter_mut().for_each(|o| o.push(None)),
        }
    }
    out
}
