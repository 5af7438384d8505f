//! Random forest of Gini classification trees with bootstrap bagging,
//! per-node `log2` feature subsampling and out-of-bag scoring.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{argmax_count, Labels};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    Log2,
}

impl MaxFeatures {
    /// Features drawn per node for `d` total features.
    pub fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::Log2 => ((d as f64).log2().floor() as usize).clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub oob_score: bool,
    pub random_state: u64,
    pub n_jobs: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 50,
            max_depth: 9,
            max_features: MaxFeatures::Log2,
            oob_score: true,
            random_state: 411,
            n_jobs: 1,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::param("n_estimators must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::param("max_depth must be at least 1"));
        }
        if self.n_jobs == 0 {
            return Err(Error::param("n_jobs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

impl TreeNode {
    pub fn leaf_for(&self, x: &[f64]) -> &[usize] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
                TreeNode::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_count(self.leaf_for(x))
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
            TreeNode::Leaf { .. } => 1,
        }
    }
}

/// `1 - sum (c_i / n)^2`. Errors when every count is zero.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::param("gini impurity of an empty node"));
    }
    Ok(gini_of(class_counts, n))
}

#[inline]
fn gini_of(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

/// Size-weighted Gini of a candidate partition.
#[inline]
fn weighted_gini(left: &[usize], n_left: usize, right: &[usize], n_right: usize) -> f64 {
    let n = (n_left + n_right) as f64;
    n_left as f64 / n * gini_of(left, n_left) + n_right as f64 / n * gini_of(right, n_right)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniSplit {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi` so
/// that `x <= threshold` separates them.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Exhaustive search for the partition minimising weighted child Gini.
/// `rows` may repeat (bootstrap multiplicity). Ties go to the lower feature
/// index, then the lower threshold. `None` for pure or inseparable nodes.
pub fn best_split(
    x: &Matrix,
    rows: &[usize],
    y: &[usize],
    n_classes: usize,
    features: &[usize],
) -> Option<GiniSplit> {
    if rows.len() < 2 {
        return None;
    }
    let mut total = vec![0usize; n_classes];
    for &r in rows {
        total[y[r]] += 1;
    }
    if total.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();

    // Weighted child Gini is 1 - (SL/nl + SR/nr)/n with S the sum of squared
    // class counts, so candidates are ranked exactly by comparing the
    // fractions (SL*nr + SR*nl) / (nl*nr) in integer arithmetic.
    let n = rows.len();
    let mut best: Option<(GiniSplit, u128, u128)> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    let total_sq: u128 = total.iter().map(|&c| (c as u128) * (c as u128)).sum();
    for &f in &feats {
        order.clear();
        order.extend(rows.iter().map(|&r| (x.get(r, f), y[r])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.fill(0);
        right.copy_from_slice(&total);
        let (mut sq_left, mut sq_right) = (0u128, total_sq);
        for i in 0..n - 1 {
            let (v, c) = order[i];
            sq_left += 2 * left[c] as u128 + 1;
            sq_right -= 2 * right[c] as u128 - 1;
            left[c] += 1;
            right[c] -= 1;
            let next = order[i + 1].0;
            if v < next {
                let (nl, nr) = ((i + 1) as u128, (n - i - 1) as u128);
                let num = sq_left * nr + sq_right * nl;
                let den = nl * nr;
                if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
                    let split = GiniSplit {
                        feature: f,
                        threshold: midpoint(v, next),
                        impurity: weighted_gini(&left, i + 1, &right, n - i - 1),
                    };
                    best = Some((split, num, den));
                }
            }
        }
    }
    best.map(|(split, _, _)| split)
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    n_sub: usize,
}

impl TreeBuilder<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        TreeNode::Leaf { counts }
    }

    fn grow(&self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let d = self.x.cols();
        if depth >= self.max_depth || rows.len() < 2 || d == 0 {
            return self.leaf(rows);
        }
        let subset = index::sample(rng, d, self.n_sub).into_vec();
        let Some(split) = best_split(self.x, rows, self.y, self.n_classes, &subset) else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<TreeNode>,
    /// Bootstrap draw for each tree, as row indices with repetition.
    pub bootstrap: Vec<Vec<usize>>,
    pub label_vocab: Vec<String>,
    pub n_features: usize,
    pub oob_score: Option<f64>,
    /// Rows that were out of bag for at least one tree.
    pub oob_rows: usize,
}

pub fn fit_forest(x: &Matrix, y: &Labels, params: ForestParams) -> Result<ForestModel> {
    params.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::param("cannot fit a forest on an empty training set"));
    }
    if n != y.len() {
        return Err(Error::shape(format!("{n} training rows but {} labels", y.len())));
    }
    let builder = TreeBuilder {
        x,
        y: &y.ids,
        n_classes: y.n_classes(),
        max_depth: params.max_depth,
        n_sub: params.max_features.count(x.cols()),
    };
    let fit_one = |t: usize| {
        let mut rng = rng::stream(params.random_state, t as u64);
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let tree = builder.grow(&rows, 0, &mut rng);
        (tree, rows)
    };
    let fitted: Vec<(TreeNode, Vec<usize>)> = if params.n_jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.n_jobs)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?;
        pool.install(|| (0..params.n_estimators).into_par_iter().map(fit_one).collect())
    } else {
        (0..params.n_estimators).map(fit_one).collect()
    };
    let (trees, bootstrap): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();

    let mut model = ForestModel {
        params,
        trees,
        bootstrap,
        label_vocab: y.vocab.clone(),
        n_features: x.cols(),
        oob_score: None,
        oob_rows: 0,
    };
    if model.params.oob_score {
        let (score, rows) = model.out_of_bag(x, &y.ids);
        model.oob_score = Some(score);
        model.oob_rows = rows;
    }
    Ok(model)
}

impl ForestModel {
    /// Built from parts, e.g. hand-made trees. No OOB information.
    pub fn from_trees(trees: Vec<TreeNode>, label_vocab: Vec<String>, n_features: usize) -> Self {
        ForestModel {
            params: ForestParams {
                n_estimators: trees.len(),
                oob_score: false,
                ..Default::default()
            },
            bootstrap: vec![Vec::new(); trees.len()],
            trees,
            label_vocab,
            n_features,
            oob_score: None,
            oob_rows: 0,
        }
    }

    /// Accuracy over rows voted on by the trees that did not draw them, and
    /// the number of such rows. Rows drawn by every tree are skipped.
    fn out_of_bag(&self, x: &Matrix, y: &[usize]) -> (f64, usize) {
        let n = x.rows();
        let k = self.label_vocab.len();
        let mut votes = vec![vec![0usize; k]; n];
        let mut in_bag = vec![false; n];
        for (tree, rows) in self.trees.iter().zip(&self.bootstrap) {
            in_bag.fill(false);
            for &r in rows {
                in_bag[r] = true;
            }
            for i in (0..n).filter(|&i| !in_bag[i]) {
                votes[i][tree.predict(x.row(i))] += 1;
            }
        }
        let (mut seen, mut correct) = (0usize, 0usize);
        for (v, &label) in votes.iter().zip(y) {
            if v.iter().any(|&c| c > 0) {
                seen += 1;
                if argmax_count(v) == label {
                    correct += 1;
                }
            }
        }
        let score = if seen == 0 {
            0.0
        } else {
            correct as f64 / seen as f64
        };
        (score, seen)
    }

    fn predict_row(&self, q: &[f64]) -> usize {
        let mut votes = vec![0usize; self.label_vocab.len()];
        for t in &self.trees {
            votes[t.predict(q)] += 1;
        }
        argmax_count(&votes)
    }

    pub fn predict_ids(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.check_width(self.n_features, "forest query")?;
        let rows: Vec<&[f64]> = x.iter_rows().collect();
        Ok(rows.par_iter().map(|q| self.predict_row(q)).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<String>> {
        Ok(self
            .predict_ids(x)?
            .into_iter()
            .map(|i| self.label_vocab[i].clone())
            .collect())
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }
}

pub fn predict_forest(model: &ForestModel, x: &Matrix) -> Result<Vec<String>> {
    model.predict(x)
}
