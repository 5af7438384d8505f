//! Gradient-boosted regression trees for multiclass classification under the
//! softmax cross-entropy objective.
//!
//! Every round fits one tree per class to the per-row gradient and Hessian of
//! the loss with respect to that class's raw score, using exact greedy split
//! enumeration over sorted feature values. Leaf weights are the Newton step
//! `-G / (H + lambda)`; a split is kept only when its regularised gain,
//! net of `min_split_loss`, is positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::midpoint;
use crate::labels::{argmax_f64, Labels};
use crate::matrix::Matrix;

pub const HESSIAN_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    #[default]
    #[serde(rename = "multi:softprob")]
    MultiSoftprob,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    #[default]
    Error,
}

/// `auto` resolves to exact greedy enumeration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMethod {
    #[default]
    Auto,
    Exact,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub min_split_loss: f64,
    pub objective: Objective,
    pub eval_metric: EvalMetric,
    pub tree_method: TreeMethod,
    pub predictor: Predictor,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub reg_lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            learning_rate: 0.3,
            min_split_loss: 0.1,
            objective: Objective::MultiSoftprob,
            eval_metric: EvalMetric::Error,
            tree_method: TreeMethod::Auto,
            predictor: Predictor::Auto,
            n_rounds: 100,
            max_depth: 6,
            reg_lambda: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate must be positive"));
        }
        if !(self.min_split_loss >= 0.0 && self.min_split_loss.is_finite()) {
            return Err(Error::param("min_split_loss must be non-negative"));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(Error::param("reg_lambda must be non-negative"));
        }
        if self.n_rounds == 0 {
            return Err(Error::param("n_rounds must be at least 1"));
        }
        Ok(())
    }
}

/// `exp(s_i - max s)`, normalised.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() || scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("softmax needs a non-empty finite score vector"));
    }
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in s.iter_mut() {
        *v /= sum;
    }
}

/// Derivatives of `-ln p_y` with respect to the raw scores:
/// `g_k = p_k - [k == y]`, `h_k = max(p_k (1 - p_k), 1e-16)`.
pub fn grad_hess(p: &[f64], y: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let sum: f64 = p.iter().sum();
    if y >= p.len() || p.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::param("grad_hess needs a probability vector and a class in range"));
    }
    let g = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| if k == y { pk - 1.0 } else { pk })
        .collect();
    let h = p.iter().map(|&pk| hessian(pk)).collect();
    Ok((g, h))
}

#[inline]
fn hessian(p: f64) -> f64 {
    (p * (1.0 - p)).max(HESSIAN_FLOOR)
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    // NaN must fail too, hence no plain `<=`.
    if (h + lambda).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::param("leaf weight needs H + lambda > 0"));
    }
    Ok(-g / (h + lambda))
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(hl + lambda > 0.0 && hr + lambda > 0.0) {
        return Err(Error::param("split gain needs H + lambda > 0 on both sides"));
    }
    Ok(gain_unchecked(gl, hl, gr, hr, lambda, gamma))
}

#[inline]
fn gain_unchecked(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
        - gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl RegNode {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
                RegNode::Leaf { weight } => return *weight,
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            RegNode::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
            RegNode::Leaf { .. } => 0,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RegNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            RegNode::Leaf { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Gain net of `gamma`; the split is worth keeping only when positive.
    pub gain: f64,
}

/// Row lists of one node, one list per feature, each sorted by that feature.
struct NodeRows {
    by_feature: Vec<Vec<u32>>,
}

impl NodeRows {
    fn len(&self) -> usize {
        self.by_feature.first().map_or(0, Vec::len)
    }

    fn sorted(x: &Matrix, rows: &[usize]) -> Self {
        let by_feature = (0..x.cols())
            .map(|f| {
                let mut r: Vec<u32> = rows.iter().map(|&i| i as u32).collect();
                r.sort_by(|&a, &b| {
                    x.get(a as usize, f)
                        .total_cmp(&x.get(b as usize, f))
                        .then(a.cmp(&b))
                });
                r
            })
            .collect();
        NodeRows { by_feature }
    }

    fn partition(self, goes_left: &[bool]) -> (NodeRows, NodeRows) {
        let mut left = Vec::with_capacity(self.by_feature.len());
        let mut right = Vec::with_capacity(self.by_feature.len());
        for list in self.by_feature {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&i| goes_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        (NodeRows { by_feature: left }, NodeRows { by_feature: right })
    }
}

struct Stats<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    gamma: f64,
}

/// Highest-gain threshold over all features. Scans features in index order and
/// thresholds in ascending order, replacing the incumbent only on strictly
/// higher gain.
fn scan(x: &Matrix, node: &NodeRows, s: &Stats, g_tot: f64, h_tot: f64) -> Option<GainSplit> {
    let mut best: Option<GainSplit> = None;
    for (f, list) in node.by_feature.iter().enumerate() {
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in list.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            gl += s.g[a];
            hl += s.h[a];
            let (va, vb) = (x.get(a, f), x.get(b, f));
            if va < vb {
                let gain = gain_unchecked(gl, hl, g_tot - gl, h_tot - hl, s.lambda, s.gamma);
                if best.is_none_or(|bs| gain > bs.gain) {
                    best = Some(GainSplit {
                        feature: f,
                        threshold: midpoint(va, vb),
                        gain,
                    });
                }
            }
        }
    }
    best
}

/// Exact greedy split search for one node given per-row gradients and
/// Hessians. Returns the argmax even when its gain is not positive.
pub fn best_gain_split(
    x: &Matrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
) -> Option<GainSplit> {
    if rows.len() < 2 {
        return None;
    }
    let node = NodeRows::sorted(x, rows);
    let g_tot: f64 = node.by_feature[0].iter().map(|&i| g[i as usize]).sum();
    let h_tot: f64 = node.by_feature[0].iter().map(|&i| h[i as usize]).sum();
    scan(
        x,
        &node,
        &Stats {
            g,
            h,
            lambda,
            gamma,
        },
        g_tot,
        h_tot,
    )
}

fn grow(x: &Matrix, node: NodeRows, s: &Stats, depth: usize, max_depth: usize, goes_left: &mut [bool]) -> RegNode {
    let order = node.by_feature.first().map(Vec::as_slice).unwrap_or(&[]);
    let g_tot: f64 = order.iter().map(|&i| s.g[i as usize]).sum();
    let h_tot: f64 = order.iter().map(|&i| s.h[i as usize]).sum();
    let leaf = || RegNode::Leaf {
        weight: -g_tot / (h_tot + s.lambda),
    };
    if depth >= max_depth || node.len() < 2 {
        return leaf();
    }
    let Some(split) = scan(x, &node, s, g_tot, h_tot).filter(|b| b.gain > 0.0) else {
        return leaf();
    };
    for &i in &node.by_feature[split.feature] {
        goes_left[i as usize] = x.get(i as usize, split.feature) <= split.threshold;
    }
    let (l, r) = node.partition(goes_left);
    let left = grow(x, l, s, depth + 1, max_depth, goes_left);
    let right = grow(x, r, s, depth + 1, max_depth, goes_left);
    RegNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub label_vocab: Vec<String>,
    pub n_features: usize,
    pub base_score: f64,
    /// `trees[round][class]`.
    pub trees: Vec<Vec<RegNode>>,
    /// Training `error` after each round.
    pub train_error: Vec<f64>,
    /// Mean training log-loss after each round.
    pub train_logloss: Vec<f64>,
}

pub fn fit_gbt(x: &Matrix, y: &Labels, params: GbtParams) -> Result<GbtModel> {
    params.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::param("cannot fit boosted trees on an empty training set"));
    }
    if n != y.len() {
        return Err(Error::shape(format!("{n} training rows but {} labels", y.len())));
    }
    let k = y.n_classes();
    let distinct = {
        let mut seen = vec![false; k];
        y.ids.iter().for_each(|&i| seen[i] = true);
        seen.iter().filter(|&&b| b).count()
    };
    if k < 2 || distinct < 2 {
        return Err(Error::DegenerateLabels(
            "boosted trees need labels from at least two classes".into(),
        ));
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let root = if x.cols() > 0 {
        Some(NodeRows::sorted(x, &all_rows))
    } else {
        None
    };
    let base_score = 0.0;
    let mut raw = vec![base_score; n * k];
    let mut prob = vec![0.0; n * k];
    let mut model = GbtModel {
        params: params.clone(),
        label_vocab: y.vocab.clone(),
        n_features: x.cols(),
        base_score,
        trees: Vec::with_capacity(params.n_rounds),
        train_error: Vec::with_capacity(params.n_rounds),
        train_logloss: Vec::with_capacity(params.n_rounds),
    };

    for _ in 0..params.n_rounds {
        prob.copy_from_slice(&raw);
        prob.chunks_exact_mut(k).for_each(softmax_in_place);

        let round: Vec<RegNode> = (0..k)
            .into_par_iter()
            .map(|c| {
                let g: Vec<f64> = (0..n)
                    .map(|i| prob[i * k + c] - f64::from(u8::from(y.ids[i] == c)))
                    .collect();
                let h: Vec<f64> = (0..n).map(|i| hessian(prob[i * k + c])).collect();
                let stats = Stats {
                    g: &g,
                    h: &h,
                    lambda: params.reg_lambda,
                    gamma: params.min_split_loss,
                };
                match &root {
                    Some(root) => {
                        let node = NodeRows {
                            by_feature: root.by_feature.clone(),
                        };
                        let mut goes_left = vec![false; n];
                        grow(x, node, &stats, 0, params.max_depth, &mut goes_left)
                    }
                    None => {
                        let gs: f64 = g.iter().sum();
                        let hs: f64 = h.iter().sum();
                        RegNode::Leaf {
                            weight: -gs / (hs + params.reg_lambda),
                        }
                    }
                }
            })
            .collect();

        for i in 0..n {
            let row = x.row(i);
            for (c, tree) in round.iter().enumerate() {
                raw[i * k + c] += params.learning_rate * tree.value(row);
            }
        }
        model.trees.push(round);

        let (mut wrong, mut loss) = (0usize, 0.0);
        for i in 0..n {
            let mut p = raw[i * k..(i + 1) * k].to_vec();
            softmax_in_place(&mut p);
            if argmax_f64(&p) != y.ids[i] {
                wrong += 1;
            }
            loss -= p[y.ids[i]].max(f64::MIN_POSITIVE).ln();
        }
        model.train_error.push(wrong as f64 / n as f64);
        model.train_logloss.push(loss / n as f64);
    }
    Ok(model)
}

impl GbtModel {
    pub fn n_classes(&self) -> usize {
        self.label_vocab.len()
    }

    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut raw = vec![self.base_score; self.n_classes()];
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                raw[c] += self.params.learning_rate * tree.value(row);
            }
        }
        raw
    }

    /// Labels (as vocabulary indices) and per-class probabilities.
    pub fn predict_proba(&self, x: &Matrix) -> Result<(Vec<usize>, Matrix)> {
        x.check_width(self.n_features, "boosted-tree query")?;
        let k = self.n_classes();
        let rows: Vec<&[f64]> = x.iter_rows().collect();
        let probs: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| {
                let mut p = self.raw_scores(r);
                softmax_in_place(&mut p);
                p
            })
            .collect();
        let labels = probs.iter().map(|p| argmax_f64(p)).collect();
        let flat = probs.into_iter().flatten().collect();
        Ok((labels, Matrix::from_vec(rows.len(), k, flat)?))
    }

    pub fn predict_ids(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.0)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<String>> {
        Ok(self
            .predict_ids(x)?
            .into_iter()
            .map(|i| self.label_vocab[i].clone())
            .collect())
    }

    pub fn split_count(&self) -> usize {
        self.trees.iter().flatten().map(RegNode::n_splits).sum()
    }

    pub fn tree_count(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }
}

pub fn predict_gbt(model: &GbtModel, x: &Matrix) -> Result<(Vec<String>, Matrix)> {
    let (ids, probs) = model.predict_proba(x)?;
    Ok((
        ids.into_iter().map(|i| model.label_vocab[i].clone()).collect(),
        probs,
    ))
}
