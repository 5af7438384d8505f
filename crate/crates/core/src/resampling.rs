//! Class rebalancing: SMOTE oversampling for classes below their target count,
//! random undersampling for classes above it.
//!
//! Labels are class indices. Output keeps the surviving original rows in input
//! order and appends synthetic rows class by class, in generation order.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebalancePolicy {
    #[default]
    Median,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RebalancePlan {
    pub targets: BTreeMap<usize, usize>,
    pub smote_k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub base_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
}

pub fn class_counts(y: &[usize]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &c in y {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

/// Median of the class counts. Even-sized sets take the floor of the mean of
/// the two middle counts.
fn median(counts: &BTreeMap<usize, usize>) -> usize {
    let mut v: Vec<usize> = counts.values().copied().collect();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Every class moves to the median count, except singletons, which SMOTE
/// cannot interpolate from and therefore stay at 1.
pub fn plan_targets(
    class_counts: &BTreeMap<usize, usize>,
    policy: RebalancePolicy,
    smote_k: usize,
    seed: u64,
) -> Result<RebalancePlan> {
    if class_counts.is_empty() {
        return Err(Error::param("cannot plan a rebalance without classes"));
    }
    if smote_k == 0 {
        return Err(Error::param("smote_k must be at least 1"));
    }
    let target = match policy {
        RebalancePolicy::Median => median(class_counts).max(1),
    };
    let targets = class_counts
        .iter()
        .map(|(&c, &n)| (c, if n <= 1 { n.max(1) } else { target }))
        .collect();
    Ok(RebalancePlan {
        targets,
        smote_k,
        seed,
    })
}

/// `base + lambda * (neighbour - base)`, componentwise.
pub fn interpolate(base: &[f64], neighbour: &[f64], lambda: f64) -> Vec<f64> {
    base.iter()
        .zip(neighbour)
        .map(|(&b, &n)| b + lambda * (n - b))
        .collect()
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn smote_oversample(
    x: &Matrix,
    y: &[usize],
    cls: usize,
    n_new: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if k == 0 {
        return Err(Error::param("smote k must be at least 1"));
    }
    let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == cls).collect();
    if members.len() < 2 {
        return Err(Error::param(format!(
            "class {cls} has {} rows; SMOTE needs at least 2",
            members.len()
        )));
    }
    if n_new == 0 {
        return Ok(Vec::new());
    }
    let kk = k.min(members.len() - 1);
    let mut cache: Vec<Option<Vec<usize>>> = vec![None; members.len()];
    let mut rng = rng::stream(seed, cls as u64);
    let mut out = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let b = rng.random_range(0..members.len());
        let nbrs = cache[b].get_or_insert_with(|| {
            let base = x.row(members[b]);
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&m| m != members[b])
                .map(|&m| (sq_euclidean(base, x.row(m)), m))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.truncate(kk);
            d.into_iter().map(|(_, m)| m).collect()
        });
        let neighbor_index = nbrs[rng.random_range(0..nbrs.len())];
        let lambda: f64 = rng.random();
        let base_index = members[b];
        out.push(SyntheticSample {
            features: interpolate(x.row(base_index), x.row(neighbor_index), lambda),
            label: cls,
            base_index,
            neighbor_index,
            lambda,
        });
    }
    Ok(out)
}

/// Row indices of `target` randomly chosen members of `cls`, ascending.
pub fn random_undersample(y: &[usize], cls: usize, target: usize, seed: u64) -> Result<Vec<usize>> {
    let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == cls).collect();
    if target == 0 {
        return Err(Error::param("undersampling target must be at least 1"));
    }
    if target > members.len() {
        return Err(Error::param(format!(
            "cannot keep {target} rows of class {cls}, which has {}",
            members.len()
        )));
    }
    let mut rng = rng::stream(seed, cls as u64);
    let mut kept: Vec<usize> = index::sample(&mut rng, members.len(), target)
        .into_iter()
        .map(|i| members[i])
        .collect();
    kept.sort_unstable();
    Ok(kept)
}

pub fn rebalance(x: &Matrix, y: &[usize], plan: &RebalancePlan) -> Result<(Matrix, Vec<usize>)> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    let counts = class_counts(y);
    if let Some(c) = counts.keys().find(|c| !plan.targets.contains_key(c)) {
        return Err(Error::param(format!("rebalance plan does not cover class {c}")));
    }
    let mut keep = vec![true; y.len()];
    let mut synthetic = Vec::new();
    for (&cls, &target) in &plan.targets {
        let have = counts.get(&cls).copied().unwrap_or(0);
        if have > target {
            let retained = random_undersample(y, cls, target, plan.seed)?;
            for (i, &label) in y.iter().enumerate() {
                if label == cls {
                    keep[i] = false;
                }
            }
            for i in retained {
                keep[i] = true;
            }
        } else if have < target {
            synthetic.extend(smote_oversample(
                x,
                y,
                cls,
                target - have,
                plan.smote_k,
                plan.seed,
            )?);
        }
    }
    let mut out_x = Matrix::zeros(0, x.cols());
    let mut out_y = Vec::new();
    for (i, &label) in y.iter().enumerate() {
        if keep[i] {
            out_x.push_row(x.row(i))?;
            out_y.push(label);
        }
    }
    for s in synthetic {
        out_x.push_row(&s.features)?;
        out_y.push(s.label);
    }
    Ok((out_x, out_y))
}
