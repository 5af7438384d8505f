//! Brute-force k-nearest-neighbours classifier under the Manhattan metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{argmax_count, Labels};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Manhattan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub metric: Metric,
    pub n_neighbors: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            metric: Metric::Manhattan,
            n_neighbors: 1,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 {
            return Err(Error::param("n_neighbors must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
    pub label_vocab: Vec<String>,
}

pub fn manhattan(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(manhattan_unchecked(a, b))
}

#[inline]
fn manhattan_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn fit_knn(x: &Matrix, y: &Labels, params: KnnParams) -> Result<KnnModel> {
    params.validate()?;
    if x.rows() == 0 {
        return Err(Error::param("cannot fit KNN on an empty training set"));
    }
    if x.rows() != y.len() {
        return Err(Error::shape(format!(
            "{} training rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    Ok(KnnModel {
        params,
        train_x: x.clone(),
        train_y: y.ids.clone(),
        label_vocab: y.vocab.clone(),
    })
}

impl KnnModel {
    pub fn width(&self) -> usize {
        self.train_x.cols()
    }

    /// Nearest training rows to `q`, nearest first; equal distances keep the
    /// lower row index first.
    fn nearest(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let k = self.params.n_neighbors.min(self.train_x.rows());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, row) in self.train_x.iter_rows().enumerate() {
            let d = manhattan_unchecked(q, row);
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            // insert after every entry with distance <= d, so earlier rows win ties
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        best
    }

    fn predict_row(&self, q: &[f64]) -> usize {
        let mut votes = vec![0usize; self.label_vocab.len()];
        for (_, i) in self.nearest(q) {
            votes[self.train_y[i]] += 1;
        }
        argmax_count(&votes)
    }

    pub fn predict_ids(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.check_width(self.width(), "KNN query")?;
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
}

pub fn predict_knn(model: &KnnModel, x: &Matrix) -> Result<Vec<String>> {
    model.predict(x)
}
