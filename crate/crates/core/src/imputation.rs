//! KNN imputation over mutually observed features.
//!
//! Neighbour search runs in two passes. A cheap dense pass ranks every
//! reference row by Manhattan distance between column-mean-completed vectors
//! and keeps a candidate pool; the pool is then re-ranked by the exact
//! partial distance. When the reference set fits inside the pool the search
//! is exhaustive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_K: usize = 5;
/// Candidate pool is `max(POOL_FACTOR * k, MIN_POOL)` rows.
const POOL_FACTOR: usize = 4;
const MIN_POOL: usize = 32;

/// Values plus a row-major missing mask (`true` = missing). Masked values are
/// stored as `0.0` and never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskedRepr", into = "MaskedRepr")]
pub struct MaskedMatrix {
    values: Matrix,
    mask: Vec<bool>,
}

/// Sparse on-disk form: flat indices of the missing cells.
#[derive(Serialize, Deserialize)]
struct MaskedRepr {
    values: Matrix,
    missing: Vec<usize>,
}

impl TryFrom<MaskedRepr> for MaskedMatrix {
    type Error = Error;

    fn try_from(r: MaskedRepr) -> Result<Self> {
        let len = r.values.rows() * r.values.cols();
        let mut mask = vec![false; len];
        for i in r.missing {
            *mask
                .get_mut(i)
                .ok_or_else(|| Error::CorruptModel(format!("mask index {i} out of range")))? = true;
        }
        MaskedMatrix::new(r.values, mask)
    }
}

impl From<MaskedMatrix> for MaskedRepr {
    fn from(m: MaskedMatrix) -> Self {
        let missing = m
            .mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        MaskedRepr {
            values: m.values,
            missing,
        }
    }
}

impl MaskedMatrix {
    pub fn new(mut values: Matrix, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.rows() * values.cols() {
            return Err(Error::shape(format!(
                "mask has {} cells, matrix has {}x{}",
                mask.len(),
                values.rows(),
                values.cols()
            )));
        }
        for (v, &m) in values.as_mut_slice().iter_mut().zip(&mask) {
            if m {
                *v = 0.0;
            }
        }
        Ok(MaskedMatrix { values, mask })
    }

    /// Treats non-finite entries (NaN) as missing.
    pub fn from_nan(values: Matrix) -> Self {
        let mask = values.as_slice().iter().map(|v| !v.is_finite()).collect();
        MaskedMatrix::new(values, mask).expect("mask built from matrix")
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        let c = self.cols();
        &self.mask[i * c..(i + 1) * c]
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols() + j]
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Manhattan distance over coordinates observed in both rows, rescaled by
/// `width / observed_count`. Infinite when nothing is mutually observed.
pub fn partial_distance(a: &[f64], b: &[f64], mask_a: &[bool], mask_b: &[bool]) -> Result<f64> {
    if a.len() != b.len() || mask_a.len() != a.len() || mask_b.len() != b.len() {
        return Err(Error::shape(format!(
            "partial distance between rows of width {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(partial_distance_unchecked(a, b, mask_a, mask_b))
}

#[inline]
fn partial_distance_unchecked(a: &[f64], b: &[f64], mask_a: &[bool], mask_b: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut shared = 0usize;
    for j in 0..a.len() {
        if !mask_a[j] && !mask_b[j] {
            sum += (a[j] - b[j]).abs();
            shared += 1;
        }
    }
    if shared == 0 {
        f64::INFINITY
    } else {
        sum * (a.len() as f64 / shared as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImputerRepr", into = "ImputerRepr")]
pub struct KnnImputer {
    reference: MaskedMatrix,
    k: usize,
    column_means: Vec<f64>,
    /// Reference rows with missing cells replaced by column means.
    completed: Matrix,
}

#[derive(Serialize, Deserialize)]
struct ImputerRepr {
    k: usize,
    column_means: Vec<f64>,
    reference: MaskedMatrix,
}

impl TryFrom<ImputerRepr> for KnnImputer {
    type Error = Error;

    fn try_from(r: ImputerRepr) -> Result<Self> {
        let imp = fit_imputer(r.reference, r.k)?;
        if imp.column_means != r.column_means {
            return Err(Error::CorruptModel(
                "imputer column means do not match the reference rows".into(),
            ));
        }
        Ok(imp)
    }
}

impl From<KnnImputer> for ImputerRepr {
    fn from(i: KnnImputer) -> Self {
        ImputerRepr {
            k: i.k,
            column_means: i.column_means,
            reference: i.reference,
        }
    }
}

pub fn fit_imputer(train: MaskedMatrix, k: usize) -> Result<KnnImputer> {
    if k == 0 {
        return Err(Error::param("imputer k must be at least 1"));
    }
    let (rows, cols) = (train.rows(), train.cols());
    let mut sums = vec![0.0; cols];
    let mut counts = vec![0usize; cols];
    for i in 0..rows {
        for (j, (&v, &m)) in train.row(i).iter().zip(train.row_mask(i)).enumerate() {
            if !m {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::FullyMissingColumn(j));
    }
    let column_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mut completed = train.values().clone();
    for i in 0..rows {
        for (j, &mean) in column_means.iter().enumerate() {
            if train.is_missing(i, j) {
                completed.set(i, j, mean);
            }
        }
    }
    Ok(KnnImputer {
        reference: train,
        k,
        column_means,
        completed,
    })
}

impl KnnImputer {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn width(&self) -> usize {
        self.reference.cols()
    }

    pub fn reference(&self) -> &MaskedMatrix {
        &self.reference
    }

    /// The `k` reference rows nearest to `row` by partial distance, nearest
    /// first, ties to the lower index. Rows at infinite distance and
    /// `exclude` are never returned.
    pub fn neighbours(&self, row: &[f64], mask: &[bool], exclude: Option<usize>) -> Vec<usize> {
        let n = self.reference.rows();
        let pool = (POOL_FACTOR * self.k).max(MIN_POOL);

        let mut candidates: Vec<(f64, usize)> = if n <= pool + usize::from(exclude.is_some()) {
            (0..n).filter(|&i| Some(i) != exclude).map(|i| (0.0, i)).collect()
        } else {
            let query: Vec<f64> = row
                .iter()
                .zip(mask)
                .zip(&self.column_means)
                .map(|((&v, &m), &mean)| if m { mean } else { v })
                .collect();
            let mut coarse: Vec<(f64, usize)> = (0..n)
                .filter(|&i| Some(i) != exclude)
                .map(|i| {
                    let d = self
                        .completed
                        .row(i)
                        .iter()
                        .zip(&query)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>();
                    (d, i)
                })
                .collect();
            coarse.select_nth_unstable_by(pool - 1, cmp_dist);
            coarse.truncate(pool);
            coarse
        };

        for c in &mut candidates {
            c.0 = partial_distance_unchecked(
                row,
                self.reference.row(c.1),
                mask,
                self.reference.row_mask(c.1),
            );
        }
        candidates.retain(|c| c.0.is_finite());
        candidates.sort_by(cmp_dist);
        candidates.truncate(self.k);
        candidates.into_iter().map(|(_, i)| i).collect()
    }

    fn fill_row(&self, out: &mut [f64], mask: &[bool], exclude: Option<usize>) {
        if !mask.iter().any(|&m| m) {
            return;
        }
        let nbrs = self.neighbours(out, mask, exclude);
        for j in 0..out.len() {
            if !mask[j] {
                continue;
            }
            let (sum, cnt) = nbrs
                .iter()
                .filter(|&&r| !self.reference.is_missing(r, j))
                .fold((0.0, 0usize), |(s, c), &r| {
                    (s + self.reference.values().get(r, j), c + 1)
                });
            out[j] = if cnt == 0 {
                self.column_means[j]
            } else {
                sum / cnt as f64
            };
        }
    }

    /// Fills every missing cell of `target` from its nearest reference rows.
    pub fn impute(&self, target: &MaskedMatrix) -> Result<Matrix> {
        target.values().check_width(self.width(), "imputation target")?;
        Ok(self.run(target, false))
    }

    /// Imputes the reference set itself; a row is never its own neighbour.
    pub fn impute_reference(&self) -> Matrix {
        self.run(&self.reference, true)
    }

    fn run(&self, target: &MaskedMatrix, self_exclude: bool) -> Matrix {
        let mut out = target.values().clone();
        let cols = out.cols().max(1);
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| {
                self.fill_row(row, target.row_mask(i), self_exclude.then_some(i));
            });
        out
    }
}

fn cmp_dist(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn impute(imp: &KnnImputer, target: &MaskedMatrix) -> Result<Matrix> {
    imp.impute(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm(rows: &[&[f64]]) -> MaskedMatrix {
        MaskedMatrix::from_nan(Matrix::from_rows(rows).unwrap())
    }

    const NAN: f64 = f64::NAN;

    #[test]
    fn partial_distance_examples() {
        let f = [false, false];
        assert_eq!(partial_distance(&[1.0, 2.0], &[1.0, 2.0], &f, &f).unwrap(), 0.0);
        assert_eq!(partial_distance(&[1.0, 2.0], &[4.0, 6.0], &f, &f).unwrap(), 7.0);
        assert_eq!(
            partial_distance(&[1.0, 0.0], &[4.0, 6.0], &[false, true], &f).unwrap(),
            6.0
        );
        assert_eq!(
            partial_distance(&[1.0, 0.0], &[4.0, 6.0], &[false, true], &[true, false]).unwrap(),
            f64::INFINITY
        );
        assert!(partial_distance(&[1.0], &[1.0, 2.0], &[false], &f).is_err());
    }

    #[test]
    fn column_means_from_observed_cells() {
        let imp = fit_imputer(mm(&[&[2.0, 1.0], &[NAN, 2.0], &[4.0, 3.0]]), 1).unwrap();
        assert_eq!(imp.column_means(), &[3.0, 2.0]);
        let full = fit_imputer(mm(&[&[1.0, 5.0], &[2.0, 7.0]]), 3).unwrap();
        assert_eq!(full.column_means(), &[1.5, 6.0]);
    }

    #[test]
    fn fit_rejects_k_zero_and_empty_columns() {
        assert!(matches!(
            fit_imputer(mm(&[&[1.0]]), 0),
            Err(Error::InvalidParam(_))
        ));
        assert!(matches!(
            fit_imputer(mm(&[&[1.0, NAN], &[2.0, NAN]]), 1),
            Err(Error::FullyMissingColumn(1))
        ));
    }

    #[test]
    fn complete_rows_unchanged() {
        let imp = fit_imputer(mm(&[&[0.0, 0.0], &[10.0, 10.0]]), 1).unwrap();
        let out = imp.impute(&mm(&[&[3.5, -2.0]])).unwrap();
        assert_eq!(out.row(0), &[3.5, -2.0]);
    }

    #[test]
    fn nearest_neighbour_fills_cell() {
        let imp = fit_imputer(mm(&[&[0.0, 0.0], &[10.0, 10.0]]), 1).unwrap();
        let out = imp.impute(&mm(&[&[0.1, NAN]])).unwrap();
        assert_eq!(out.row(0), &[0.1, 0.0]);
    }

    #[test]
    fn fully_missing_rows_fall_back_to_means() {
        let imp = fit_imputer(mm(&[&[0.0, 2.0], &[10.0, 4.0]]), 2).unwrap();
        let out = imp.impute(&mm(&[&[NAN, NAN], &[NAN, NAN]])).unwrap();
        for r in out.iter_rows() {
            assert_eq!(r, &[5.0, 3.0]);
        }
    }

    #[test]
    fn neighbour_without_the_cell_falls_back() {
        // only neighbour at finite distance lacks column 1
        let imp = fit_imputer(mm(&[&[0.0, NAN], &[NAN, 8.0]]), 1).unwrap();
        let out = imp.impute(&mm(&[&[0.5, NAN]])).unwrap();
        assert_eq!(out.row(0), &[0.5, 8.0]);
    }

    #[test]
    fn reference_imputation_excludes_self() {
        let reference = mm(&[&[0.0, NAN], &[0.0, 1.0], &[100.0, 50.0]]);
        let imp = fit_imputer(reference, 1).unwrap();
        let out = imp.impute_reference();
        assert_eq!(out.row(0), &[0.0, 1.0]);
        assert_eq!(out.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn width_mismatch() {
        let imp = fit_imputer(mm(&[&[0.0, 0.0]]), 1).unwrap();
        assert!(matches!(imp.impute(&mm(&[&[1.0]])), Err(Error::Shape(_))));
    }

    #[test]
    fn serde_round_trip() {
        let imp = fit_imputer(mm(&[&[0.0, NAN], &[1.0, 2.0], &[NAN, 3.0]]), 2).unwrap();
        let json = serde_json::to_string(&imp).unwrap();
        let back: KnnImputer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, imp);
    }
}
