//! Per-target model routing over shared preprocessing, and model persistence.
//!
//! Training encodes every string feature column with one Min-Hash encoder,
//! imputes the masked cells of the resulting matrix with one fast-KNN imputer,
//! then trains each target independently: drop rows whose target is missing,
//! subsample to the routed model's `sample_size`, rebalance, fit. Predictions
//! for one target never depend on another target's model.
//!
//! The model file is compact JSON with top-level fields `format_version`,
//! `config`, `encoder`, `imputer` and `models`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, PipelineConfig, RebalanceMode};
use crate::dataset::{ColumnKind, Dataset, TARGETS};
use crate::encoding::MinHashEncoder;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestModel};
use crate::gbt::{fit_gbt, GbtModel};
use crate::imputation::{fit_imputer, KnnImputer, MaskedMatrix};
use crate::knn::{fit_knn, KnnModel};
use crate::labels::Labels;
use crate::matrix::Matrix;
use crate::metrics::{evaluate_labels, MetricsReport};
use crate::resampling::{class_counts, plan_targets, rebalance, RebalancePolicy};
use crate::rng;

pub const FORMAT_VERSION: u64 = 1;

const SAMPLE_STREAM: u64 = 100;
const REBALANCE_STREAM: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Feature schema plus the Min-Hash encoder applied to its string columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub columns: Vec<FeatureColumn>,
    pub minhash: MinHashEncoder,
}

impl EncoderState {
    pub fn new(dataset: &Dataset, minhash: MinHashEncoder) -> Result<Self> {
        let columns: Vec<FeatureColumn> = dataset
            .schema()
            .feature_columns()
            .map(|(_, name, kind)| FeatureColumn {
                name: name.to_owned(),
                kind,
            })
            .collect();
        if columns.is_empty() {
            return Err(Error::Schema("dataset has no feature columns".into()));
        }
        Ok(EncoderState { columns, minhash })
    }

    fn block_width(&self, kind: ColumnKind) -> usize {
        if kind.is_string() {
            self.minhash.n_components()
        } else {
            1
        }
    }

    /// Width of the encoded feature matrix.
    pub fn width(&self) -> usize {
        self.columns.iter().map(|c| self.block_width(c.kind)).sum()
    }

    /// Encodes the feature columns of `dataset`. Numeric cells map to one
    /// value, string cells to a Min-Hash block; a missing cell masks its whole
    /// block.
    pub fn encode(&self, dataset: &Dataset) -> Result<MaskedMatrix> {
        let schema = dataset.schema();
        let mut sources = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let idx = schema
                .index_of(&c.name)
                .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
            let found = schema.kind(idx);
            let compatible = if c.kind.is_string() {
                found.is_string()
            } else {
                found == c.kind
            };
            if !compatible {
                return Err(Error::Schema(format!(
                    "column {:?} was {} at training time but is {}",
                    c.name,
                    c.kind.as_str(),
                    found.as_str()
                )));
            }
            sources.push((idx, self.block_width(c.kind), c.kind.is_string()));
        }

        let n = dataset.row_count();
        let width = self.width();
        let mut values = vec![0.0; n * width];
        let mut mask = vec![false; n * width];
        values
            .par_chunks_mut(width.max(1))
            .zip(mask.par_chunks_mut(width.max(1)))
            .enumerate()
            .for_each(|(row, (out, miss))| {
                let mut at = 0;
                for &(col, w, is_string) in &sources {
                    let missing = dataset.is_missing(row, col);
                    if is_string {
                        self.minhash
                            .encode_into(dataset.string(row, col), &mut out[at..at + w]);
                    } else {
                        out[at] = dataset.numeric(row, col).unwrap_or(0.0);
                    }
                    if missing {
                        miss[at..at + w].fill(true);
                    }
                    at += w;
                }
            });
        MaskedMatrix::new(Matrix::from_vec(n, width, values)?, mask)
    }
}

/// A fitted classifier for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetModel {
    Knn(KnnModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl TargetModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TargetModel::Knn(_) => ModelKind::Knn,
            TargetModel::Forest(_) => ModelKind::Forest,
            TargetModel::Gbt(_) => ModelKind::Gbt,
        }
    }

    pub fn label_vocab(&self) -> &[String] {
        match self {
            TargetModel::Knn(m) => &m.label_vocab,
            TargetModel::Forest(m) => &m.label_vocab,
            TargetModel::Gbt(m) => &m.label_vocab,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            TargetModel::Knn(m) => m.width(),
            TargetModel::Forest(m) => m.n_features,
            TargetModel::Gbt(m) => m.n_features,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<String>> {
        match self {
            TargetModel::Knn(m) => m.predict(x),
            TargetModel::Forest(m) => m.predict(x),
            TargetModel::Gbt(m) => m.predict(x),
        }
    }

    /// One-line summary of the fitted model's size.
    pub fn summary(&self) -> String {
        match self {
            TargetModel::Knn(m) => format!(
                "{} training rows, n_neighbors={}",
                m.train_x.rows(),
                m.params.n_neighbors
            ),
            TargetModel::Forest(m) => format!(
                "{} trees, max depth {}, oob score {:.4}",
                m.trees.len(),
                m.max_depth(),
                m.oob_score.unwrap_or(f64::NAN)
            ),
            TargetModel::Gbt(m) => format!(
                "{} rounds x {} classes = {} trees, {} splits, final training error {:.4}",
                m.trees.len(),
                m.n_classes(),
                m.tree_count(),
                m.split_count(),
                m.train_error.last().copied().unwrap_or(f64::NAN)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModels {
    pub top_category: TargetModel,
    pub bottom_category: TargetModel,
    pub color: TargetModel,
}

impl TargetModels {
    pub fn get(&self, target: &str) -> Option<&TargetModel> {
        match target {
            "top_category" => Some(&self.top_category),
            "bottom_category" => Some(&self.bottom_category),
            "color" => Some(&self.color),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &TargetModel)> {
        TARGETS
            .into_iter()
            .map(move |t| (t, self.get(t).expect("known target")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format_version: u64,
    pub config: PipelineConfig,
    pub encoder: EncoderState,
    pub imputer: KnnImputer,
    pub models: TargetModels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub row: usize,
    pub top_category: String,
    pub bottom_category: String,
    pub color: String,
}

impl PredictionRecord {
    pub fn get(&self, target: &str) -> Option<&str> {
        match target {
            "top_category" => Some(&self.top_category),
            "bottom_category" => Some(&self.bottom_category),
            "color" => Some(&self.color),
            _ => None,
        }
    }
}

/// Encoded and imputed training features with the fitted preprocessing.
pub struct Prepared {
    pub encoder: EncoderState,
    pub imputer: KnnImputer,
    pub x: Matrix,
}

pub fn prepare(dataset: &Dataset, config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    dataset.schema().require_targets()?;
    if dataset.row_count() == 0 {
        return Err(Error::param("cannot train on an empty dataset"));
    }
    let p = &config.pipeline;
    let minhash = MinHashEncoder::new(p.minhash_seed, p.minhash_components, p.minhash_ngram)?;
    let encoder = EncoderState::new(dataset, minhash)?;
    let masked = encoder.encode(dataset)?;
    let imputer = fit_imputer(masked, p.imputer_k).map_err(|e| match e {
        Error::FullyMissingColumn(j) => {
            Error::Schema(format!("feature {} has no observed values", feature_name(&encoder, j)))
        }
        other => other,
    })?;
    // Same imputation path as prediction, so a training row maps to the same
    // features whether it is being fitted or predicted.
    let x = imputer.impute(imputer.reference())?;
    Ok(Prepared {
        encoder,
        imputer,
        x,
    })
}

fn feature_name(enc: &EncoderState, mut j: usize) -> String {
    for c in &enc.columns {
        let w = enc.block_width(c.kind);
        if j < w {
            return c.name.clone();
        }
        j -= w;
    }
    format!("#{j}")
}

fn target_index(target: &str) -> usize {
    TARGETS.iter().position(|&t| t == target).expect("known target")
}

/// Training rows and labels for one target: observed labels only, subsampled
/// to `sample_size` rows, then rebalanced.
pub fn target_training_set(
    x: &Matrix,
    dataset: &Dataset,
    target: &str,
    sample_size: usize,
    config: &PipelineConfig,
) -> Result<(Matrix, Labels)> {
    let t = target_index(target) as u64;
    let seed = config.pipeline.seed;
    let labels = dataset.labels(target)?;
    let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if rows.len() > sample_size {
        let mut rng = rng::stream(seed, SAMPLE_STREAM + t);
        let mut pick = index::sample(&mut rng, rows.len(), sample_size).into_vec();
        pick.sort_unstable();
        rows = pick.into_iter().map(|i| rows[i]).collect();
    }
    let names: Vec<&str> = rows.iter().map(|&i| labels[i].expect("observed")).collect();
    let y = Labels::from_strings(&names)?;
    if y.n_classes() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "target {target} has {} distinct observed label(s); at least two are needed",
            y.n_classes()
        )));
    }
    let xs = x.select_rows(&rows);
    match config.pipeline.rebalance {
        RebalanceMode::None => Ok((xs, y)),
        RebalanceMode::Median => {
            let plan = plan_targets(
                &class_counts(&y.ids),
                RebalancePolicy::Median,
                config.pipeline.smote_k,
                rng::derive_seed(seed, REBALANCE_STREAM + t),
            )?;
            let (xb, ids) = rebalance(&xs, &y.ids, &plan)?;
            Ok((xb, Labels::new(y.vocab, ids)?))
        }
    }
}

pub fn fit_target(kind: ModelKind, x: &Matrix, y: &Labels, config: &PipelineConfig) -> Result<TargetModel> {
    Ok(match kind {
        ModelKind::Knn => TargetModel::Knn(fit_knn(x, y, config.knn_params())?),
        ModelKind::Forest => TargetModel::Forest(fit_forest(x, y, config.forest_params())?),
        ModelKind::Gbt => TargetModel::Gbt(fit_gbt(x, y, config.gbt_params())?),
    })
}

fn train_on(prep: &Prepared, dataset: &Dataset, target: &str, kind: ModelKind, config: &PipelineConfig) -> Result<TargetModel> {
    let (x, y) = target_training_set(&prep.x, dataset, target, config.sample_size(kind), config)?;
    fit_target(kind, &x, &y, config)
}

pub fn train_ensemble(dataset: &Dataset, config: &PipelineConfig) -> Result<EnsembleModel> {
    let prep = prepare(dataset, config)?;
    let mut fitted: Vec<TargetModel> = TARGETS
        .par_iter()
        .map(|&t| train_on(&prep, dataset, t, config.route(t)?, config))
        .collect::<Result<_>>()?;
    let color = fitted.pop().expect("three targets");
    let bottom_category = fitted.pop().expect("three targets");
    let top_category = fitted.pop().expect("three targets");
    Ok(EnsembleModel {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        encoder: prep.encoder,
        imputer: prep.imputer,
        models: TargetModels {
            top_category,
            bottom_category,
            color,
        },
    })
}

impl EnsembleModel {
    /// Encoded and imputed features for `dataset`.
    pub fn features(&self, dataset: &Dataset) -> Result<Matrix> {
        let masked = self.encoder.encode(dataset)?;
        self.imputer.impute(&masked)
    }

    pub fn check(&self) -> Result<()> {
        self.encoder.minhash.verify()?;
        let width = self.encoder.width();
        if self.imputer.width() != width {
            return Err(Error::CorruptModel(format!(
                "imputer width {} differs from encoder width {width}",
                self.imputer.width()
            )));
        }
        for (t, m) in self.models.iter() {
            if m.width() != width {
                return Err(Error::CorruptModel(format!(
                    "{t} model width {} differs from encoder width {width}",
                    m.width()
                )));
            }
            if m.label_vocab().is_empty() {
                return Err(Error::CorruptModel(format!("{t} model has no labels")));
            }
        }
        Ok(())
    }

    /// Human-readable routing and size summary.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version: {}", self.format_version);
        let cols: Vec<String> = self
            .encoder
            .columns
            .iter()
            .map(|c| format!("{} ({})", c.name, c.kind.as_str()))
            .collect();
        let _ = writeln!(out, "feature columns: {}", cols.join(", "));
        let _ = writeln!(
            out,
            "encoded width: {} (min-hash: {} components, {}-grams, seed {})",
            self.encoder.width(),
            self.encoder.minhash.n_components(),
            self.encoder.minhash.ngram_size(),
            self.encoder.minhash.seed()
        );
        let _ = writeln!(
            out,
            "imputer: k={}, {} reference rows",
            self.imputer.k(),
            self.imputer.reference().rows()
        );
        for (t, m) in self.models.iter() {
            let _ = writeln!(
                out,
                "{t}: {} ({} labels) {}",
                m.kind().as_str(),
                m.label_vocab().len(),
                m.summary()
            );
        }
        out
    }
}

pub fn predict_products(model: &EnsembleModel, dataset: &Dataset) -> Result<Vec<PredictionRecord>> {
    let x = model.features(dataset)?;
    if x.rows() == 0 {
        return Ok(Vec::new());
    }
    let top = model.models.top_category.predict(&x)?;
    let bottom = model.models.bottom_category.predict(&x)?;
    let color = model.models.color.predict(&x)?;
    Ok(top
        .into_iter()
        .zip(bottom)
        .zip(color)
        .enumerate()
        .map(|(row, ((top_category, bottom_category), color))| PredictionRecord {
            row,
            top_category,
            bottom_category,
            color,
        })
        .collect())
}

/// Macro/weighted metrics of `records` against the observed labels of
/// `dataset`, one report per target. Rows with a missing label are skipped.
pub fn score_predictions(
    model: &EnsembleModel,
    records: &[PredictionRecord],
    dataset: &Dataset,
) -> Result<Vec<MetricsReport>> {
    TARGETS
        .iter()
        .map(|&t| {
            let kind = model.models.get(t).expect("known target").kind();
            score_target(t, kind.as_str(), dataset, |i| records[i].get(t).expect("known target"))
        })
        .collect()
}

fn score_target<'a>(
    target: &str,
    model_name: &str,
    dataset: &'a Dataset,
    pred: impl Fn(usize) -> &'a str,
) -> Result<MetricsReport>
where
{
    let truth = dataset.labels(target)?;
    let (t, p): (Vec<&str>, Vec<&str>) = truth
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|l| (l, pred(i))))
        .unzip();
    evaluate_labels(target, model_name, &t, &p)
}

/// Trains every model kind on every target over shared preprocessing of
/// `train` and scores each on `eval`. Reports are grouped by target in
/// `knn`, `forest`, `gbt` order.
pub fn compare_models(train: &Dataset, eval: &Dataset, config: &PipelineConfig) -> Result<Vec<MetricsReport>> {
    let prep = prepare(train, config)?;
    let eval_x = prep.imputer.impute(&prep.encoder.encode(eval)?)?;
    let jobs: Vec<(&str, ModelKind)> = TARGETS
        .iter()
        .flat_map(|&t| ModelKind::ALL.into_iter().map(move |k| (t, k)))
        .collect();
    jobs.par_iter()
        .map(|&(t, k)| {
            let model = train_on(&prep, train, t, k, config)?;
            let pred = if eval_x.rows() == 0 {
                Vec::new()
            } else {
                model.predict(&eval_x)?
            };
            score_target(t, k.as_str(), eval, |i| pred[i].as_str())
        })
        .collect()
}

/// Fraction of records whose predicted (top, bottom) pair occurs in
/// `reference`. `None` when there are no records.
pub fn hierarchy_consistency(records: &[PredictionRecord], reference: &Dataset) -> Result<Option<f64>> {
    if records.is_empty() {
        return Ok(None);
    }
    let top = reference.labels("top_category")?;
    let bottom = reference.labels("bottom_category")?;
    let pairs: BTreeSet<(&str, &str)> = top
        .iter()
        .zip(&bottom)
        .filter_map(|(t, b)| Some(((*t)?, (*b)?)))
        .collect();
    let ok = records
        .iter()
        .filter(|r| pairs.contains(&(r.top_category.as_str(), r.bottom_category.as_str())))
        .count();
    Ok(Some(ok as f64 / records.len() as f64))
}

pub fn to_json(model: &EnsembleModel) -> Result<Vec<u8>> {
    serde_json::to_vec(model).map_err(|e| Error::CorruptModel(e.to_string()))
}

pub fn from_json(bytes: &[u8]) -> Result<EnsembleModel> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing or non-integer format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let model: EnsembleModel =
        serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
    model.check()?;
    Ok(model)
}

pub fn save_model(model: &EnsembleModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<EnsembleModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_json(&bytes)
}
