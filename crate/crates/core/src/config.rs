//! Pipeline configuration: a sectioned TOML document with `[knn]`, `[forest]`,
//! `[gbt]` and `[pipeline]` tables. Unknown keys are rejected and absent keys
//! take their defaults, so an empty file yields the default pipeline.
//!
//! Model hyperparameter keys keep the names of the underlying estimator
//! options (`n_neighbors`, `max_features`, `min_split_loss`, ...). Each model
//! section also carries `sample_size`, the number of rows drawn for any target
//! routed to that model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::TARGETS;
use crate::error::{Error, Result};
use crate::forest::{ForestParams, MaxFeatures};
use crate::gbt::{EvalMetric, GbtParams, Objective, Predictor, TreeMethod};
use crate::knn::{KnnParams, Metric};
use crate::resampling::DEFAULT_SMOTE_K;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Forest,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::Forest, ModelKind::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Forest => "forest",
            ModelKind::Gbt => "gbt",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebalanceMode {
    #[default]
    Median,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSection {
    pub metric: Metric,
    pub n_neighbors: usize,
    pub sample_size: usize,
}

impl Default for KnnSection {
    fn default() -> Self {
        let p = KnnParams::default();
        KnnSection {
            metric: p.metric,
            n_neighbors: p.n_neighbors,
            sample_size: 25_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub n_estimators: usize,
    pub n_jobs: usize,
    pub oob_score: bool,
    pub random_state: u64,
    pub sample_size: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestSection {
            max_depth: p.max_depth,
            max_features: p.max_features,
            n_estimators: p.n_estimators,
            n_jobs: p.n_jobs,
            oob_score: p.oob_score,
            random_state: p.random_state,
            sample_size: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSection {
    pub eval_metric: EvalMetric,
    pub learning_rate: f64,
    pub min_split_loss: f64,
    pub objective: Objective,
    pub predictor: Predictor,
    pub tree_method: TreeMethod,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub sample_size: usize,
}

impl Default for GbtSection {
    fn default() -> Self {
        let p = GbtParams::default();
        GbtSection {
            eval_metric: p.eval_metric,
            learning_rate: p.learning_rate,
            min_split_loss: p.min_split_loss,
            objective: p.objective,
            predictor: p.predictor,
            tree_method: p.tree_method,
            n_rounds: p.n_rounds,
            max_depth: p.max_depth,
            reg_lambda: p.reg_lambda,
            sample_size: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub top_category: ModelKind,
    pub bottom_category: ModelKind,
    pub color: ModelKind,
    pub seed: u64,
    pub rebalance: RebalanceMode,
    pub smote_k: usize,
    pub imputer_k: usize,
    pub minhash_seed: u64,
    pub minhash_components: usize,
    pub minhash_ngram: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            top_category: ModelKind::Gbt,
            bottom_category: ModelKind::Knn,
            color: ModelKind::Knn,
            seed: 0,
            rebalance: RebalanceMode::Median,
            smote_k: DEFAULT_SMOTE_K,
            imputer_k: 5,
            minhash_seed: 0,
            minhash_components: crate::encoding::DEFAULT_COMPONENTS,
            minhash_ngram: crate::encoding::DEFAULT_NGRAM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub knn: KnnSection,
    pub forest: ForestSection,
    pub gbt: GbtSection,
    pub pipeline: PipelineSection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>, section: &str| {
            r.map_err(|e| Error::Config(format!("[{section}] {}", strip(e))))
        };
        wrap(self.knn_params().validate(), "knn")?;
        wrap(self.forest_params().validate(), "forest")?;
        wrap(self.gbt_params().validate(), "gbt")?;
        for (section, size) in [
            ("knn", self.knn.sample_size),
            ("forest", self.forest.sample_size),
            ("gbt", self.gbt.sample_size),
        ] {
            if size == 0 {
                return Err(Error::Config(format!("[{section}] sample_size must be at least 1")));
            }
        }
        let p = &self.pipeline;
        if p.smote_k == 0 {
            return Err(Error::Config("[pipeline] smote_k must be at least 1".into()));
        }
        if p.imputer_k == 0 {
            return Err(Error::Config("[pipeline] imputer_k must be at least 1".into()));
        }
        if p.minhash_components == 0 || p.minhash_ngram == 0 {
            return Err(Error::Config(
                "[pipeline] minhash_components and minhash_ngram must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn knn_params(&self) -> KnnParams {
        KnnParams {
            metric: self.knn.metric,
            n_neighbors: self.knn.n_neighbors,
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        let f = &self.forest;
        ForestParams {
            n_estimators: f.n_estimators,
            max_depth: f.max_depth,
            max_features: f.max_features,
            oob_score: f.oob_score,
            random_state: f.random_state,
            n_jobs: f.n_jobs,
        }
    }

    pub fn gbt_params(&self) -> GbtParams {
        let g = &self.gbt;
        GbtParams {
            learning_rate: g.learning_rate,
            min_split_loss: g.min_split_loss,
            objective: g.objective,
            eval_metric: g.eval_metric,
            tree_method: g.tree_method,
            predictor: g.predictor,
            n_rounds: g.n_rounds,
            max_depth: g.max_depth,
            reg_lambda: g.reg_lambda,
        }
    }

    /// Model routed to `target`.
    pub fn route(&self, target: &str) -> Result<ModelKind> {
        match target {
            "top_category" => Ok(self.pipeline.top_category),
            "bottom_category" => Ok(self.pipeline.bottom_category),
            "color" => Ok(self.pipeline.color),
            other => Err(Error::param(format!(
                "unknown target {other:?}; expected one of {}",
                TARGETS.join(", ")
            ))),
        }
    }

    pub fn set_route(&mut self, target: &str, kind: ModelKind) -> Result<()> {
        let slot = match target {
            "top_category" => &mut self.pipeline.top_category,
            "bottom_category" => &mut self.pipeline.bottom_category,
            "color" => &mut self.pipeline.color,
            other => return Err(Error::param(format!("unknown target {other:?}"))),
        };
        *slot = kind;
        Ok(())
    }

    pub fn sample_size(&self, kind: ModelKind) -> usize {
        match kind {
            ModelKind::Knn => self.knn.sample_size,
            ModelKind::Forest => self.forest.sample_size,
            ModelKind::Gbt => self.gbt.sample_size,
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidParam(m) => m,
        other => other.to_string(),
    }
}

pub fn parse_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PipelineConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.route("top_category").unwrap(), ModelKind::Gbt);
        assert_eq!(cfg.route("bottom_category").unwrap(), ModelKind::Knn);
        assert_eq!(cfg.route("color").unwrap(), ModelKind::Knn);
        assert_eq!(cfg.sample_size(ModelKind::Knn), 25_000);
        assert_eq!(cfg.sample_size(ModelKind::Forest), 10_000);
        assert_eq!(cfg.sample_size(ModelKind::Gbt), 10_000);
    }

    #[test]
    fn knn_table_values() {
        let cfg = PipelineConfig::from_toml_str("[knn]\nn_neighbors = 1\nmetric = \"manhattan\"\n").unwrap();
        assert_eq!(
            cfg.knn_params(),
            KnnParams {
                metric: Metric::Manhattan,
                n_neighbors: 1
            }
        );
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"
[knn]
metric = "manhattan"
n_neighbors = 1

[forest]
max_depth = 9
max_features = "log2"
n_estimators = 50
n_jobs = 1
oob_score = true
random_state = 411

[gbt]
eval_metric = "error"
learning_rate = 0.3
min_split_loss = 0.1
objective = "multi:softprob"
predictor = "auto"
tree_method = "auto"
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = PipelineConfig::from_toml_str("[gbt]\nmax_leaves = 3\n").unwrap_err();
        assert!(err.to_string().contains("max_leaves"), "{err}");
        let err = PipelineConfig::from_toml_str("[svm]\n").unwrap_err();
        assert!(err.to_string().contains("svm"), "{err}");
    }

    #[test]
    fn range_and_type_errors() {
        let err = PipelineConfig::from_toml_str("[gbt]\nmin_split_loss = -1\n").unwrap_err();
        assert!(err.to_string().contains("min_split_loss"), "{err}");
        assert!(PipelineConfig::from_toml_str("[knn]\nn_neighbors = \"one\"\n").is_err());
        assert!(PipelineConfig::from_toml_str("[knn]\nmetric = \"euclidean\"\n").is_err());
        assert!(PipelineConfig::from_toml_str("[knn]\nsample_size = 0\n").is_err());
        assert!(PipelineConfig::from_toml_str("[pipeline]\ncolor = \"svm\"\n").is_err());
    }

    #[test]
    fn routing_override() {
        let cfg = PipelineConfig::from_toml_str("[pipeline]\ntop_category = \"forest\"\n").unwrap();
        assert_eq!(cfg.route("top_category").unwrap(), ModelKind::Forest);
        assert!(cfg.route("size").is_err());
    }
}
