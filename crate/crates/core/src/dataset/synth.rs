//! Synthetic long-tail product catalogs.
//!
//! Top categories, the bottom categories nested under each of them, and colors
//! are all drawn from finite Zipf distributions, so a handful of classes hold
//! most rows. Each bottom category owns a set of product lines, and a listing's
//! title is a top-category word, its line's stem and a color word, with each
//! token replaced by a random noise word at `noise_rate`. Two numeric columns
//! are Gaussian around per-(top, color) means.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, Dataset, Schema};
use crate::error::{Error, Result};
use crate::rng;

const TOP_VOCAB: usize = 6;
const BOTTOM_VOCAB: usize = 100;
const LINES_PER_BOTTOM: usize = 20;
const STEM_LEN: usize = 4;
const COLOR_VOCAB: usize = 3;
const NOISE_VOCAB: usize = 400;
const NUMERIC_SD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub n_top: usize,
    pub bottoms_per_top: usize,
    pub n_colors: usize,
    pub zipf_exponent: f64,
    pub missing_rate: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_rows: 5000,
            n_top: 5,
            bottoms_per_top: 5,
            n_colors: 10,
            zipf_exponent: 1.5,
            missing_rate: 0.1,
            noise_rate: 0.1,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_top == 0 || self.bottoms_per_top == 0 || self.n_colors == 0 {
            return Err(Error::param("class counts must be at least 1"));
        }
        if self.n_rows < self.n_top * self.bottoms_per_top {
            return Err(Error::param(format!(
                "n_rows ({}) must be at least n_top * bottoms_per_top ({})",
                self.n_rows,
                self.n_top * self.bottoms_per_top
            )));
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return Err(Error::param("zipf_exponent must be a positive real"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::param("missing_rate must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::param("noise_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Finite Zipf law sampled by inverse CDF; rank 0 is the most frequent class.
struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|k| {
                acc += (k as f64).powf(-exponent);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Zipf { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cdf.len() - 1)
    }
}

struct Vocab {
    seen: HashSet<String>,
}

impl Vocab {
    fn word(&mut self, rng: &mut ChaCha8Rng) -> String {
        const CONS: &[u8] = b"bcdfghjklmnprstvz";
        const VOWELS: &[u8] = b"aeiou";
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::with_capacity(syllables * 2 + 1);
            for _ in 0..syllables {
                w.push(CONS[rng.random_range(0..CONS.len())] as char);
                w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
            }
            if rng.random_bool(0.5) {
                w.push(CONS[rng.random_range(0..CONS.len())] as char);
            }
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word(rng)).collect()
    }
}

pub fn top_label(t: usize) -> String {
    format!("top{t:02}")
}

pub fn bottom_label(t: usize, b: usize) -> String {
    format!("top{t:02}_sub{b:02}")
}

pub fn color_label(c: usize) -> String {
    format!("color{c:02}")
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let n_bottom = config.n_top * config.bottoms_per_top;

    let mut vocab_rng = rng::stream(config.seed, 0);
    let mut vocab = Vocab {
        seen: HashSet::new(),
    };
    let top_words: Vec<Vec<String>> = (0..config.n_top)
        .map(|_| vocab.words(&mut vocab_rng, TOP_VOCAB))
        .collect();
    let bottom_words: Vec<Vec<String>> = (0..n_bottom)
        .map(|_| vocab.words(&mut vocab_rng, BOTTOM_VOCAB))
        .collect();
    let color_words: Vec<Vec<String>> = (0..config.n_colors)
        .map(|_| vocab.words(&mut vocab_rng, COLOR_VOCAB))
        .collect();
    let noise_words = vocab.words(&mut vocab_rng, NOISE_VOCAB);

    // Each bottom category sells a fixed set of product lines; listings of a
    // line share its title stem.
    let lines: Vec<Vec<Vec<&str>>> = bottom_words
        .iter()
        .map(|words| {
            (0..LINES_PER_BOTTOM)
                .map(|_| {
                    (0..STEM_LEN)
                        .map(|_| words[vocab_rng.random_range(0..words.len())].as_str())
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut mean_rng = rng::stream(config.seed, 1);
    let means: Vec<[f64; 2]> = (0..config.n_top * config.n_colors)
        .map(|_| [mean_rng.random(), mean_rng.random()])
        .collect();

    let top_dist = Zipf::new(config.n_top, config.zipf_exponent);
    let bottom_dist = Zipf::new(config.bottoms_per_top, config.zipf_exponent);
    let color_dist = Zipf::new(config.n_colors, config.zipf_exponent);
    let noise = Normal::new(0.0, NUMERIC_SD).expect("positive sd");

    let n = config.n_rows;
    let mut titles = Vec::with_capacity(n);
    let mut price = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut tops = Vec::with_capacity(n);
    let mut bottoms = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);

    let mut row_rng = rng::stream(config.seed, 2);
    for _ in 0..n {
        let t = top_dist.sample(&mut row_rng);
        let b = bottom_dist.sample(&mut row_rng);
        let c = color_dist.sample(&mut row_rng);
        let line = &lines[t * config.bottoms_per_top + b][row_rng.random_range(0..LINES_PER_BOTTOM)];
        let top_word = top_words[t][row_rng.random_range(0..TOP_VOCAB)].as_str();
        let color_word = color_words[c][row_rng.random_range(0..COLOR_VOCAB)].as_str();
        let tokens: Vec<&str> = std::iter::once(top_word)
            .chain(line.iter().copied())
            .chain(std::iter::once(color_word))
            .map(|tok| {
                if row_rng.random_bool(config.noise_rate) {
                    noise_words[row_rng.random_range(0..NOISE_VOCAB)].as_str()
                } else {
                    tok
                }
            })
            .collect();
        titles.push(tokens.join(" "));

        let [m0, m1] = means[t * config.n_colors + c];
        price.push(m0 + noise.sample(&mut row_rng));
        weight.push(m1 + noise.sample(&mut row_rng));
        tops.push(top_label(t));
        bottoms.push(bottom_label(t, b));
        colors.push(color_label(c));
    }

    let mut mask_rng = rng::stream(config.seed, 3);
    let mut feature_mask = || -> Vec<bool> {
        (0..n)
            .map(|_| mask_rng.random_bool(config.missing_rate))
            .collect()
    };
    let title_mask = feature_mask();
    let price_mask = feature_mask();
    let weight_mask = feature_mask();

    let schema = Schema::new(vec![
        ("title".into(), ColumnKind::Text),
        ("price".into(), ColumnKind::Numeric),
        ("weight".into(), ColumnKind::Numeric),
        ("top_category".into(), ColumnKind::Target),
        ("bottom_category".into(), ColumnKind::Target),
        ("color".into(), ColumnKind::Target),
    ])?;
    Dataset::new(
        schema,
        vec![
            ColumnData::Strings(titles),
            ColumnData::Numeric(price),
            ColumnData::Numeric(weight),
            ColumnData::Strings(tops),
            ColumnData::Strings(bottoms),
            ColumnData::Strings(colors),
        ],
        vec![
            title_mask,
            price_mask,
            weight_mask,
            vec![false; n],
            vec![false; n],
            vec![false; n],
        ],
    )
}
