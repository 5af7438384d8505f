use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class labels as indices into a vocabulary. Vocabulary order is the order of
/// first appearance, and it is the tie-break order for every vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub vocab: Vec<String>,
    pub ids: Vec<usize>,
}

impl Labels {
    pub fn from_strings<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut vocab: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            if l.is_empty() {
                return Err(Error::param("labels must be non-empty strings"));
            }
            let id = match vocab.iter().position(|v| v == l) {
                Some(i) => i,
                None => {
                    vocab.push(l.to_string());
                    vocab.len() - 1
                }
            };
            ids.push(id);
        }
        Ok(Labels { vocab, ids })
    }

    pub fn new(vocab: Vec<String>, ids: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab.len()) {
            return Err(Error::param(format!(
                "label index {bad} outside a vocabulary of {}",
                vocab.len()
            )));
        }
        Ok(Labels { vocab, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.vocab.len()
    }

    pub fn strings(&self) -> Vec<&str> {
        self.ids.iter().map(|&i| self.vocab[i].as_str()).collect()
    }
}

/// Index of the largest count; ties go to the smaller index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the smaller index.
pub(crate) fn argmax_f64(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
