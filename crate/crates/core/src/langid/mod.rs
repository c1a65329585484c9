//! Language identification with a hashed character n-gram linear classifier.
//!
//! A text is represented by the mean of the embedding rows of its features
//! (known words plus hashed character n-grams of every token) and classified
//! by a bias-free linear softmax layer.

mod features;
mod format;
mod sampling;
mod train;

pub use features::char_ngrams;
pub use sampling::{build_training_set, temperature_probabilities, temperature_sample};
pub use train::train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use features::Featurizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangIdConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub buckets: u64,
    pub dim: usize,
    pub lr0: f32,
    pub epochs: usize,
    pub min_word_count: usize,
    pub seed: u64,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        LangIdConfig {
            ngram_min: 1,
            ngram_max: 4,
            buckets: 200_000,
            dim: 64,
            lr0: 0.05,
            epochs: 100,
            min_word_count: 100,
            seed: 0,
        }
    }
}

impl LangIdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            return Err(Error::Config(format!(
                "need 1 <= ngram_min <= ngram_max, got {}..{}",
                self.ngram_min, self.ngram_max
            )));
        }
        if self.buckets == 0 || self.buckets > u32::MAX as u64 / 2 {
            return Err(Error::Config(format!("bucket count {} out of range", self.buckets)));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config("lr0 must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: String,
}

impl LabeledText {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        LabeledText {
            text: text.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangIdModel {
    labels: Vec<String>,
    word_vocab: Vec<String>,
    featurizer: Featurizer,
    /// `(word_vocab.len() + buckets) x dim`, row-major.
    feature_embeddings: Vec<f32>,
    /// `labels.len() x dim`, row-major.
    output_weights: Vec<f32>,
    config: LangIdConfig,
}

impl LangIdModel {
    /// Assembles a model from explicit parameters, checking shapes, label
    /// uniqueness and finiteness.
    pub fn from_parts(
        labels: Vec<String>,
        word_vocab: Vec<String>,
        config: LangIdConfig,
        feature_embeddings: Vec<f32>,
        output_weights: Vec<f32>,
    ) -> Result<Self> {
        config.validate()?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::invalid(format!("duplicate label `{dup}`")));
        }
        let rows = word_vocab.len() + config.buckets as usize;
        if feature_embeddings.len() != rows * config.dim {
            return Err(Error::invalid(format!(
                "feature matrix has {} entries, expected {rows}x{}",
                feature_embeddings.len(),
                config.dim
            )));
        }
        if output_weights.len() != labels.len() * config.dim {
            return Err(Error::invalid(format!(
                "output matrix has {} entries, expected {}x{}",
                output_weights.len(),
                labels.len(),
                config.dim
            )));
        }
        if feature_embeddings.iter().chain(&output_weights).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite model parameter"));
        }
        let word_index: HashMap<String, u32> = word_vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        if word_index.len() != word_vocab.len() {
            return Err(Error::invalid("duplicate word in vocabulary"));
        }
        let featurizer = Featurizer {
            ngram_min: config.ngram_min,
            ngram_max: config.ngram_max,
            buckets: config.buckets,
            word_index,
        };
        Ok(LangIdModel {
            labels,
            word_vocab,
            featurizer,
            feature_embeddings,
            output_weights,
            config,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn word_vocab(&self) -> &[String] {
        &self.word_vocab
    }

    pub fn config(&self) -> &LangIdConfig {
        &self.config
    }

    pub fn feature_embeddings(&self) -> &[f32] {
        &self.feature_embeddings
    }

    pub fn output_weights(&self) -> &[f32] {
        &self.output_weights
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Feature row indices of `text` as a sorted multiset.
    pub fn extract_features(&self, text: &str) -> Vec<u32> {
        self.featurizer.features(text)
    }

    fn hidden(&self, features: &[u32], out: &mut [f32]) {
        pool(&self.feature_embeddings, self.config.dim, features, out);
    }

    fn logits(&self, hidden: &[f32]) -> Vec<f32> {
        self.output_weights
            .chunks_exact(self.config.dim)
            .map(|row| dot(row, hidden))
            .collect()
    }

    /// Full label distribution in label order.
    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        let mut hidden = vec![0.0; self.config.dim];
        self.hidden(&self.extract_features(text), &mut hidden);
        softmax(&self.logits(&hidden))
    }

    /// Top `k` labels by probability, descending; equal probabilities keep
    /// label order.
    pub fn predict(&self, text: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let probs = self.probabilities(text);
        let mut ranked: Vec<usize> = (0..probs.len()).collect();
        ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        Ok(ranked
            .into_iter()
            .take(k)
            .map(|i| (self.labels[i].clone(), probs[i]))
            .collect())
    }

    pub fn predict_top1(&self, text: &str) -> &str {
        let probs = self.probabilities(text);
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        &self.labels[best]
    }

    /// Fraction of whitespace tokens whose isolated top-1 prediction is
    /// `target`; 0 for text without tokens.
    pub fn word_language_proportion(&self, text: &str, target: &str) -> Result<f64> {
        if self.label_index(target).is_none() {
            return Err(Error::UnknownLabel(target.to_owned()));
        }
        let mut total = 0usize;
        let mut hits = 0usize;
        for token in text.split_whitespace() {
            total += 1;
            if self.predict_top1(token) == target {
                hits += 1;
            }
        }
        Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
    }

    /// Mean cross-entropy of the model on `data`.
    pub fn mean_loss(&self, data: &[LabeledText]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("no data"));
        }
        let mut sum = 0.0;
        for item in data {
            let idx = self
                .label_index(&item.label)
                .ok_or_else(|| Error::UnknownLabel(item.label.clone()))?;
            sum -= self.probabilities(&item.text)[idx].ln();
        }
        Ok(sum / data.len() as f64)
    }
}

pub(crate) fn pool(embeddings: &[f32], dim: usize, features: &[u32], out: &mut [f32]) {
    out.fill(0.0);
    if features.is_empty() {
        return;
    }
    for &f in features {
        let row = &embeddings[f as usize * dim..(f as usize + 1) * dim];
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    let scale = 1.0 / features.len() as f32;
    out.iter_mut().for_each(|o| *o *= scale);
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| (l as f64 - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
