//! Local bitext mining.
//!
//! Candidate pairs only ever come from one document pair (or from the two
//! language halves of one document). Each candidate is scored by cosine
//! similarity scaled by the length ratio, penalized by the neighbourhood
//! density of both sentences, and a monotone one-to-one matching with
//! maximal total score is selected by dynamic programming. Matched pairs
//! at or above the per-source threshold are accepted.

mod align;
mod jobs;
mod similarity;

pub use align::{align_dp, AlignedPath};
pub use jobs::{read_manifest, run_jobs, DocReport, MiningJob, MiningReport, WithinDocLangs};
pub use similarity::{margin_penalize, raw_similarity, similarity_matrix, SimilarityMatrix};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DocumentPair, ParallelPair};
use crate::embinit::EmbeddingMatrix;
use crate::langid::LangIdModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiningConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Tuned per source; there is no default.
    pub threshold: f64,
}

fn default_k() -> usize {
    4
}

fn default_alpha() -> f64 {
    0.5
}

impl MiningConfig {
    pub fn new(threshold: f64) -> Self {
        MiningConfig {
            k_neighbors: default_k(),
            alpha: default_alpha(),
            threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome of mining one document pair.
#[derive(Debug, Clone)]
pub struct DocMining {
    pub pairs: Vec<ParallelPair>,
    /// Penalized score of every pair on the optimal path, accepted or not.
    pub path_scores: Vec<f64>,
}

pub fn mine_document_pair(
    pair: &DocumentPair,
    embeddings: &EmbeddingMatrix,
    config: &MiningConfig,
) -> Result<Vec<ParallelPair>> {
    Ok(mine_document_pair_with_stats(pair, embeddings, config)?.pairs)
}

pub fn mine_document_pair_with_stats(
    pair: &DocumentPair,
    embeddings: &EmbeddingMatrix,
    config: &MiningConfig,
) -> Result<DocMining> {
    config.validate()?;
    let (src, tgt) = (pair.src(), pair.tgt());
    let raw = similarity_matrix(&src.sentences, &tgt.sentences, embeddings)?;
    let penalized = margin_penalize(&raw, config.k_neighbors, config.alpha);
    let path = align_dp(&penalized);
    let mut pairs = Vec::new();
    let mut path_scores = Vec::with_capacity(path.pairs.len());
    for &(i, j, score) in &path.pairs {
        path_scores.push(score);
        if score >= config.threshold {
            pairs.push(ParallelPair::mined(
                src.sentences[i].clone(),
                tgt.sentences[j].clone(),
                score,
            ));
        }
    }
    Ok(DocMining { pairs, path_scores })
}

/// Splits `doc` by top-1 language prediction into a `src_lang` and a
/// `tgt_lang` document (order preserved, other languages dropped) and mines
/// between them. Either side empty gives no pairs.
pub fn mine_within_document(
    doc: &Document,
    langid_model: &LangIdModel,
    src_lang: &str,
    tgt_lang: &str,
    embeddings: &EmbeddingMatrix,
    config: &MiningConfig,
) -> Result<Vec<ParallelPair>> {
    Ok(mine_within_document_with_stats(doc, langid_model, src_lang, tgt_lang, embeddings, config)?.pairs)
}

pub fn mine_within_document_with_stats(
    doc: &Document,
    langid_model: &LangIdModel,
    src_lang: &str,
    tgt_lang: &str,
    embeddings: &EmbeddingMatrix,
    config: &MiningConfig,
) -> Result<DocMining> {
    if src_lang == tgt_lang {
        return Err(Error::invalid("within-document mining needs two languages"));
    }
    for lang in [src_lang, tgt_lang] {
        if langid_model.label_index(lang).is_none() {
            return Err(Error::UnknownLabel(lang.to_owned()));
        }
    }
    let mut src = Document::new(format!("{}#{src_lang}", doc.id), src_lang, doc.source_tag.clone());
    let mut tgt = Document::new(format!("{}#{tgt_lang}", doc.id), tgt_lang, doc.source_tag.clone());
    for s in &doc.sentences {
        let lang = langid_model.predict_top1(&s.text);
        let mut s = s.clone();
        if lang == src_lang {
            s.lang = Some(src_lang.to_owned());
            src.push(s);
        } else if lang == tgt_lang {
            s.lang = Some(tgt_lang.to_owned());
            tgt.push(s);
        }
    }
    if src.is_empty() || tgt.is_empty() {
        return Ok(DocMining {
            pairs: Vec::new(),
            path_scores: Vec::new(),
        });
    }
    mine_document_pair_with_stats(&DocumentPair::new(src, tgt)?, embeddings, config)
}

/// Drops pairs whose `(src, tgt)` texts were already seen.
pub fn dedup_pairs(pairs: Vec<ParallelPair>) -> Vec<ParallelPair> {
    let mut seen = HashSet::new();
    pairs
        .into_iter()
        .filter(|p| seen.insert((p.src.text.clone(), p.tgt.text.clone())))
        .collect()
}
