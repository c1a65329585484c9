use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dedup_pairs, mine_document_pair_with_stats, mine_within_document_with_stats, DocMining, MiningConfig};
use crate::corpus::{read_documents_jsonl, read_sentences_jsonl, Document, DocumentPair, ParallelPair};
use crate::embinit::EmbeddingMatrix;
use crate::langid::LangIdModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WithinMode {
    Within,
}

/// One manifest line: `{"src_doc", "tgt_doc"}` or `{"doc", "mode": "within"}`.
/// Document files are sentence JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MiningJob {
    Pair { src_doc: PathBuf, tgt_doc: PathBuf },
    Within { doc: PathBuf, mode: WithinMode },
}

impl MiningJob {
    pub fn within(doc: impl Into<PathBuf>) -> Self {
        MiningJob::Within {
            doc: doc.into(),
            mode: WithinMode::Within,
        }
    }

    fn label(&self) -> String {
        match self {
            MiningJob::Pair { src_doc, tgt_doc } => format!("{} | {}", src_doc.display(), tgt_doc.display()),
            MiningJob::Within { doc, .. } => format!("{} (within)", doc.display()),
        }
    }

    fn resolve(self, base: &Path) -> Self {
        match self {
            MiningJob::Pair { src_doc, tgt_doc } => MiningJob::Pair {
                src_doc: base.join(src_doc),
                tgt_doc: base.join(tgt_doc),
            },
            MiningJob::Within { doc, mode } => MiningJob::Within {
                doc: base.join(doc),
                mode,
            },
        }
    }

    pub fn paths(&self) -> Vec<&Path> {
        match self {
            MiningJob::Pair { src_doc, tgt_doc } => vec![src_doc, tgt_doc],
            MiningJob::Within { doc, .. } => vec![doc],
        }
    }
}

/// Reads a JSONL manifest; relative document paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<MiningJob>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, line)| {
            serde_json::from_str::<MiningJob>(line)
                .map(|j| j.resolve(base))
                .map_err(|_| Error::parse(path, no + 1, "expected {\"src_doc\",\"tgt_doc\"} or {\"doc\",\"mode\":\"within\"}"))
        })
        .collect()
}

/// Language setup for within-document jobs.
pub struct WithinDocLangs<'a> {
    pub model: &'a LangIdModel,
    pub src_lang: &'a str,
    pub tgt_lang: &'a str,
}

const BINS: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DocReport {
    pub job: String,
    pub candidates: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Path scores in 20 bins of width 0.1 over [-1, 1); outliers land in
    /// the end bins.
    pub histogram: Vec<u64>,
}

impl DocReport {
    fn new(job: String, mining: &DocMining) -> Self {
        let mut histogram = vec![0u64; BINS];
        for &s in &mining.path_scores {
            let bin = ((s + 1.0) * 10.0).floor().clamp(0.0, (BINS - 1) as f64) as usize;
            histogram[bin] += 1;
        }
        DocReport {
            job,
            candidates: mining.path_scores.len(),
            accepted: mining.pairs.len(),
            rejected: mining.path_scores.len() - mining.pairs.len(),
            histogram,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MiningReport {
    pub documents: Vec<DocReport>,
    pub accepted: usize,
    pub rejected: usize,
    pub unique_pairs: usize,
    pub histogram: Vec<u64>,
}

fn load_mixed(path: &Path) -> Result<Document> {
    let sentences = read_sentences_jsonl(path, "")?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tag = sentences.first().map(|s| s.source_tag.clone()).unwrap_or_default();
    Ok(Document::new(id, "mixed", tag).with_sentences(sentences))
}

/// Runs every job (in parallel, results kept in manifest order) and
/// deduplicates the union of accepted pairs by text.
pub fn run_jobs(
    jobs: &[MiningJob],
    embeddings: &EmbeddingMatrix,
    config: &MiningConfig,
    within: Option<&WithinDocLangs<'_>>,
) -> Result<(Vec<ParallelPair>, MiningReport)> {
    config.validate()?;
    let results: Vec<(DocReport, Vec<ParallelPair>)> = jobs
        .par_iter()
        .map(|job| {
            let mining = match job {
                MiningJob::Pair { src_doc, tgt_doc } => {
                    let pair = DocumentPair::new(read_documents_jsonl(src_doc)?, read_documents_jsonl(tgt_doc)?)?;
                    mine_document_pair_with_stats(&pair, embeddings, config)?
                }
                MiningJob::Within { doc, .. } => {
                    let langs = within.ok_or_else(|| {
                        Error::Config("within-document jobs need a language model and language pair".into())
                    })?;
                    mine_within_document_with_stats(
                        &load_mixed(doc)?,
                        langs.model,
                        langs.src_lang,
                        langs.tgt_lang,
                        embeddings,
                        config,
                    )?
                }
            };
            Ok((DocReport::new(job.label(), &mining), mining.pairs))
        })
        .collect::<Result<_>>()?;

    let mut report = MiningReport {
        histogram: vec![0; BINS],
        ..MiningReport::default()
    };
    let mut all = Vec::new();
    for (doc, pairs) in results {
        report.accepted += doc.accepted;
        report.rejected += doc.rejected;
        for (h, d) in report.histogram.iter_mut().zip(&doc.histogram) {
            *h += d;
        }
        report.documents.push(doc);
        all.extend(pairs);
    }
    let unique = dedup_pairs(all);
    report.unique_pairs = unique.len();
    Ok((unique, report))
}
