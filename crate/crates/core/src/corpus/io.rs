use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize, Document, Origin, ParallelPair, Segmenter, Sentence};
use crate::{Error, Result};

/// One line of a sentence JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub lang: Option<String>,
    #[serde(default)]
    pub source_tag: Option<String>,
    /// Accepted on input for files written by this crate; always recomputed.
    #[serde(default, skip_serializing)]
    pub char_len: Option<usize>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let reader = open(path)?;
    Ok(reader
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e))))
}

/// Reads `{"id","text","lang","source_tag"}` lines. Text is normalized;
/// blank lines are skipped.
pub fn read_sentences_jsonl(path: &Path, default_source_tag: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for line in lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, no, e.to_string()))?;
        let tag = rec.source_tag.as_deref().unwrap_or(default_source_tag);
        out.push(Sentence::new(rec.id, &rec.text, rec.lang.as_deref(), tag));
    }
    Ok(out)
}

/// Reads a sentence JSONL file as one document. The id is the file stem;
/// language and source tag come from the first record and must agree across
/// records.
pub fn read_documents_jsonl(path: &Path) -> Result<Document> {
    let sentences = read_sentences_jsonl(path, "")?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let Some(first) = sentences.first() else {
        return Err(Error::parse(path, 0, "document has no sentences"));
    };
    let lang = first
        .lang
        .clone()
        .ok_or_else(|| Error::parse(path, 1, "document sentences need a `lang`"))?;
    let tag = first.source_tag.clone();
    for (i, s) in sentences.iter().enumerate() {
        if s.lang.as_deref() != Some(lang.as_str()) {
            return Err(Error::parse(path, i + 1, format!("sentence {} is not `{lang}`", s.id)));
        }
    }
    Ok(Document::new(id, lang, tag).with_sentences(sentences))
}

/// Reads plain text with one paragraph per line and segments it. Sentence
/// ids are `{doc_id}:{n}` in document order.
pub fn read_plain_text(
    path: &Path,
    segmenter: &Segmenter,
    doc_id: &str,
    lang: &str,
    source_tag: &str,
) -> Result<Document> {
    let mut doc = Document::new(doc_id, lang, source_tag);
    let mut n = 0usize;
    for line in lines(path)? {
        let (_, line) = line?;
        let para = normalize(&line);
        for s in segmenter.split(&para) {
            doc.push(Sentence::from_normalized(
                format!("{doc_id}:{n}"),
                s.to_owned(),
                Some(lang),
                source_tag,
            ));
            n += 1;
        }
    }
    Ok(doc)
}

pub fn write_sentences_jsonl<W: Write>(mut w: W, sentences: &[Sentence]) -> Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// `src TAB tgt TAB score TAB origin`, score empty when absent.
pub fn write_bitext_tsv<W: Write>(mut w: W, pairs: &[ParallelPair]) -> Result<()> {
    for p in pairs {
        let score = p.score().map(|s| s.to_string()).unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{}", p.src.text, p.tgt.text, score, p.origin())
            .map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// Reads a bitext TSV. A line with only two columns is a gold pair. Sentence
/// ids are `{stem}:{line}:src` / `{stem}:{line}:tgt`.
pub fn read_bitext_tsv(path: &Path, src_lang: &str, tgt_lang: &str) -> Result<Vec<ParallelPair>> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = Vec::new();
    for line in lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 && cols.len() != 4 {
            return Err(Error::parse(path, no, format!("expected 2 or 4 columns, got {}", cols.len())));
        }
        let src = Sentence::new(format!("{stem}:{no}:src"), cols[0], Some(src_lang), &stem);
        let tgt = Sentence::new(format!("{stem}:{no}:tgt"), cols[1], Some(tgt_lang), &stem);
        let (score, origin) = if cols.len() == 4 {
            let origin: Origin = cols[3].parse().map_err(|e: Error| Error::parse(path, no, e.to_string()))?;
            let score = match cols[2] {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|e| Error::parse(path, no, e.to_string()))?),
            };
            (score, origin)
        } else {
            (None, Origin::Gold)
        };
        let pair = match (origin, score) {
            (Origin::Mined, Some(s)) => ParallelPair::mined(src, tgt, s),
            (Origin::Mined, None) => return Err(Error::parse(path, no, "mined pair without score")),
            (o, None) => ParallelPair::unscored(src, tgt, o)?,
            (o, Some(_)) => return Err(Error::parse(path, no, format!("{o} pair carries a score"))),
        };
        out.push(pair);
    }
    Ok(out)
}
