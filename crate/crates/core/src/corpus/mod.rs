//! Sentence, document and pair data model plus the text plumbing that feeds
//! every other stage.

mod io;
mod text;

pub use io::{
    read_bitext_tsv, read_documents_jsonl, read_plain_text, read_sentences_jsonl,
    write_bitext_tsv, write_sentences_jsonl, SentenceRecord,
};
pub use text::{deduplicate, normalize, Abbreviations, Segmenter};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    pub char_len: usize,
    pub source_tag: String,
}

impl Sentence {
    /// Builds a sentence from raw text, normalizing it first.
    pub fn new(
        id: impl Into<String>,
        raw_text: &str,
        lang: Option<&str>,
        source_tag: impl Into<String>,
    ) -> Self {
        Self::from_normalized(id, normalize(raw_text), lang, source_tag)
    }

    pub(crate) fn from_normalized(
        id: impl Into<String>,
        text: String,
        lang: Option<&str>,
        source_tag: impl Into<String>,
    ) -> Self {
        let char_len = text.chars().count();
        Sentence {
            id: id.into(),
            text,
            lang: lang.map(str::to_owned),
            char_len,
            source_tag: source_tag.into(),
        }
    }
}

impl AsRef<str> for Sentence {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub source_tag: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: impl Into<String>, source_tag: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            lang: lang.into(),
            source_tag: source_tag.into(),
            sentences: Vec::new(),
        }
    }

    /// Appends a sentence, retagging it with the document's source tag.
    pub fn push(&mut self, mut sentence: Sentence) {
        sentence.source_tag.clone_from(&self.source_tag);
        self.sentences.push(sentence);
    }

    pub fn with_sentences(mut self, sentences: impl IntoIterator<Item = Sentence>) -> Self {
        for s in sentences {
            self.push(s);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DocumentPair {
    src_doc: Document,
    tgt_doc: Document,
}

impl DocumentPair {
    pub fn new(src_doc: Document, tgt_doc: Document) -> Result<Self> {
        if src_doc.lang == tgt_doc.lang {
            return Err(Error::invalid(format!(
                "document pair {} / {} shares language `{}`",
                src_doc.id, tgt_doc.id, src_doc.lang
            )));
        }
        Ok(DocumentPair { src_doc, tgt_doc })
    }

    pub fn src(&self) -> &Document {
        &self.src_doc
    }

    pub fn tgt(&self) -> &Document {
        &self.tgt_doc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Gold,
    Mined,
    BackTranslated,
    SelfTrained,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Gold => "gold",
            Origin::Mined => "mined",
            Origin::BackTranslated => "back_translated",
            Origin::SelfTrained => "self_trained",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(Origin::Gold),
            "mined" => Ok(Origin::Mined),
            "back_translated" => Ok(Origin::BackTranslated),
            "self_trained" => Ok(Origin::SelfTrained),
            other => Err(Error::invalid(format!("unknown pair origin `{other}`"))),
        }
    }
}

/// A sentence pair. The mining score is present exactly when the origin is
/// [`Origin::Mined`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPair {
    pub src: Sentence,
    pub tgt: Sentence,
    score: Option<f64>,
    origin: Origin,
}

impl ParallelPair {
    pub fn gold(src: Sentence, tgt: Sentence) -> Self {
        ParallelPair {
            src,
            tgt,
            score: None,
            origin: Origin::Gold,
        }
    }

    pub fn mined(src: Sentence, tgt: Sentence, score: f64) -> Self {
        ParallelPair {
            src,
            tgt,
            score: Some(score),
            origin: Origin::Mined,
        }
    }

    /// Unscored pair with the given origin. Fails for [`Origin::Mined`].
    pub fn unscored(src: Sentence, tgt: Sentence, origin: Origin) -> Result<Self> {
        if origin == Origin::Mined {
            return Err(Error::invalid("mined pairs need a score"));
        }
        Ok(ParallelPair {
            src,
            tgt,
            score: None,
            origin,
        })
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }
}
