use std::collections::HashSet;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use super::Sentence;
use crate::{Error, Result};

/// Canonical form used for every stored sentence: control characters
/// dropped, NFC composed, whitespace runs collapsed to one space and trimmed.
pub fn normalize(text: &str) -> String {
    // Controls go before composition so that removing one can never leave a
    // composable sequence behind.
    let stripped: String = text
        .chars()
        .filter(|c| c.is_whitespace() || !c.is_control())
        .collect();
    let mut out = String::with_capacity(stripped.len());
    let mut pending_space = false;
    for c in stripped.nfc() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// Removes exact duplicate texts, keeping the first occurrence.
pub fn deduplicate(sentences: Vec<Sentence>) -> Vec<Sentence> {
    let mut seen = HashSet::with_capacity(sentences.len());
    sentences
        .into_iter()
        .filter(|s| seen.insert(s.text.clone()))
        .collect()
}

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Tokens (terminator included, compared lowercased) after which a sentence
/// never ends.
#[derive(Debug, Clone, Default)]
pub struct Abbreviations {
    entries: HashSet<String>,
}

impl Abbreviations {
    /// The shipped Russian/Erzya list.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }

    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Abbreviations { entries }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…' | ';')
}

/// Rule-based sentence splitter.
///
/// A boundary is a terminator followed by whitespace and then an uppercase
/// letter or a digit, unless the word carrying the terminator is a known
/// abbreviation.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Abbreviations,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::new(Abbreviations::builtin())
    }
}

impl Segmenter {
    pub fn new(abbreviations: Abbreviations) -> Self {
        Segmenter { abbreviations }
    }

    /// Splits normalized text into sentence strings.
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut word_start = 0usize;

        for (k, &(pos, c)) in chars.iter().enumerate() {
            if c.is_whitespace() {
                word_start = chars.get(k + 1).map_or(text.len(), |&(p, _)| p);
                continue;
            }
            if !is_terminator(c) {
                continue;
            }
            match chars.get(k + 1) {
                Some(&(_, next)) if next.is_whitespace() => {}
                _ => continue,
            }
            let Some(&(_, first)) = chars[k + 1..].iter().find(|(_, ch)| !ch.is_whitespace()) else {
                continue;
            };
            if !(first.is_uppercase() || first.is_numeric()) {
                continue;
            }
            let end = pos + c.len_utf8();
            let word = text[word_start..end].trim_start_matches(|ch: char| !ch.is_alphanumeric());
            if self.abbreviations.contains(word) {
                continue;
            }
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                out.push(sentence);
            }
            start = end;
        }

        let tail = text[start..].trim();
        if !tail.is_empty() {
            out.push(tail);
        }
        out
    }

    /// Splits `text` into sentences tagged with `lang_hint`; ids are the
    /// 0-based sentence positions.
    pub fn segment(&self, text: &str, lang_hint: &str) -> Vec<Sentence> {
        self.split(text)
            .into_iter()
            .enumerate()
            .map(|(i, s)| Sentence::from_normalized(i.to_string(), s.to_owned(), Some(lang_hint), ""))
            .collect()
    }
}
