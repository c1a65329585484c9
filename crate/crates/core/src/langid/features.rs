use std::collections::HashMap;
use std::hash::Hasher;

use fnv::FnvHasher;

/// 64-bit FNV-1a over the UTF-8 bytes of an n-gram.
pub(crate) fn ngram_hash(gram: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(gram.as_bytes());
    h.finish()
}

/// Maps text to rows of the feature embedding matrix: known words first,
/// then hashed character n-grams of each `<token>` offset by the vocabulary
/// size.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Featurizer {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub buckets: u64,
    pub word_index: HashMap<String, u32>,
}

impl Featurizer {
    pub fn features(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let offset = self.word_index.len() as u64;
        let mut buf = String::new();
        for token in text.split_whitespace() {
            if let Some(&row) = self.word_index.get(token) {
                out.push(row);
            }
            buf.clear();
            buf.push('<');
            buf.push_str(token);
            buf.push('>');
            let bounds: Vec<usize> = buf
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(buf.len()))
                .collect();
            let n_chars = bounds.len() - 1;
            for n in self.ngram_min..=self.ngram_max.min(n_chars) {
                for start in 0..=n_chars - n {
                    let gram = &buf[bounds[start]..bounds[start + n]];
                    out.push((offset + ngram_hash(gram) % self.buckets) as u32);
                }
            }
        }
        // Canonical multiset order; pooling over a sorted list is exactly
        // invariant to token order.
        out.sort_unstable();
        out
    }
}

/// Character n-grams of a single token wrapped in boundary markers, in
/// extraction order. Exposed for inspection and tests.
pub fn char_ngrams(token: &str, ngram_min: usize, ngram_max: usize) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in ngram_min..=ngram_max.min(chars.len()) {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}
