//! Byte-pair-encoding merge learning and vocabulary extension.
//!
//! Words are whitespace tokens split into characters, with [`END_OF_WORD`]
//! appended to the last one. Learning repeatedly merges the most frequent
//! adjacent symbol pair (overlapping occurrences counted, words weighted by
//! corpus frequency) until the best pair falls below `min_count`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub rank: usize,
}

impl MergeRule {
    pub fn product(&self) -> String {
        format!("{}{}", self.left, self.right)
    }
}

/// A learned merge together with the pair count it had when selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedMerge {
    pub rule: MergeRule,
    pub count: u64,
}

fn split_word(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    key: Reverse<(String, String)>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Learner {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), u64>,
    occurs_in: HashMap<(u32, u32), Vec<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl Learner {
    fn new<S: AsRef<str>>(corpus: &[S]) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for text in corpus {
            for w in text.as_ref().split_whitespace() {
                *freq.entry(w).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = freq.into_iter().collect();
        entries.sort_unstable();

        let mut learner = Learner {
            symbols: Vec::new(),
            ids: HashMap::new(),
            words: Vec::with_capacity(entries.len()),
            pair_counts: HashMap::new(),
            occurs_in: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for (word, n) in entries {
            let syms = split_word(word).into_iter().map(|s| learner.intern(s)).collect();
            learner.words.push((syms, n));
        }
        let mut touched = HashSet::new();
        for w in 0..learner.words.len() {
            learner.add_pairs(w, &mut touched);
        }
        learner.refresh(touched);
        learner
    }

    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.ids.insert(s.clone(), id);
        self.symbols.push(s);
        id
    }

    fn add_pairs(&mut self, w: usize, touched: &mut HashSet<(u32, u32)>) {
        let (syms, n) = &self.words[w];
        for p in syms.windows(2) {
            let pair = (p[0], p[1]);
            *self.pair_counts.entry(pair).or_default() += n;
            self.occurs_in.entry(pair).or_default().push(w);
            touched.insert(pair);
        }
    }

    fn remove_pairs(&mut self, w: usize, touched: &mut HashSet<(u32, u32)>) {
        let (syms, n) = &self.words[w];
        for p in syms.windows(2) {
            let pair = (p[0], p[1]);
            if let Some(c) = self.pair_counts.get_mut(&pair) {
                *c -= n;
            }
            touched.insert(pair);
        }
    }

    fn refresh(&mut self, touched: HashSet<(u32, u32)>) {
        for pair in touched {
            let count = self.pair_counts.get(&pair).copied().unwrap_or(0);
            if count > 0 {
                self.push(pair, count);
            }
        }
    }

    fn push(&mut self, pair: (u32, u32), count: u64) {
        let key = Reverse((
            self.symbols[pair.0 as usize].clone(),
            self.symbols[pair.1 as usize].clone(),
        ));
        self.heap.push(Candidate { count, key, pair });
    }

    /// Pops the best live pair. Heap entries may be stale; a stale entry is
    /// re-queued with its current count.
    fn best(&mut self) -> Option<((u32, u32), u64)> {
        while let Some(c) = self.heap.pop() {
            let current = self.pair_counts.get(&c.pair).copied().unwrap_or(0);
            if current == c.count {
                return Some((c.pair, current));
            }
            if current > 0 && current < c.count {
                self.heap.push(Candidate { count: current, ..c });
            }
        }
        None
    }

    fn merge(&mut self, pair: (u32, u32)) {
        let product = format!("{}{}", self.symbols[pair.0 as usize], self.symbols[pair.1 as usize]);
        let new_id = self.intern(product);
        let mut affected = self.occurs_in.remove(&pair).unwrap_or_default();
        affected.sort_unstable();
        affected.dedup();
        let mut touched = HashSet::new();
        for w in affected {
            if !self.words[w].0.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            self.remove_pairs(w, &mut touched);
            self.words[w].0 = merge_symbols(&self.words[w].0, pair, new_id);
            self.add_pairs(w, &mut touched);
        }
        self.pair_counts.retain(|_, c| *c > 0);
        self.refresh(touched);
    }
}

fn merge_symbols<T: PartialEq + Clone>(syms: &[T], pair: (T, T), merged: T) -> Vec<T> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
            out.push(merged.clone());
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns merges and reports the pair count behind each one.
pub fn learn_bpe_with_counts<S: AsRef<str>>(
    corpus: &[S],
    min_count: u64,
    max_merges: Option<usize>,
) -> Result<Vec<LearnedMerge>> {
    if min_count < 1 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut learner = Learner::new(corpus);
    let mut out = Vec::new();
    while max_merges.is_none_or(|m| out.len() < m) {
        let Some((pair, count)) = learner.best() else { break };
        if count < min_count {
            break;
        }
        out.push(LearnedMerge {
            rule: MergeRule {
                left: learner.symbols[pair.0 as usize].clone(),
                right: learner.symbols[pair.1 as usize].clone(),
                rank: out.len(),
            },
            count,
        });
        learner.merge(pair);
    }
    Ok(out)
}

/// Learns BPE merges over the whitespace tokens of `corpus`. Ties between
/// equally frequent pairs go to the lexicographically smallest
/// `(left, right)`.
pub fn learn_bpe<S: AsRef<str>>(
    corpus: &[S],
    min_count: u64,
    max_merges: Option<usize>,
) -> Result<Vec<MergeRule>> {
    Ok(learn_bpe_with_counts(corpus, min_count, max_merges)?
        .into_iter()
        .map(|m| m.rule)
        .collect())
}

/// Rank lookup for applying merges.
#[derive(Debug, Clone, Default)]
pub struct MergeTable {
    ranks: HashMap<(String, String), usize>,
}

impl MergeTable {
    pub fn new(merges: &[MergeRule]) -> Self {
        let mut ranks = HashMap::with_capacity(merges.len());
        for m in merges {
            ranks.entry((m.left.clone(), m.right.clone())).or_insert(m.rank);
        }
        MergeTable { ranks }
    }

    /// Segments one word: while any adjacent pair has a rule, the
    /// lowest-ranked one is merged at all its occurrences, left to right.
    pub fn apply(&self, word: &str) -> Vec<String> {
        let mut syms = split_word(word);
        loop {
            let best = syms
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())).map(|&r| (r, p)))
                .min_by_key(|(r, _)| *r)
                .map(|(_, p)| (p[0].clone(), p[1].clone()));
            let Some((l, r)) = best else { break };
            let merged = format!("{l}{r}");
            syms = merge_symbols(&syms, (l, r), merged);
        }
        syms
    }
}

pub fn apply_bpe(merges: &[MergeRule], word: &str) -> Vec<String> {
    MergeTable::new(merges).apply(word)
}

/// Inverse of [`apply_bpe`]: joins tokens and drops the end-of-word marker.
pub fn detokenize(tokens: &[String]) -> String {
    let joined = tokens.concat();
    match joined.strip_suffix(END_OF_WORD) {
        Some(s) => s.to_owned(),
        None => joined,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwordVocab {
    pub base_tokens: HashSet<String>,
    pub merges: Vec<MergeRule>,
    pub new_tokens: Vec<String>,
}

/// Merge products absent from `base`, in rank order, without repeats.
pub fn extend_vocab(base: &HashSet<String>, merges: &[MergeRule]) -> SubwordVocab {
    let mut seen = HashSet::new();
    let new_tokens = merges
        .iter()
        .map(MergeRule::product)
        .filter(|t| !base.contains(t) && seen.insert(t.clone()))
        .collect();
    SubwordVocab {
        base_tokens: base.clone(),
        merges: merges.to_vec(),
        new_tokens,
    }
}

/// One `left right` rule per line, in rank order.
pub fn write_merges<W: Write>(mut w: W, merges: &[MergeRule]) -> Result<()> {
    for m in merges {
        writeln!(w, "{} {}", m.left, m.right).map_err(|e| Error::io("<merges>", e))?;
    }
    Ok(())
}

pub fn parse_merges(text: &str, origin: &Path) -> Result<Vec<MergeRule>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .enumerate()
        .map(|(rank, (no, line))| {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => Ok(MergeRule {
                    left: l.to_owned(),
                    right: r.to_owned(),
                    rank,
                }),
                _ => Err(Error::parse(origin, no + 1, "expected `left right`")),
            }
        })
        .collect()
}

pub fn read_merges(path: &Path) -> Result<Vec<MergeRule>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_merges(&text, path)
}

/// One token per line.
pub fn read_token_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect())
}
