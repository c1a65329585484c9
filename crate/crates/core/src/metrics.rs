//! Corpus-level BLEU and ChrF++ against a single reference per hypothesis.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use unicode_categories::UnicodeCategories;

use crate::{Error, Result};

fn splits_off(c: char) -> bool {
    c.is_punctuation() || c.is_symbol()
}

/// Evaluation tokenizer: whitespace-delimited, case preserved, punctuation
/// and symbols split into single-character tokens unless they sit between
/// two digits (`3.14`, `1,000`).
pub fn tokenize_eval(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let between_digits = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_numeric()
                && chars[i + 1].is_numeric();
            if splits_off(c) && !between_digits {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn ngram_counts<T: Eq + Hash + Clone>(items: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || items.len() < n {
        return counts;
    }
    for w in items.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// `(matches, hyp total, ref total)` for one order, with clipped matches.
fn overlap<T: Eq + Hash + Clone>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, h.values().sum(), r.values().sum())
}

fn check_lengths(hyps: &[impl AsRef<str>], refs: &[impl AsRef<str>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::invalid("empty evaluation corpus"));
    }
    Ok(())
}

pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub score: f64,
    /// `None` for an order with no n-grams in hypotheses or references;
    /// such orders are left out of the geometric mean.
    pub precisions: [Option<f64>; BLEU_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

/// Corpus BLEU: clipped n-gram matches pooled over all segments for
/// n = 1..4, uniform weights, standard brevity penalty, no smoothing. An
/// order absent from both sides (corpora shorter than four tokens) is
/// skipped rather than counted as a zero precision.
pub fn corpus_bleu(hyps: &[impl AsRef<str>], refs: &[impl AsRef<str>]) -> Result<BleuScore> {
    check_lengths(hyps, refs)?;
    let mut matches = [0usize; BLEU_ORDER];
    let mut totals = [0usize; BLEU_ORDER];
    let mut ref_totals = [0usize; BLEU_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize_eval(h.as_ref());
        let r = tokenize_eval(r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=BLEU_ORDER {
            let (m, t, rt) = overlap(&h, &r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
            ref_totals[n - 1] += rt;
        }
    }
    let mut precisions = [None; BLEU_ORDER];
    for n in 0..BLEU_ORDER {
        if totals[n] > 0 {
            precisions[n] = Some(matches[n] as f64 / totals[n] as f64);
        } else if ref_totals[n] > 0 {
            precisions[n] = Some(0.0);
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let used: Vec<f64> = precisions.iter().flatten().copied().collect();
    let score = if used.is_empty() || used.contains(&0.0) {
        0.0
    } else {
        let log_mean = used.iter().map(|p| p.ln()).sum::<f64>() / used.len() as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

pub const CHRF_BETA: f64 = 2.0;
pub const CHRF_CHAR_ORDER: usize = 6;
pub const CHRF_WORD_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChrfScore {
    pub score: f64,
    pub beta: f64,
    pub char_order: usize,
    pub word_order: usize,
    /// F-scores for character orders 1..=6 then word orders 1..=2; `None`
    /// where the references have no n-grams of that order.
    pub order_f: Vec<Option<f64>>,
}

fn f_beta(matches: usize, hyp_total: usize, ref_total: usize, beta: f64) -> f64 {
    if matches == 0 || hyp_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = matches as f64 / hyp_total as f64;
    let r = matches as f64 / ref_total as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

/// Corpus ChrF++ (beta 2): character 1..6-grams over whitespace-free text
/// and word 1..2-grams over [`tokenize_eval`] tokens, statistics pooled per
/// order, the score being the mean per-order F-score times 100.
pub fn corpus_chrf_pp(hyps: &[impl AsRef<str>], refs: &[impl AsRef<str>]) -> Result<ChrfScore> {
    check_lengths(hyps, refs)?;
    let orders = CHRF_CHAR_ORDER + CHRF_WORD_ORDER;
    let mut stats = vec![(0usize, 0usize, 0usize); orders];
    for (h, r) in hyps.iter().zip(refs) {
        let (h, r) = (h.as_ref(), r.as_ref());
        let hc: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let rc: Vec<char> = r.chars().filter(|c| !c.is_whitespace()).collect();
        for n in 1..=CHRF_CHAR_ORDER {
            let (m, ht, rt) = overlap(&hc, &rc, n);
            let s = &mut stats[n - 1];
            *s = (s.0 + m, s.1 + ht, s.2 + rt);
        }
        let hw = tokenize_eval(h);
        let rw = tokenize_eval(r);
        for n in 1..=CHRF_WORD_ORDER {
            let (m, ht, rt) = overlap(&hw, &rw, n);
            let s = &mut stats[CHRF_CHAR_ORDER + n - 1];
            *s = (s.0 + m, s.1 + ht, s.2 + rt);
        }
    }
    let order_f: Vec<Option<f64>> = stats
        .iter()
        .map(|&(m, ht, rt)| (rt > 0).then(|| f_beta(m, ht, rt, CHRF_BETA)))
        .collect();
    let effective: Vec<f64> = order_f.iter().flatten().copied().collect();
    let score = if effective.is_empty() {
        // references without any n-gram: perfect only against empty output
        if stats.iter().all(|s| s.1 == 0) { 100.0 } else { 0.0 }
    } else {
        100.0 * effective.iter().sum::<f64>() / effective.len() as f64
    };
    Ok(ChrfScore {
        score,
        beta: CHRF_BETA,
        char_order: CHRF_CHAR_ORDER,
        word_order: CHRF_WORD_ORDER,
        order_f,
    })
}

/// Single-segment BLEU, for per-sentence reports.
pub fn sentence_bleu(hyp: &str, reference: &str) -> BleuScore {
    corpus_bleu(&[hyp], &[reference]).expect("one segment")
}

/// Single-segment ChrF++, for per-sentence reports.
pub fn sentence_chrf_pp(hyp: &str, reference: &str) -> ChrfScore {
    corpus_chrf_pp(&[hyp], &[reference]).expect("one segment")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Chrfpp,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Chrfpp => "chrfpp",
        }
    }

    pub fn score(self, hyps: &[impl AsRef<str>], refs: &[impl AsRef<str>]) -> Result<f64> {
        Ok(match self {
            Metric::Bleu => corpus_bleu(hyps, refs)?.score,
            Metric::Chrfpp => corpus_chrf_pp(hyps, refs)?.score,
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(Metric::Bleu),
            "chrfpp" | "chrf++" => Ok(Metric::Chrfpp),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}
