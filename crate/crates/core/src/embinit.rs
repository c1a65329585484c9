//! Initialization of embeddings for new target-side tokens from aligned
//! source-side tokens.
//!
//! Alignment weight between source token `i` and target token `j` is
//! `n_ij^2 / (n_i * n_j)`, where `n_i`, `n_j` count the pairs containing each
//! token and `n_ij` the pairs containing both.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corpus::ParallelPair;
use crate::{Error, Result};

/// Deterministic stand-in tokenizer for counting: lowercased, split on
/// whitespace and on every punctuation character.
pub fn count_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_whitespace() || is_punct(c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if is_punct(c) {
                out.push(c.to_lowercase().collect());
            }
        } else {
            cur.extend(c.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn is_punct(c: char) -> bool {
    unicode_categories::UnicodeCategories::is_punctuation(c)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentStats {
    pub n_src: HashMap<String, u64>,
    pub n_tgt: HashMap<String, u64>,
    pub n_joint: HashMap<(String, String), u64>,
    /// target token -> co-occurring source tokens, sorted.
    by_target: BTreeMap<String, Vec<String>>,
}

impl AlignmentStats {
    pub fn src_count(&self, token: &str) -> u64 {
        self.n_src.get(token).copied().unwrap_or(0)
    }

    pub fn tgt_count(&self, token: &str) -> u64 {
        self.n_tgt.get(token).copied().unwrap_or(0)
    }

    pub fn joint_count(&self, src: &str, tgt: &str) -> u64 {
        self.n_joint
            .get(&(src.to_owned(), tgt.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    /// Source tokens seen in at least one pair with `tgt`.
    pub fn aligned_sources(&self, tgt: &str) -> &[String] {
        self.by_target.get(tgt).map_or(&[], Vec::as_slice)
    }

    /// `n_joint^2 / (n_src * n_tgt)`.
    pub fn alignment_weight(&self, src: &str, tgt: &str) -> Result<f64> {
        let ni = self.src_count(src);
        let nj = self.tgt_count(tgt);
        if ni == 0 {
            return Err(Error::invalid(format!("unseen token `{src}`")));
        }
        if nj == 0 {
            return Err(Error::invalid(format!("unseen token `{tgt}`")));
        }
        Ok(weight(self.joint_count(src, tgt), ni, nj))
    }

    /// Direct construction from counts. Joint counts above either marginal
    /// are rejected.
    pub fn from_counts(
        n_src: HashMap<String, u64>,
        n_tgt: HashMap<String, u64>,
        n_joint: HashMap<(String, String), u64>,
    ) -> Result<Self> {
        for ((s, t), &c) in &n_joint {
            let bound = n_src.get(s).copied().unwrap_or(0).min(n_tgt.get(t).copied().unwrap_or(0));
            if c > bound {
                return Err(Error::invalid(format!("joint count for ({s}, {t}) exceeds a marginal")));
            }
        }
        let mut by_target: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for ((s, t), &c) in &n_joint {
            if c > 0 {
                by_target.entry(t.clone()).or_default().push(s.clone());
            }
        }
        by_target.values_mut().for_each(|v| v.sort_unstable());
        Ok(AlignmentStats {
            n_src,
            n_tgt,
            n_joint,
            by_target,
        })
    }
}

fn weight(joint: u64, ni: u64, nj: u64) -> f64 {
    let joint = joint as f64;
    joint * joint / (ni as f64 * nj as f64)
}

/// Presence-based counts: a token counts once per sentence.
pub fn cooccurrence_counts<FS, FT>(pairs: &[ParallelPair], tok_src: FS, tok_tgt: FT) -> AlignmentStats
where
    FS: Fn(&str) -> Vec<String>,
    FT: Fn(&str) -> Vec<String>,
{
    let mut n_src: HashMap<String, u64> = HashMap::new();
    let mut n_tgt: HashMap<String, u64> = HashMap::new();
    let mut n_joint: HashMap<(String, String), u64> = HashMap::new();
    for p in pairs {
        let src: HashSet<String> = tok_src(&p.src.text).into_iter().collect();
        let tgt: HashSet<String> = tok_tgt(&p.tgt.text).into_iter().collect();
        for s in &src {
            *n_src.entry(s.clone()).or_default() += 1;
        }
        for t in &tgt {
            *n_tgt.entry(t.clone()).or_default() += 1;
        }
        for s in &src {
            for t in &tgt {
                *n_joint.entry((s.clone(), t.clone())).or_default() += 1;
            }
        }
    }
    AlignmentStats::from_counts(n_src, n_tgt, n_joint).expect("presence counts respect marginals")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        EmbeddingMatrix {
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            dim,
        }
    }

    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<Self> {
        let mut m = EmbeddingMatrix::new(dim);
        for (t, v) in rows {
            m.push(t, &v)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, token: String, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for `{token}` has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in vector for `{token}`")));
        }
        if self.index.contains_key(&token) {
            return Err(Error::invalid(format!("duplicate token `{token}`")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens.iter().map(String::as_str).zip(self.vectors.chunks_exact(self.dim.max(1)))
    }

    /// Text format: header `count dim`, then `token v1 ... vd` per line.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing `count dim` header"))?;
        let mut h = header.split_whitespace().map(str::parse::<usize>);
        let (count, dim) = match (h.next(), h.next(), h.next()) {
            (Some(Ok(c)), Some(Ok(d)), None) => (c, d),
            _ => return Err(Error::parse(origin, 1, "expected `count dim` header")),
        };
        let mut m = EmbeddingMatrix::new(dim);
        for (no, line) in lines {
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_owned();
            let values: std::result::Result<Vec<f32>, _> = parts.map(str::parse::<f32>).collect();
            let values = values.map_err(|e| Error::parse(origin, no + 1, e.to_string()))?;
            m.push(token, &values)
                .map_err(|e| Error::parse(origin, no + 1, e.to_string()))?;
        }
        if m.len() != count {
            return Err(Error::parse(
                origin,
                1,
                format!("header announces {count} vectors, found {}", m.len()),
            ));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let err = |e| Error::io("<embeddings>", e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(err)?;
        for (t, v) in self.rows() {
            write!(w, "{t}").map_err(err)?;
            for x in v {
                write!(w, " {x}").map_err(err)?;
            }
            writeln!(w).map_err(err)?;
        }
        Ok(())
    }
}

/// Weighted mean of the source vectors aligned with `new_token` at weight
/// at least `min_weight` (and above zero). Falls back to the mean of all
/// source rows when nothing qualifies.
pub fn init_embedding(
    new_token: &str,
    stats: &AlignmentStats,
    source_embeddings: &EmbeddingMatrix,
    min_weight: f64,
) -> Result<Vec<f32>> {
    if source_embeddings.is_empty() {
        return Err(Error::invalid("empty source embeddings"));
    }
    let dim = source_embeddings.dim();
    let mut acc = vec![0.0f64; dim];
    let mut total = 0.0f64;
    let nj = stats.tgt_count(new_token);
    if nj > 0 {
        for src in stats.aligned_sources(new_token) {
            let w = weight(stats.joint_count(src, new_token), stats.src_count(src), nj);
            if w <= 0.0 || w < min_weight {
                continue;
            }
            let v = source_embeddings
                .get(src)
                .ok_or_else(|| Error::MissingEmbedding(src.clone()))?;
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * *x as f64;
            }
            total += w;
        }
    }
    if total == 0.0 {
        let n = source_embeddings.len() as f64;
        acc.fill(0.0);
        for (_, v) in source_embeddings.rows() {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += *x as f64;
            }
        }
        return Ok(acc.into_iter().map(|a| (a / n) as f32).collect());
    }
    Ok(acc.into_iter().map(|a| (a / total) as f32).collect())
}

/// Initializes every token in `new_tokens`; the result keeps their order.
pub fn init_embeddings(
    new_tokens: &[String],
    stats: &AlignmentStats,
    source_embeddings: &EmbeddingMatrix,
    min_weight: f64,
) -> Result<EmbeddingMatrix> {
    let mut out = EmbeddingMatrix::new(source_embeddings.dim());
    for t in new_tokens {
        let v = init_embedding(t, stats, source_embeddings, min_weight)?;
        out.push(t.clone(), &v)?;
    }
    Ok(out)
}
