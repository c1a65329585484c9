use rayon::prelude::*;

use crate::corpus::Sentence;
use crate::embinit::EmbeddingMatrix;
use crate::{Error, Result};

/// Dense row-major score matrix, rows = source sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite similarity"));
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged similarity rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

/// Cosine similarity times `min(len) / max(len)`.
pub fn raw_similarity(emb_a: &[f32], emb_b: &[f32], len_a: usize, len_b: usize) -> Result<f64> {
    if emb_a.len() != emb_b.len() {
        return Err(Error::invalid("embedding dimensions differ"));
    }
    if len_a == 0 || len_b == 0 {
        return Err(Error::invalid("empty sentence"));
    }
    let (na, nb) = (norm(emb_a), norm(emb_b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("degenerate embedding"));
    }
    let dot: f64 = emb_a.iter().zip(emb_b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
    let ratio = len_a.min(len_b) as f64 / len_a.max(len_b) as f64;
    Ok(cos * ratio)
}

/// Raw similarities between every source and target sentence.
pub fn similarity_matrix(
    src: &[Sentence],
    tgt: &[Sentence],
    embeddings: &EmbeddingMatrix,
) -> Result<SimilarityMatrix> {
    let lookup = |s: &Sentence| {
        embeddings
            .get(&s.id)
            .ok_or_else(|| Error::MissingEmbedding(s.id.clone()))
    };
    let src_vecs: Vec<&[f32]> = src.iter().map(lookup).collect::<Result<_>>()?;
    let tgt_vecs: Vec<&[f32]> = tgt.iter().map(lookup).collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = src_vecs
        .par_iter()
        .zip(src)
        .map(|(a, sa)| {
            tgt_vecs
                .iter()
                .zip(tgt)
                .map(|(b, sb)| {
                    raw_similarity(a, b, sa.char_len, sb.char_len)
                        .map_err(|e| Error::invalid(format!("{} / {}: {e}", sa.id, sb.id)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    SimilarityMatrix::new(src.len(), tgt.len(), rows.concat())
}

fn mean_top_k(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    v[..k].iter().sum::<f64>() / k as f64
}

/// `S'(i,j) = S(i,j) - alpha * (topk(row i) + topk(col j)) / 2`, where
/// `topk` is the mean of the `k` largest entries. `k` is clamped to
/// `min(rows, cols)`.
pub fn margin_penalize(s: &SimilarityMatrix, k: usize, alpha: f64) -> SimilarityMatrix {
    let k = k.min(s.rows).min(s.cols);
    if k == 0 {
        return s.clone();
    }
    let row_avg: Vec<f64> = (0..s.rows).map(|i| mean_top_k(s.row(i).iter().copied(), k)).collect();
    let col_avg: Vec<f64> = (0..s.cols)
        .map(|j| mean_top_k((0..s.rows).map(|i| s.get(i, j)), k))
        .collect();
    let values = (0..s.rows)
        .flat_map(|i| {
            let row_avg = &row_avg;
            let col_avg = &col_avg;
            (0..s.cols).map(move |j| s.get(i, j) - alpha * (row_avg[i] + col_avg[j]) / 2.0)
        })
        .collect();
    SimilarityMatrix {
        rows: s.rows,
        cols: s.cols,
        values,
    }
}
