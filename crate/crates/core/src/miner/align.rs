use super::SimilarityMatrix;

/// A strictly monotone one-to-one matching: `(row, col, score)` with both
/// indices increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPath {
    pub pairs: Vec<(usize, usize, f64)>,
    pub total: f64,
}

/// Maximum-total monotone matching over `s`.
///
/// `f(i,j) = max(f(i-1,j), f(i,j-1), f(i-1,j-1) + s(i,j))` with zero
/// borders. Traceback prefers the diagonal, then skipping a row; a negative
/// cell is never taken.
pub fn align_dp(s: &SimilarityMatrix) -> AlignedPath {
    let (m, n) = (s.rows(), s.cols());
    let w = n + 1;
    let mut f = vec![0.0f64; (m + 1) * w];
    for i in 1..=m {
        for j in 1..=n {
            let diag = f[(i - 1) * w + j - 1] + s.get(i - 1, j - 1);
            let up = f[(i - 1) * w + j];
            let left = f[i * w + j - 1];
            f[i * w + j] = diag.max(up).max(left);
        }
    }

    let mut pairs = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        let here = f[i * w + j];
        let score = s.get(i - 1, j - 1);
        if score >= 0.0 && here == f[(i - 1) * w + j - 1] + score {
            pairs.push((i - 1, j - 1, score));
            i -= 1;
            j -= 1;
        } else if here == f[(i - 1) * w + j] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    AlignedPath {
        pairs,
        total: f[m * w + n],
    }
}
