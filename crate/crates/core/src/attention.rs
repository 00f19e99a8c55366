//! Global cross-frame attention and feature matrices.

use crate::error::{Error, Result};

/// N x N nonnegative attention matrix, row-major. Row index is the attending
/// token (query), column index the attended token (key). Values are stored as
/// the 32-bit reals of the bundle format and lifted to f64 for computation.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    n: usize,
    values: Vec<f32>,
}

impl AttentionMatrix {
    pub fn new(n: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::invalid(
                "attention matrix",
                format!("expected {} values for n={n}, got {}", n * n, values.len()),
            ));
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(
                    "attention matrix",
                    format!("non-finite entry at flat index {idx}"),
                ));
            }
            if v < 0.0 {
                return Err(Error::invalid(
                    "attention matrix",
                    format!("negative entry {v} at flat index {idx}"),
                ));
            }
        }
        Ok(AttentionMatrix { n, values })
    }

    /// Build from f64 rows (test and synthesis convenience); values are
    /// quantized to f32 exactly as the bundle format stores them.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::invalid("attention matrix", "ragged rows"));
            }
            values.extend(row.iter().map(|&v| v as f32));
        }
        AttentionMatrix::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at (row = attending token, col = attended token).
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col] as f64
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Scale every entry by a positive constant (returns a new matrix).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::invalid("scale factor", format!("{factor}")));
        }
        let values = self
            .values
            .iter()
            .map(|&v| (v as f64 * factor) as f32)
            .collect();
        AttentionMatrix::new(self.n, values)
    }

    /// Largest deviation of any row sum from 1. Loaders warn when this
    /// exceeds 1e-3; rows are not required to be stochastic.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                let sum: f64 = self.values[r * self.n..(r + 1) * self.n]
                    .iter()
                    .map(|&v| v as f64)
                    .sum();
                (sum - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// N x d feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n * dim {
            return Err(Error::invalid(
                "feature matrix",
                format!(
                    "expected {} values for n={n}, d={dim}, got {}",
                    n * dim,
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix", "non-finite entry"));
        }
        Ok(FeatureMatrix { n, dim, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Pairwise cosine similarity between feature rows, clamped at 0 so the
/// result is admissible wherever an attention matrix is. Zero-norm rows get
/// similarity 0 to everything, including themselves.
pub fn cosine_relevance(features: &FeatureMatrix) -> Result<AttentionMatrix> {
    if features.dim() == 0 {
        return Err(Error::invalid("feature matrix", "zero feature dimension"));
    }
    let n = features.n();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            features
                .row(i)
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut values = vec![0f32; n * n];
    for j in 0..n {
        if norms[j] == 0.0 {
            continue;
        }
        let row_j = features.row(j);
        for i in 0..n {
            if norms[i] == 0.0 {
                continue;
            }
            let dot: f64 = row_j
                .iter()
                .zip(features.row(i))
                .map(|(&a, &b)| (a as f64) * (b as f64))
                .sum();
            let cos = dot / (norms[j] * norms[i]);
            values[j * n + i] = cos.max(0.0) as f32;
        }
    }
    AttentionMatrix::new(n, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_have_unit_similarity() {
        let f = FeatureMatrix::new(2, 3, vec![1.0, 2.0, 2.0, 1.0, 2.0, 2.0]).unwrap();
        let m = cosine_relevance(&f).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-6);
        assert!((m.get(1, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_rows_have_zero_similarity() {
        let f = FeatureMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = cosine_relevance(&f).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn antiparallel_rows_clamp_to_zero() {
        let f = FeatureMatrix::new(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let m = cosine_relevance(&f).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn zero_norm_rows_are_zero_everywhere() {
        let f = FeatureMatrix::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = cosine_relevance(&f).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(AttentionMatrix::new(2, vec![0.0; 3]).is_err());
        assert!(AttentionMatrix::new(1, vec![-0.5]).is_err());
        assert!(AttentionMatrix::new(1, vec![f32::NAN]).is_err());
        let f = FeatureMatrix::new(1, 0, vec![]).unwrap();
        assert!(cosine_relevance(&f).is_err());
    }

    #[test]
    fn row_sum_deviation() {
        let a = AttentionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.7, 0.7]]).unwrap();
        let dev = a.max_row_sum_deviation();
        assert!((dev - 0.4).abs() < 1e-6);
    }
}
