//! Anisotropy, cross-lingual similarity (Γ) and geometric separability (Φ).

mod nn;

pub use nn::{distance, nearest_by_class, NearestByClass, Neighbor};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{dot, pairwise_cosine_sum, squared_norm};
use crate::io::EmbeddingSet;
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("need at least 2 languages, got {0}")]
    TooFewLanguages(usize),
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
    #[error("languages are not sentence-aligned: {l1:?} has {n1} rows, {l2:?} has {n2}")]
    UnequalCounts {
        l1: String,
        n1: usize,
        l2: String,
        n2: usize,
    },
    #[error("anisotropy is zero, the similarity index is undefined")]
    ZeroAnisotropy,
    #[error("separability of {0:?} with itself is fixed at 1.0, not computed")]
    SameLanguage(String),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("squared row norm exceeds 1e36")]
    MagnitudeOutOfRange,
}

/// Distance used for nearest-neighbour search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NnMetric {
    /// Squared euclidean distance; ranks neighbours like the euclidean one.
    #[default]
    Euclidean,
    /// `1 - cosine(u, v)`.
    CosineDistance,
}

/// Cosine similarity with f64 accumulation, clamped to `[-1, 1]`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let c = cosine_unchecked(u, v);
    if c.is_nan() {
        return Err(MetricsError::ZeroNorm);
    }
    Ok(c)
}

// NaN when either side has zero norm.
#[inline]
pub(crate) fn cosine_unchecked(u: &[f32], v: &[f32]) -> f64 {
    // a single sqrt of the product keeps cosine(x, c·x) at exactly 1 more often
    let den = (squared_norm(u) * squared_norm(v)).sqrt();
    (dot(u, v) / den).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyResult {
    pub value: f64,
    pub pair_count: u64,
}

/// Absolute mean cosine over all unordered pairs of distinct rows, pooled
/// across languages.
pub fn anisotropy(set: &EmbeddingSet) -> Result<AnisotropyResult, MetricsError> {
    let n = set.count();
    if n < 2 {
        return Err(MetricsError::TooFewRows(n));
    }
    let pair_count = (n as u64) * (n as u64 - 1) / 2;
    let total = pairwise_cosine_sum(set.data(), set.dim()).value();
    let value = (total / pair_count as f64).abs().min(1.0);
    Ok(AnisotropyResult { value, pair_count })
}

fn aligned_spans<'a>(
    set: &'a EmbeddingSet,
    l1: &str,
    l2: &str,
) -> Result<(&'a crate::io::LanguageSpan, &'a crate::io::LanguageSpan), MetricsError> {
    let a = set
        .span(l1)
        .ok_or_else(|| MetricsError::UnknownLanguage(l1.into()))?;
    let b = set
        .span(l2)
        .ok_or_else(|| MetricsError::UnknownLanguage(l2.into()))?;
    if a.count != b.count {
        return Err(MetricsError::UnequalCounts {
            l1: l1.into(),
            n1: a.count,
            l2: l2.into(),
            n2: b.count,
        });
    }
    Ok((a, b))
}

/// Mean cosine of sentence-aligned pairs `(l1_i, l2_i)`.
pub fn aligned_mean_cosine(set: &EmbeddingSet, l1: &str, l2: &str) -> Result<f64, MetricsError> {
    let (a, b) = aligned_spans(set, l1, l2)?;
    let acc: CompensatedSum = a
        .rows()
        .zip(b.rows())
        .map(|(i, j)| cosine_unchecked(set.row(i), set.row(j)))
        .collect();
    Ok(acc.value() / a.count as f64)
}

/// Cross-lingual similarity index: aligned mean cosine divided by anisotropy.
pub fn gamma(
    set: &EmbeddingSet,
    l1: &str,
    l2: &str,
    aniso: &AnisotropyResult,
) -> Result<f64, MetricsError> {
    if aniso.value == 0.0 {
        return Err(MetricsError::ZeroAnisotropy);
    }
    if l1 == l2 {
        aligned_spans(set, l1, l2)?;
        return Ok(1.0 / aniso.value);
    }
    Ok(aligned_mean_cosine(set, l1, l2)? / aniso.value)
}

/// Full Γ matrix together with the anisotropy it was normalised by.
pub fn gamma_matrix_with(
    set: &EmbeddingSet,
    aniso: &AnisotropyResult,
) -> Result<LabeledMatrix, MetricsError> {
    let codes: Vec<String> = set.codes().map(String::from).collect();
    let l = codes.len();
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|i| (i..l).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| gamma(set, &codes[i], &codes[j], aniso))
        .collect::<Result<_, _>>()?;
    let mut m = vec![0.0; l * l];
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[i * l + j] = v;
        m[j * l + i] = v;
    }
    Ok(LabeledMatrix::from_parts(MatrixKind::Gamma, codes, m))
}

pub fn gamma_matrix(set: &EmbeddingSet) -> Result<(LabeledMatrix, AnisotropyResult), MetricsError> {
    let aniso = anisotropy(set)?;
    Ok((gamma_matrix_with(set, &aniso)?, aniso))
}

/// Label of every row's nearest neighbour (self excluded, exact search,
/// ties to the lowest row index).
pub fn nearest_neighbor_labels<L: Copy>(
    points: &[f32],
    dim: usize,
    labels: &[L],
    metric: NnMetric,
) -> Result<Vec<L>, MetricsError> {
    let n = if dim == 0 { 0 } else { points.len() / dim };
    if n < 2 {
        return Err(MetricsError::TooFewRows(n));
    }
    if labels.len() != n {
        return Err(MetricsError::DimensionMismatch {
            left: labels.len(),
            right: n,
        });
    }
    let nn = nearest_by_class(points, dim, &vec![0; n], 1, metric)?;
    Ok((0..n)
        .map(|r| labels[nn.nearest(r).expect("n >= 2").index])
        .collect())
}

// Rows of class `own` whose nearest neighbour over own ∪ other is in `own`.
fn same_label_count(
    nn: &NearestByClass,
    rows: std::ops::Range<usize>,
    own: usize,
    other: usize,
) -> usize {
    rows.filter(|&r| match (nn.get(r, own), nn.get(r, other)) {
        (Some(a), Some(b)) => !b.beats(&a),
        (Some(_), None) => true,
        _ => false,
    })
    .count()
}

/// Geometric separability index of two languages treated as clusters:
/// the fraction of points in their union whose nearest neighbour carries
/// the same language.
pub fn gsi(set: &EmbeddingSet, l1: &str, l2: &str, metric: NnMetric) -> Result<f64, MetricsError> {
    if l1 == l2 {
        return Err(MetricsError::SameLanguage(l1.into()));
    }
    let a = set
        .span(l1)
        .ok_or_else(|| MetricsError::UnknownLanguage(l1.into()))?;
    let b = set
        .span(l2)
        .ok_or_else(|| MetricsError::UnknownLanguage(l2.into()))?;
    // keep global row order so ties resolve as they would on the full set
    let (first, second) = if a.start_row < b.start_row {
        (a, b)
    } else {
        (b, a)
    };
    let mut data = Vec::with_capacity((first.count + second.count) * set.dim());
    data.extend_from_slice(set.language_data(first));
    data.extend_from_slice(set.language_data(second));
    let mut labels = vec![0u32; first.count];
    labels.resize(first.count + second.count, 1);
    let total = first.count + second.count;
    if total < 2 {
        return Err(MetricsError::TooFewRows(total));
    }
    let nn = nearest_by_class(&data, set.dim(), &labels, 2, metric)?;
    let same = same_label_count(&nn, 0..first.count, 0, 1)
        + same_label_count(&nn, first.count..total, 1, 0);
    Ok(same as f64 / total as f64)
}

/// Pairwise separability for every language pair; diagonal fixed at 1.0.
pub fn phi_matrix(set: &EmbeddingSet, metric: NnMetric) -> Result<LabeledMatrix, MetricsError> {
    let langs = set.languages();
    let l = langs.len();
    if l < 2 {
        return Err(MetricsError::TooFewLanguages(l));
    }
    let nn = nearest_by_class(set.data(), set.dim(), set.labels(), l, metric)?;
    let codes: Vec<String> = set.codes().map(String::from).collect();
    let mut m = vec![0.0; l * l];
    for i in 0..l {
        m[i * l + i] = 1.0;
        for j in i + 1..l {
            let same = same_label_count(&nn, langs[i].rows(), i, j)
                + same_label_count(&nn, langs[j].rows(), j, i);
            let v = same as f64 / (langs[i].count + langs[j].count) as f64;
            m[i * l + j] = v;
            m[j * l + i] = v;
        }
    }
    Ok(LabeledMatrix::from_parts(MatrixKind::Phi, codes, m))
}
