//! Principal component analysis of a language group.
//!
//! The sample covariance (divided by `N - 1`) is reduced to tridiagonal form
//! with Householder reflections and diagonalised with the implicit QL method.
//! Components follow a fixed sign convention: the entry of largest magnitude
//! is positive, ties going to the lowest index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::EmbeddingSet;
use crate::sum::CompensatedSum;

/// Total QL sweeps allowed before giving up.
pub const MAX_ITERATIONS: usize = 10_000;
/// Largest acceptable `|C v - λ v|` relative to the leading eigenvalue.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("k = {k} outside 1..={max}")]
    ComponentsOutOfRange { k: usize, max: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("eigensolver did not converge ({0})")]
    NonConvergence(String),
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
    #[error("language {0:?} requested twice")]
    DuplicateLanguage(String),
    #[error("no languages requested")]
    EmptyGroup,
}

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, PcaError> {
        if data.len() != rows * cols {
            return Err(PcaError::DimensionMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self, PcaError> {
        Self::new(rows, cols, data.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

/// Subtracts the column means; returns the centered matrix and the means.
pub fn mean_center(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut acc = vec![CompensatedSum::new(); m.cols];
    for i in 0..m.rows {
        for (a, &x) in acc.iter_mut().zip(m.row(i)) {
            a.add(x);
        }
    }
    let n = m.rows.max(1) as f64;
    let mean: Vec<f64> = acc.iter().map(|a| a.value() / n).collect();
    let mut out = m.clone();
    for row in out.data.chunks_exact_mut(m.cols.max(1)) {
        for (x, mu) in row.iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    (out, mean)
}

/// Leading principal directions of centered data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// k x d, one unit vector per row.
    pub vectors: Matrix,
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub total_variance: f64,
}

impl Components {
    pub fn k(&self) -> usize {
        self.vectors.rows
    }
}

fn covariance(centered: &Matrix) -> Matrix {
    let (n, d) = (centered.rows, centered.cols);
    let mut c = vec![0.0; d * d];
    // SAFETY: a = centeredᵀ (d x n) read through swapped strides, b =
    // centered (n x d), c is d x d row-major.
    unsafe {
        matrixmultiply::dgemm(
            d,
            n,
            d,
            1.0 / (n as f64 - 1.0),
            centered.data.as_ptr(),
            1,
            d as isize,
            centered.data.as_ptr(),
            d as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            d as isize,
            1,
        );
    }
    for i in 0..d {
        for j in i + 1..d {
            let v = 0.5 * (c[i * d + j] + c[j * d + i]);
            c[i * d + j] = v;
            c[j * d + i] = v;
        }
    }
    Matrix {
        rows: d,
        cols: d,
        data: c,
    }
}

/// Householder reduction of symmetric `v` (row-major, n x n) to tridiagonal
/// form. On return `v` holds the orthogonal transform, `d` the diagonal and
/// `e` the sub-diagonal in `e[1..]`.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`; `z` is column-major so each
/// eigenvector is contiguous. Eigenvalues come back ascending.
fn tridiagonal_ql(n: usize, d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<(), PcaError> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let mut iterations = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > MAX_ITERATIONS {
                    return Err(PcaError::NonConvergence(format!(
                        "more than {MAX_ITERATIONS} QL iterations"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zi1 = &mut right[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// All eigenpairs of a symmetric matrix, eigenvalues descending. Row `i` of
/// the returned matrix is the eigenvector of `values[i]`.
pub fn symmetric_eigen(c: &Matrix) -> Result<(Vec<f64>, Matrix), PcaError> {
    let n = c.rows;
    if c.cols != n {
        return Err(PcaError::DimensionMismatch {
            left: c.rows,
            right: c.cols,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let mut v = c.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    // transpose so eigenvectors are contiguous during QL rotations
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            z[j * n + i] = v[i * n + j];
        }
    }
    tridiagonal_ql(n, &mut d, &mut e, &mut z)?;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among equal eigenvalues
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&z[i * n..(i + 1) * n]);
    }
    Ok((values, Matrix::new(n, n, vectors)?))
}

fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Top `k` principal components of mean-centered data.
pub fn top_components(centered: &Matrix, k: usize) -> Result<Components, PcaError> {
    let (n, d) = (centered.rows, centered.cols);
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let max = (n - 1).min(d);
    if k == 0 || k > max {
        return Err(PcaError::ComponentsOutOfRange { k, max });
    }
    let cov = covariance(centered);
    let total: f64 = (0..d)
        .map(|i| cov.get(i, i))
        .collect::<CompensatedSum>()
        .value();
    if total <= 0.0 {
        let mut vectors = Matrix::zeros(k, d);
        for i in 0..k {
            vectors.data[i * d + i] = 1.0;
        }
        return Ok(Components {
            vectors,
            eigenvalues: vec![0.0; k],
            explained_ratio: vec![0.0; k],
            total_variance: 0.0,
        });
    }

    let (values, vectors) = symmetric_eigen(&cov)?;
    let lead = values[0].abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(k * d);
    let mut eigenvalues = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = vectors.row(i).to_vec();
        apply_sign_convention(&mut v);
        let residual = (0..d)
            .map(|r| {
                let cv: f64 = cov.row(r).iter().zip(&v).map(|(a, b)| a * b).sum();
                (cv - values[i] * v[r]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        if residual > RESIDUAL_TOLERANCE * lead {
            return Err(PcaError::NonConvergence(format!(
                "residual {residual:e} for component {i}"
            )));
        }
        out.extend_from_slice(&v);
        eigenvalues.push(values[i].max(0.0));
    }
    let explained_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(Components {
        vectors: Matrix::new(k, d, out)?,
        eigenvalues,
        explained_ratio,
        total_variance: total,
    })
}

/// Coordinates of centered rows on the component axes (N x k).
pub fn project(centered: &Matrix, components: &Matrix) -> Result<Matrix, PcaError> {
    if centered.cols != components.cols {
        return Err(PcaError::DimensionMismatch {
            left: centered.cols,
            right: components.cols,
        });
    }
    let k = components.rows;
    let mut data = Vec::with_capacity(centered.rows * k);
    for i in 0..centered.rows {
        let row = centered.row(i);
        for c in 0..k {
            data.push(
                row.iter()
                    .zip(components.row(c))
                    .fold(0.0, |acc, (a, b)| acc + a * b),
            );
        }
    }
    Matrix::new(centered.rows, k, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub components: Components,
    /// N x k projected coordinates.
    pub coordinates: Matrix,
    pub row_labels: Vec<String>,
    /// Position of each row within its language span.
    pub sentence_index: Vec<usize>,
}

/// Fits PCA on the union of the requested languages' rows, in the order the
/// codes are given.
pub fn pca_group(set: &EmbeddingSet, codes: &[&str], k: usize) -> Result<PcaResult, PcaError> {
    if codes.is_empty() {
        return Err(PcaError::EmptyGroup);
    }
    let mut spans = Vec::with_capacity(codes.len());
    for (i, code) in codes.iter().enumerate() {
        if codes[..i].contains(code) {
            return Err(PcaError::DuplicateLanguage(code.to_string()));
        }
        spans.push(
            set.span(code)
                .ok_or_else(|| PcaError::UnknownLanguage(code.to_string()))?,
        );
    }
    let n: usize = spans.iter().map(|s| s.count).sum();
    let mut data = Vec::with_capacity(n * set.dim());
    let mut row_labels = Vec::with_capacity(n);
    let mut sentence_index = Vec::with_capacity(n);
    for span in &spans {
        data.extend(set.language_data(span).iter().map(|&x| f64::from(x)));
        row_labels.extend(std::iter::repeat_n(span.code.clone(), span.count));
        sentence_index.extend(0..span.count);
    }
    let x = Matrix::new(n, set.dim(), data)?;
    let (centered, _) = mean_center(&x);
    let components = top_components(&centered, k)?;
    let coordinates = project(&centered, &components.vectors)?;
    Ok(PcaResult {
        components,
        coordinates,
        row_labels,
        sentence_index,
    })
}
