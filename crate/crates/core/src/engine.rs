//! Blocked pairwise engine shared by the metrics.
//!
//! Rows are cut into fixed blocks of [`BLOCK_ROWS`]. Work is scheduled per
//! block pair on the current rayon pool and every partial result is stored
//! by block index, so the final reduction order never depends on the number
//! of workers.

use std::ops::Range;

use rayon::prelude::*;

use crate::sum::CompensatedSum;

pub const BLOCK_ROWS: usize = 256;

/// Environment variable read by the CLI for the worker count.
pub const THREADS_ENV: &str = "EMBGEOM_THREADS";

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

pub(crate) fn blocks(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(BLOCK_ROWS))
        .map(|b| b * BLOCK_ROWS..((b + 1) * BLOCK_ROWS).min(n))
        .collect()
}

/// Upper-triangular block pairs `(i, j)` with `i <= j`, row-major.
pub(crate) fn block_pairs(n_blocks: usize) -> Vec<(usize, usize)> {
    (0..n_blocks)
        .flat_map(|i| (i..n_blocks).map(move |j| (i, j)))
        .collect()
}

/// Sequential f64 dot product of two f32 rows.
#[inline]
pub(crate) fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .fold(0.0, |acc, (&a, &b)| acc + f64::from(a) * f64::from(b))
}

#[inline]
pub(crate) fn squared_norm(u: &[f32]) -> f64 {
    dot(u, u)
}

/// `out = a * b^T` for row-major `a` (m x k) and `b` (n x k).
pub(crate) fn gram_f64(a: &[f64], b: &[f64], k: usize, out: &mut [f64]) {
    let m = a.len() / k;
    let n = b.len() / k;
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: the slices hold m*k, n*k and m*n elements and the strides
    // describe row-major a, transposed row-major b and row-major out.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// f32 variant of [`gram_f64`].
pub(crate) fn gram_f32(a: &[f32], b: &[f32], k: usize, out: &mut [f32]) {
    let m = a.len() / k;
    let n = b.len() / k;
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: same layout argument as gram_f64.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Compensated sum of `cosine(x_i, x_j)` over all pairs `i < j`,
/// each cosine clamped to `[-1, 1]`.
///
/// Dot products come from the raw rows and norms from the Gram diagonal,
/// so identical rows give a cosine of exactly 1 and scaling a row by a
/// power of two changes nothing.
pub(crate) fn pairwise_cosine_sum(data: &[f32], dim: usize) -> CompensatedSum {
    let rows: Vec<f64> = data.iter().map(|&x| f64::from(x)).collect();
    let ranges = blocks(data.len() / dim);
    let norms: Vec<f64> = ranges
        .par_iter()
        .flat_map_iter(|r| {
            let a = &rows[r.start * dim..r.end * dim];
            let n = r.len();
            let mut g = vec![0.0; n * n];
            gram_f64(a, a, dim, &mut g);
            (0..n).map(move |i| g[i * n + i])
        })
        .collect();
    let partials: Vec<CompensatedSum> = block_pairs(ranges.len())
        .into_par_iter()
        .map(|(bi, bj)| {
            let (ri, rj) = (&ranges[bi], &ranges[bj]);
            let a = &rows[ri.start * dim..ri.end * dim];
            let b = &rows[rj.start * dim..rj.end * dim];
            let n = rj.len();
            let mut g = vec![0.0; ri.len() * n];
            gram_f64(a, b, dim, &mut g);
            let mut acc = CompensatedSum::new();
            for (qi, row) in g.chunks_exact(n).enumerate() {
                let ni = norms[ri.start + qi];
                let first = if bi == bj { qi + 1 } else { 0 };
                for (c, &dot) in row.iter().enumerate().skip(first) {
                    let den = (ni * norms[rj.start + c]).sqrt();
                    acc.add((dot / den).clamp(-1.0, 1.0));
                }
            }
            acc
        })
        .collect();
    let mut total = CompensatedSum::new();
    for p in &partials {
        total.merge(p);
    }
    total
}
