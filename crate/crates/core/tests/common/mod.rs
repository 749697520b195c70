//! Data generators and brute-force oracles shared by the integration tests.
//! The oracles deliberately avoid the library's engine code paths.
#![allow(dead_code)]

use embgeom::io::contiguous_spans;
use embgeom::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const XNLI_CODES: [&str; 15] = [
    "ar", "bg", "de", "el", "en", "es", "fr", "hi", "ru", "sw", "th", "tr", "ur", "vi", "zh",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f32> {
    (0..n * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

/// Parallel corpus: each sentence has a shared meaning vector, each
/// language a shared offset, plus per-row noise. Rows are never zero.
pub fn parallel_set(seed: u64, n_langs: usize, n_sent: usize, dim: usize) -> EmbeddingSet {
    let mut r = rng(seed);
    let meaning = uniform_rows(&mut r, n_sent, dim);
    let offsets = uniform_rows(&mut r, n_langs, dim);
    let mut data = Vec::with_capacity(n_langs * n_sent * dim);
    for l in 0..n_langs {
        for i in 0..n_sent {
            for k in 0..dim {
                let noise: f32 = r.gen_range(-0.5..0.5);
                data.push(meaning[i * dim + k] + 1.5 * offsets[l * dim + k] + noise + 0.3);
            }
        }
    }
    let codes: Vec<(String, usize)> = (0..n_langs)
        .map(|l| {
            let code = XNLI_CODES
                .get(l)
                .map(|c| c.to_string())
                .unwrap_or_else(|| format!("l{l}"));
            (code, n_sent)
        })
        .collect();
    EmbeddingSet::new(dim, data, contiguous_spans(&codes)).unwrap()
}

pub fn naive_cosine(u: &[f32], v: &[f32]) -> f64 {
    let mut uv = 0.0f64;
    let mut uu = 0.0f64;
    let mut vv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// |mean cosine| over every unordered pair, plain double loop.
pub fn naive_anisotropy(set: &EmbeddingSet) -> f64 {
    let n = set.count();
    let mut total = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            total += naive_cosine(set.row(i), set.row(j));
        }
    }
    (total / (n * (n - 1) / 2) as f64).abs()
}

pub fn naive_sq_euclidean(u: &[f32], v: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        let d = a as f64 - b as f64;
        s += d * d;
    }
    s
}

/// Same-label fraction over rows of `l1` and `l2`, scanning all pairs.
pub fn naive_gsi(set: &EmbeddingSet, l1: &str, l2: &str, cosine: bool) -> f64 {
    let a = set.span(l1).unwrap();
    let b = set.span(l2).unwrap();
    let mut rows: Vec<usize> = a.rows().chain(b.rows()).collect();
    rows.sort_unstable();
    let label = |r: usize| if a.rows().contains(&r) { 0 } else { 1 };
    let dist = |i: usize, j: usize| {
        if cosine {
            1.0 - naive_cosine(set.row(i), set.row(j))
        } else {
            naive_sq_euclidean(set.row(i), set.row(j))
        }
    };
    let mut same = 0usize;
    for &i in &rows {
        let mut best: Option<(f64, usize)> = None;
        for &j in &rows {
            if i == j {
                continue;
            }
            let d = dist(i, j);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if label(best.unwrap().1) == label(i) {
            same += 1;
        }
    }
    same as f64 / rows.len() as f64
}

pub fn with_data(set: &EmbeddingSet, data: Vec<f32>) -> EmbeddingSet {
    EmbeddingSet::new(set.dim(), data, set.languages().to_vec()).unwrap()
}
