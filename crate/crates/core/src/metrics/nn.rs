//! Exact nearest-neighbour search, per label class.
//!
//! Candidates are screened with an f32 Gram matrix computed block by block.
//! Each screened distance carries a rigorous rounding bracket `[lo, hi]`
//! around the exact f64 kernel value; a target survives while its `lo` does
//! not exceed the smallest `hi` seen so far. Survivors are rescored with the
//! sequential f64 kernel and the minimum wins, ties going to the lowest row
//! index. The surviving set is `{t : lo(t) <= min hi}` whatever the visiting
//! order, so the answer is identical to a plain double loop over the f64
//! kernel and does not depend on scheduling.

use std::sync::Mutex;

use rayon::prelude::*;

use super::{cosine_unchecked, MetricsError, NnMetric};
use crate::engine::{block_pairs, blocks, gram_f32, squared_norm};

/// Nearest row found for a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    /// `true` if `self` beats `other` under (distance, index) order.
    #[inline]
    pub fn beats(&self, other: &Neighbor) -> bool {
        self.distance < other.distance
            || (self.distance == other.distance && self.index < other.index)
    }

    pub(crate) fn better(a: Option<Neighbor>, b: Option<Neighbor>) -> Option<Neighbor> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.beats(&x) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

/// Exact kernel value for two rows.
#[inline]
pub fn distance(metric: NnMetric, u: &[f32], v: &[f32]) -> f64 {
    match metric {
        NnMetric::Euclidean => u.iter().zip(v).fold(0.0, |acc, (&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            acc + d * d
        }),
        NnMetric::CosineDistance => 1.0 - cosine_unchecked(u, v),
    }
}

// Squared norms above this would let f32 products overflow in the screen.
const MAX_SQUARED_NORM: f64 = 1e36;

/// Screening inputs: the rows fed to the f32 Gram, their squared norms and
/// the bracket coefficients with `|screen - scale * exact| <= rel * (nq + nt) + abs`,
/// where `scale` is 1 for euclidean and 2 for cosine distance.
struct Screen {
    rows: Vec<f32>,
    norms: Vec<f64>,
    rel: f64,
    abs: f64,
}

impl Screen {
    fn new(data: &[f32], dim: usize, metric: NnMetric) -> Result<Self, MetricsError> {
        let u32_ = f64::from(f32::EPSILON) / 2.0;
        let u64_ = f64::EPSILON / 2.0;
        let d = dim as f64;
        // f32 dot product bound: gamma_d * sum |q_k t_k|
        let gamma = (d + 2.0) * u32_ / (1.0 - (d + 2.0) * u32_);
        let norms_raw: Vec<f64> = data.chunks_exact(dim).map(squared_norm).collect();
        match metric {
            NnMetric::Euclidean => {
                if norms_raw.iter().any(|&n| n > MAX_SQUARED_NORM) {
                    return Err(MetricsError::MagnitudeOutOfRange);
                }
                Ok(Self {
                    rows: data.to_vec(),
                    norms: norms_raw,
                    // f32 gram error plus the f64 kernel's own error, doubled
                    rel: 2.0 * (gamma + (2.0 * d + 16.0) * u64_),
                    abs: 4.0 * d * f64::from(f32::MIN_POSITIVE),
                })
            }
            NnMetric::CosineDistance => {
                if norms_raw.contains(&0.0) {
                    return Err(MetricsError::ZeroNorm);
                }
                let mut rows = Vec::with_capacity(data.len());
                for (row, n) in data.chunks_exact(dim).zip(&norms_raw) {
                    let norm = n.sqrt();
                    rows.extend(row.iter().map(|&x| (f64::from(x) / norm) as f32));
                }
                // screen is 2 - 2g against 2 * (1 - cos); rounding the unit
                // rows to f32 adds about 2u to g
                let g_err = gamma * 1.01 + 4.0 * u32_ + (d + 8.0) * u64_;
                Ok(Self {
                    rows,
                    norms: vec![1.0; data.len() / dim],
                    rel: 2.0 * g_err,
                    abs: 4.0 * d * f64::from(f32::MIN_POSITIVE),
                })
            }
        }
    }
}

#[derive(Clone)]
struct Slot {
    upper: f64,
    cands: Vec<(f64, u32)>,
}

impl Slot {
    fn empty() -> Self {
        Self {
            upper: f64::INFINITY,
            cands: Vec::new(),
        }
    }

    #[inline]
    fn offer(&mut self, lo: f64, hi: f64, index: u32) {
        if lo <= self.upper {
            self.cands.push((lo, index));
            if hi < self.upper {
                self.upper = hi;
                if self.cands.len() > 32 {
                    let upper = self.upper;
                    self.cands.retain(|&(l, _)| l <= upper);
                }
            }
        }
    }
}

/// Nearest neighbour of every row within every label class, self excluded.
#[derive(Debug, Clone)]
pub struct NearestByClass {
    n_classes: usize,
    best: Vec<Option<Neighbor>>,
}

impl NearestByClass {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_rows(&self) -> usize {
        self.best.len() / self.n_classes.max(1)
    }

    /// Nearest row of class `class` to `row`, if that class has any row
    /// other than `row` itself.
    pub fn get(&self, row: usize, class: usize) -> Option<Neighbor> {
        self.best[row * self.n_classes + class]
    }

    /// Overall nearest neighbour of `row` across all classes.
    pub fn nearest(&self, row: usize) -> Option<Neighbor> {
        self.best[row * self.n_classes..(row + 1) * self.n_classes]
            .iter()
            .fold(None, |acc, n| Neighbor::better(acc, *n))
    }
}

/// Computes [`NearestByClass`] for row-major `data` with `labels[i] < n_classes`.
pub fn nearest_by_class(
    data: &[f32],
    dim: usize,
    labels: &[u32],
    n_classes: usize,
    metric: NnMetric,
) -> Result<NearestByClass, MetricsError> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(MetricsError::DimensionMismatch {
            left: data.len(),
            right: dim,
        });
    }
    let n = data.len() / dim;
    if labels.len() != n {
        return Err(MetricsError::DimensionMismatch {
            left: labels.len(),
            right: n,
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
        return Err(MetricsError::LabelOutOfRange {
            label: bad as usize,
            n_classes,
        });
    }
    let screen = Screen::new(data, dim, metric)?;
    let ranges = blocks(n);
    let states: Vec<Mutex<Vec<Slot>>> = ranges
        .iter()
        .map(|r| Mutex::new(vec![Slot::empty(); r.len() * n_classes]))
        .collect();

    block_pairs(ranges.len())
        .into_par_iter()
        .for_each(|(bi, bj)| {
            let (ri, rj) = (&ranges[bi], &ranges[bj]);
            let a = &screen.rows[ri.start * dim..ri.end * dim];
            let b = &screen.rows[rj.start * dim..rj.end * dim];
            let cols = rj.len();
            let mut g = vec![0.0f32; ri.len() * cols];
            gram_f32(a, b, dim, &mut g);

            let bracket = |q: usize, t: usize, gv: f32| {
                let nsum = screen.norms[q] + screen.norms[t];
                let approx = nsum - 2.0 * f64::from(gv);
                let e = screen.rel * nsum + screen.abs;
                (approx - e, approx + e)
            };

            {
                let mut slots = states[bi].lock().unwrap();
                for (qi, grow) in g.chunks_exact(cols).enumerate() {
                    let q = ri.start + qi;
                    let base = qi * n_classes;
                    for (ti, &gv) in grow.iter().enumerate() {
                        let t = rj.start + ti;
                        if t == q {
                            continue;
                        }
                        let (lo, hi) = bracket(q, t, gv);
                        slots[base + labels[t] as usize].offer(lo, hi, t as u32);
                    }
                }
            }
            if bi != bj {
                let mut slots = states[bj].lock().unwrap();
                for ti in 0..cols {
                    let t = rj.start + ti;
                    let base = ti * n_classes;
                    for qi in 0..ri.len() {
                        let q = ri.start + qi;
                        let (lo, hi) = bracket(t, q, g[qi * cols + ti]);
                        slots[base + labels[q] as usize].offer(lo, hi, q as u32);
                    }
                }
            }
        });

    let best: Vec<Option<Neighbor>> = ranges
        .par_iter()
        .zip(states.into_par_iter())
        .flat_map_iter(|(range, state)| {
            let slots = state.into_inner().unwrap();
            let start = range.start;
            slots.into_iter().enumerate().map(move |(si, slot)| {
                let q = start + si / n_classes;
                let qrow = &data[q * dim..(q + 1) * dim];
                slot.cands
                    .iter()
                    .filter(|&&(lo, _)| lo <= slot.upper)
                    .fold(None, |acc, &(_, t)| {
                        let t = t as usize;
                        let cand = Neighbor {
                            index: t,
                            distance: distance(metric, qrow, &data[t * dim..(t + 1) * dim]),
                        };
                        Neighbor::better(acc, Some(cand))
                    })
            })
        })
        .collect();
    Ok(NearestByClass { n_classes, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(data: &[f32], dim: usize, metric: NnMetric) -> Vec<usize> {
        let n = data.len() / dim;
        (0..n)
            .map(|i| {
                let mut best: Option<Neighbor> = None;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let c = Neighbor {
                        index: j,
                        distance: distance(
                            metric,
                            &data[i * dim..][..dim],
                            &data[j * dim..][..dim],
                        ),
                    };
                    best = Neighbor::better(best, Some(c));
                }
                best.unwrap().index
            })
            .collect()
    }

    #[test]
    fn one_dimensional_hand_table() {
        let data = [0.0f32, 10.0, 11.0];
        let nn = nearest_by_class(&data, 1, &[0, 0, 0], 1, NnMetric::Euclidean).unwrap();
        let idx: Vec<_> = (0..3).map(|r| nn.nearest(r).unwrap().index).collect();
        assert_eq!(idx, vec![1, 2, 1]);
        assert_eq!(nn.nearest(0).unwrap().distance, 100.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // row 1 sits exactly between rows 0 and 2
        let data = [0.0f32, 10.0, 20.0];
        let nn = nearest_by_class(&data, 1, &[0, 0, 0], 1, NnMetric::Euclidean).unwrap();
        assert_eq!(nn.nearest(1).unwrap().index, 0);
    }

    #[test]
    fn duplicates_find_each_other() {
        let data = [1.0f32, 2.0, 1.0, 2.0, 9.0, 9.0];
        let nn = nearest_by_class(&data, 2, &[0, 0, 0], 1, NnMetric::Euclidean).unwrap();
        assert_eq!(nn.nearest(0).unwrap().index, 1);
        assert_eq!(nn.nearest(1).unwrap().index, 0);
        assert_eq!(nn.nearest(0).unwrap().distance, 0.0);
    }

    #[test]
    fn per_class_results_and_singletons() {
        let data = [0.0f32, 1.0, 5.0];
        let nn = nearest_by_class(&data, 1, &[0, 1, 1], 2, NnMetric::Euclidean).unwrap();
        assert_eq!(nn.get(0, 0), None);
        assert_eq!(nn.get(0, 1).unwrap().index, 1);
        assert_eq!(nn.get(1, 1).unwrap().index, 2);
        assert_eq!(nn.get(1, 0).unwrap().index, 0);
    }

    #[test]
    fn matches_brute_force_across_blocks() {
        // deterministic pseudo-random rows, enough to span several blocks
        let dim = 7;
        let n = 700;
        let mut state = 0x9e3779b97f4a7c15u64;
        let data: Vec<f32> = (0..n * dim)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 40) as f32 / (1u64 << 24) as f32 - 0.5
            })
            .collect();
        for metric in [NnMetric::Euclidean, NnMetric::CosineDistance] {
            let nn = nearest_by_class(&data, dim, &vec![0; n], 1, metric).unwrap();
            let got: Vec<_> = (0..n).map(|r| nn.nearest(r).unwrap().index).collect();
            assert_eq!(got, brute(&data, dim, metric), "{metric:?}");
        }
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(matches!(
            nearest_by_class(&[0.0, 1.0], 1, &[0, 3], 2, NnMetric::Euclidean),
            Err(MetricsError::LabelOutOfRange { label: 3, .. })
        ));
    }
}
