//! Generalized L2 discrepancy and its sweeps over projections and prefix sizes.
//!
//! `D^2 = (4/3)^d - (2/N) sum_i prod_j (3 - x_ij^2)/2 + (1/N^2) sum_{i,k} prod_j (2 - max(x_ij, x_kj))`
//!
//! Sums are compensated and split into fixed chunks combined in index order,
//! so results do not depend on the number of threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// The formula above, as written into CSV headers.
pub const FORMULA: &str = "sqrt((4/3)^d - (2/N) sum_i prod_j (3 - x_ij^2)/2 + (1/N^2) sum_i sum_k prod_j (2 - max(x_ij, x_kj)))";

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QualityError {
    #[error("empty point set")]
    Empty,
    #[error("dimension {dim} out of range for {s} dimensions")]
    Dimension { dim: usize, s: usize },
    #[error("projections need at least 2 dimensions, found {0}")]
    TooFewDimensions(usize),
    #[error("prefix size {n} exceeds the {len} available points")]
    PrefixTooLarge { n: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyValue {
    pub value: f64,
    pub n: usize,
    pub dims: Vec<usize>,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

fn ordered_sum(parts: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::default();
    for p in parts {
        acc.add(p);
    }
    acc.total()
}

/// Squared discrepancy of `points` restricted to `dims`.
pub fn generalized_l2_squared<P: AsRef<[f64]> + Sync>(points: &[P], dims: &[usize]) -> Result<f64, QualityError> {
    let n = points.len();
    if n == 0 {
        return Err(QualityError::Empty);
    }
    let s = points[0].as_ref().len();
    if let Some(&dim) = dims.iter().find(|&&d| d >= s) {
        return Err(QualityError::Dimension { dim, s });
    }
    // gather the projected coordinates once
    let d = dims.len();
    let x: Vec<f64> = points.iter().flat_map(|p| dims.iter().map(move |&j| p.as_ref()[j])).collect();
    let row = |i: usize| &x[i * d..(i + 1) * d];

    let single = ordered_sum(
        (0..n)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|ids| ordered_sum(ids.iter().map(|&i| row(i).iter().map(|v| (3.0 - v * v) / 2.0).product::<f64>())))
            .collect::<Vec<_>>(),
    );
    // sum over i <= k; off-diagonal pairs count twice
    let pairs = ordered_sum(
        (0..n)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|ids| {
                let mut acc = Compensated::default();
                for &i in ids {
                    let xi = row(i);
                    acc.add(xi.iter().map(|v| 2.0 - v).product::<f64>());
                    let mut off = Compensated::default();
                    for k in i + 1..n {
                        off.add(xi.iter().zip(row(k)).map(|(a, b)| 2.0 - a.max(*b)).product::<f64>());
                    }
                    acc.add(2.0 * off.total());
                }
                acc.total()
            })
            .collect::<Vec<_>>(),
    );
    let nf = n as f64;
    Ok(ordered_sum([(4.0f64 / 3.0).powi(d as i32), -2.0 * single / nf, pairs / (nf * nf)]))
}

/// The discrepancy of `points` restricted to `dims`.
pub fn generalized_l2<P: AsRef<[f64]> + Sync>(points: &[P], dims: &[usize]) -> Result<DiscrepancyValue, QualityError> {
    let sq = generalized_l2_squared(points, dims)?;
    Ok(DiscrepancyValue { value: sq.max(0.0).sqrt(), n: points.len(), dims: dims.to_vec() })
}

/// Statistics of the discrepancy of uniform random sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// `count` sets of `n` uniform points in `d` dimensions, seeded by `(seed, n, d)`.
pub fn random_baseline(n: usize, d: usize, count: usize, seed: u64) -> Result<Baseline, QualityError> {
    if n == 0 || count == 0 {
        return Err(QualityError::Empty);
    }
    let mix = seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (d as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let dims: Vec<usize> = (0..d).collect();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        values.push(generalized_l2(&pts, &dims)?.value);
    }
    let mean = ordered_sum(values.iter().copied()) / count as f64;
    let var = ordered_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (count.max(2) - 1) as f64;
    Ok(Baseline {
        count,
        mean,
        std: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: DiscrepancyValue,
    pub baseline: Option<Baseline>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// One row per unordered pair of dimensions instead of one row over all dimensions.
    pub pairs: bool,
    /// Random sets per row; 0 disables baselines.
    pub baselines: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { pairs: false, baselines: 64, seed: 0 }
    }
}

/// All unordered pairs of `0..s`.
pub fn dimension_pairs(s: usize) -> Vec<Vec<usize>> {
    (0..s).flat_map(|i| (i + 1..s).map(move |j| vec![i, j])).collect()
}

/// Discrepancy of the leading `n` points for each `n` in `sizes`.
pub fn discrepancy_sweep<P: AsRef<[f64]> + Sync>(points: &[P], sizes: &[usize], opts: &SweepOptions) -> Result<Vec<SweepRow>, QualityError> {
    let s = points.first().ok_or(QualityError::Empty)?.as_ref().len();
    let subsets = if opts.pairs {
        if s < 2 {
            return Err(QualityError::TooFewDimensions(s));
        }
        dimension_pairs(s)
    } else {
        vec![(0..s).collect()]
    };
    let mut rows = Vec::new();
    for &n in sizes {
        if n > points.len() {
            return Err(QualityError::PrefixTooLarge { n, len: points.len() });
        }
        let d = subsets[0].len();
        let baseline = if opts.baselines > 0 { Some(random_baseline(n, d, opts.baselines, opts.seed)?) } else { None };
        for dims in &subsets {
            rows.push(SweepRow { value: generalized_l2(&points[..n], dims)?, baseline });
        }
    }
    Ok(rows)
}

/// Pair values of a point set at each prefix size, with the spread over pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSummary {
    pub n: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Every two-dimensional projection at every size in `sizes`.
pub fn projection_sweep<P: AsRef<[f64]> + Sync>(points: &[P], sizes: &[usize], baselines: usize, seed: u64) -> Result<(Vec<SweepRow>, Vec<ProjectionSummary>), QualityError> {
    let rows = discrepancy_sweep(points, sizes, &SweepOptions { pairs: true, baselines, seed })?;
    let summaries = summarize(&rows);
    Ok((rows, summaries))
}

/// Min, median and max of the values at each prefix size, in order of first appearance.
pub fn summarize(rows: &[SweepRow]) -> Vec<ProjectionSummary> {
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(n, _)| *n == r.value.n) {
            Some((_, v)) => v.push(r.value.value),
            None => out.push((r.value.n, vec![r.value.value])),
        }
    }
    out.into_iter()
        .map(|(n, mut v)| {
            v.sort_by(f64::total_cmp);
            let mid = v.len() / 2;
            let median = if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 };
            ProjectionSummary { n, min: v[0], median, max: v[v.len() - 1] }
        })
        .collect()
}

/// CSV with `#` header lines naming the formula and the baseline seed.
pub fn sweep_csv(rows: &[SweepRow], opts: &SweepOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generalized L2 discrepancy: {FORMULA}");
    let _ = writeln!(out, "# baselines: {} uniform random sets per row, seed {}", opts.baselines, opts.seed);
    out.push_str("dims,N,value,baseline_mean,baseline_min,baseline_max\n");
    for r in rows {
        let dims: Vec<String> = r.value.dims.iter().map(ToString::to_string).collect();
        let _ = write!(out, "{},{},{:.12e}", dims.join(" "), r.value.n, r.value.value);
        match r.baseline {
            Some(b) => {
                let _ = writeln!(out, ",{:.12e},{:.12e},{:.12e}", b.mean, b.min, b.max);
            }
            None => out.push_str(",,,\n"),
        }
    }
    out
}
