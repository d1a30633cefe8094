//! Association measures between a feature's daily counts and the event series.
//!
//! All five measures are symmetric in their arguments. Pearson, Spearman and
//! Kendall are undefined when either input is constant; that case is reported
//! as [`CorrelationError::ZeroVariance`] and surfaces as an absent score in
//! [`correlate_matrix`]. Distance correlation and mutual information are
//! defined for constant inputs (both return 0).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::ingest::GsrVector;
use crate::matrix::CountMatrix;

pub const DEFAULT_MI_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("series of length {0} is too short; at least 2 values are needed")]
    TooShort(usize),
    #[error("score is undefined for a constant series")]
    ZeroVariance,
    #[error("mutual information needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "pearson")]
    Pearson,
    #[serde(rename = "spearman")]
    Spearman,
    #[serde(rename = "kendall")]
    Kendall,
    #[serde(rename = "dcor")]
    DistanceCorrelation,
    #[serde(rename = "mi")]
    MutualInformation,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Pearson,
        Metric::Spearman,
        Metric::Kendall,
        Metric::DistanceCorrelation,
        Metric::MutualInformation,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::Pearson => "pearson",
            Metric::Spearman => "spearman",
            Metric::Kendall => "kendall",
            Metric::DistanceCorrelation => "dcor",
            Metric::MutualInformation => "mi",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Pearson => "Pearson",
            Metric::Spearman => "Spearman",
            Metric::Kendall => "Kendall Tau",
            Metric::DistanceCorrelation => "Distance correlation",
            Metric::MutualInformation => "Mutual Info",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.id() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown metric {s:?}; expected pearson|spearman|kendall|dcor|mi"
                ))
            })
    }
}

/// A metric together with its estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scorer {
    pub metric: Metric,
    pub mi_bins: usize,
}

impl Scorer {
    pub fn new(metric: Metric) -> Self {
        Scorer {
            metric,
            mi_bins: DEFAULT_MI_BINS,
        }
    }

    pub fn score(&self, x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
        match self.metric {
            Metric::Pearson => pearson(x, y),
            Metric::Spearman => spearman(x, y),
            Metric::Kendall => kendall_tau(x, y),
            Metric::DistanceCorrelation => distance_correlation(x, y),
            Metric::MutualInformation => mutual_information(x, y, self.mi_bins),
        }
    }
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(CorrelationError::ZeroVariance);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing the average of the positions they span.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(x, y)?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

/// Number of pairs inside runs of equal values of an already sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of strictly inverted pairs.
fn sort_counting_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        sort_counting_inversions(left, &mut buf[..mid]) + sort_counting_inversions(right, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tau-b from pair counts: `(nc - nd) / sqrt((n0 - n1)(n0 - n2))`.
pub fn tau_b_from_counts(
    concordant_minus_discordant: i64,
    total_pairs: u64,
    x_tied: u64,
    y_tied: u64,
) -> Result<f64, CorrelationError> {
    let (dx, dy) = (total_pairs - x_tied, total_pairs - y_tied);
    if dx == 0 || dy == 0 {
        return Err(CorrelationError::ZeroVariance);
    }
    let tau = concordant_minus_discordant as f64 / ((dx as f64) * (dy as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(x, y)?;
    let n = x.len() as u64;
    let total = n * (n - 1) / 2;

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let joint: Vec<(f64, f64)> = order.iter().map(|&i| (x[i], y[i])).collect();
    let x_tied = tied_pairs(&xs);
    let joint_tied = tied_pairs(&joint);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; ys.len()];
    let discordant = sort_counting_inversions(&mut ys, &mut buf);
    let y_tied = tied_pairs(&ys);

    let diff = total as i64 - x_tied as i64 - y_tied as i64 + joint_tied as i64 - 2 * discordant as i64;
    tau_b_from_counts(diff, total, x_tied, y_tied)
}

/// Row means and grand mean of the pairwise absolute-difference matrix, from sorted prefix sums.
fn distance_means(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let total: f64 = v.iter().sum();
    let mut row = vec![0.0; n];
    let mut below = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let s = v[i];
        let above = total - below - s;
        let sum = s * k as f64 - below + above - s * (n - k - 1) as f64;
        row[i] = sum / n as f64;
        below += s;
    }
    let grand = row.iter().sum::<f64>() / n as f64;
    (row, grand)
}

fn distance_covariance_sq(x: &[f64], y: &[f64], mx: &(Vec<f64>, f64), my: &(Vec<f64>, f64)) -> f64 {
    let n = x.len() as f64;
    let mut cross = 0.0;
    for i in 0..x.len() {
        let mut acc = 0.0;
        for j in 0..x.len() {
            acc += (x[i] - x[j]).abs() * (y[i] - y[j]).abs();
        }
        cross += acc;
    }
    let rows: f64 = mx.0.iter().zip(&my.0).map(|(a, b)| a * b).sum();
    cross / (n * n) - 2.0 * rows / n + mx.1 * my.1
}

const EXACT_MAX_ABS: f64 = 2_147_483_648.0;
const EXACT_MAX_LEN: usize = 4096;

fn as_exact_ints(v: &[f64]) -> Option<Vec<i64>> {
    v.iter()
        .map(|&a| (a.fract() == 0.0 && a.abs() <= EXACT_MAX_ABS).then_some(a as i64))
        .collect()
}

/// Row sums of the pairwise absolute-difference matrix, from sorted prefix sums.
fn exact_row_sums(v: &[i64]) -> Vec<i128> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| v[i]);
    let total: i128 = v.iter().map(|&a| a as i128).sum();
    let mut rows = vec![0i128; n];
    let mut below = 0i128;
    for (k, &i) in order.iter().enumerate() {
        let s = v[i] as i128;
        let above = total - below - s;
        rows[i] = s * k as i128 - below + above - s * (n - k - 1) as i128;
        below += s;
    }
    rows
}

/// `n^4` times the squared distance covariance, exactly.
fn exact_dcov_scaled(x: &[i64], y: &[i64], rx: &[i128], ry: &[i128]) -> i128 {
    let n = x.len() as i128;
    let mut cross = 0i128;
    for i in 0..x.len() {
        let mut acc = 0i128;
        for j in 0..x.len() {
            acc += ((x[i] - x[j]).abs() as i128) * ((y[i] - y[j]).abs() as i128);
        }
        cross += acc;
    }
    let rows: i128 = rx.iter().zip(ry).map(|(a, b)| a * b).sum();
    let (tx, ty): (i128, i128) = (rx.iter().sum(), ry.iter().sum());
    n * n * cross - 2 * n * rows + tx * ty
}

fn exact_distance_correlation(x: &[i64], y: &[i64]) -> f64 {
    let (rx, ry) = (exact_row_sums(x), exact_row_sums(y));
    let vx = exact_dcov_scaled(x, x, &rx, &rx);
    let vy = exact_dcov_scaled(y, y, &ry, &ry);
    if vx <= 0 || vy <= 0 {
        return 0.0;
    }
    let cxy = exact_dcov_scaled(x, y, &rx, &ry).max(0);
    (cxy as f64 / ((vx as f64) * (vy as f64)).sqrt()).sqrt().clamp(0.0, 1.0)
}

/// Distance correlation with the biased (V-statistic) estimator; 0 if either
/// input has zero distance variance.
///
/// Integer-valued inputs are evaluated in exact integer arithmetic, so scores
/// of independent count series are exactly 0 rather than the square root of a
/// rounding error.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(x, y)?;
    if x.len() <= EXACT_MAX_LEN {
        if let (Some(xi), Some(yi)) = (as_exact_ints(x), as_exact_ints(y)) {
            return Ok(exact_distance_correlation(&xi, &yi));
        }
    }
    let (mx, my) = (distance_means(x), distance_means(y));
    let vx = distance_covariance_sq(x, x, &mx, &mx);
    let vy = distance_covariance_sq(y, y, &my, &my);
    if vx <= 0.0 || vy <= 0.0 || is_constant(x) || is_constant(y) {
        return Ok(0.0);
    }
    let cxy = distance_covariance_sq(x, y, &mx, &my).max(0.0);
    Ok((cxy / (vx * vy).sqrt()).sqrt().clamp(0.0, 1.0))
}

/// Equal-width bin of `v` over `[min, max]`; the maximum falls in the last bin.
pub fn equal_width_bin(v: f64, min: f64, max: f64, bins: usize) -> usize {
    if max <= min {
        return 0;
    }
    let t = ((v - min) / (max - min) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

fn bin_series(v: &[f64], bins: usize) -> Vec<usize> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|&a| equal_width_bin(a, min, max, bins)).collect()
}

/// Plug-in mutual information, in bits, of the equal-width discretizations.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64, CorrelationError> {
    check_lengths(x, y)?;
    if bins < 2 {
        return Err(CorrelationError::TooFewBins(bins));
    }
    let (bx, by) = (bin_series(x, bins), bin_series(y, bins));
    let mut joint = vec![0u64; bins * bins];
    let mut px = vec![0u64; bins];
    let mut py = vec![0u64; bins];
    for (&a, &b) in bx.iter().zip(&by) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let pab = c as f64 / n;
            let (pa, pb) = (px[a] as f64 / n, py[b] as f64 / n);
            mi += pab * (pab / (pa * pb)).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Scores every row of `m` against `gsr`, in row order. Undefined scores are `None`.
pub fn correlate_matrix(m: &CountMatrix, gsr: &GsrVector, scorer: &Scorer) -> Result<Vec<Option<f64>>> {
    if m.n_days() != gsr.len() {
        return Err(Error::LengthMismatch {
            expected: gsr.len(),
            found: m.n_days(),
        });
    }
    let target = gsr.to_f64();
    let rows: Vec<_> = m.iter().collect();
    rows.par_iter()
        .map(|(_, row)| {
            let series = row.to_f64(m.n_days());
            match scorer.score(&series, &target) {
                Ok(v) => Ok(Some(v)),
                Err(CorrelationError::ZeroVariance) => Ok(None),
                Err(e) => Err(Error::from(e)),
            }
        })
        .collect()
}

/// Descending by score with absent scores last; ties keep their relative order.
pub fn compare_scores(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(a), Some(b)) => b.total_cmp(&a),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}
