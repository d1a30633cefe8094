//! The sparse feature/day count matrix.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::correlation::{compare_scores, correlate_matrix, Scorer};
use crate::error::{Error, Result};
use crate::ingest::{DayIndex, GsrVector};
use crate::linalg::Matrix;
use crate::text::FeatureId;

pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_TOP_K: usize = 10_000;

/// Non-zero daily counts of one feature, sorted by day.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseRow {
    entries: Vec<(u32, u64)>,
}

impl SparseRow {
    pub fn from_dense(counts: &[u64]) -> Self {
        SparseRow {
            entries: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(d, &c)| (d as u32, c))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, u64)] {
        &self.entries
    }

    pub fn dense(&self, n_days: usize) -> Vec<u64> {
        let mut out = vec![0; n_days];
        for &(d, c) in &self.entries {
            out[d as usize] = c;
        }
        out
    }

    pub fn to_f64(&self, n_days: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_days];
        for &(d, c) in &self.entries {
            out[d as usize] = c as f64;
        }
        out
    }

    pub fn max(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Elementwise sum.
    pub fn add(&self, other: &SparseRow) -> SparseRow {
        let mut merged: BTreeMap<u32, u64> = self.entries.iter().copied().collect();
        for &(d, c) in &other.entries {
            *merged.entry(d).or_default() += c;
        }
        SparseRow {
            entries: merged.into_iter().collect(),
        }
    }
}

/// Feature rows over `n_days` days, ordered by [`FeatureId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n_days: usize,
    rows: BTreeMap<FeatureId, SparseRow>,
}

impl CountMatrix {
    pub fn new(n_days: usize) -> Self {
        CountMatrix {
            n_days,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_dense_rows<I>(n_days: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FeatureId, Vec<u64>)>,
    {
        let mut m = CountMatrix::new(n_days);
        for (id, counts) in rows {
            m.insert_dense(id, &counts)?;
        }
        Ok(m)
    }

    pub fn insert_dense(&mut self, id: FeatureId, counts: &[u64]) -> Result<()> {
        if counts.len() != self.n_days {
            return Err(Error::LengthMismatch {
                expected: self.n_days,
                found: counts.len(),
            });
        }
        self.rows.insert(id, SparseRow::from_dense(counts));
        Ok(())
    }

    pub fn insert(&mut self, id: FeatureId, row: SparseRow) -> Result<()> {
        if let Some(&(d, _)) = row.entries.last() {
            if d as usize >= self.n_days {
                return Err(Error::InvalidArgument(format!("day {d} outside {} days", self.n_days)));
            }
        }
        self.rows.insert(id, row);
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &FeatureId) -> Option<&SparseRow> {
        self.rows.get(id)
    }

    pub fn contains(&self, id: &FeatureId) -> bool {
        self.rows.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &SparseRow)> {
        self.rows.iter()
    }

    pub fn feature_ids(&self) -> Vec<FeatureId> {
        self.rows.keys().cloned().collect()
    }

    pub fn total_mass(&self) -> u64 {
        self.rows.values().map(SparseRow::total).sum()
    }

    /// Keeps only the listed features (unknown ids are ignored).
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a FeatureId>) -> CountMatrix {
        let rows = ids
            .into_iter()
            .filter_map(|id| self.rows.get(id).map(|r| (id.clone(), r.clone())))
            .collect();
        CountMatrix {
            n_days: self.n_days,
            rows,
        }
    }

    /// Dense real matrix in row order, with the feature order it uses.
    pub fn to_dense(&self) -> (Vec<FeatureId>, Matrix) {
        let mut m = Matrix::zeros(self.rows.len(), self.n_days);
        for (i, row) in self.rows.values().enumerate() {
            for &(d, c) in &row.entries {
                m[(i, d as usize)] = c as f64;
            }
        }
        (self.feature_ids(), m)
    }

    /// Writes `feature-id<TAB>c1,c2,...` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, row) in &self.rows {
            let dense = row.dense(self.n_days);
            let counts: Vec<String> = dense.iter().map(u64::to_string).collect();
            writeln!(w, "{id}\t{}", counts.join(","))?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R, n_days: usize) -> Result<CountMatrix> {
        let mut m = CountMatrix::new(n_days);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("matrix checkpoint: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, counts) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("matrix line {}: missing tab", i + 1)))?;
            let id: FeatureId = id.parse()?;
            let counts = counts
                .split(',')
                .map(|c| c.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("matrix line {}: {e}", i + 1)))?;
            if m.contains(&id) {
                return Err(Error::Parse(format!("matrix line {}: duplicate feature {id}", i + 1)));
            }
            m.insert_dense(id, &counts)?;
        }
        Ok(m)
    }
}

/// Per-day feature counter. Partial accumulators can be merged by addition.
#[derive(Debug, Clone)]
pub struct Accumulator {
    n_days: usize,
    counts: HashMap<FeatureId, HashMap<u32, u64>>,
}

impl Accumulator {
    pub fn new(n_days: usize) -> Self {
        Accumulator {
            n_days,
            counts: HashMap::new(),
        }
    }

    pub fn add<I: IntoIterator<Item = FeatureId>>(&mut self, day: DayIndex, features: I) -> Result<()> {
        if day.index() >= self.n_days {
            return Err(Error::InvalidArgument(format!(
                "day {} outside a {}-day timeframe",
                day.0, self.n_days
            )));
        }
        for f in features {
            *self.counts.entry(f).or_default().entry(day.0).or_default() += 1;
        }
        Ok(())
    }

    pub fn merge(mut self, other: Accumulator) -> Result<Self> {
        if self.n_days != other.n_days {
            return Err(Error::LengthMismatch {
                expected: self.n_days,
                found: other.n_days,
            });
        }
        for (f, days) in other.counts {
            let slot = self.counts.entry(f).or_default();
            for (d, c) in days {
                *slot.entry(d).or_default() += c;
            }
        }
        Ok(self)
    }

    pub fn finish(self) -> CountMatrix {
        let rows = self
            .counts
            .into_iter()
            .map(|(f, days)| {
                let mut entries: Vec<(u32, u64)> = days.into_iter().filter(|&(_, c)| c > 0).collect();
                entries.sort_unstable();
                (f, SparseRow { entries })
            })
            .collect();
        CountMatrix {
            n_days: self.n_days,
            rows,
        }
    }
}

/// Sums feature multiplicities per day.
pub fn accumulate<I, F>(n_days: usize, stream: I) -> Result<CountMatrix>
where
    I: IntoIterator<Item = (DayIndex, F)>,
    F: IntoIterator<Item = FeatureId>,
{
    let mut acc = Accumulator::new(n_days);
    for (day, features) in stream {
        acc.add(day, features)?;
    }
    Ok(acc.finish())
}

/// Keeps features whose count reaches `threshold` on at least one day.
pub fn filter_min_count(m: &CountMatrix, threshold: u64) -> CountMatrix {
    CountMatrix {
        n_days: m.n_days,
        rows: m
            .rows
            .iter()
            .filter(|(_, row)| !row.is_zero() && row.max() >= threshold)
            .map(|(id, row)| (id.clone(), row.clone()))
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub matrix: CountMatrix,
    /// Selected features, best first.
    pub ranked: Vec<(FeatureId, Option<f64>)>,
    /// Every scored feature, best first.
    pub all_scores: Vec<(FeatureId, Option<f64>)>,
}

/// Ranks all features by their score against the GSR and keeps the best `k`.
///
/// Undefined scores rank below every real score. Equal scores are ordered by
/// feature id. With `absolute`, rows are ranked by the magnitude of the score.
pub fn select_top_k(
    m: &CountMatrix,
    gsr: &GsrVector,
    scorer: &Scorer,
    k: usize,
    absolute: bool,
) -> Result<Selection> {
    if k == 0 {
        return Err(Error::InvalidArgument("top-k needs k >= 1".into()));
    }
    let scores = correlate_matrix(m, gsr, scorer)?;
    let mut all: Vec<(FeatureId, Option<f64>)> = m.rows.keys().cloned().zip(scores).collect();
    let key = |s: Option<f64>| if absolute { s.map(f64::abs) } else { s };
    all.sort_by(|(fa, a), (fb, b)| match compare_scores(key(*a), key(*b)) {
        Ordering::Equal => fa.cmp(fb),
        o => o,
    });
    let ranked: Vec<_> = all.iter().take(k).cloned().collect();
    let matrix = m.restrict(ranked.iter().map(|(id, _)| id));
    Ok(Selection {
        matrix,
        ranked,
        all_scores: all,
    })
}
