use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::correlation::{compare_scores, CorrelationError, Scorer};
use crate::error::{Error, Result};
use crate::ingest::GsrVector;
use crate::linalg::{squared_distance, Matrix};
use crate::matrix::{CountMatrix, SparseRow};
use crate::text::FeatureId;

use super::Clustering;

/// Member to medoid mapping and the inverse membership lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterLookup {
    medoid_of: BTreeMap<FeatureId, FeatureId>,
    members_of: BTreeMap<FeatureId, Vec<FeatureId>>,
}

impl ClusterLookup {
    /// Builds a lookup from `(member, medoid)` pairs. Every medoid must map to itself.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FeatureId, FeatureId)>,
    {
        let mut lookup = ClusterLookup::default();
        for (member, medoid) in pairs {
            if lookup.medoid_of.insert(member.clone(), medoid.clone()).is_some() {
                return Err(Error::InvalidArgument(format!("feature {member} is mapped twice")));
            }
            lookup.members_of.entry(medoid).or_default().push(member);
        }
        for (medoid, members) in lookup.members_of.iter_mut() {
            if lookup.medoid_of.get(medoid) != Some(medoid) {
                return Err(Error::InvalidArgument(format!("medoid {medoid} does not map to itself")));
            }
            members.sort();
        }
        Ok(lookup)
    }

    /// Every feature in its own cluster.
    pub fn singletons<'a>(ids: impl IntoIterator<Item = &'a FeatureId>) -> Self {
        Self::from_pairs(ids.into_iter().map(|id| (id.clone(), id.clone()))).expect("singletons are valid")
    }

    pub fn medoid_of(&self, id: &FeatureId) -> Option<&FeatureId> {
        self.medoid_of.get(id)
    }

    pub fn members_of(&self, medoid: &FeatureId) -> Option<&[FeatureId]> {
        self.members_of.get(medoid).map(Vec::as_slice)
    }

    pub fn clusters(&self) -> impl Iterator<Item = (&FeatureId, &[FeatureId])> {
        self.members_of.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn cluster_count(&self) -> usize {
        self.members_of.len()
    }

    pub fn feature_count(&self) -> usize {
        self.medoid_of.len()
    }

    /// `member<TAB>medoid` lines ordered by member.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (member, medoid) in &self.medoid_of {
            writeln!(w, "{member}\t{medoid}")?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("lookup table: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let (member, medoid) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("lookup line {}: missing tab", i + 1)))?;
            pairs.push((member.parse()?, medoid.parse()?));
        }
        Self::from_pairs(pairs)
    }
}

/// Picks, per cluster, the member nearest the cluster mean (ties by feature id).
pub fn build_lookup(c: &Clustering, feature_order: &[FeatureId], points: &Matrix) -> Result<ClusterLookup> {
    if feature_order.len() != c.assignment.len() || points.rows() != c.assignment.len() {
        return Err(Error::LengthMismatch {
            expected: c.assignment.len(),
            found: feature_order.len().min(points.rows()),
        });
    }
    let mut pairs = Vec::with_capacity(feature_order.len());
    for (cluster, members) in c.members().into_iter().enumerate() {
        let mut medoid: Option<(f64, &FeatureId)> = None;
        for &p in &members {
            let d = squared_distance(points.row(p), c.means.row(cluster));
            let id = &feature_order[p];
            let better = match medoid {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && id < bid),
            };
            if better {
                medoid = Some((d, id));
            }
        }
        if let Some((_, medoid)) = medoid {
            pairs.extend(members.iter().map(|&p| (feature_order[p].clone(), medoid.clone())));
        }
    }
    ClusterLookup::from_pairs(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeResult {
    /// One row per medoid: the sum of all its members' raw rows.
    pub centroids: CountMatrix,
    /// The untouched original rows of every clustered feature.
    pub members: CountMatrix,
    /// Member count of every medoid's cluster.
    pub sizes: BTreeMap<FeatureId, usize>,
}

pub fn merge_cluster_vectors(m: &CountMatrix, lookup: &ClusterLookup) -> Result<MergeResult> {
    let mut centroids = CountMatrix::new(m.n_days());
    let mut members = CountMatrix::new(m.n_days());
    let mut sizes = BTreeMap::new();
    for (medoid, cluster) in lookup.clusters() {
        sizes.insert(medoid.clone(), cluster.len());
        let mut sum = SparseRow::default();
        for member in cluster {
            let row = m.get(member).ok_or_else(|| Error::UnknownFeature(member.to_string()))?;
            sum = sum.add(row);
            members.insert(member.clone(), row.clone())?;
        }
        centroids.insert(medoid.clone(), sum)?;
    }
    Ok(MergeResult {
        centroids,
        members,
        sizes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeforeAfterRow {
    pub medoid: FeatureId,
    pub members: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeforeAfterTable {
    pub rows: Vec<BeforeAfterRow>,
}

fn fmt_score(s: Option<f64>) -> String {
    s.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl BeforeAfterTable {
    pub fn before(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.before).collect()
    }

    pub fn after(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.after).collect()
    }

    pub fn get(&self, medoid: &FeatureId) -> Option<&BeforeAfterRow> {
        self.rows.iter().find(|r| &r.medoid == medoid)
    }

    /// CSV `medoid,members,before,after`; absent scores are empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "medoid,members,before,after")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.medoid, r.members, fmt_score(r.before), fmt_score(r.after))?;
        }
        w.flush()
    }
}

/// Scores every medoid before (its own raw row) and after merging (the summed row).
/// Rows are ordered by after-score, best first.
pub fn recorrelate(merged: &MergeResult, gsr: &GsrVector, scorer: &Scorer) -> Result<BeforeAfterTable> {
    if merged.centroids.n_days() != gsr.len() {
        return Err(Error::LengthMismatch {
            expected: gsr.len(),
            found: merged.centroids.n_days(),
        });
    }
    let target = gsr.to_f64();
    let n = gsr.len();
    let score = |row: &SparseRow| -> Result<Option<f64>> {
        match scorer.score(&row.to_f64(n), &target) {
            Ok(v) => Ok(Some(v)),
            Err(CorrelationError::ZeroVariance) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let mut rows = Vec::with_capacity(merged.centroids.len());
    for (medoid, summed) in merged.centroids.iter() {
        let original = merged
            .members
            .get(medoid)
            .ok_or_else(|| Error::UnknownFeature(medoid.to_string()))?;
        rows.push(BeforeAfterRow {
            medoid: medoid.clone(),
            members: merged.sizes.get(medoid).copied().unwrap_or(1),
            before: score(original)?,
            after: score(summed)?,
        });
    }
    rows.sort_by(|a, b| compare_scores(a.after, b.after).then_with(|| a.medoid.cmp(&b.medoid)));
    Ok(BeforeAfterTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::Metric;

    fn kw(s: &str) -> FeatureId {
        FeatureId::keyword(s).unwrap()
    }

    #[test]
    fn medoid_must_map_to_itself() {
        assert!(ClusterLookup::from_pairs([(kw("a"), kw("b"))]).is_err());
        assert!(ClusterLookup::from_pairs([(kw("a"), kw("a")), (kw("a"), kw("a"))]).is_err());
        let l = ClusterLookup::from_pairs([(kw("b"), kw("a")), (kw("a"), kw("a"))]).unwrap();
        assert_eq!(l.members_of(&kw("a")).unwrap(), &[kw("a"), kw("b")]);
        assert_eq!(l.medoid_of(&kw("b")), Some(&kw("a")));
    }

    #[test]
    fn lookup_tsv_round_trip() {
        let l = ClusterLookup::from_pairs([(kw("b"), kw("a")), (kw("a"), kw("a")), (kw("c"), kw("c"))]).unwrap();
        let mut buf = Vec::new();
        l.write_tsv(&mut buf).unwrap();
        assert_eq!(ClusterLookup::read_tsv(&buf[..]).unwrap(), l);
    }

    #[test]
    fn merge_sums_members_and_rejects_unknown_features() {
        let m = CountMatrix::from_dense_rows(3, [(kw("a"), vec![1, 0, 2]), (kw("b"), vec![0, 3, 1])]).unwrap();
        let l = ClusterLookup::from_pairs([(kw("a"), kw("a")), (kw("b"), kw("a"))]).unwrap();
        let merged = merge_cluster_vectors(&m, &l).unwrap();
        assert_eq!(merged.centroids.get(&kw("a")).unwrap().dense(3), vec![1, 3, 3]);
        assert_eq!(merged.sizes[&kw("a")], 2);

        let bad = ClusterLookup::from_pairs([(kw("z"), kw("z"))]).unwrap();
        assert!(matches!(merge_cluster_vectors(&m, &bad), Err(Error::UnknownFeature(_))));
    }

    #[test]
    fn recorrelate_reports_constant_rows_as_absent() {
        let m = CountMatrix::from_dense_rows(4, [(kw("a"), vec![2, 2, 2, 2]), (kw("b"), vec![0, 1, 0, 1])]).unwrap();
        let merged = merge_cluster_vectors(&m, &ClusterLookup::singletons(m.feature_ids().iter())).unwrap();
        let gsr = GsrVector::new(vec![0, 1, 0, 1]);
        let t = recorrelate(&merged, &gsr, &Scorer::new(Metric::Pearson)).unwrap();
        assert_eq!(t.rows[0].medoid, kw("b"));
        assert_eq!(t.rows[0].after, Some(1.0));
        assert_eq!(t.get(&kw("a")).unwrap().before, None);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("keyword:1:a,1,,\n"));
    }
}
