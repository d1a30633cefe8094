//! Multi-restart Lloyd k-means over the SVD feature representations, followed
//! by medoid lookup, merging of raw member rows and re-correlation.

mod lookup;

pub use lookup::{build_lookup, merge_cluster_vectors, recorrelate, BeforeAfterRow, BeforeAfterTable, ClusterLookup, MergeResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::FactoredMatrix;
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Every point gets a uniformly random cluster; means are the group means.
    #[default]
    RandomPartition,
    /// k-means++ seeding.
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub runs: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Latent dimensions used; `None` means all of them.
    pub rank: Option<usize>,
    pub weight_by_sigma: bool,
    pub init: Init,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 2000,
            runs: 50,
            max_iter: 35,
            seed: 0,
            rank: None,
            weight_by_sigma: false,
            init: Init::RandomPartition,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self, points: usize) -> Result<()> {
        if self.k == 0 || self.runs == 0 || self.max_iter == 0 {
            return Err(Error::InvalidArgument("k, runs and max_iter must all be at least 1".into()));
        }
        if self.k > points {
            return Err(Error::InvalidArgument(format!(
                "cannot form {} clusters from {points} points",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub means: Matrix,
    pub objective: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.means.rows()
    }

    /// Within-cluster sum of squares recomputed from the points.
    pub fn recompute_objective(&self, points: &Matrix) -> f64 {
        objective(points, &self.assignment, &self.means)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k()];
        for (p, &c) in self.assignment.iter().enumerate() {
            groups[c].push(p);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run: usize,
    /// Objective after initialization and after every update step.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub best: Clustering,
    pub best_run: usize,
    pub runs: Vec<RunTrace>,
}

/// Rows of `U` restricted to `rank` columns, optionally scaled by `σ`.
pub fn latent_points(f: &FactoredMatrix, rank: Option<usize>, weight_by_sigma: bool) -> Result<Matrix> {
    let r = rank.unwrap_or(f.rank());
    if r == 0 || r > f.rank() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} is outside 1..={}",
            f.rank()
        )));
    }
    let mut points = f.u.leading_columns(r);
    if weight_by_sigma {
        for i in 0..points.rows() {
            for (v, s) in points.row_mut(i).iter_mut().zip(&f.sigma) {
                *v *= s;
            }
        }
    }
    Ok(points)
}

fn objective(points: &Matrix, assignment: &[usize], means: &Matrix) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(p, &c)| squared_distance(points.row(p), means.row(c)))
        .sum()
}

fn group_means(points: &Matrix, assignment: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut means = Matrix::zeros(k, points.cols());
    let mut sizes = vec![0usize; k];
    for (p, &c) in assignment.iter().enumerate() {
        sizes[c] += 1;
        for (m, v) in means.row_mut(c).iter_mut().zip(points.row(p)) {
            *m += v;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            let n = sizes[c] as f64;
            means.row_mut(c).iter_mut().for_each(|m| *m /= n);
        }
    }
    (means, sizes)
}

fn mean_of(points: &Matrix, assignment: &[usize], cluster: usize) -> Vec<f64> {
    let mut mean = vec![0.0; points.cols()];
    let mut n = 0usize;
    for (p, &c) in assignment.iter().enumerate() {
        if c == cluster {
            n += 1;
            for (m, v) in mean.iter_mut().zip(points.row(p)) {
                *m += v;
            }
        }
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    mean
}

/// Nearest mean for every point; ties go to the lowest cluster id.
fn assign(points: &Matrix, means: &Matrix) -> Vec<usize> {
    (0..points.rows())
        .into_par_iter()
        .map(|p| {
            let row = points.row(p);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..means.rows() {
                let d = squared_distance(row, means.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Gives each empty cluster the point farthest from its own mean, taken from
/// a cluster that keeps at least one member. Never increases the objective.
fn repair_empty(points: &Matrix, assignment: &mut [usize], means: &mut Matrix, sizes: &mut [usize]) {
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let mut far = None;
        let mut far_d = -1.0;
        for (p, &c) in assignment.iter().enumerate() {
            if sizes[c] < 2 {
                continue;
            }
            let d = squared_distance(points.row(p), means.row(c));
            if d > far_d {
                far_d = d;
                far = Some(p);
            }
        }
        let Some(p) = far else { return };
        let old = assignment[p];
        assignment[p] = empty;
        sizes[old] -= 1;
        sizes[empty] += 1;
        means.row_mut(empty).copy_from_slice(points.row(p));
        let recomputed = mean_of(points, assignment, old);
        means.row_mut(old).copy_from_slice(&recomputed);
    }
}

fn plus_plus_means(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let m = points.rows();
    let mut means = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..m);
    means.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..m).map(|p| squared_distance(points.row(p), means.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (p, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = p;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        means.row_mut(c).copy_from_slice(points.row(pick));
        for p in 0..m {
            d2[p] = d2[p].min(squared_distance(points.row(p), means.row(c)));
        }
    }
    means
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// One Lloyd run: assignment and update steps until the assignment is stable
/// or `max_iter` assignment steps have been taken.
pub fn lloyd_run(points: &Matrix, k: usize, max_iter: usize, init: Init, seed: u64, run: usize) -> (Clustering, RunTrace) {
    let mut rng = run_rng(seed, run);
    let mut assignment: Vec<usize> = match init {
        Init::RandomPartition => (0..points.rows()).map(|_| rng.random_range(0..k)).collect(),
        Init::PlusPlus => assign(points, &plus_plus_means(points, k, &mut rng)),
    };
    let (mut means, mut sizes) = group_means(points, &assignment, k);
    repair_empty(points, &mut assignment, &mut means, &mut sizes);
    let mut objectives = vec![objective(points, &assignment, &means)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next = assign(points, &means);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        (means, sizes) = group_means(points, &assignment, k);
        repair_empty(points, &mut assignment, &mut means, &mut sizes);
        objectives.push(objective(points, &assignment, &means));
    }
    let objective = *objectives.last().expect("at least the initial objective");
    (
        Clustering {
            assignment,
            means,
            objective,
        },
        RunTrace {
            run,
            objectives,
            iterations,
            converged,
        },
    )
}

/// Best of `cfg.runs` independent Lloyd runs (lowest objective, then lowest run index).
pub fn kmeans(points: &Matrix, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate(points.rows())?;
    for i in 0..points.rows() {
        if let Some(j) = points.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    let results: Vec<(Clustering, RunTrace)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| lloyd_run(points, cfg.k, cfg.max_iter, cfg.init, cfg.seed, run))
        .collect();
    let mut best_run = 0;
    for (i, (c, _)) in results.iter().enumerate() {
        if c.objective < results[best_run].0.objective {
            best_run = i;
        }
    }
    let mut runs = Vec::with_capacity(results.len());
    let mut best = None;
    for (i, (c, trace)) in results.into_iter().enumerate() {
        if i == best_run {
            best = Some(c);
        }
        runs.push(trace);
    }
    Ok(KMeansResult {
        best: best.expect("runs >= 1"),
        best_run,
        runs,
    })
}

/// True if both assignments induce the same partition, whatever the labels.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> Matrix {
        Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
    }

    fn cfg(k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            seed: 42,
            ..KMeansConfig::default()
        }
    }

    #[test]
    fn separated_pairs() {
        let pts = line(&[0.0, 0.1, 10.0, 10.1]);
        let res = kmeans(&pts, &cfg(2)).unwrap();
        assert!(same_partition(&res.best.assignment, &[0, 0, 1, 1]));
        assert!((res.best.objective - 0.01).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_is_total_scatter() {
        let vals = [1.0, 2.0, 4.0, 9.0];
        let res = kmeans(&line(&vals), &cfg(1)).unwrap();
        let mean = vals.iter().sum::<f64>() / 4.0;
        let scatter: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((res.best.objective - scatter).abs() < 1e-12);
        assert!((res.best.means[(0, 0)] - mean).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let pts = line(&[0.0, 1.0]);
        assert!(kmeans(&pts, &cfg(3)).is_err());
        assert!(kmeans(&pts, &KMeansConfig { runs: 0, ..cfg(1) }).is_err());
        assert!(kmeans(&pts, &KMeansConfig { max_iter: 0, ..cfg(1) }).is_err());
        assert!(kmeans(&line(&[0.0, f64::NAN]), &cfg(1)).is_err());
    }

    #[test]
    fn k_equal_to_points_gives_singletons() {
        let pts = line(&[0.0, 5.0, 9.0]);
        let res = kmeans(&pts, &cfg(3)).unwrap();
        assert_eq!(res.best.objective, 0.0);
        let mut a = res.best.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn empty_cluster_repair_lowers_objective() {
        let pts = line(&[0.0, 1.0, 10.0]);
        let mut assignment = vec![0, 0, 0];
        let (mut means, mut sizes) = group_means(&pts, &assignment, 2);
        let before = objective(&pts, &assignment, &means);
        repair_empty(&pts, &mut assignment, &mut means, &mut sizes);
        assert_eq!(assignment, vec![0, 0, 1]);
        assert!(objective(&pts, &assignment, &means) < before);
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn runs_are_reproducible_and_objective_matches_recomputation() {
        let pts = Matrix::from_rows(&(0..40).map(|i| vec![(i % 7) as f64, (i / 7) as f64 * 0.5]).collect::<Vec<_>>());
        let a = kmeans(&pts, &KMeansConfig { runs: 8, ..cfg(4) }).unwrap();
        let b = kmeans(&pts, &KMeansConfig { runs: 8, ..cfg(4) }).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.runs, b.runs);
        assert!((a.best.recompute_objective(&pts) - a.best.objective).abs() < 1e-12);
        for t in &a.runs {
            assert!(a.best.objective <= *t.objectives.last().unwrap());
            assert!(t.iterations <= 35);
        }
    }

    #[test]
    fn plus_plus_init_also_recovers_pairs() {
        let pts = line(&[0.0, 0.1, 10.0, 10.1, 20.0, 20.2]);
        let res = kmeans(&pts, &KMeansConfig { init: Init::PlusPlus, ..cfg(3) }).unwrap();
        assert!(same_partition(&res.best.assignment, &[0, 0, 1, 1, 2, 2]));
    }

    #[test]
    fn partition_equality_ignores_labels() {
        assert!(same_partition(&[0, 0, 1], &[2, 2, 0]));
        assert!(!same_partition(&[0, 0, 1], &[0, 1, 1]));
        assert!(!same_partition(&[0, 1], &[0, 0]));
    }
}
