//! Independent brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dcm::correlation::{equal_width_bin, tau_b_from_counts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pearson on integer-valued data in exact 128-bit arithmetic.
pub fn pearson_exact_int(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len() as i128;
    let sx: i128 = x.iter().map(|&v| v as i128).sum();
    let sy: i128 = y.iter().map(|&v| v as i128).sum();
    let sxx: i128 = x.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let syy: i128 = y.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let sxy: i128 = x.iter().zip(y).map(|(&a, &b)| (a as i128) * (b as i128)).sum();
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some(cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt()))
}

/// Doubled mid-ranks by counting: 2·rank = 2·#less + #equal + 1.
pub fn doubled_ranks(v: &[i64]) -> Vec<i64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as i64;
            let equal = v.iter().filter(|&&b| b == a).count() as i64;
            2 * less + equal + 1
        })
        .collect()
}

pub fn spearman_oracle(x: &[i64], y: &[i64]) -> Option<f64> {
    pearson_exact_int(&doubled_ranks(x), &doubled_ranks(y))
}

/// Tau-b by enumerating every pair.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() as i64 * (x[i] != x[j]) as i64;
            let dy = (y[i] - y[j]).signum() as i64 * (y[i] != y[j]) as i64;
            s += dx * dy;
            tx += (dx == 0) as u64;
            ty += (dy == 0) as u64;
        }
    }
    let total = (n * (n - 1) / 2) as u64;
    tau_b_from_counts(s, total, tx, ty).ok()
}

fn double_centered(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (v[i] - v[j]).abs()).collect()).collect();
    let row: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let col: Vec<f64> = (0..n).map(|j| a.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] - row[i] - col[j] + grand).collect())
        .collect()
}

/// Biased distance correlation from explicit double-centred distance matrices.
pub fn dcor_oracle(x: &[f64], y: &[f64]) -> f64 {
    let (a, b) = (double_centered(x), double_centered(y));
    let n2 = (x.len() * x.len()) as f64;
    let prod = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| -> f64 {
        p.iter().zip(q).flat_map(|(r, s)| r.iter().zip(s).map(|(u, v)| u * v)).sum::<f64>() / n2
    };
    let (vx, vy) = (prod(&a, &a), prod(&b, &b));
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (prod(&a, &b).max(0.0) / (vx * vy).sqrt()).sqrt()
}

/// Distance correlation of integer data from explicit double-centred matrices
/// scaled by `n^2`, summed exactly.
pub fn dcor_oracle_exact(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len();
    let centred = |v: &[i64]| -> Vec<Vec<i128>> {
        let a: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (v[i] - v[j]).abs() as i128).collect()).collect();
        let row: Vec<i128> = a.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<i128> = (0..n).map(|j| a.iter().map(|r| r[j]).sum()).collect();
        let total: i128 = row.iter().sum();
        let m = n as i128;
        (0..n)
            .map(|i| (0..n).map(|j| m * m * a[i][j] - m * row[i] - m * col[j] + total).collect())
            .collect()
    };
    let (a, b) = (centred(x), centred(y));
    let prod = |p: &Vec<Vec<i128>>, q: &Vec<Vec<i128>>| -> i128 {
        p.iter().zip(q).flat_map(|(r, s)| r.iter().zip(s).map(|(u, v)| u * v)).sum()
    };
    let (vx, vy) = (prod(&a, &a), prod(&b, &b));
    if vx <= 0 || vy <= 0 {
        return 0.0;
    }
    (prod(&a, &b).max(0) as f64 / ((vx as f64) * (vy as f64)).sqrt()).sqrt()
}

/// Plug-in MI in bits from a joint histogram kept in an ordered map.
pub fn mi_oracle(x: &[f64], y: &[f64], bins: usize) -> f64 {
    let bin = |v: &[f64]| -> Vec<usize> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter().map(|&a| equal_width_bin(a, lo, hi, bins)).collect()
    };
    let (bx, by) = (bin(x), bin(y));
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut px: BTreeMap<usize, u64> = BTreeMap::new();
    let mut py: BTreeMap<usize, u64> = BTreeMap::new();
    for (&a, &b) in bx.iter().zip(&by) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for (&(a, b), &c) in &joint {
        let pab = c as f64 / n;
        let (pa, pb) = (px[&a] as f64 / n, py[&b] as f64 / n);
        mi += pab * (pab / (pa * pb)).log2();
    }
    mi.max(0.0)
}

/// Small-alphabet integer series, so ties are common.
pub fn tie_heavy_pair(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<i64>, Vec<i64>) {
    let n = rng.random_range(2..=max_len);
    let ax = rng.random_range(1..=6);
    let ay = rng.random_range(1..=6);
    let x: Vec<i64> = (0..n).map(|_| rng.random_range(0..=ax)).collect();
    let y: Vec<i64> = if rng.random_bool(0.3) {
        // Partly dependent pairs.
        x.iter().map(|&v| v + rng.random_range(0..=ay / 2)).collect()
    } else {
        (0..n).map(|_| rng.random_range(0..=ay)).collect()
    };
    (x, y)
}

pub fn as_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&a| a as f64).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

use dcm::factorization::Svd;
use dcm::linalg::Matrix;

/// Largest deviation of `AᵀA` (or `AAᵀ` with `rows`) from the identity.
pub fn identity_defect(a: &Matrix, rows: bool) -> f64 {
    let g = if rows { a.matmul(&a.transpose()) } else { a.transpose().matmul(a) };
    g.max_abs_diff(&Matrix::identity(g.rows()))
}

#[derive(Debug)]
pub struct SvdCheck {
    pub u_defect: f64,
    pub v_defect: f64,
    pub non_increasing: bool,
    pub relative_residual: f64,
}

pub fn check_svd(x: &Matrix, s: &Svd) -> SvdCheck {
    let mut us = s.u.clone();
    for i in 0..us.rows() {
        for (v, sg) in us.row_mut(i).iter_mut().zip(&s.sigma) {
            *v *= sg;
        }
    }
    let recon = us.matmul(&s.vt);
    let mut diff = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            diff += (x[(i, j)] - recon[(i, j)]).powi(2);
        }
    }
    let norm = x.frobenius_norm();
    SvdCheck {
        u_defect: identity_defect(&s.u, false),
        v_defect: identity_defect(&s.vt, true),
        non_increasing: s.sigma.windows(2).all(|w| w[0] >= w[1]),
        relative_residual: if norm == 0.0 { diff.sqrt() } else { diff.sqrt() / norm },
    }
}

/// Singular values from nalgebra's symmetric eigensolver applied to `XᵀX`.
pub fn sigma_oracle(x: &Matrix) -> Vec<f64> {
    let (m, n) = (x.rows(), x.cols());
    let xm = nalgebra::DMatrix::from_fn(m, n, |i, j| x[(i, j)]);
    let g = if m >= n { xm.transpose() * &xm } else { &xm * xm.transpose() };
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(g).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Random matrices of assorted shapes. With `duplicates`, every fourth one
/// repeats its rows pairwise and so is rank deficient.
pub fn random_matrix(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize, duplicates: bool) -> Matrix {
    let m = rng.random_range(1..=max_rows);
    let n = rng.random_range(1..=max_cols);
    let mut x = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            x[(i, j)] = if rng.random_bool(0.5) {
                rng.random_range(0..12) as f64
            } else {
                rng.random_range(-1.0..1.0)
            };
        }
    }
    if duplicates && rng.random_range(0..4) == 0 && m > 1 {
        for i in (1..m).step_by(2) {
            for j in 0..n {
                x[(i, j)] = x[(i - 1, j)];
            }
        }
    }
    x
}

/// `k` isotropic Gaussian blobs with unit σ whose centres are `separation` apart
/// along the first axis; returns the points and the true labels.
pub fn planted_blobs(rng: &mut ChaCha8Rng, k: usize, per_blob: usize, dim: usize, separation: f64) -> (Matrix, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for b in 0..k {
        for _ in 0..per_blob {
            let mut p: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            p[0] += b as f64 * separation;
            rows.push(p);
            labels.push(b);
        }
    }
    (Matrix::from_rows(&rows), labels)
}

/// Random points with clumps and exact duplicates, to exercise ties and empty clusters.
pub fn clumpy_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Matrix {
    let centres: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.random_bool(0.2) {
            let j = rng.random_range(0..i);
            rows.push(rows[j].clone());
        } else {
            let c = &centres[rng.random_range(0..centres.len())];
            rows.push(c.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect());
        }
    }
    Matrix::from_rows(&rows)
}

/// True if every recorded objective is at most its predecessor, up to rounding.
pub fn non_increasing(objectives: &[f64]) -> bool {
    objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
}
