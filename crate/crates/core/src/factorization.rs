//! Thin SVD of the feature/day matrix.
//!
//! The factorization works on the Gram matrix of the shorter side: for a tall
//! `m x n` matrix the `n x n` matrix `XᵀX` is diagonalized with cyclic Jacobi
//! rotations, giving `V` and `σ² `; `U = X V Σ⁻¹`. Singular values below
//! [`RELATIVE_RANK_TOLERANCE`] times the largest are set to zero and their
//! `U` columns are completed to an orthonormal set by Gram-Schmidt.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::matrix::CountMatrix;
use crate::text::FeatureId;

pub const RELATIVE_RANK_TOLERANCE: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix: eigenvalues (unsorted) and the
/// matching eigenvectors as columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi_eigen needs a square matrix");
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    let negligible = f64::EPSILON * f64::EPSILON * norm;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if apq.abs() <= negligible || apq.abs() <= 0.5 * f64::EPSILON * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// `XᵀX`, accumulated over fixed row blocks so the result is deterministic.
fn gram(x: &Matrix) -> Matrix {
    let n = x.cols();
    let block = 256;
    let partials: Vec<Vec<f64>> = (0..x.rows().div_ceil(block))
        .into_par_iter()
        .map(|b| {
            let mut g = vec![0.0; n * n];
            for r in b * block..((b + 1) * block).min(x.rows()) {
                let row = x.row(r);
                for (i, &xi) in row.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let gi = &mut g[i * n..];
                    for j in i..n {
                        gi[j] += xi * row[j];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Matrix::zeros(n, n);
    for part in partials {
        for i in 0..n {
            for j in i..n {
                g[(i, j)] += part[i * n + j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// Raw thin factors without feature labels.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
    /// Columns of `U` whose singular value was zeroed and whose direction was completed.
    pub completed: Vec<bool>,
}

/// Orthonormal completion: fills `cols` of `u` (already-valid columns are `valid`).
fn complete_columns(u: &mut Matrix, valid: &mut [bool]) {
    let m = u.rows();
    for j in 0..valid.len() {
        if valid[j] {
            continue;
        }
        // The basis vector with the smallest projection onto the span is the
        // best-conditioned candidate.
        let mut best = 0;
        let mut best_norm = f64::INFINITY;
        for i in 0..m {
            let norm: f64 = (0..valid.len()).filter(|&c| valid[c]).map(|c| u[(i, c)] * u[(i, c)]).sum();
            if norm < best_norm {
                best_norm = norm;
                best = i;
            }
        }
        let mut e = vec![0.0; m];
        e[best] = 1.0;
        for _ in 0..2 {
            for c in (0..valid.len()).filter(|&c| valid[c]) {
                let col = u.column(c);
                let proj = dot(&col, &e);
                for (ei, ci) in e.iter_mut().zip(&col) {
                    *ei -= proj * ci;
                }
            }
        }
        let norm = dot(&e, &e).sqrt();
        for i in 0..m {
            u[(i, j)] = e[i] / norm;
        }
        valid[j] = true;
    }
}

/// Two passes of modified Gram-Schmidt over the `valid` columns, in order.
/// `XV/σ` loses orthogonality roughly as `(σ_max/σ_j)^2 ε`; this restores it.
/// A column that mostly vanishes under projection lies in the span of the
/// earlier ones, so its singular value is numerically zero: it is zeroed and
/// left for completion.
fn reorthonormalize(u: &mut Matrix, valid: &mut [bool], sigma: &mut [f64]) {
    let m = u.rows();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for c in 0..valid.len() {
        if !valid[c] {
            continue;
        }
        let mut v = u.column(c);
        let before = dot(&v, &v).sqrt();
        let mut dependent = false;
        for pass in 0..2 {
            for q in &kept {
                let p = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let norm = dot(&v, &v).sqrt();
            if pass == 0 && norm < 0.5 * before {
                dependent = true;
                break;
            }
            v.iter_mut().for_each(|a| *a /= norm);
        }
        if dependent {
            valid[c] = false;
            sigma[c] = 0.0;
            continue;
        }
        for (i, a) in v.iter().enumerate().take(m) {
            u[(i, c)] = *a;
        }
        kept.push(v);
    }
}

/// SVD of a matrix with at least as many rows as columns.
fn tall_svd(x: &Matrix) -> Svd {
    let (m, n) = (x.rows(), x.cols());
    let (eigenvalues, w) = jacobi_eigen(&gram(x));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    let mut sigma: Vec<f64> = order.iter().map(|&i| eigenvalues[i].max(0.0).sqrt()).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = RELATIVE_RANK_TOLERANCE * sigma_max;

    let mut v = Matrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        for i in 0..n {
            v[(i, j)] = w[(i, src)];
        }
    }
    let xv = x.matmul(&v);
    let mut u = Matrix::zeros(m, n);
    let mut valid = vec![false; n];
    for j in 0..n {
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            for i in 0..m {
                u[(i, j)] = xv[(i, j)] / sigma[j];
            }
            valid[j] = true;
        } else {
            sigma[j] = 0.0;
        }
    }
    reorthonormalize(&mut u, &mut valid, &mut sigma);
    let completed: Vec<bool> = valid.iter().map(|v| !v).collect();
    complete_columns(&mut u, &mut valid);
    Svd {
        u,
        sigma,
        vt: v.transpose(),
        completed,
    }
}

/// Thin SVD `X = U diag(σ) Vᵀ` with `r = min(m, n)`.
///
/// Each `U` column is signed so that its largest-magnitude entry is positive.
pub fn svd(x: &Matrix) -> Result<Svd> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InvalidArgument("cannot factor an empty matrix".into()));
    }
    for i in 0..x.rows() {
        if let Some(j) = x.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    let mut out = if x.rows() >= x.cols() {
        tall_svd(x)
    } else {
        let t = tall_svd(&x.transpose());
        Svd {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
            completed: t.completed,
        }
    };
    for j in 0..out.sigma.len() {
        let mut pivot = 0.0f64;
        for i in 0..out.u.rows() {
            if out.u[(i, j)].abs() > pivot.abs() {
                pivot = out.u[(i, j)];
            }
        }
        if pivot < 0.0 {
            for i in 0..out.u.rows() {
                out.u[(i, j)] = -out.u[(i, j)];
            }
            for v in out.vt.row_mut(j) {
                *v = -*v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredMatrix {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
    pub feature_order: Vec<FeatureId>,
    pub completed: Vec<bool>,
}

impl FactoredMatrix {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *v *= s;
            }
        }
        us.matmul(&self.vt)
    }

    /// Keeps the leading `r_keep` singular triples.
    pub fn truncate(&self, r_keep: usize) -> Result<FactoredMatrix> {
        if r_keep == 0 || r_keep > self.rank() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate rank {} factors to {r_keep}",
                self.rank()
            )));
        }
        let mut vt = Matrix::zeros(r_keep, self.vt.cols());
        for j in 0..r_keep {
            vt.row_mut(j).copy_from_slice(self.vt.row(j));
        }
        Ok(FactoredMatrix {
            u: self.u.leading_columns(r_keep),
            sigma: self.sigma[..r_keep].to_vec(),
            vt,
            feature_order: self.feature_order.clone(),
            completed: self.completed[..r_keep].to_vec(),
        })
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        writeln!(w, "dcm-factors 1")?;
        writeln!(w, "shape\t{}\t{}\t{}", self.u.rows(), self.vt.cols(), self.rank())?;
        writeln!(w, "sigma\t{}", join(&self.sigma))?;
        let completed: Vec<&str> = self.completed.iter().map(|&c| if c { "1" } else { "0" }).collect();
        writeln!(w, "completed\t{}", completed.join(","))?;
        for (i, id) in self.feature_order.iter().enumerate() {
            writeln!(w, "u\t{id}\t{}", join(self.u.row(i)))?;
        }
        for j in 0..self.rank() {
            writeln!(w, "vt\t{}", join(self.vt.row(j)))?;
        }
        w.flush()
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<FactoredMatrix> {
        let bad = |msg: &str| Error::Parse(format!("factor checkpoint: {msg}"));
        let parse_vals = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| bad(&e.to_string())))
                .collect()
        };
        let mut lines = reader.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file"))?
                .map_err(|e| bad(&e.to_string()))
        };
        if next()? != "dcm-factors 1" {
            return Err(bad("missing `dcm-factors 1` header"));
        }
        let shape = next()?;
        let dims: Vec<usize> = shape
            .strip_prefix("shape\t")
            .ok_or_else(|| bad("missing shape"))?
            .split('\t')
            .map(|d| d.parse().map_err(|_| bad("bad shape")))
            .collect::<Result<_>>()?;
        let [m, n, r] = dims[..] else { return Err(bad("shape needs m, n, r")) };
        let sigma = parse_vals(next()?.strip_prefix("sigma\t").ok_or_else(|| bad("missing sigma"))?)?;
        let completed: Vec<bool> = next()?
            .strip_prefix("completed\t")
            .ok_or_else(|| bad("missing completed flags"))?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s == "1")
            .collect();
        if sigma.len() != r || completed.len() != r {
            return Err(bad("sigma length disagrees with rank"));
        }
        let mut u = Matrix::zeros(m, r);
        let mut feature_order = Vec::with_capacity(m);
        for i in 0..m {
            let line = next()?;
            let rest = line.strip_prefix("u\t").ok_or_else(|| bad("expected a `u` row"))?;
            let (id, vals) = rest.split_once('\t').ok_or_else(|| bad("u row needs an id"))?;
            feature_order.push(id.parse()?);
            let vals = parse_vals(vals)?;
            if vals.len() != r {
                return Err(bad("u row has the wrong width"));
            }
            u.row_mut(i).copy_from_slice(&vals);
        }
        let mut vt = Matrix::zeros(r, n);
        for j in 0..r {
            let line = next()?;
            let vals = parse_vals(line.strip_prefix("vt\t").ok_or_else(|| bad("expected a `vt` row"))?)?;
            if vals.len() != n {
                return Err(bad("vt row has the wrong width"));
            }
            vt.row_mut(j).copy_from_slice(&vals);
        }
        Ok(FactoredMatrix {
            u,
            sigma,
            vt,
            feature_order,
            completed,
        })
    }
}

/// Factors the count matrix. With `center_rows`, each row's mean is removed first.
pub fn factorize(m: &CountMatrix, center_rows: bool) -> Result<FactoredMatrix> {
    let (feature_order, mut x) = m.to_dense();
    if center_rows {
        for i in 0..x.rows() {
            let row = x.row_mut(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
    }
    let Svd { u, sigma, vt, completed } = svd(&x)?;
    Ok(FactoredMatrix {
        u,
        sigma,
        vt,
        feature_order,
        completed,
    })
}
