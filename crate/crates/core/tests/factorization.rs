mod common;

use common::*;
use dcm::factorization::{factorize, svd, FactoredMatrix};
use dcm::linalg::Matrix;
use dcm::matrix::CountMatrix;
use dcm::text::FeatureId;
use rand::Rng;

#[test]
fn invariants_on_random_matrices() {
    let mut r = rng(21);
    for case in 0..100 {
        let x = random_matrix(&mut r, 200, 50, true);
        let s = svd(&x).unwrap();
        assert_eq!(s.sigma.len(), x.rows().min(x.cols()));
        let c = check_svd(&x, &s);
        assert!(c.u_defect <= 1e-8, "case {case} {}x{}: {c:?}", x.rows(), x.cols());
        assert!(c.v_defect <= 1e-8, "case {case}: {c:?}");
        assert!(c.non_increasing, "case {case}");
        assert!(c.relative_residual <= 1e-8, "case {case}: {c:?}");
    }
}

#[test]
fn wide_matrices_up_to_50_by_200() {
    let mut r = rng(22);
    for _ in 0..20 {
        let x = random_matrix(&mut r, 200, 50, true).transpose();
        let c = check_svd(&x, &svd(&x).unwrap());
        assert!(c.u_defect <= 1e-8 && c.v_defect <= 1e-8 && c.relative_residual <= 1e-8, "{c:?}");
    }
}

#[test]
fn sigma_matches_eigensolver_oracle_on_small_cases() {
    let mut r = rng(23);
    for _ in 0..300 {
        let x = random_matrix(&mut r, 8, 8, false);
        let s = svd(&x).unwrap();
        let oracle = sigma_oracle(&x);
        for (a, b) in s.sigma.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "{:?} vs {oracle:?}", s.sigma);
        }
    }
}

#[test]
fn rank_deficient_small_cases_match_the_oracle_spectrum() {
    // Exact zeros come back from any Gram eigensolver as rounding noise, whose
    // square root is ~1e-7; squared values have no such amplification.
    let mut r = rng(25);
    for _ in 0..300 {
        let x = random_matrix(&mut r, 8, 8, true);
        let s = svd(&x).unwrap();
        let oracle = sigma_oracle(&x);
        let scale = oracle[0].powi(2).max(1.0);
        for (a, b) in s.sigma.iter().zip(&oracle) {
            assert!((a * a - b * b).abs() <= 1e-12 * scale, "{:?} vs {oracle:?}", s.sigma);
        }
        let c = check_svd(&x, &s);
        assert!(c.u_defect <= 1e-8 && c.relative_residual <= 1e-8, "{c:?}");
    }
}

#[test]
fn hand_computed_cases() {
    let x = Matrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 0.0]]);
    let s = svd(&x).unwrap();
    assert!((s.sigma[0] - 5.0).abs() < 1e-12 && s.sigma[1] == 0.0);
    assert!((s.u[(0, 0)] - 0.6).abs() < 1e-12 && (s.u[(1, 0)] - 0.8).abs() < 1e-12);
    assert_eq!(s.completed, vec![false, true]);
    assert!(identity_defect(&s.u, false) < 1e-12);
}

#[test]
fn truncation_error_is_the_discarded_spectrum() {
    let mut r = rng(24);
    for _ in 0..20 {
        let (m, n) = (r.random_range(5..60), r.random_range(5..30));
        let rows: Vec<(FeatureId, Vec<u64>)> = (0..m)
            .map(|i| (FeatureId::keyword(&format!("f{i}")).unwrap(), (0..n).map(|_| r.random_range(0..9)).collect()))
            .collect();
        let cm = CountMatrix::from_dense_rows(n, rows).unwrap();
        let f = factorize(&cm, false).unwrap();
        let (_, x) = cm.to_dense();
        for k in 1..=f.rank() {
            let t = f.truncate(k).unwrap();
            let recon = t.reconstruct();
            let mut err = 0.0;
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    err += (x[(i, j)] - recon[(i, j)]).powi(2);
                }
            }
            let tail: f64 = f.sigma[k..].iter().map(|s| s * s).sum();
            assert!((err - tail).abs() <= 1e-8 * (1.0 + tail), "k={k}: {err} vs {tail}");
        }
    }
}

#[test]
fn factor_checkpoint_round_trip() {
    let cm = CountMatrix::from_dense_rows(
        4,
        [
            (FeatureId::keyword("a").unwrap(), vec![1, 0, 3, 1]),
            (FeatureId::keyword("b").unwrap(), vec![1, 0, 3, 1]),
            (FeatureId::keyword("c").unwrap(), vec![0, 2, 0, 5]),
        ],
    )
    .unwrap();
    let f = factorize(&cm, true).unwrap();
    let mut buf = Vec::new();
    f.write_text(&mut buf).unwrap();
    let back = FactoredMatrix::read_text(&buf[..]).unwrap();
    assert_eq!(back, f);
    assert_eq!(f.completed.iter().filter(|c| **c).count(), 1);
}
