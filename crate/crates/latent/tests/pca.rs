use nalgebra::DMatrix;
use narlab_latent::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
/// eigenvalues and eigenvectors (columns) sorted by decreasing eigenvalue.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (vals, vecs)
}

fn covariance(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (rows, cols) = m.shape();
    let mean: Vec<f64> = (0..cols).map(|j| m.column(j).sum() / rows as f64).collect();
    (0..cols)
        .map(|i| (0..cols).map(|j| (0..rows).map(|r| (m[(r, i)] - mean[i]) * (m[(r, j)] - mean[j])).sum::<f64>()).collect())
        .collect()
}

#[test]
fn pca_matches_covariance_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let scales: Vec<f64> = (0..8).map(|j| 0.3 + j as f64 * 0.4).collect();
        let m = DMatrix::from_fn(50, 8, |_, j| rng.random_range(-1.0..1.0) * scales[j]);
        let res = pca(&m, 8).unwrap();
        let (vals, vecs) = jacobi_eigen(covariance(&m));
        let total: f64 = vals.iter().sum();
        for k in 0..8 {
            assert!((res.explained_variance_ratios[k] - vals[k] / total).abs() < 1e-6);
            let d: f64 = res.components[k].iter().zip(&vecs[k]).map(|(a, b)| a * b).sum();
            assert!((d.abs() - 1.0).abs() < 1e-6, "component {k}: |cos| = {}", d.abs());
        }
    }
}

#[test]
fn collinear_and_isotropic_data() {
    let line = DMatrix::from_fn(10, 3, |r, j| r as f64 * [1.0, -2.0, 0.5][j]);
    let res = pca(&line, 3).unwrap();
    assert!((res.explained_variance_ratios[0] - 1.0).abs() < 1e-12);
    assert!(res.explained_variance_ratios[1] < 1e-12);

    let grid = DMatrix::from_fn(25, 2, |r, j| if j == 0 { (r % 5) as f64 } else { (r / 5) as f64 });
    let res = pca(&grid, 2).unwrap();
    assert!((res.explained_variance_ratios[0] - 0.5).abs() < 1e-12);
    assert!((res.explained_variance_ratios[1] - 0.5).abs() < 1e-12);
}

#[test]
fn sign_convention_and_errors() {
    let m = DMatrix::from_fn(6, 4, |r, j| ((r * 7 + j * 3) % 5) as f64 - r as f64 * 0.3);
    let res = pca(&m, 3).unwrap();
    for c in &res.components {
        let pivot = c.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        assert!(pivot > 0.0);
    }
    let neg = -m.clone();
    let res2 = pca(&neg, 3).unwrap();
    assert_eq!(res.explained_variance_ratios.len(), res2.explained_variance_ratios.len());
    assert!(pca(&m, 5).is_err());
    assert!(pca(&m, 0).is_err());
    assert!(pca(&DMatrix::zeros(1, 3), 1).is_err());
    let zeros = pca(&DMatrix::zeros(4, 3), 2).unwrap();
    assert_eq!(zeros.explained_variance_ratios, vec![0.0, 0.0]);
}

#[test]
fn isotropic_noise_spreads_variance_evenly() {
    // Many samples of isotropic noise: top-3 share close to 3 / dim.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 24;
    let m = DMatrix::from_fn(4000, dim, |_, _| rng.random_range(-1.0..1.0));
    let res = pca(&m, 3).unwrap();
    let expected = 3.0 / dim as f64;
    assert!((res.top_ratio_sum(3) - expected).abs() < 0.25 * expected, "{}", res.top_ratio_sum(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ratios_are_sorted_and_components_orthonormal(
        rows in 2usize..12, cols in 1usize..7, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0));
        let k = rows.min(cols);
        let res = pca(&m, k).unwrap();
        let r = &res.explained_variance_ratios;
        prop_assert!(r.iter().all(|&x| x >= 0.0));
        prop_assert!(r.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        prop_assert!(r.iter().sum::<f64>() <= 1.0 + 1e-9);
        for i in 0..k {
            for j in 0..k {
                let d: f64 = res.components[i].iter().zip(&res.components[j]).map(|(a, b)| a * b).sum();
                prop_assert!((d - (i == j) as u8 as f64).abs() < 1e-6);
            }
        }
    }
}
