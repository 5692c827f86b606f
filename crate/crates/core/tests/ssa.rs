use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpi_ssa::linalg::{symmetric_eigen, SquareMatrix};
use tpi_ssa::ssa::{correlation, embed, principal_components};
use tpi_ssa::{decompose, EmbeddingConfig};

fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-5.0..20.0)).collect()
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n + 2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n + 2).map(|k| b[i][k] * b[j][k]).sum()).collect())
        .collect();
    SquareMatrix::from_rows(&rows)
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 3, 5, 8, 12] {
        let c = random_psd(&mut rng, n);
        let ours = symmetric_eigen(&c).unwrap();
        let flat: Vec<f64> = c.to_rows().concat();
        let theirs = DMatrix::from_row_slice(n, n, &flat).symmetric_eigen();
        let mut expected: Vec<f64> = theirs.eigenvalues.iter().copied().collect();
        expected.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        for (a, b) in ours.values.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-10 * expected[0].abs(), "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn spectral_theorem_reconstructs_random_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = random_psd(&mut rng, 5);
    let e = symmetric_eigen(&c).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let s: f64 = (0..5).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
            assert!((s - c[(i, j)]).abs() <= 1e-8 * c.max_abs());
        }
    }
    for i in 0..5 {
        for j in 0..5 {
            let dot: f64 = (0..5).map(|k| e.vectors[i][k] * e.vectors[j][k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() <= 1e-8);
        }
        // residual ‖Cρ − λρ‖
        let cr = c.mul_vec(&e.vectors[i]);
        let r: f64 = cr.iter().zip(&e.vectors[i]).map(|(a, b)| (a - e.values[i] * b).powi(2)).sum::<f64>().sqrt();
        assert!(r <= 1e-8 * e.values[0].abs());
    }
}

/// Direct loop: A_i(t) = Σ_j X(t + j − 1) ρ_i(j) for t = 1 ..= L − N_c + 1.
fn principal_oracle(x: &[f64], rho: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_c = rho.len();
    let mut out = vec![vec![0.0; x.len() - n_c + 1]; n_c];
    for i in 0..n_c {
        for t in 1..=x.len() - n_c + 1 {
            let mut s = 0.0;
            for j in 1..=n_c {
                s += x[t + j - 2] * rho[i][j - 1];
            }
            out[i][t - 1] = s;
        }
    }
    out
}

#[test]
fn principal_components_match_direct_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_series(&mut rng, 100);
    let d = decompose(&x, &EmbeddingConfig::new(5)).unwrap();
    let want = principal_oracle(&x, &d.eigenvectors);
    let got = principal_components(&x, &d.eigenvectors);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.len(), w.len());
        for (a, b) in g.iter().zip(w) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

/// Diagonal averaging written from scratch: R_i(t) is the mean over all
/// windows covering t of A_i(window start) ρ_i(offset).
fn reconstruct_oracle(x: &[f64], rho: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_c = rho.len();
    let len = x.len();
    let a = principal_oracle(x, rho);
    let mut out = vec![vec![0.0; len]; n_c];
    for i in 0..n_c {
        for t in 0..len {
            let (mut s, mut m) = (0.0, 0);
            for start in 0..=len - n_c {
                if t >= start && t < start + n_c {
                    s += a[i][start] * rho[i][t - start];
                    m += 1;
                }
            }
            out[i][t] = s / m as f64;
        }
    }
    out
}

#[test]
fn reconstruction_matches_window_averaging() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n_c in [3, 5, 8] {
        let x = random_series(&mut rng, 60);
        let d = decompose(&x, &EmbeddingConfig::new(n_c)).unwrap();
        let want = reconstruct_oracle(&x, &d.eigenvectors);
        for (g, w) in d.reconstructed.iter().zip(&want) {
            for (a, b) in g.iter().zip(w) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "n_c={n_c}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn cosine_energy_sits_in_leading_pair() {
    let x: Vec<f64> = (0..100).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 8.0).cos()).collect();
    let d = decompose(&x, &EmbeddingConfig::new(5)).unwrap();
    let centered = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
    };
    let total = centered(&x);
    let pair = d.sum_components([1, 2]);
    let energy = centered(&pair);
    assert!(energy > 0.95 * total, "{energy} of {total}");
}

#[test]
fn constant_series_lands_in_first_component() {
    let c = 7.25;
    let d = decompose(&[c; 40], &EmbeddingConfig::new(5)).unwrap();
    for v in &d.reconstructed[0] {
        assert!((v - c).abs() <= 1e-8 * c);
    }
    for r in &d.reconstructed[1..] {
        assert!(r.iter().all(|v| v.abs() <= 1e-8 * c));
    }
}

#[test]
fn correlation_is_symmetric_and_scaled() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_series(&mut rng, 50);
    let c = correlation(&embed(&x, &EmbeddingConfig::new(6)).unwrap());
    assert_eq!(c.max_asymmetry(), 0.0);

    let c = correlation(&embed(&[3.0; 20], &EmbeddingConfig::new(2)).unwrap());
    let want = 9.0 * 18.0 / 20.0;
    for i in 0..2 {
        for j in 0..2 {
            assert!((c[(i, j)] - want).abs() < 1e-12);
        }
    }
}
