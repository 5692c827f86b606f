use proptest::prelude::*;

use tpi_ssa::linalg::symmetric_eigen;
use tpi_ssa::ssa::{correlation, embed};
use tpi_ssa::{
    bin_profile, decompose, estimate_delta_nu, eval_g2, metrology_errors, sample_histogram, EmbeddingConfig,
    EmitterPairParams, MeasurementConfig,
};

fn series_and_nc() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2usize..=10).prop_flat_map(|n_c| (prop::collection::vec(-1e3f64..1e3, (2 * n_c + 1)..120), Just(n_c)))
}

prop_compose! {
    fn emitters()(
        tau1 in 1e-9f64..10e-9,
        tau2 in 1e-9f64..10e-9,
        gamma1 in 0.0f64..200e6,
        gamma2 in 0.0f64..200e6,
        sigma1 in 0.0f64..60e6,
        sigma2 in 0.0f64..60e6,
        delta_nu in 0.0f64..1.5e9,
        v in 0.0f64..=1.0,
    ) -> EmitterPairParams {
        EmitterPairParams { tau1, tau2, gamma1, gamma2, sigma1, sigma2, delta_nu, v }
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_sum_to_series((x, n_c) in series_and_nc()) {
        let d = decompose(&x, &EmbeddingConfig::new(n_c)).unwrap();
        let sum = d.sum_components(1..=n_c);
        let scale = max_abs(&x).max(f64::MIN_POSITIVE);
        for (a, b) in sum.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn eigenpairs_are_ordered_orthonormal_and_accurate((x, n_c) in series_and_nc()) {
        let c = correlation(&embed(&x, &EmbeddingConfig::new(n_c)).unwrap());
        let e = symmetric_eigen(&c).unwrap();
        let l1 = e.values[0].abs();
        for w in e.values.windows(2) {
            prop_assert!(w[0].abs() >= w[1].abs());
        }
        for i in 0..n_c {
            prop_assert!(e.values[i] >= -1e-10 * l1);
            for j in 0..n_c {
                let dot: f64 = (0..n_c).map(|k| e.vectors[i][k] * e.vectors[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-8);
            }
            let cr = c.mul_vec(&e.vectors[i]);
            let r: f64 = cr.iter().zip(&e.vectors[i]).map(|(a, b)| (a - e.values[i] * b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r <= 1e-8 * l1.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn decomposition_is_deterministic((x, n_c) in series_and_nc()) {
        let cfg = EmbeddingConfig::new(n_c);
        prop_assert_eq!(decompose(&x, &cfg).unwrap(), decompose(&x, &cfg).unwrap());
    }

    #[test]
    fn reconstruction_scales_with_series((x, n_c) in series_and_nc(), alpha in 0.01f64..100.0) {
        let cfg = EmbeddingConfig::new(n_c);
        let d = decompose(&x, &cfg).unwrap();
        let y: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let ds = decompose(&y, &cfg).unwrap();
        // only well-separated eigenvalues define components uniquely
        let l1 = d.eigenvalues[0].abs().max(f64::MIN_POSITIVE);
        let scale = alpha * max_abs(&x).max(f64::MIN_POSITIVE);
        for i in 0..n_c {
            let gap = d.eigenvalues.iter().enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, l)| (l - d.eigenvalues[i]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < 1e-3 * l1 {
                continue;
            }
            for (a, b) in ds.reconstructed[i].iter().zip(&d.reconstructed[i]) {
                prop_assert!((a - alpha * b).abs() <= 1e-8 * scale, "component {}", i + 1);
            }
        }
    }

    #[test]
    fn density_is_even(p in emitters(), t in -25e-9f64..25e-9) {
        let a = eval_g2(&p, t).unwrap();
        let b = eval_g2(&p, -t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
    }

    #[test]
    fn density_nonnegative_for_equal_lifetimes(mut p in emitters(), t in -25e-9f64..25e-9) {
        p.tau2 = p.tau1;
        let g = eval_g2(&p, t).unwrap();
        let scale = 1.0 / (2.0 * p.tau1);
        prop_assert!(g >= -1e-12 * scale, "{g}");
    }

    #[test]
    fn binned_profile_sums_to_n_tot(mut p in emitters(), n_tot in 1.0f64..1e6) {
        p.tau2 = p.tau1;
        // keep the profile non-degenerate
        p.v = p.v.min(0.95);
        let cfg = MeasurementConfig { n_tot, ..MeasurementConfig::standard() };
        let h = bin_profile(&p, &cfg).unwrap();
        prop_assert!((h.total() - n_tot).abs() <= 1e-9 * n_tot);
        prop_assert!(h.counts().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn sampling_reproducible(seed in any::<u64>()) {
        let h = bin_profile(&EmitterPairParams::standard(), &MeasurementConfig::standard()).unwrap();
        prop_assert_eq!(sample_histogram(&h, seed), sample_histogram(&h, seed));
    }

    #[test]
    fn estimate_invariant_to_count_scale(seed in any::<u64>(), dnu in 200e6f64..900e6, alpha in 0.05f64..50.0) {
        let p = EmitterPairParams::standard().with_delta_nu(dnu);
        let h = sample_histogram(&bin_profile(&p, &MeasurementConfig::standard()).unwrap(), seed);
        let cfg = EmbeddingConfig::default();
        if let Ok(e) = estimate_delta_nu(&h, &cfg, None) {
            let es = estimate_delta_nu(&h.scaled(alpha).unwrap(), &cfg, None).unwrap();
            prop_assert!((es.delta_nu_hat - e.delta_nu_hat).abs() <= 1e-9 * e.delta_nu_hat);
            prop_assert_eq!(es.components_used, e.components_used);
        }
    }

    #[test]
    fn estimate_invariant_to_time_reversal(dnu in 100e6f64..950e6, v in 0.3f64..=1.0, sigma in 0.0f64..60e6) {
        let p = EmitterPairParams { v, ..EmitterPairParams::standard() }.with_delta_nu(dnu).with_sigma_total(sigma);
        let h = bin_profile(&p, &MeasurementConfig::standard()).unwrap();
        let cfg = EmbeddingConfig::default();
        match (estimate_delta_nu(&h, &cfg, None), estimate_delta_nu(&h.reversed(), &cfg, None)) {
            (Ok(a), Ok(b)) => prop_assert!((a.delta_nu_hat - b.delta_nu_hat).abs() <= 1e-9 * a.delta_nu_hat),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|e| e.delta_nu_hat), b.map(|e| e.delta_nu_hat)),
        }
    }

    #[test]
    fn rms_decomposes_into_spread_and_bias(
        est in prop::collection::vec(1e6f64..1e9, 2..200),
        target in 1e6f64..1e9,
    ) {
        let e = metrology_errors(&est, target).unwrap();
        let bias = e.bias(target);
        let lhs = e.eps_rms * e.eps_rms;
        let rhs = e.eps_v * e.eps_v + bias * bias;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(f64::MIN_POSITIVE));
        prop_assert!(e.eps_rms >= bias.abs() * (1.0 - 1e-12));
    }
}
