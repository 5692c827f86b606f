//! Exit criteria, one line each. Runs without the libtest harness so every
//! line prints regardless of failures; the process exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpi_ssa::{
    bin_profile, bootstrap_uncertainty, compare_speed, crb_curve, decompose, estimate_delta_nu, fit_model,
    metrology_errors, run_sweep, sample_histogram, ComponentChoice, EmbeddingConfig, EmitterPairParams, FitOptions,
    FitParams, MeasurementConfig, PointReport, StudyBase, StudyReport, SweepParameter, SweepSpec,
};

const MHZ: f64 = 1e6;
const RUNS: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sweep(parameter: SweepParameter, values: Vec<f64>, base: StudyBase, seed: u64) -> StudyReport {
    run_sweep(&SweepSpec { swept_parameter: parameter, values, base, runs_per_point: RUNS, seed }).unwrap()
}

fn sem(p: &PointReport) -> f64 {
    p.eps_v.unwrap() / (p.successes().len() as f64).sqrt()
}

fn completeness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n_c = [3, 5, 8][i % 3];
        let x: Vec<f64> = (0..100).map(|_| rng.random_range(-100.0..100.0)).collect();
        let d = decompose(&x, &EmbeddingConfig::new(n_c)).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sum = d.sum_components(1..=n_c);
        for (a, b) in sum.iter().zip(&x) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 10.0, format!("max rel error {worst:.2e}, {secs:.2} s"))
}

fn noiseless_recovery() -> Outcome {
    let cfg = MeasurementConfig::standard();
    let mut pass = true;
    let mut parts = Vec::new();
    for dnu in [600.0, 140.0, 350.0, 440.0, 650.0] {
        let p = EmitterPairParams::standard().with_delta_nu(dnu * MHZ);
        let h = bin_profile(&p, &cfg).unwrap();
        let est = estimate_delta_nu(&h, &EmbeddingConfig::default(), None).map(|e| e.delta_nu_hat / MHZ);
        match est {
            Ok(e) => {
                let ok = (e - dnu).abs() <= 20.0;
                pass &= ok;
                parts.push(format!("{dnu:.0}→{e:.1}{}", if ok { "" } else { "(!)" }));
            }
            Err(err) => {
                pass = false;
                parts.push(format!("{dnu:.0}→error {err}"));
            }
        }
    }
    outcome(pass, format!("MHz {}", parts.join(" ")))
}

fn finite_statistics(report: &StudyReport, secs: f64) -> Outcome {
    let target = 600.0 * MHZ;
    let band_center = 0.25 / MeasurementConfig::standard().t_bin;
    let mut pass = secs < 300.0;
    let mut parts = Vec::new();
    for p in &report.points {
        let mean = p.mean.unwrap();
        let eps_v = p.eps_v.unwrap();
        let bias = mean - target;
        let ok = if p.swept_value >= 500.0 {
            bias.abs() <= eps_v
        } else if p.swept_value == 100.0 {
            bias.abs() > eps_v && bias.signum() == (band_center - target).signum()
        } else {
            true
        };
        pass &= ok;
        parts.push(format!(
            "n={:.0}: {:.1}±{:.1}{}",
            p.swept_value,
            mean / MHZ,
            eps_v / MHZ,
            if ok { "" } else { "(!)" }
        ));
    }
    outcome(pass, format!("{} [{secs:.1} s]", parts.join(", ")))
}

fn visibility(report: &StudyReport) -> Outcome {
    // points ordered by increasing v
    let pts = &report.points;
    let lo = pts.first().unwrap();
    let hi = pts.last().unwrap();
    let spread_ok = lo.eps_v.unwrap() >= 1.5 * hi.eps_v.unwrap();
    let bias = |p: &PointReport| p.targets[0].bias.abs();
    let mut bias_ok = bias(lo) > bias(hi);
    for w in pts.windows(2) {
        // |bias| may not drop by more than two combined standard errors as v grows
        let tol = 2.0 * (sem(&w[0]).powi(2) + sem(&w[1]).powi(2)).sqrt();
        bias_ok &= bias(&w[0]) >= bias(&w[1]) - tol;
    }
    let parts: Vec<String> = pts
        .iter()
        .map(|p| format!("v={:.1}: εV {:.1} |b| {:.1}", p.swept_value, p.eps_v.unwrap() / MHZ, bias(p) / MHZ))
        .collect();
    outcome(spread_ok && bias_ok, format!("MHz {}", parts.join(", ")))
}

fn spectral_jump(report: &StudyReport) -> Outcome {
    // w is the weight of the 600 MHz line
    let pts = &report.points;
    let means: Vec<f64> = pts.iter().map(|p| p.mean.unwrap()).collect();
    let mut pass = true;
    for i in 0..pts.len() - 1 {
        let tol = 2.0 * (sem(&pts[i]).powi(2) + sem(&pts[i + 1]).powi(2)).sqrt();
        pass &= means[i + 1] >= means[i] - tol;
    }
    for (p, m) in pts.iter().zip(&means) {
        let tol = 2.0 * sem(p);
        pass &= *m >= 300.0 * MHZ - tol - 10.0 * MHZ && *m <= 600.0 * MHZ + tol + 10.0 * MHZ;
    }
    let ev: Vec<f64> = pts.iter().map(|p| p.eps_v.unwrap()).collect();
    let mid = pts.iter().position(|p| p.swept_value == 0.5).unwrap();
    pass &= ev[mid] > ev[0] && ev[mid] > ev[pts.len() - 1];
    let parts: Vec<String> = pts
        .iter()
        .zip(&ev)
        .map(|(p, e)| format!("w={:.2}: {:.1}±{:.1}", p.swept_value, p.mean.unwrap() / MHZ, e / MHZ))
        .collect();
    outcome(pass, format!("MHz {}", parts.join(", ")))
}

fn fisher_behavior() -> Outcome {
    let grid: Vec<f64> = (1..=90).map(|i| i as f64 * 10.0 * MHZ).collect();
    let res = crb_curve(&EmitterPairParams::standard(), &MeasurementConfig::standard(), &grid, 1.0 * MHZ).unwrap();
    let f = &res.fisher;
    let nonneg = f.iter().all(|&v| v >= 0.0);
    let max = f.iter().cloned().fold(0.0, f64::max);
    let ratio = f[0] / max;
    let minima: Vec<f64> = (1..f.len() - 1)
        .filter(|&i| f[i] < f[i - 1] && f[i] < f[i + 1])
        .map(|i| grid[i] / MHZ)
        .collect();
    outcome(
        nonneg && ratio < 0.05 && !minima.is_empty(),
        format!("F≥0 {nonneg}, F(10 MHz)/max {ratio:.3}, interior minima at {minima:?} MHz"),
    )
}

fn fit_baseline() -> Outcome {
    let p = EmitterPairParams::standard();
    let h = bin_profile(&p, &MeasurementConfig::standard()).unwrap();
    let init = FitParams::from_emitters(&p, 500.0);
    let (mut nonconv, mut high) = (0, 0);
    let mut bad = 0;
    for seed in 0..100 {
        let r = fit_model(&sample_histogram(&h, 10_000 + seed), &init, FitOptions::default().max_iterations).unwrap();
        nonconv += usize::from(!r.converged);
        high += usize::from(r.params.delta_nu >= 1e9);
        bad += usize::from(!r.converged || r.params.delta_nu >= 1e9);
    }
    let speed =
        compare_speed(&sample_histogram(&h, 10_000), &init, &EmbeddingConfig::default(), &FitOptions::default()).unwrap();
    let ratio = speed.ratio();
    outcome(
        bad >= 50 && ratio >= 10.0,
        format!("{bad}/100 non-converged or ≥1 GHz ({nonconv} non-converged, {high} ≥1 GHz); fit/SSA time {ratio:.0}×"),
    )
}

fn error_identity(reports: &[&StudyReport]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for r in reports {
        for p in &r.points {
            let ok = p.successes();
            for t in &p.targets {
                let e = metrology_errors(&ok, t.target).unwrap();
                let b = e.bias(t.target);
                for (rms, ev) in [(e.eps_rms, e.eps_v), (t.eps_rms, p.eps_v.unwrap())] {
                    let lhs = rms * rms;
                    let rhs = ev * ev + b * b;
                    worst = worst.max((lhs - rhs).abs() / lhs);
                    checked += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checked} checks, max rel deviation {worst:.2e}"))
}

fn bootstrap_contract() -> Outcome {
    let p = EmitterPairParams::standard();
    let emb = EmbeddingConfig::default();
    let mut sigmas = Vec::new();
    let mut deterministic = true;
    for (n_tot, seed) in [(500.0, 71), (12_500.0, 72)] {
        let cfg = MeasurementConfig { n_tot, ..MeasurementConfig::standard() };
        let obs = sample_histogram(&bin_profile(&p, &cfg).unwrap(), seed);
        let a = bootstrap_uncertainty(&obs, &emb, &ComponentChoice::Auto, 1000, 9).unwrap();
        let b = bootstrap_uncertainty(&obs, &emb, &ComponentChoice::Auto, 1000, 9).unwrap();
        deterministic &= a == b;
        sigmas.push(a.sigma_hat);
    }
    let shrink = sigmas[0] / sigmas[1];
    outcome(
        deterministic && shrink >= 5f64.sqrt(),
        format!(
            "deterministic {deterministic}; σ {:.2} → {:.2} MHz, ratio {shrink:.2} (need ≥ {:.3})",
            sigmas[0] / MHZ,
            sigmas[1] / MHZ,
            5f64.sqrt()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    results.push((1, "SSA completeness identity", completeness()));
    results.push((2, "noiseless recovery within 20 MHz", noiseless_recovery()));

    let started = Instant::now();
    let counts = sweep(SweepParameter::NTot, vec![100.0, 200.0, 300.0, 500.0, 1000.0], StudyBase::standard(), 2024);
    let secs = started.elapsed().as_secs_f64();
    results.push((3, "finite-statistics bias vs n_tot", finite_statistics(&counts, secs)));

    let vis = sweep(SweepParameter::V, vec![0.2, 0.4, 0.6, 0.8, 1.0], StudyBase::standard(), 2025);
    results.push((4, "visibility degradation", visibility(&vis)));

    let mut jump_base = StudyBase::standard();
    jump_base.jump_delta_nu = Some(300.0 * MHZ);
    let jump = sweep(SweepParameter::JumpW, vec![0.0, 0.25, 0.5, 0.75, 1.0], jump_base, 2026);
    results.push((5, "spectral jump mixtures", spectral_jump(&jump)));

    results.push((6, "Fisher information shape", fisher_behavior()));
    results.push((7, "fit baseline comparison", fit_baseline()));
    results.push((8, "error-metric identity", error_identity(&[&counts, &vis, &jump])));
    results.push((9, "bootstrap uncertainty contract", bootstrap_contract()));

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
