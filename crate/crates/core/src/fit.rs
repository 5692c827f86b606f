//! Least-squares fit of the full coincidence model, the parametric
//! baseline the spectral estimator is compared against.
//!
//! Seven free parameters: τ₁, τ₂, γ, Σ, v, δν and an amplitude A, with the
//! model `A·g_i(θ)` over the normalized binned profile. Minimization is a
//! Levenberg–Marquardt iteration on internally rescaled coordinates with a
//! central finite-difference Jacobian and box constraints by projection.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalized_profile, CoincidenceHistogram, EmitterPairParams, ProfileShape};
use crate::spectral::estimate_delta_nu;
use crate::ssa::EmbeddingConfig;

/// Iteration cap used when none is given.
pub const DEFAULT_MAX_ITERATIONS: usize = 200;
/// Relative step and relative rss-change tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const N_PARAMS: usize = 7;
const MIN_TAU: f64 = 1e-12;
// seconds→ns, Hz→GHz; keeps the normal equations well scaled
const TIME_SCALE: f64 = 1e-9;
const RATE_SCALE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub tau1: f64,
    pub tau2: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub v: f64,
    pub delta_nu: f64,
    pub amplitude: f64,
}

impl FitParams {
    pub fn from_shape(shape: &ProfileShape, amplitude: f64) -> Self {
        Self {
            tau1: shape.tau1,
            tau2: shape.tau2,
            gamma: shape.gamma,
            sigma: shape.sigma,
            v: shape.v,
            delta_nu: shape.delta_nu,
            amplitude,
        }
    }

    pub fn from_emitters(p: &EmitterPairParams, amplitude: f64) -> Self {
        Self::from_shape(&p.shape(), amplitude)
    }

    pub fn shape(&self) -> ProfileShape {
        ProfileShape {
            tau1: self.tau1,
            tau2: self.tau2,
            gamma: self.gamma,
            sigma: self.sigma,
            v: self.v,
            delta_nu: self.delta_nu,
        }
    }

    /// Splits the fitted γ and Σ equally between the emitters.
    pub fn to_emitters(&self) -> EmitterPairParams {
        let dephasing = (self.gamma - 0.5 / self.tau1 - 0.5 / self.tau2).max(0.0);
        let s = self.sigma / 2f64.sqrt();
        EmitterPairParams {
            tau1: self.tau1,
            tau2: self.tau2,
            gamma1: 0.5 * dephasing,
            gamma2: 0.5 * dephasing,
            sigma1: s,
            sigma2: s,
            delta_nu: self.delta_nu,
            v: self.v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape().validate()?;
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::ParameterDomain("amplitude must be positive".into()));
        }
        Ok(())
    }

    fn to_scaled(self, amp_scale: f64) -> [f64; N_PARAMS] {
        [
            self.tau1 / TIME_SCALE,
            self.tau2 / TIME_SCALE,
            self.gamma / RATE_SCALE,
            self.sigma / RATE_SCALE,
            self.v,
            self.delta_nu / RATE_SCALE,
            self.amplitude / amp_scale,
        ]
    }

    fn from_scaled(x: &[f64], amp_scale: f64) -> Self {
        Self {
            tau1: x[0] * TIME_SCALE,
            tau2: x[1] * TIME_SCALE,
            gamma: x[2] * RATE_SCALE,
            sigma: x[3] * RATE_SCALE,
            v: x[4],
            delta_nu: x[5] * RATE_SCALE,
            amplitude: x[6] * amp_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitParams,
    pub converged: bool,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    /// Wall-clock duration, s.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: DEFAULT_MAX_ITERATIONS, tolerance: DEFAULT_TOLERANCE }
    }
}

struct Problem<'a> {
    centers: &'a [f64],
    counts: &'a [f64],
    t_bin: f64,
    amp_scale: f64,
    /// Upper bound on δν in scaled units (twice Nyquist).
    max_delta_nu: f64,
}

impl Problem<'_> {
    fn model(&self, x: &[f64]) -> Option<Vec<f64>> {
        let p = FitParams::from_scaled(x, self.amp_scale);
        if p.tau1 <= 0.0 || p.tau2 <= 0.0 {
            return None;
        }
        let g = normalized_profile(&p.shape(), self.centers, self.t_bin).ok()?;
        Some(g.into_iter().map(|gi| p.amplitude * gi).collect())
    }

    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.model(x)?;
        Some(self.counts.iter().zip(m).map(|(n, mi)| n - mi).collect())
    }

    fn rss(&self, x: &[f64]) -> f64 {
        self.residuals(x)
            .map(|r| r.iter().map(|v| v * v).sum())
            .unwrap_or(f64::INFINITY)
    }

    fn project(&self, x: &mut [f64]) {
        let tau_min = MIN_TAU / TIME_SCALE;
        x[0] = x[0].max(tau_min);
        x[1] = x[1].max(tau_min);
        // γ ≥ 1/(2τ₁) + 1/(2τ₂), in GHz with τ in ns
        let floor = 0.5 / x[0] + 0.5 / x[1];
        x[2] = x[2].max(floor);
        // the model is even in Σ and δν: mirror instead of clamping, since
        // Σ = 0 is a stationary point a clamped iterate never leaves
        x[3] = x[3].abs();
        x[4] = x[4].clamp(0.0, 1.0);
        x[5] = x[5].abs().min(self.max_delta_nu);
        x[6] = x[6].max(0.0);
    }

    /// Central differences of the model, ∂(A·g)/∂x_j.
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.counts.len();
        let mut jac = DMatrix::zeros(n, N_PARAMS);
        for j in 0..N_PARAMS {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let mp = self.model(&xp)?;
            let mm = self.model(&xm)?;
            for i in 0..n {
                jac[(i, j)] = (mp[i] - mm[i]) / (2.0 * h);
            }
        }
        Some(jac)
    }
}

pub fn fit_model(hist: &CoincidenceHistogram, init: &FitParams, max_iterations: usize) -> Result<FitResult> {
    fit_model_with(hist, init, &FitOptions { max_iterations, ..FitOptions::default() })
}

/// Levenberg–Marquardt minimization of Σ (n_i − A·g_i(θ))².
///
/// Non-convergence is reported through `converged = false`, never as an
/// error.
pub fn fit_model_with(hist: &CoincidenceHistogram, init: &FitParams, opts: &FitOptions) -> Result<FitResult> {
    init.validate()?;
    let started = Instant::now();
    let amp_scale = init.amplitude.max(1e-300);
    let problem = Problem {
        centers: hist.t_centers(),
        counts: hist.counts(),
        t_bin: hist.t_bin(),
        amp_scale,
        max_delta_nu: 2.0 * (0.5 / hist.t_bin()) / RATE_SCALE,
    };

    let mut x = init.to_scaled(amp_scale).to_vec();
    problem.project(&mut x);
    let mut rss = problem.rss(&x);
    let initial_rss = rss;
    let data_scale: f64 = hist.counts().iter().map(|c| c * c).sum::<f64>().max(f64::MIN_POSITIVE);

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations && !converged {
        iterations += 1;
        if rss <= 1e-28 * data_scale {
            converged = true;
            break;
        }
        let Some(jac) = problem.jacobian(&x) else {
            break;
        };
        let r = DVector::from_vec(problem.residuals(&x).expect("current point is feasible"));
        let jt = jac.transpose();
        let hess = &jt * &jac;
        let grad = &jt * &r;
        let diag_floor = 1e-12 * hess.diagonal().max().max(f64::MIN_POSITIVE);

        let mut stepped = false;
        while lambda < 1e16 {
            let mut a = hess.clone();
            for j in 0..N_PARAMS {
                a[(j, j)] += lambda * hess[(j, j)].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta = chol.solve(&grad);
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            problem.project(&mut trial);
            let trial_rss = problem.rss(&trial);

            let step_norm = x
                .iter()
                .zip(&trial)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let x_norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let rel_step = step_norm / (x_norm + opts.tolerance);
            let rel_change = (rss - trial_rss).abs() / rss.max(f64::MIN_POSITIVE);

            if trial_rss < rss {
                x = trial;
                rss = trial_rss;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if rel_step < opts.tolerance && rel_change < opts.tolerance {
                    converged = true;
                }
                break;
            }
            if rel_step < opts.tolerance && rel_change < opts.tolerance {
                // no descent left at numerical resolution
                converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if !stepped && !converged {
            break;
        }
    }

    Ok(FitResult {
        params: FitParams::from_scaled(&x, amp_scale),
        converged,
        rss,
        initial_rss,
        iterations,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedComparison {
    /// Wall-clock time of one spectral estimate, s.
    pub ssa_time: f64,
    /// Wall-clock time of one fit, s.
    pub fit_time: f64,
}

impl SpeedComparison {
    pub fn ratio(&self) -> f64 {
        self.fit_time / self.ssa_time
    }
}

/// Times the spectral pipeline and the fit on the same histogram. The SSA
/// timing is the median of several repetitions since a single run is
/// close to timer resolution.
pub fn compare_speed(
    hist: &CoincidenceHistogram,
    init: &FitParams,
    embedding: &EmbeddingConfig,
    opts: &FitOptions,
) -> Result<SpeedComparison> {
    let mut ssa_times: Vec<f64> = (0..15)
        .map(|_| {
            let t = Instant::now();
            let _ = std::hint::black_box(estimate_delta_nu(hist, embedding, None));
            t.elapsed().as_secs_f64()
        })
        .collect();
    ssa_times.sort_by(f64::total_cmp);
    let fit = fit_model_with(hist, init, opts)?;
    Ok(SpeedComparison { ssa_time: ssa_times[ssa_times.len() / 2], fit_time: fit.wall_time })
}
