//! Two-photon interference coincidence model.
//!
//! The coincidence density around zero delay is an exponential wave-packet
//! envelope minus a visibility-weighted quantum beat at the emitters'
//! frequency separation, damped by homogeneous dephasing (exponential) and
//! spectral wandering (Gaussian). Binning integrates that density over each
//! detector time bin; counts are drawn from independent Poisson laws.
//!
//! All quantities are SI: seconds, and rates/frequencies in Hz.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Gauss–Legendre order used per bin (per half-bin when a bin straddles t = 0).
pub const BIN_QUADRATURE_ORDER: usize = 12;

/// Physical parameters of the emitter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterPairParams {
    /// Excited-state lifetimes, s.
    pub tau1: f64,
    pub tau2: f64,
    /// Pure dephasing rates, 1/s.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Spectral-wandering standard deviations, Hz.
    pub sigma1: f64,
    pub sigma2: f64,
    /// Central frequency separation, Hz.
    pub delta_nu: f64,
    /// Effective interference visibility.
    pub v: f64,
}

impl EmitterPairParams {
    /// Standard simulation parameters: τ = 4.5 ns, Γ = 50 MHz per emitter,
    /// Σ = 20 MHz, v = 1, δν = 0.6 GHz.
    pub fn standard() -> Self {
        let sigma = 20e6 / 2f64.sqrt();
        Self {
            tau1: 4.5e-9,
            tau2: 4.5e-9,
            gamma1: 50e6,
            gamma2: 50e6,
            sigma1: sigma,
            sigma2: sigma,
            delta_nu: 0.6e9,
            v: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tau1,
            self.tau2,
            self.gamma1,
            self.gamma2,
            self.sigma1,
            self.sigma2,
            self.delta_nu,
            self.v,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::ParameterDomain("all parameters must be finite".into()));
        }
        if self.tau1 <= 0.0 || self.tau2 <= 0.0 {
            return Err(Error::ParameterDomain("lifetimes must be positive".into()));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(Error::ParameterDomain("dephasing rates must be >= 0".into()));
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(Error::ParameterDomain("spectral wandering must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.v) {
            return Err(Error::ParameterDomain(format!("v = {} outside [0, 1]", self.v)));
        }
        if self.delta_nu < 0.0 {
            return Err(Error::ParameterDomain("delta_nu must be >= 0".into()));
        }
        Ok(())
    }

    /// Total beat damping rate γ = 1/(2τ₁) + 1/(2τ₂) + Γ₁ + Γ₂.
    pub fn gamma(&self) -> f64 {
        0.5 / self.tau1 + 0.5 / self.tau2 + self.gamma1 + self.gamma2
    }

    /// Σ = sqrt(σ₁² + σ₂²).
    pub fn sigma_total(&self) -> f64 {
        self.sigma1.hypot(self.sigma2)
    }

    pub fn shape(&self) -> ProfileShape {
        ProfileShape {
            tau1: self.tau1,
            tau2: self.tau2,
            gamma: self.gamma(),
            sigma: self.sigma_total(),
            v: self.v,
            delta_nu: self.delta_nu,
        }
    }

    pub fn with_delta_nu(mut self, delta_nu: f64) -> Self {
        self.delta_nu = delta_nu;
        self
    }

    /// Sets Σ, splitting it equally between the two emitters.
    pub fn with_sigma_total(mut self, sigma: f64) -> Self {
        let s = sigma / 2f64.sqrt();
        self.sigma1 = s;
        self.sigma2 = s;
        self
    }

    /// Sets Γ₁ + Γ₂, splitting it equally between the two emitters.
    pub fn with_dephasing_total(mut self, gamma: f64) -> Self {
        self.gamma1 = 0.5 * gamma;
        self.gamma2 = 0.5 * gamma;
        self
    }
}

/// The reduced parameter set the profile actually depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileShape {
    pub tau1: f64,
    pub tau2: f64,
    /// Total exponential damping of the beat, 1/s.
    pub gamma: f64,
    /// Total spectral wandering Σ, Hz.
    pub sigma: f64,
    pub v: f64,
    pub delta_nu: f64,
}

impl ProfileShape {
    /// Coincidence density at delay `t`. No domain checks.
    #[inline]
    pub fn density(&self, t: f64) -> f64 {
        let at = t.abs();
        let norm = self.tau1 + self.tau2;
        let envelope = ((-at / self.tau1).exp() + (-at / self.tau2).exp()) / (4.0 * norm);
        let damping = (-self.gamma * at - 2.0 * PI * PI * self.sigma * self.sigma * t * t).exp();
        let beat = self.v / (2.0 * norm) * damping * (2.0 * PI * self.delta_nu * t).cos();
        envelope - beat
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.tau1, self.tau2, self.gamma, self.sigma, self.v, self.delta_nu];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::ParameterDomain("all parameters must be finite".into()));
        }
        if self.tau1 <= 0.0 || self.tau2 <= 0.0 {
            return Err(Error::ParameterDomain("lifetimes must be positive".into()));
        }
        let floor = 0.5 / self.tau1 + 0.5 / self.tau2;
        if self.gamma < floor * (1.0 - 1e-12) {
            return Err(Error::ParameterDomain(format!(
                "gamma = {:e} below radiative floor {floor:e}",
                self.gamma
            )));
        }
        if self.sigma < 0.0 || self.delta_nu < 0.0 || !(0.0..=1.0).contains(&self.v) {
            return Err(Error::ParameterDomain("sigma, delta_nu must be >= 0 and v in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Value of the coincidence model at delay `t` (seconds).
pub fn eval_g2(params: &EmitterPairParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !t.is_finite() {
        return Err(Error::ParameterDomain("delay must be finite".into()));
    }
    Ok(params.shape().density(t))
}

/// Acquisition geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    /// Detector bin width, s.
    pub t_bin: f64,
    /// Half-span of the delay axis, s.
    pub t_meas: f64,
    /// Expected total number of coincidences.
    pub n_tot: f64,
}

impl MeasurementConfig {
    /// 0.5 ns bins over ±25 ns, 500 events.
    pub fn standard() -> Self {
        Self { t_bin: 0.5e-9, t_meas: 25e-9, n_tot: 500.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_bin.is_finite() && self.t_bin > 0.0) {
            return Err(Error::Measurement("t_bin must be positive".into()));
        }
        if !(self.t_meas.is_finite() && self.t_meas > self.t_bin) {
            return Err(Error::Measurement("t_meas must exceed t_bin".into()));
        }
        if !(self.n_tot.is_finite() && self.n_tot > 0.0) {
            return Err(Error::Measurement("n_tot must be positive".into()));
        }
        if self.bin_count() < 4 {
            return Err(Error::Measurement("fewer than 4 bins".into()));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        (2.0 * self.t_meas / self.t_bin).round() as usize
    }

    /// Bin centers −T_meas + (i + 1/2)·T_bin.
    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.bin_count())
            .map(|i| -self.t_meas + (i as f64 + 0.5) * self.t_bin)
            .collect()
    }
}

/// Time-binned coincidence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    t_centers: Vec<f64>,
    counts: Vec<f64>,
}

impl CoincidenceHistogram {
    pub fn new(t_centers: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        Self::with_spacing_tolerance(t_centers, counts, 1e-9)
    }

    /// Like [`CoincidenceHistogram::new`] but accepts spacing deviations up
    /// to `rel_tol` of the mean spacing, then regularizes the axis.
    pub fn with_spacing_tolerance(
        t_centers: Vec<f64>,
        counts: Vec<f64>,
        rel_tol: f64,
    ) -> Result<Self> {
        if t_centers.len() != counts.len() {
            return Err(Error::Histogram(format!(
                "{} delays but {} counts",
                t_centers.len(),
                counts.len()
            )));
        }
        if t_centers.len() < 4 {
            return Err(Error::Histogram("at least 4 bins required".into()));
        }
        if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Histogram(format!("invalid count {c}")));
        }
        if t_centers.iter().any(|t| !t.is_finite()) {
            return Err(Error::Histogram("non-finite delay".into()));
        }
        let n = t_centers.len();
        let first = t_centers[0];
        let spacing = (t_centers[n - 1] - first) / (n - 1) as f64;
        if spacing <= 0.0 {
            return Err(Error::Histogram("delays must be strictly increasing".into()));
        }
        for (i, w) in t_centers.windows(2).enumerate() {
            let d = w[1] - w[0];
            if d <= 0.0 {
                return Err(Error::Histogram("delays must be strictly increasing".into()));
            }
            if ((d - spacing) / spacing).abs() > rel_tol {
                return Err(Error::Histogram(format!(
                    "non-uniform spacing at bin {i}: {d:e} vs {spacing:e}"
                )));
            }
        }
        let t_centers = if rel_tol > 1e-9 {
            (0..n).map(|i| first + i as f64 * spacing).collect()
        } else {
            t_centers
        };
        Ok(Self { t_centers, counts })
    }

    pub fn t_centers(&self) -> &[f64] {
        &self.t_centers
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn t_bin(&self) -> f64 {
        let n = self.t_centers.len();
        (self.t_centers[n - 1] - self.t_centers[0]) / (n - 1) as f64
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Same axis, new counts.
    pub fn with_counts(&self, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != self.len() {
            return Err(Error::Histogram("count vector length mismatch".into()));
        }
        if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Histogram(format!("invalid count {c}")));
        }
        Ok(Self { t_centers: self.t_centers.clone(), counts })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_counts(self.counts.iter().map(|c| c * factor).collect())
    }

    /// Mirror image t → −t (counts reversed along the axis).
    pub fn reversed(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        let t_centers = self.t_centers.iter().rev().map(|t| -t).collect();
        Self { t_centers, counts }
    }
}

/// Integral of the density over one bin. Bins straddling zero are split
/// at the |t| cusp.
fn bin_integral(shape: &ProfileShape, gl: &GaussLegendre, center: f64, t_bin: f64) -> f64 {
    let a = center - 0.5 * t_bin;
    let b = center + 0.5 * t_bin;
    let f = |t| shape.density(t);
    if a < 0.0 && b > 0.0 {
        gl.integrate(a, 0.0, f) + gl.integrate(0.0, b, f)
    } else {
        gl.integrate(a, b, f)
    }
}

/// The normalized binned profile g_i on arbitrary bin centers. Performs no
/// parameter validation so that fitters and finite differences can probe
/// slightly outside the physical domain.
pub fn normalized_profile(shape: &ProfileShape, centers: &[f64], t_bin: f64) -> Result<Vec<f64>> {
    let gl = GaussLegendre::new(BIN_QUADRATURE_ORDER);
    let raw: Vec<f64> = centers.iter().map(|&c| bin_integral(shape, &gl, c, t_bin)).collect();
    let total: f64 = raw.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateProfile);
    }
    Ok(raw.into_iter().map(|x| (x / total).max(0.0)).collect())
}

/// Expected counts n_i = n_tot·g_i for every bin of `cfg`.
pub fn bin_profile(params: &EmitterPairParams, cfg: &MeasurementConfig) -> Result<CoincidenceHistogram> {
    params.validate()?;
    cfg.validate()?;
    let centers = cfg.bin_centers();
    let g = normalized_profile(&params.shape(), &centers, cfg.t_bin)?;
    let counts = g.into_iter().map(|x| x * cfg.n_tot).collect();
    Ok(CoincidenceHistogram { t_centers: centers, counts })
}

/// Replaces each bin by an independent Poisson draw with the bin's mean.
pub fn sample_histogram_with<R: Rng + ?Sized>(
    expected: &CoincidenceHistogram,
    rng: &mut R,
) -> CoincidenceHistogram {
    let counts = expected
        .counts
        .iter()
        .map(|&mean| {
            if mean <= 0.0 {
                0.0
            } else {
                // mean is finite and positive: invariant of the histogram.
                Poisson::new(mean).expect("valid Poisson mean").sample(rng)
            }
        })
        .collect();
    CoincidenceHistogram { t_centers: expected.t_centers.clone(), counts }
}

/// Seeded Poisson resampling; identical seeds give identical histograms.
pub fn sample_histogram(expected: &CoincidenceHistogram, seed: u64) -> CoincidenceHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_histogram_with(expected, &mut rng)
}

/// Expected histogram of a spectral jump: weight `w` spent at `params_a`,
/// `1 − w` at `params_b`.
pub fn mix_jump(
    params_a: &EmitterPairParams,
    params_b: &EmitterPairParams,
    w: f64,
    cfg: &MeasurementConfig,
) -> Result<CoincidenceHistogram> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::MixtureDomain(format!("weight {w} outside [0, 1]")));
    }
    if params_a.with_delta_nu(0.0) != params_b.with_delta_nu(0.0) {
        return Err(Error::MixtureDomain("parameters other than delta_nu differ".into()));
    }
    let a = bin_profile(params_a, cfg)?;
    let b = bin_profile(params_b, cfg)?;
    let counts = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(x, y)| w * x + (1.0 - w) * y)
        .collect();
    Ok(CoincidenceHistogram { t_centers: a.t_centers, counts })
}
