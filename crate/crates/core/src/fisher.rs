//! Per-event Fisher information on δν of the binned coincidence
//! distribution, and the single-parameter Cramér–Rao bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalized_profile, EmitterPairParams, MeasurementConfig};

/// Default finite-difference step, Hz.
pub const DEFAULT_STEP: f64 = 1e6;
/// Bins with a smaller normalized probability are left out of the sum.
pub const MIN_BIN_PROBABILITY: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherPoint {
    /// Information per detected coincidence, 1/Hz².
    pub fisher: f64,
    /// Bins excluded because their probability fell below the floor.
    pub dropped_bins: usize,
}

/// `F(δν) = Σ_i (∂g_i/∂δν)² / g_i` with a central difference of the
/// normalized binned profile.
pub fn fisher_info(
    params: &EmitterPairParams,
    cfg: &MeasurementConfig,
    delta_nu: f64,
    step: f64,
) -> Result<FisherPoint> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::ParameterDomain(format!("finite-difference step {step} must be > 0")));
    }
    if !(delta_nu.is_finite() && delta_nu >= 0.0) {
        return Err(Error::ParameterDomain("delta_nu must be >= 0".into()));
    }
    let params = params.with_delta_nu(delta_nu);
    params.validate()?;
    cfg.validate()?;
    let centers = cfg.bin_centers();
    let profile_at = |dnu: f64| {
        // the model is even in δν, so δν − step < 0 is a valid evaluation point
        let mut shape = params.shape();
        shape.delta_nu = dnu;
        normalized_profile(&shape, &centers, cfg.t_bin)
    };
    let g = profile_at(delta_nu)?;
    let gp = profile_at(delta_nu + step)?;
    let gm = profile_at(delta_nu - step)?;
    let mut fisher = 0.0;
    let mut dropped_bins = 0;
    for i in 0..g.len() {
        if g[i] < MIN_BIN_PROBABILITY {
            dropped_bins += 1;
            continue;
        }
        let d = (gp[i] - gm[i]) / (2.0 * step);
        fisher += d * d / g[i];
    }
    Ok(FisherPoint { fisher, dropped_bins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub delta_nu_grid: Vec<f64>,
    pub fisher: Vec<f64>,
    /// `1/sqrt(n_tot·F)`, Hz; infinite where F = 0.
    pub crb_sigma: Vec<f64>,
    pub dropped_bins: Vec<usize>,
}

pub fn crb_sigma(n_tot: f64, fisher: f64) -> f64 {
    if fisher > 0.0 {
        1.0 / (n_tot * fisher).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Fisher information and Cramér–Rao σ across a δν grid.
pub fn crb_curve(
    params: &EmitterPairParams,
    cfg: &MeasurementConfig,
    grid: &[f64],
    step: f64,
) -> Result<FisherResult> {
    let points = grid
        .par_iter()
        .map(|&dnu| fisher_info(params, cfg, dnu, step))
        .collect::<Result<Vec<_>>>()?;
    Ok(FisherResult {
        delta_nu_grid: grid.to_vec(),
        crb_sigma: points.iter().map(|p| crb_sigma(cfg.n_tot, p.fisher)).collect(),
        fisher: points.iter().map(|p| p.fisher).collect(),
        dropped_bins: points.iter().map(|p| p.dropped_bins).collect(),
    })
}
