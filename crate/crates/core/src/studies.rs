//! Monte Carlo sweeps and Poisson-bootstrap uncertainties.
//!
//! Every realization draws from its own ChaCha stream keyed by
//! `(point, run)` under the master seed, so results do not depend on how
//! the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bin_profile, mix_jump, sample_histogram_with, CoincidenceHistogram, EmitterPairParams,
    MeasurementConfig,
};
use crate::spectral::{estimate_delta_nu, ComponentChoice, ComponentSelection};
use crate::ssa::EmbeddingConfig;

/// RNG for one realization: the master seed selects the key, the
/// `(point, run)` pair selects the stream.
pub fn run_rng(master_seed: u64, point: usize, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((point as u64) << 32) | run as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetrologyErrors {
    pub mean: f64,
    /// Population standard deviation of the estimates.
    pub eps_v: f64,
    /// Root-mean-square departure from the target.
    pub eps_rms: f64,
}

impl MetrologyErrors {
    pub fn bias(&self, target: f64) -> f64 {
        self.mean - target
    }
}

pub fn metrology_errors(estimates: &[f64], target: f64) -> Result<MetrologyErrors> {
    if estimates.len() < 2 {
        return Err(Error::Study(format!("need >= 2 estimates, got {}", estimates.len())));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let ms = estimates.iter().map(|x| (x - target).powi(2)).sum::<f64>() / n;
    Ok(MetrologyErrors { mean, eps_v: var.sqrt(), eps_rms: ms.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NTot,
    V,
    /// Total spectral wandering Σ, Hz.
    Sigma,
    /// Total dephasing Γ₁ + Γ₂, 1/s.
    Gamma,
    NC,
    JumpW,
    DeltaNu,
    TBin,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n_tot" => Self::NTot,
            "v" => Self::V,
            "sigma" => Self::Sigma,
            "gamma" => Self::Gamma,
            "n_c" => Self::NC,
            "jump_w" => Self::JumpW,
            "delta_nu" => Self::DeltaNu,
            "t_bin" => Self::TBin,
            other => return Err(Error::Study(format!("unknown swept parameter {other:?}"))),
        })
    }
}

/// Everything a realization needs apart from the swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyBase {
    pub params: EmitterPairParams,
    pub measurement: MeasurementConfig,
    pub embedding: EmbeddingConfig,
    pub components: ComponentChoice,
    /// Second separation of a spectral-jump mixture, Hz. The base δν is
    /// the one weighted by `w`.
    pub jump_delta_nu: Option<f64>,
}

impl StudyBase {
    pub fn standard() -> Self {
        Self {
            params: EmitterPairParams::standard(),
            measurement: MeasurementConfig::standard(),
            embedding: EmbeddingConfig::default(),
            components: ComponentChoice::Auto,
            jump_delta_nu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub swept_parameter: SweepParameter,
    /// SI values (Hz, s, counts).
    pub values: Vec<f64>,
    pub base: StudyBase,
    pub runs_per_point: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Study("no swept values".into()));
        }
        if self.runs_per_point < 2 {
            return Err(Error::Study("runs_per_point must be >= 2".into()));
        }
        if self.swept_parameter == SweepParameter::JumpW && self.base.jump_delta_nu.is_none() {
            return Err(Error::Study("jump_w sweeps need a second delta_nu".into()));
        }
        for &v in &self.values {
            self.point_setup(v)?;
        }
        Ok(())
    }

    fn point_setup(&self, value: f64) -> Result<PointSetup> {
        if !value.is_finite() {
            return Err(Error::Study("swept values must be finite".into()));
        }
        let base = &self.base;
        let mut params = base.params;
        let mut cfg = base.measurement;
        let mut embedding = base.embedding;
        let mut jump = None;
        match self.swept_parameter {
            SweepParameter::NTot => cfg.n_tot = value,
            SweepParameter::V => params.v = value,
            SweepParameter::Sigma => params = params.with_sigma_total(value),
            SweepParameter::Gamma => params = params.with_dephasing_total(value),
            SweepParameter::NC => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Study(format!("n_c = {value} is not an integer")));
                }
                embedding = EmbeddingConfig::new(value as usize);
            }
            SweepParameter::JumpW => jump = Some(value),
            SweepParameter::DeltaNu => params.delta_nu = value,
            SweepParameter::TBin => cfg.t_bin = value,
        }
        params.validate()?;
        cfg.validate()?;
        embedding.validate_for(cfg.bin_count())?;
        if let ComponentChoice::Fixed(sel) = &base.components {
            sel.validate_for(embedding.n_c)?;
        }
        let (expected, targets) = match jump {
            Some(w) => {
                let other = params.with_delta_nu(base.jump_delta_nu.expect("validated"));
                (mix_jump(&params, &other, w, &cfg)?, vec![params.delta_nu, other.delta_nu])
            }
            None => (bin_profile(&params, &cfg)?, vec![params.delta_nu]),
        };
        Ok(PointSetup { expected, embedding, targets })
    }
}

struct PointSetup {
    expected: CoincidenceHistogram,
    embedding: EmbeddingConfig,
    targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetErrors {
    pub target: f64,
    pub bias: f64,
    pub eps_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub swept_value: f64,
    /// None when fewer than two runs succeeded.
    pub mean: Option<f64>,
    pub eps_v: Option<f64>,
    /// Errors against each reference separation: the point's δν, then the
    /// second line's δν for jump sweeps.
    pub targets: Vec<TargetErrors>,
    pub failures: usize,
    /// Per-run estimate in run order, None for failed runs.
    pub estimates: Vec<Option<f64>>,
}

impl PointReport {
    pub fn successes(&self) -> Vec<f64> {
        self.estimates.iter().flatten().copied().collect()
    }

    pub fn eps_rms(&self) -> Option<f64> {
        self.targets.first().map(|t| t.eps_rms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: SweepSpec,
    pub points: Vec<PointReport>,
}

/// Estimate used by sweeps and bootstraps. Any error (including a peak at
/// the Nyquist edge) counts as a failed run.
fn run_estimate(hist: &CoincidenceHistogram, embedding: &EmbeddingConfig, choice: &ComponentChoice) -> Option<f64> {
    let selection = match choice {
        ComponentChoice::Auto => None,
        ComponentChoice::Fixed(s) => Some(s),
    };
    estimate_delta_nu(hist, embedding, selection).ok().map(|e| e.delta_nu_hat)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<StudyReport> {
    spec.validate()?;
    let setups = spec
        .values
        .iter()
        .map(|&v| spec.point_setup(v))
        .collect::<Result<Vec<_>>>()?;

    let points = setups
        .iter()
        .zip(&spec.values)
        .enumerate()
        .map(|(point, (setup, &value))| {
            let estimates: Vec<Option<f64>> = (0..spec.runs_per_point)
                .into_par_iter()
                .map(|run| {
                    let mut rng = run_rng(spec.seed, point, run);
                    let sample = sample_histogram_with(&setup.expected, &mut rng);
                    run_estimate(&sample, &setup.embedding, &spec.base.components)
                })
                .collect();
            summarize(value, &setup.targets, estimates)
        })
        .collect();
    Ok(StudyReport { spec: spec.clone(), points })
}

fn summarize(swept_value: f64, targets: &[f64], estimates: Vec<Option<f64>>) -> PointReport {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let failures = estimates.len() - ok.len();
    let errors: Vec<(f64, MetrologyErrors)> = targets
        .iter()
        .filter_map(|&t| metrology_errors(&ok, t).ok().map(|e| (t, e)))
        .collect();
    PointReport {
        swept_value,
        mean: errors.first().map(|(_, e)| e.mean),
        eps_v: errors.first().map(|(_, e)| e.eps_v),
        targets: errors
            .iter()
            .map(|&(target, e)| TargetErrors { target, bias: e.bias(target), eps_rms: e.eps_rms })
            .collect(),
        failures,
        estimates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub delta_nu_hat: f64,
    pub sigma_hat: f64,
    pub components_used: ComponentSelection,
    pub n_resamples: usize,
    pub failures: usize,
    /// False when more than half the resamples failed.
    pub reliable: bool,
    pub seed: u64,
}

pub const MIN_RESAMPLES: usize = 100;

/// δν on the observed histogram together with the spread of estimates over
/// Poisson resamples whose means are the observed counts. The component
/// selection found on the observed histogram is reused for every resample.
pub fn bootstrap_uncertainty(
    hist: &CoincidenceHistogram,
    embedding: &EmbeddingConfig,
    components: &ComponentChoice,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::Study(format!("need >= {MIN_RESAMPLES} resamples, got {n_resamples}")));
    }
    let selection = match components {
        ComponentChoice::Auto => None,
        ComponentChoice::Fixed(s) => Some(s),
    };
    let original = estimate_delta_nu(hist, embedding, selection)?;
    let fixed = ComponentChoice::Fixed(original.components_used.clone());
    let estimates: Vec<Option<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(seed, 0, run);
            let resample = sample_histogram_with(hist, &mut rng);
            run_estimate(&resample, embedding, &fixed)
        })
        .collect();
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let failures = n_resamples - ok.len();
    let sigma_hat = metrology_errors(&ok, original.delta_nu_hat).map_or(f64::NAN, |e| e.eps_v);
    Ok(BootstrapResult {
        delta_nu_hat: original.delta_nu_hat,
        sigma_hat,
        components_used: original.components_used,
        n_resamples,
        failures,
        reliable: 2 * failures <= n_resamples && sigma_hat.is_finite(),
        seed,
    })
}
