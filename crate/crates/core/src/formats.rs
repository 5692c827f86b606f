//! File formats shared by the library and the command-line tool.
//!
//! Series are CSV, structured configuration and results are JSON. Files
//! use laboratory units (ns, MHz); everything is converted to SI on load.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::FisherResult;
use crate::fit::{FitParams, FitResult};
use crate::model::{CoincidenceHistogram, EmitterPairParams, MeasurementConfig};
use crate::spectral::{ComponentChoice, ComponentSelection, SpectralEstimate};
use crate::ssa::{EmbeddingConfig, SsaDecomposition};
use crate::studies::{BootstrapResult, StudyBase, StudyReport, SweepParameter, SweepSpec};

pub const NS: f64 = 1e-9;
pub const MHZ: f64 = 1e6;

/// Header of the histogram CSV.
pub const HISTOGRAM_HEADER: [&str; 2] = ["time_ns", "counts"];
/// Relative spacing deviation accepted when reading printed delays.
pub const CSV_SPACING_TOLERANCE: f64 = 1e-5;

pub fn default_t_meas_ns() -> f64 {
    25.0
}

/// Emitter and measurement parameters in laboratory units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub tau1_ns: f64,
    pub tau2_ns: f64,
    #[serde(rename = "gamma1_MHz")]
    pub gamma1_mhz: f64,
    #[serde(rename = "gamma2_MHz")]
    pub gamma2_mhz: f64,
    #[serde(rename = "sigma1_MHz")]
    pub sigma1_mhz: f64,
    #[serde(rename = "sigma2_MHz")]
    pub sigma2_mhz: f64,
    #[serde(rename = "delta_nu_MHz")]
    pub delta_nu_mhz: f64,
    pub v: f64,
    pub t_bin_ns: f64,
    #[serde(default = "default_t_meas_ns")]
    pub t_meas_ns: f64,
    pub n_tot: f64,
}

impl ParamFile {
    pub fn from_model(p: &EmitterPairParams, cfg: &MeasurementConfig) -> Self {
        Self {
            tau1_ns: p.tau1 / NS,
            tau2_ns: p.tau2 / NS,
            gamma1_mhz: p.gamma1 / MHZ,
            gamma2_mhz: p.gamma2 / MHZ,
            sigma1_mhz: p.sigma1 / MHZ,
            sigma2_mhz: p.sigma2 / MHZ,
            delta_nu_mhz: p.delta_nu / MHZ,
            v: p.v,
            t_bin_ns: cfg.t_bin / NS,
            t_meas_ns: cfg.t_meas / NS,
            n_tot: cfg.n_tot,
        }
    }

    pub fn standard() -> Self {
        Self::from_model(&EmitterPairParams::standard(), &MeasurementConfig::standard())
    }

    pub fn params(&self) -> EmitterPairParams {
        EmitterPairParams {
            tau1: self.tau1_ns * NS,
            tau2: self.tau2_ns * NS,
            gamma1: self.gamma1_mhz * MHZ,
            gamma2: self.gamma2_mhz * MHZ,
            sigma1: self.sigma1_mhz * MHZ,
            sigma2: self.sigma2_mhz * MHZ,
            delta_nu: self.delta_nu_mhz * MHZ,
            v: self.v,
        }
    }

    pub fn measurement(&self) -> MeasurementConfig {
        MeasurementConfig { t_bin: self.t_bin_ns * NS, t_meas: self.t_meas_ns * NS, n_tot: self.n_tot }
    }

    /// Validated SI views of the file.
    pub fn to_model(&self) -> Result<(EmitterPairParams, MeasurementConfig)> {
        let p = self.params();
        let m = self.measurement();
        p.validate()?;
        m.validate()?;
        Ok((p, m))
    }

    /// Applies `key=value` with a key from the file schema.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::ParameterDomain(format!("{key} must be finite")));
        }
        let slot = match key {
            "tau1_ns" => &mut self.tau1_ns,
            "tau2_ns" => &mut self.tau2_ns,
            "gamma1_MHz" => &mut self.gamma1_mhz,
            "gamma2_MHz" => &mut self.gamma2_mhz,
            "sigma1_MHz" => &mut self.sigma1_mhz,
            "sigma2_MHz" => &mut self.sigma2_mhz,
            "delta_nu_MHz" => &mut self.delta_nu_mhz,
            "v" => &mut self.v,
            "t_bin_ns" => &mut self.t_bin_ns,
            "t_meas_ns" => &mut self.t_meas_ns,
            "n_tot" => &mut self.n_tot,
            other => return Err(Error::ParameterDomain(format!("unknown parameter {other:?}"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parses an override of the form `key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::ParameterDomain(format!("override {spec:?} is not key=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::ParameterDomain(format!("override {spec:?}: {e}")))?;
        self.set(key.trim(), value)
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

pub fn write_histogram_csv<W: Write>(hist: &CoincidenceHistogram, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(HISTOGRAM_HEADER)?;
    for (t, c) in hist.t_centers().iter().zip(hist.counts()) {
        out.write_record([format!("{:.9}", t / NS), format!("{c:.6}")])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_histogram_csv<R: Read>(r: R) -> Result<CoincidenceHistogram> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HISTOGRAM_HEADER {
        return Err(Error::Format(format!("expected header time_ns,counts, got {headers:?}")));
    }
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Format(format!("row {}: missing column", line + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))
        };
        times.push(parse(0)? * NS);
        counts.push(parse(1)?);
    }
    CoincidenceHistogram::with_spacing_tolerance(times, counts, CSV_SPACING_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodogramPoint {
    #[serde(rename = "f_MHz")]
    pub f_mhz: f64,
    pub power: f64,
}

/// Output of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    #[serde(rename = "delta_nu_MHz")]
    pub delta_nu_mhz: f64,
    pub components_used: Vec<usize>,
    pub peak_power: f64,
    pub low_confidence: bool,
    pub periodogram: Vec<PeriodogramPoint>,
}

impl From<&SpectralEstimate> for EstimateOutput {
    fn from(e: &SpectralEstimate) -> Self {
        Self {
            delta_nu_mhz: e.delta_nu_hat / MHZ,
            components_used: e.components_used.clone().into(),
            peak_power: e.peak_power,
            low_confidence: e.low_confidence,
            periodogram: e
                .periodogram
                .frequencies
                .iter()
                .zip(&e.periodogram.powers)
                .map(|(f, p)| PeriodogramPoint { f_mhz: f / MHZ, power: *p })
                .collect(),
        }
    }
}

/// Component dump of `analyze --dump-components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExport {
    pub eigenvalues: Vec<f64>,
    pub reconstructed: Vec<Vec<f64>>,
    pub n_c: usize,
}

impl From<&SsaDecomposition> for DecompositionExport {
    fn from(d: &SsaDecomposition) -> Self {
        Self { eigenvalues: d.eigenvalues.clone(), reconstructed: d.reconstructed.clone(), n_c: d.n_c }
    }
}

/// Initial guess for `fit`: a parameter file plus an optional amplitude
/// (defaults to the histogram total).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitInitFile {
    #[serde(flatten)]
    pub params: ParamFile,
    pub amplitude: Option<f64>,
}

// serde ignores deny_unknown_fields under flatten, so split the map by hand
impl<'de> Deserialize<'de> for FitInitFile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut map = serde_json::Map::deserialize(d)?;
        let amplitude = match map.remove("amplitude") {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(f64::deserialize(v).map_err(D::Error::custom)?),
        };
        let params = ParamFile::deserialize(serde_json::Value::Object(map)).map_err(D::Error::custom)?;
        Ok(Self { params, amplitude })
    }
}

impl FitInitFile {
    pub fn to_fit_params(&self, hist: &CoincidenceHistogram) -> Result<FitParams> {
        let p = self.params.params();
        p.validate()?;
        Ok(FitParams::from_emitters(&p, self.amplitude.unwrap_or_else(|| hist.total())))
    }
}

/// Output of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub converged: bool,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub tau1_ns: f64,
    pub tau2_ns: f64,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
    #[serde(rename = "sigma_MHz")]
    pub sigma_mhz: f64,
    pub v: f64,
    #[serde(rename = "delta_nu_MHz")]
    pub delta_nu_mhz: f64,
    pub amplitude: f64,
}

impl From<&FitResult> for FitOutput {
    fn from(r: &FitResult) -> Self {
        let p = &r.params;
        Self {
            converged: r.converged,
            rss: r.rss,
            initial_rss: r.initial_rss,
            iterations: r.iterations,
            wall_time_s: r.wall_time,
            tau1_ns: p.tau1 / NS,
            tau2_ns: p.tau2 / NS,
            gamma_mhz: p.gamma / MHZ,
            sigma_mhz: p.sigma / MHZ,
            v: p.v,
            delta_nu_mhz: p.delta_nu / MHZ,
            amplitude: p.amplitude,
        }
    }
}

/// `delta_nu_MHz,fisher,crb_sigma_MHz` with the information per event in
/// 1/MHz².
pub fn write_fisher_csv<W: Write>(res: &FisherResult, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["delta_nu_MHz", "fisher", "crb_sigma_MHz"])?;
    for i in 0..res.delta_nu_grid.len() {
        out.write_record([
            format!("{:.6}", res.delta_nu_grid[i] / MHZ),
            format!("{:.9e}", res.fisher[i] * MHZ * MHZ),
            format!("{:.6}", res.crb_sigma[i] / MHZ),
        ])?;
    }
    out.flush()?;
    Ok(())
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NTot => "n_tot",
            Self::V => "v",
            Self::Sigma => "sigma",
            Self::Gamma => "gamma",
            Self::NC => "n_c",
            Self::JumpW => "jump_w",
            Self::DeltaNu => "delta_nu",
            Self::TBin => "t_bin",
        }
    }

    /// Factor from file units (MHz, ns, plain numbers) to SI.
    pub fn file_scale(&self) -> f64 {
        match self {
            Self::Sigma | Self::Gamma | Self::DeltaNu => MHZ,
            Self::TBin => NS,
            _ => 1.0,
        }
    }
}

fn default_runs() -> usize {
    1000
}

fn default_n_c() -> usize {
    5
}

fn default_components() -> String {
    "auto".into()
}

/// Parses `auto`, `2`, `2,3`, ... into a component choice.
pub fn parse_components(s: &str) -> Result<ComponentChoice> {
    if s.trim() == "auto" {
        Ok(ComponentChoice::Auto)
    } else {
        Ok(ComponentChoice::Fixed(s.parse::<ComponentSelection>()?))
    }
}

pub fn components_label(c: &ComponentChoice) -> String {
    match c {
        ComponentChoice::Auto => "auto".into(),
        ComponentChoice::Fixed(s) => s.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBaseFile {
    pub params: ParamFile,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
    #[serde(default = "default_components")]
    pub components: String,
    #[serde(rename = "jump_delta_nu_MHz", default, skip_serializing_if = "Option::is_none")]
    pub jump_delta_nu_mhz: Option<f64>,
}

/// Sweep description; `values` are in file units (MHz for sigma, gamma
/// and delta_nu, ns for t_bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpecFile {
    pub swept_parameter: String,
    pub values: Vec<f64>,
    pub base: SweepBaseFile,
    #[serde(default = "default_runs")]
    pub runs_per_point: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SweepSpecFile {
    /// Converts to SI; `fallback_seed` is used when the file has none.
    pub fn to_spec(&self, fallback_seed: u64) -> Result<SweepSpec> {
        let swept_parameter: SweepParameter = self.swept_parameter.parse()?;
        let scale = swept_parameter.file_scale();
        let spec = SweepSpec {
            swept_parameter,
            values: self.values.iter().map(|v| v * scale).collect(),
            base: StudyBase {
                params: self.base.params.params(),
                measurement: self.base.params.measurement(),
                embedding: EmbeddingConfig::new(self.base.n_c),
                components: parse_components(&self.base.components)?,
                jump_delta_nu: self.base.jump_delta_nu_mhz.map(|f| f * MHZ),
            },
            runs_per_point: self.runs_per_point,
            seed: self.seed.unwrap_or(fallback_seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &SweepSpec) -> Self {
        let scale = spec.swept_parameter.file_scale();
        Self {
            swept_parameter: spec.swept_parameter.name().into(),
            values: spec.values.iter().map(|v| v / scale).collect(),
            base: SweepBaseFile {
                params: ParamFile::from_model(&spec.base.params, &spec.base.measurement),
                n_c: spec.base.embedding.n_c,
                components: components_label(&spec.base.components),
                jump_delta_nu_mhz: spec.base.jump_delta_nu.map(|f| f / MHZ),
            },
            runs_per_point: spec.runs_per_point,
            seed: Some(spec.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetErrorsOutput {
    #[serde(rename = "target_MHz")]
    pub target_mhz: f64,
    #[serde(rename = "bias_MHz")]
    pub bias_mhz: f64,
    #[serde(rename = "eps_rms_MHz")]
    pub eps_rms_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutput {
    pub swept_value: f64,
    #[serde(rename = "mean_MHz")]
    pub mean_mhz: Option<f64>,
    #[serde(rename = "eps_v_MHz")]
    pub eps_v_mhz: Option<f64>,
    pub targets: Vec<TargetErrorsOutput>,
    pub failures: usize,
    #[serde(rename = "estimates_MHz")]
    pub estimates_mhz: Vec<Option<f64>>,
}

/// Output of `sweep`; `provenance` reproduces the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReportOutput {
    pub provenance: SweepSpecFile,
    pub points: Vec<PointOutput>,
}

impl From<&StudyReport> for StudyReportOutput {
    fn from(r: &StudyReport) -> Self {
        let scale = r.spec.swept_parameter.file_scale();
        Self {
            provenance: SweepSpecFile::from_spec(&r.spec),
            points: r
                .points
                .iter()
                .map(|p| PointOutput {
                    swept_value: p.swept_value / scale,
                    mean_mhz: p.mean.map(|m| m / MHZ),
                    eps_v_mhz: p.eps_v.map(|m| m / MHZ),
                    targets: p
                        .targets
                        .iter()
                        .map(|t| TargetErrorsOutput {
                            target_mhz: t.target / MHZ,
                            bias_mhz: t.bias / MHZ,
                            eps_rms_mhz: t.eps_rms / MHZ,
                        })
                        .collect(),
                    failures: p.failures,
                    estimates_mhz: p.estimates.iter().map(|e| e.map(|v| v / MHZ)).collect(),
                })
                .collect(),
        }
    }
}

/// Flat `swept_value,mean_MHz,eps_v_MHz,eps_rms_MHz,failures` table;
/// undefined statistics are written as `nan`.
pub fn write_sweep_csv<W: Write>(r: &StudyReport, w: W) -> Result<()> {
    let scale = r.spec.swept_parameter.file_scale();
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["swept_value", "mean_MHz", "eps_v_MHz", "eps_rms_MHz", "failures"])?;
    let fmt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{:.6}", v / MHZ));
    for p in &r.points {
        out.write_record([
            format!("{:.6}", p.swept_value / scale),
            fmt(p.mean),
            fmt(p.eps_v),
            fmt(p.eps_rms()),
            p.failures.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Output of `bootstrap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutput {
    #[serde(rename = "delta_nu_MHz")]
    pub delta_nu_mhz: f64,
    #[serde(rename = "sigma_MHz")]
    pub sigma_mhz: Option<f64>,
    pub components_used: Vec<usize>,
    pub n_resamples: usize,
    pub failures: usize,
    pub reliable: bool,
    pub seed: u64,
}

impl From<&BootstrapResult> for BootstrapOutput {
    fn from(b: &BootstrapResult) -> Self {
        Self {
            delta_nu_mhz: b.delta_nu_hat / MHZ,
            sigma_mhz: b.sigma_hat.is_finite().then(|| b.sigma_hat / MHZ),
            components_used: b.components_used.clone().into(),
            n_resamples: b.n_resamples,
            failures: b.failures,
            reliable: b.reliable,
            seed: b.seed,
        }
    }
}
