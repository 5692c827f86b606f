//! From reconstructed components to a frequency-separation estimate.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CoincidenceHistogram;
use crate::ssa::{decompose, EmbeddingConfig, SsaDecomposition};

/// Lowest periodogram bin considered in peak searches. Bins 0 and 1 carry
/// residual envelope leakage.
pub const MIN_SEARCH_BIN: usize = 2;

/// Default fraction of Nyquist above which a component counts as a
/// fast (finite-statistics) oscillation.
pub const FAST_OSCILLATION_FRACTION: f64 = 0.8;

/// A peak below this multiple of the expected Poisson noise power per bin
/// is flagged low-confidence (about the expected maximum of ~50 bins of
/// pure noise).
pub const NOISE_FLOOR_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// `f_k = k / (L·T_bin)` for `k = 0 ..= L/2`, Hz.
    pub frequencies: Vec<f64>,
    /// `|DFT_k|²`, unnormalized.
    pub powers: Vec<f64>,
}

impl Periodogram {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    pub fn nyquist_index(&self) -> usize {
        self.powers.len() - 1
    }

    /// On-grid argmax over `k ∈ [MIN_SEARCH_BIN, L/2]`; first index on ties.
    pub fn dominant_bin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &p) in self.powers.iter().enumerate().skip(MIN_SEARCH_BIN) {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((k, p));
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Squared DFT magnitude on the one-sided grid. Direct O(L²) evaluation.
pub fn periodogram(signal: &[f64], t_bin: f64) -> Result<Periodogram> {
    let len = signal.len();
    if len < 8 {
        return Err(Error::Histogram(format!("periodogram needs >= 8 samples, got {len}")));
    }
    if !(t_bin.is_finite() && t_bin > 0.0) {
        return Err(Error::Measurement("t_bin must be positive".into()));
    }
    let n = len as f64;
    let half = len / 2;
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut powers = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &x) in signal.iter().enumerate() {
            // reduce k·t mod L before scaling to keep the phase exact
            let phase = -2.0 * PI * ((k * t) % len) as f64 / n;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        frequencies.push(k as f64 / (n * t_bin));
        powers.push(re * re + im * im);
    }
    Ok(Periodogram { frequencies, powers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakLocation {
    pub frequency: f64,
    /// Parabola vertex value (the on-grid power when not interpolated).
    pub power: f64,
    pub interpolated: bool,
}

/// Three-point parabolic refinement of the peak at on-grid index `k`.
///
/// The vertex abscissa is clamped to `[f_{k−1}, f_{k+1}]`. At either band
/// edge the on-grid frequency is returned with `interpolated = false`.
pub fn interpolate_peak(frequencies: &[f64], powers: &[f64], k: usize) -> PeakLocation {
    let on_grid = PeakLocation { frequency: frequencies[k], power: powers[k], interpolated: false };
    if k == 0 || k + 1 >= powers.len() {
        return on_grid;
    }
    let (pm, p0, pp) = (powers[k - 1], powers[k], powers[k + 1]);
    let denom = pm - 2.0 * p0 + pp;
    if denom == 0.0 || !denom.is_finite() {
        return PeakLocation { interpolated: true, ..on_grid };
    }
    let offset = (0.5 * (pm - pp) / denom).clamp(-1.0, 1.0);
    let step = if offset >= 0.0 {
        frequencies[k + 1] - frequencies[k]
    } else {
        frequencies[k] - frequencies[k - 1]
    };
    let power = p0 - 0.25 * (pm - pp) * offset;
    PeakLocation { frequency: frequencies[k] + offset * step, power: power.max(p0), interpolated: true }
}

/// 1-based indices of the reconstructed components summed before the
/// Fourier analysis. Never contains the envelope component 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ComponentSelection(BTreeSet<usize>);

impl ComponentSelection {
    pub fn new<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Selection("empty component selection".into()));
        }
        if set.contains(&0) || set.contains(&1) {
            return Err(Error::Selection("components are 1-based and exclude the envelope (1)".into()));
        }
        Ok(Self(set))
    }

    pub fn second() -> Self {
        Self([2].into())
    }

    pub fn second_and_third() -> Self {
        Self([2, 3].into())
    }

    /// Every component except the envelope.
    pub fn all_but_first(n_c: usize) -> Result<Self> {
        Self::new(2..=n_c)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max_index(&self) -> usize {
        *self.0.iter().next_back().expect("selection is nonempty")
    }

    pub fn validate_for(&self, n_c: usize) -> Result<()> {
        if self.max_index() > n_c {
            return Err(Error::Selection(format!(
                "component {} exceeds n_c = {n_c}",
                self.max_index()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for ComponentSelection {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ComponentSelection> for Vec<usize> {
    fn from(s: ComponentSelection) -> Self {
        s.0.into_iter().collect()
    }
}

impl std::fmt::Display for ComponentSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl std::str::FromStr for ComponentSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let idx = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| Error::Selection(format!("{p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(idx)
    }
}

/// How components are chosen for a given histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ComponentChoice {
    /// {2, 3} unless component 3 oscillates near Nyquist.
    #[default]
    Auto,
    Fixed(ComponentSelection),
}

/// Peak frequency of a single component's periodogram, if any.
fn component_peak(signal: &[f64], t_bin: f64) -> Option<f64> {
    let p = periodogram(signal, t_bin).ok()?;
    let k = p.dominant_bin()?;
    Some(interpolate_peak(&p.frequencies, &p.powers, k).frequency)
}

/// Uses {2, 3}, falling back to {2} when component 3 peaks above
/// `fast_fraction` of Nyquist.
pub fn select_components_with(decomposition: &SsaDecomposition, t_bin: f64, fast_fraction: f64) -> ComponentSelection {
    if decomposition.n_c < 3 {
        return ComponentSelection::second();
    }
    let nyquist = 0.5 / t_bin;
    match component_peak(&decomposition.reconstructed[2], t_bin) {
        Some(f) if f > fast_fraction * nyquist => ComponentSelection::second(),
        _ => ComponentSelection::second_and_third(),
    }
}

pub fn select_components(decomposition: &SsaDecomposition, t_bin: f64) -> ComponentSelection {
    select_components_with(decomposition, t_bin, FAST_OSCILLATION_FRACTION)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Estimated frequency separation, Hz.
    pub delta_nu_hat: f64,
    /// Periodogram value at the interpolated maximum.
    pub peak_power: f64,
    /// On-grid index of the maximum.
    pub peak_bin: usize,
    pub periodogram: Periodogram,
    pub components_used: ComponentSelection,
    /// Heuristic: the peak is within the Poisson noise floor or is not
    /// resolved from the low-frequency envelope. Informational only.
    pub low_confidence: bool,
}

/// Expected periodogram power per bin of Poisson noise after projection on
/// `selected` of `n_c` components: counts variance equals counts, and the
/// projection keeps about `selected / n_c` of white noise.
fn noise_floor(total_counts: f64, selected: usize, n_c: usize) -> f64 {
    total_counts.max(0.0) * selected as f64 / n_c as f64
}

/// True when the half-power region of the peak at `k` extends down to the
/// first bins above the search floor.
fn unresolved_from_envelope(powers: &[f64], k: usize, peak_power: f64) -> bool {
    let half = 0.5 * peak_power;
    let mut lo = k;
    while lo > 0 && powers[lo] > half {
        lo -= 1;
    }
    lo <= MIN_SEARCH_BIN + 1
}

/// Estimate δν from an already computed decomposition.
pub fn estimate_from_decomposition(
    decomposition: &SsaDecomposition,
    t_bin: f64,
    selection: Option<&ComponentSelection>,
) -> Result<SpectralEstimate> {
    let selection = match selection {
        Some(s) => s.clone(),
        None => select_components(decomposition, t_bin),
    };
    selection.validate_for(decomposition.n_c)?;
    let signal = decomposition.sum_components(selection.indices());
    let pg = periodogram(&signal, t_bin)?;
    let k = pg.dominant_bin().ok_or(Error::NoOscillatoryContent)?;
    let scale = signal.iter().map(|x| x * x).sum::<f64>();
    if pg.powers[k].is_nan() || pg.powers[k] <= 0.0 || pg.powers[k] <= 1e-24 * scale * signal.len() as f64 {
        return Err(Error::NoOscillatoryContent);
    }
    if k >= pg.nyquist_index() {
        return Err(Error::PeakAtBandEdge { frequency_hz: pg.frequencies[k] });
    }
    let peak = interpolate_peak(&pg.frequencies, &pg.powers, k);
    // Σ_i R_i = X, so the reconstructed components sum to the total counts
    let total: f64 = decomposition.reconstructed.iter().flatten().sum();
    let floor = noise_floor(total, selection.indices().count(), decomposition.n_c);
    let low_confidence =
        peak.power < NOISE_FLOOR_FACTOR * floor || unresolved_from_envelope(&pg.powers, k, peak.power);
    Ok(SpectralEstimate {
        low_confidence,
        delta_nu_hat: peak.frequency,
        peak_power: peak.power,
        peak_bin: k,
        periodogram: pg,
        components_used: selection,
    })
}

/// Full pipeline: decompose the counts, sum the selected components, and
/// take the interpolated global maximum of their periodogram.
pub fn estimate_delta_nu(
    hist: &CoincidenceHistogram,
    cfg: &EmbeddingConfig,
    selection: Option<&ComponentSelection>,
) -> Result<SpectralEstimate> {
    let counts = hist.counts();
    let (lo, hi) = counts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    if hi - lo <= 1e-12 * hi.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NoOscillatoryContent);
    }
    let decomposition = decompose(counts, cfg)?;
    estimate_from_decomposition(&decomposition, hist.t_bin(), selection)
}
