//! Frequency-separation estimation for two independent single-photon
//! emitters from their two-photon interference coincidence histogram.
//!
//! The estimator decomposes the histogram by singular spectrum analysis,
//! sums the oscillatory reconstructed components and reads δν off the
//! dominant periodogram peak. Around it sit a simulation model, a
//! least-squares fit baseline, Fisher information and Monte Carlo studies.

pub mod error;
pub mod fisher;
pub mod fit;
pub mod formats;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod spectral;
pub mod ssa;
pub mod studies;

pub use error::{Error, ErrorCategory, Result};
pub use fisher::{crb_curve, fisher_info, FisherPoint, FisherResult};
pub use fit::{compare_speed, fit_model, fit_model_with, FitOptions, FitParams, FitResult, SpeedComparison};
pub use model::{
    bin_profile, eval_g2, mix_jump, sample_histogram, sample_histogram_with, CoincidenceHistogram,
    EmitterPairParams, MeasurementConfig, ProfileShape,
};
pub use spectral::{
    estimate_delta_nu, interpolate_peak, periodogram, select_components, ComponentChoice,
    ComponentSelection, Periodogram, SpectralEstimate,
};
pub use ssa::{decompose, EmbeddingConfig, SsaDecomposition};
pub use studies::{
    bootstrap_uncertainty, metrology_errors, run_sweep, BootstrapResult, MetrologyErrors,
    PointReport, StudyBase, StudyReport, SweepParameter, SweepSpec,
};
