//! Shared fixtures for the criterion benches.

use tpi_ssa::{bin_profile, sample_histogram, CoincidenceHistogram, EmitterPairParams, MeasurementConfig};

/// One Poisson realization at the standard simulation parameters.
pub fn standard_realization(seed: u64) -> CoincidenceHistogram {
    let expected = bin_profile(&EmitterPairParams::standard(), &MeasurementConfig::standard())
        .expect("standard parameters are valid");
    sample_histogram(&expected, seed)
}
