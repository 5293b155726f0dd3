//! Photodetection, correlation and the empirical estimators.

pub mod correlate;
pub mod detect;
pub mod estimate;

pub use correlate::{Correlator, CorrelationSums, Coupling, GhostImage};
pub use detect::{detect_bucket, detect_counts, poisson, FrameCounts};
pub use estimate::{
    estimate_snr, estimate_snr_pooled, fit_gaussian_psf, measure_contrast, measure_psf, ContrastEstimate,
    PsfFit, SnrEstimate,
};
