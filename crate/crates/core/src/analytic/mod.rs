//! Closed-form predictions: mean image, resolution, contrast and SNR.

pub mod image;
pub mod quadrature;
pub mod snr;
pub mod speckle;

pub use image::{
    predicted_contrast, predicted_mean_image, predicted_resolution, ContrastPrediction, MeanImage,
    TargetSummary,
};
pub use snr::{saturation_crossing, snr, snr_asymptotes, Asymptotes, SnrBreakdown};
pub use speckle::{circle_overlap, speckle_averaging_gamma, GammaFactor};
