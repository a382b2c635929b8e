//! Voice-quality classification from short sound spectra.
//!
//! The pipeline cuts a sung take into 0.1 s pieces, keeps the loudest ten,
//! turns each into a unit-mass power spectrum resampled on a log-frequency
//! grid, and classifies a handful of probe frequencies with Gaussian
//! discriminant analysis. The probes are chosen by greedy minimisation of the
//! model's Bayes risk.
//!
//! The numerical modules ([`spectra`], [`gda`], [`riskopt`]) are generic over
//! the floating point type; the aliases below fix the common choices.

pub mod error;
pub mod eval;
mod linalg;
pub mod manifest;
pub mod model_io;
pub mod riskopt;
pub mod scalar;
pub mod seed;
pub mod spectra;
pub mod synth;
pub mod gda;
pub mod wav;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type AudioSignal64 = spectra::AudioSignal<f64>;
pub type AudioSignal32 = spectra::AudioSignal<f32>;
pub type PowerSpectrum64 = spectra::PowerSpectrum<f64>;
pub type PowerSpectrum32 = spectra::PowerSpectrum<f32>;
pub type LogSpectrum64 = spectra::LogSpectrum<f64>;
pub type LogSpectrum32 = spectra::LogSpectrum<f32>;
pub type ClassModel64 = gda::ClassModel<f64>;
pub type ClassModel32 = gda::ClassModel<f32>;
pub type Posterior64 = gda::Posterior<f64>;
pub type Posterior32 = gda::Posterior<f32>;
