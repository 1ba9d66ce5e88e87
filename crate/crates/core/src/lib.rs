//! Signal processing, mask estimation and evaluation primitives for
//! Lombard-aware audio-visual speech enhancement.
//!
//! The numeric code is generic over a [`Real`] scalar (`f32` or `f64`).
//! Everything downstream of the library (experiment harness, listening-test
//! service) uses the double-precision aliases exported at the crate root.

pub mod dsp;
pub mod error;
pub mod features;
pub mod grid;
pub mod mask;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod stats;

use std::fmt::{Debug, Display};
use std::iter::Sum;

pub use error::{Error, Result};

/// Library version, recorded alongside experiment results.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floating point scalar used throughout the numeric modules.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + rustfft::FftNum
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    fn from_usize_(v: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(v).expect("usize representable")
    }

    fn to_f64_(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Waveform = dsp::Waveform<f64>;
pub type WaveformF32 = dsp::Waveform<f32>;
pub type ComplexSpectrogram = dsp::ComplexSpectrogram<f64>;
pub type StftConfig = dsp::StftConfig<f64>;
pub type AmplitudeMask = mask::AmplitudeMask<f64>;
pub type LpcModel = noise::LpcModel<f64>;
pub type NetworkParameters = nn::NetworkParameters<f64>;
pub type Tensor = nn::Tensor<f64>;
