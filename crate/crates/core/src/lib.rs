//! Software twin of a switched-array millimetre-wave channel sounder.

pub mod arrays;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod io;
pub mod num;
pub mod rng;
pub mod schedule;
pub mod sounder;
pub mod waveform;

pub use error::{Error, Result};
pub use num::Real;

pub type SoundingWaveformF64 = waveform::SoundingWaveform<f64>;
pub type SoundingWaveformF32 = waveform::SoundingWaveform<f32>;
pub type PatternGridF64 = arrays::PatternGrid<f64>;
pub type PatternGridF32 = arrays::PatternGrid<f32>;
pub type EadfF64 = arrays::Eadf<f64>;
pub type EadfF32 = arrays::Eadf<f32>;
pub type LinkManifoldsF64 = arrays::LinkManifolds<f64>;
pub type LinkManifoldsF32 = arrays::LinkManifolds<f32>;
pub type CirTensorF64 = sounder::CirTensor<f64>;
pub type CirTensorF32 = sounder::CirTensor<f32>;
