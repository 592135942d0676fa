//! Truncation, stochastic quantization, bit packing and the message format.

mod codebook;
pub mod codec;
pub mod message;
mod stochastic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use codebook::{build_codebook, Codebook, DensitySpec};
pub use codec::{decode_bits, encode_bits, packed_len};
pub use message::{BiScaledParams, MessageHeader, QuantizedMessage, WireScheme};
pub use stochastic::{
    dequantize, empirical_mse, mse_bound, stochastic_quantize, stochastic_quantize_with, truncate, MseBound,
};

use crate::density::Density;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("bits must be in 1..=8, got {0}")]
    InvalidBits(u8),
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),
    #[error("invalid biscaled split: {0}")]
    InvalidSplit(String),
    #[error("density has no cube-root mass on [-{alpha}, {alpha}]")]
    EmptyDensity { alpha: f64 },
    #[error("value {value} at index {index} lies outside the codebook range")]
    OutOfRange { index: usize, value: f64 },
    #[error("index {value} at position {index} exceeds a codebook of {levels} levels")]
    IndexOutOfRange { index: usize, value: u32, levels: usize },
    #[error("index {value} at position {index} does not fit in {bits} bits")]
    IndexTooLarge { index: usize, value: u8, bits: u8 },
    #[error("payload truncated: need {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("message has {actual} bytes, expected {expected}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown scheme id {0}")]
    UnknownScheme(u8),
    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("density has mass {outside} outside the codebook range")]
    SupportMismatch { outside: f64 },
    #[error("scheme needs the shared density to rebuild its codebook")]
    MissingSharedDensity,
}

/// Smallest f32 not below `alpha`, so the transmitted threshold never
/// clips harder than the requested one.
pub fn wire_alpha(alpha: f64) -> Result<f32, QuantError> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha > f64::from(f32::MAX) {
        return Err(QuantError::InvalidAlpha(alpha));
    }
    let mut a = alpha as f32;
    if f64::from(a) < alpha {
        a = f32::from_bits(a.to_bits() + 1);
    }
    if a == 0.0 {
        a = f32::from_bits(1);
    }
    Ok(a)
}

/// Truncate-then-quantize compressor for one block of gradient values.
///
/// The codebook is built from the f32 threshold that goes on the wire, so a
/// decoder rebuilding it from the header gets the same levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageQuantizer {
    scheme: WireScheme,
    bits: u8,
    alpha: f32,
    biscaled: Option<BiScaledParams>,
    codebook: Codebook,
}

impl TwoStageQuantizer {
    /// Evenly spaced levels; `scheme` is `TqUniform` or `Qsgd`.
    pub fn uniform(scheme: WireScheme, alpha: f64, bits: u8) -> Result<Self, QuantError> {
        Self::build(scheme, alpha, bits, None, None)
    }

    /// Cube-root levels; `scheme` is `Tnq` or `Nqsgd`.
    pub fn cube_root(scheme: WireScheme, alpha: f64, bits: u8, density: &dyn Density) -> Result<Self, QuantError> {
        Self::build(scheme, alpha, bits, None, Some(density))
    }

    pub fn biscaled(alpha: f64, bits: u8, k: f64, s_alpha: u16, s_beta: u16) -> Result<Self, QuantError> {
        let params = BiScaledParams {
            k: k as f32,
            s_alpha,
            s_beta,
        };
        Self::build(WireScheme::Tbq, alpha, bits, Some(params), None)
    }

    fn build(
        scheme: WireScheme,
        alpha: f64,
        bits: u8,
        biscaled: Option<BiScaledParams>,
        density: Option<&dyn Density>,
    ) -> Result<Self, QuantError> {
        let header = MessageHeader {
            scheme,
            bits,
            alpha: wire_alpha(alpha)?,
            dim: 0,
            biscaled,
        };
        header.validate()?;
        let codebook = header.codebook(density)?;
        Ok(Self {
            scheme,
            bits,
            alpha: header.alpha,
            biscaled,
            codebook,
        })
    }

    pub fn scheme(&self) -> WireScheme {
        self.scheme
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Threshold as transmitted.
    pub fn alpha(&self) -> f64 {
        f64::from(self.alpha)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn compress(&self, values: &[f64], seed: u64) -> Result<QuantizedMessage, QuantError> {
        self.compress_with(values, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn compress_with<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<QuantizedMessage, QuantError> {
        let dim = u32::try_from(values.len()).map_err(|_| QuantError::LengthMismatch {
            left: values.len(),
            right: u32::MAX as usize,
        })?;
        let clipped = truncate(values, self.alpha())?;
        let indices = stochastic_quantize_with(&clipped, &self.codebook, rng)?;
        let header = MessageHeader {
            scheme: self.scheme,
            bits: self.bits,
            alpha: self.alpha,
            dim,
            biscaled: self.biscaled,
        };
        QuantizedMessage::new(header, &indices)
    }
}

/// Decodes a message with a codebook the caller rebuilt or shared.
pub fn decompress(message: &QuantizedMessage, codebook: &Codebook) -> Result<Vec<f64>, QuantError> {
    dequantize(&message.indices()?, codebook)
}
