//! Wire format for one compressed gradient block.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HTQ1"
//! 4       1     scheme id
//! 5       1     bits per index
//! 6       2     reserved, zero
//! 8       4     alpha (f32)
//! 12      4     d (u32)
//! 16      4     k (f32)          biscaled only
//! 20      2     s_alpha (u16)    biscaled only
//! 22      2     s_beta (u16)     biscaled only
//! ..            ceil(d * bits / 8) payload bytes
//! ```
//!
//! All integers and floats are little-endian.

use serde::{Deserialize, Serialize};

use super::codec::{decode_bits, encode_bits, packed_len};
use super::{build_codebook, Codebook, DensitySpec, QuantError};
use crate::density::Density;

pub const MAGIC: [u8; 4] = *b"HTQ1";
pub const BASE_HEADER_LEN: usize = 16;
pub const BISCALED_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WireScheme {
    TqUniform = 0,
    Tnq = 1,
    Tbq = 2,
    Qsgd = 3,
    Nqsgd = 4,
}

impl WireScheme {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self, QuantError> {
        Ok(match id {
            0 => WireScheme::TqUniform,
            1 => WireScheme::Tnq,
            2 => WireScheme::Tbq,
            3 => WireScheme::Qsgd,
            4 => WireScheme::Nqsgd,
            other => return Err(QuantError::UnknownScheme(other)),
        })
    }

    pub fn header_len(self) -> usize {
        if self == WireScheme::Tbq {
            BISCALED_HEADER_LEN
        } else {
            BASE_HEADER_LEN
        }
    }

    /// Schemes whose levels depend on a density both ends must share.
    pub fn needs_shared_density(self) -> bool {
        matches!(self, WireScheme::Tnq | WireScheme::Nqsgd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiScaledParams {
    pub k: f32,
    pub s_alpha: u16,
    pub s_beta: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub scheme: WireScheme,
    pub bits: u8,
    pub alpha: f32,
    pub dim: u32,
    pub biscaled: Option<BiScaledParams>,
}

impl MessageHeader {
    pub fn validate(&self) -> Result<(), QuantError> {
        if !(1..=8).contains(&self.bits) {
            return Err(QuantError::InvalidBits(self.bits));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(QuantError::InvalidAlpha(f64::from(self.alpha)));
        }
        match (self.scheme, self.biscaled) {
            (WireScheme::Tbq, Some(p)) => {
                let s = (1u32 << self.bits) - 1;
                if u32::from(p.s_alpha) + u32::from(p.s_beta) != s {
                    return Err(QuantError::InvalidSplit(format!(
                        "s_alpha + s_beta = {} but {} bits give s = {s}",
                        u32::from(p.s_alpha) + u32::from(p.s_beta),
                        self.bits
                    )));
                }
                Ok(())
            }
            (WireScheme::Tbq, None) => Err(QuantError::InvalidSplit("missing biscaled parameters".into())),
            (_, Some(_)) => Err(QuantError::InvalidSplit(
                "biscaled parameters on a non-biscaled scheme".into(),
            )),
            (_, None) => Ok(()),
        }
    }

    pub fn header_len(&self) -> usize {
        self.scheme.header_len()
    }

    pub fn intervals(&self) -> usize {
        (1usize << self.bits) - 1
    }

    /// Rebuilds the codebook from header fields alone, plus the shared
    /// density for the cube-root schemes.
    pub fn codebook(&self, shared: Option<&dyn Density>) -> Result<Codebook, QuantError> {
        let alpha = f64::from(self.alpha);
        let s = self.intervals();
        let spec = match self.scheme {
            WireScheme::TqUniform | WireScheme::Qsgd => DensitySpec::Uniform { alpha, s },
            WireScheme::Tnq | WireScheme::Nqsgd => DensitySpec::CubeRoot {
                alpha,
                s,
                density: shared.ok_or(QuantError::MissingSharedDensity)?,
            },
            WireScheme::Tbq => {
                let p = self
                    .biscaled
                    .ok_or_else(|| QuantError::InvalidSplit("missing biscaled parameters".into()))?;
                DensitySpec::BiScaled {
                    alpha,
                    k: f64::from(p.k),
                    s_alpha: p.s_alpha as usize,
                    s_beta: p.s_beta as usize,
                }
            }
        };
        build_codebook(&spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMessage {
    header: MessageHeader,
    payload: Vec<u8>,
}

impl QuantizedMessage {
    pub fn new(header: MessageHeader, indices: &[u8]) -> Result<Self, QuantError> {
        header.validate()?;
        if indices.len() != header.dim as usize {
            return Err(QuantError::LengthMismatch {
                left: indices.len(),
                right: header.dim as usize,
            });
        }
        let payload = encode_bits(indices, header.bits)?;
        Ok(Self { header, payload })
    }

    pub fn header(&self) -> &MessageHeader {
        &self.header
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn byte_len(&self) -> usize {
        self.header.header_len() + self.payload.len()
    }

    pub fn indices(&self) -> Result<Vec<u8>, QuantError> {
        decode_bits(&self.payload, self.header.bits, self.header.dim as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(&MAGIC);
        out.push(h.scheme.id());
        out.push(h.bits);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&h.alpha.to_le_bytes());
        out.extend_from_slice(&h.dim.to_le_bytes());
        if let Some(p) = h.biscaled {
            out.extend_from_slice(&p.k.to_le_bytes());
            out.extend_from_slice(&p.s_alpha.to_le_bytes());
            out.extend_from_slice(&p.s_beta.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, QuantError> {
        if bytes.len() < BASE_HEADER_LEN {
            return Err(QuantError::TruncatedPayload {
                expected: BASE_HEADER_LEN,
                actual: bytes.len(),
            });
        }
        if bytes[..4] != MAGIC {
            return Err(QuantError::BadMagic);
        }
        let scheme = WireScheme::from_id(bytes[4])?;
        let bits = bytes[5];
        let f32_at = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let alpha = f32_at(8);
        let dim = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
        let header_len = scheme.header_len();
        if bytes.len() < header_len {
            return Err(QuantError::TruncatedPayload {
                expected: header_len,
                actual: bytes.len(),
            });
        }
        let biscaled = (scheme == WireScheme::Tbq).then(|| BiScaledParams {
            k: f32_at(16),
            s_alpha: u16_at(20),
            s_beta: u16_at(22),
        });
        let header = MessageHeader {
            scheme,
            bits,
            alpha,
            dim,
            biscaled,
        };
        header.validate()?;
        let expected = header_len + packed_len(dim as usize, bits);
        if bytes.len() < expected {
            return Err(QuantError::TruncatedPayload {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(QuantError::TrailingBytes {
                expected,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            header,
            payload: bytes[header_len..].to_vec(),
        })
    }
}
