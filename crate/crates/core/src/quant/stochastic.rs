use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Codebook, QuantError};
use crate::density::Density;

/// Clips every value to `[-α, α]`. `α = +∞` is the identity.
pub fn truncate(values: &[f64], alpha: f64) -> Result<Vec<f64>, QuantError> {
    if !(alpha > 0.0) {
        return Err(QuantError::InvalidAlpha(alpha));
    }
    Ok(values.iter().map(|v| v.clamp(-alpha, alpha)).collect())
}

/// Unbiased stochastic rounding onto `codebook`, one ChaCha8 stream per call.
pub fn stochastic_quantize(values: &[f64], codebook: &Codebook, seed: u64) -> Result<Vec<u8>, QuantError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stochastic_quantize_with(values, codebook, &mut rng)
}

/// A value in interval `k` rounds up to `l_k` with probability
/// `(g - l_{k-1}) / (l_k - l_{k-1})`, otherwise down to `l_{k-1}`. Exactly one
/// uniform draw is consumed per element.
pub fn stochastic_quantize_with<R: Rng + ?Sized>(
    values: &[f64],
    codebook: &Codebook,
    rng: &mut R,
) -> Result<Vec<u8>, QuantError> {
    let levels = codebook.levels();
    let mut out = Vec::with_capacity(values.len());
    for (index, &g) in values.iter().enumerate() {
        let Some(k) = codebook.interval_of(g) else {
            return Err(QuantError::OutOfRange { index, value: g });
        };
        let (lo, hi) = (levels[k - 1], levels[k]);
        let p = (g - lo) / (hi - lo);
        let u: f64 = rng.random();
        out.push(if u < p { k as u8 } else { (k - 1) as u8 });
    }
    Ok(out)
}

pub fn dequantize(indices: &[u8], codebook: &Codebook) -> Result<Vec<f64>, QuantError> {
    let levels = codebook.levels();
    indices
        .iter()
        .enumerate()
        .map(|(index, &i)| {
            levels.get(i as usize).copied().ok_or(QuantError::IndexOutOfRange {
                index,
                value: u32::from(i),
                levels: levels.len(),
            })
        })
        .collect()
}

/// Mean squared difference between two equal-length vectors.
pub fn empirical_mse(a: &[f64], b: &[f64]) -> Result<f64, QuantError> {
    if a.len() != b.len() {
        return Err(QuantError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Per-element MSE bounds for stochastic rounding of a value drawn from a
/// density supported inside the codebook range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBound {
    /// `Σ P_k |Δ_k|² / 4`, an upper bound at any resolution.
    pub quarter: f64,
    /// `Σ P_k |Δ_k|² / 6`, the high-resolution approximation.
    pub highrate_sixth: f64,
}

pub fn mse_bound(codebook: &Codebook, density: &dyn Density) -> Result<MseBound, QuantError> {
    let levels = codebook.levels();
    let inside = density.mass(codebook.lo(), codebook.hi());
    let outside = density.mass(f64::NEG_INFINITY, codebook.lo()) + density.mass(codebook.hi(), f64::INFINITY);
    if outside > 1e-9 || inside <= 0.0 {
        return Err(QuantError::SupportMismatch { outside });
    }
    let sum: f64 = levels
        .windows(2)
        .map(|w| {
            let width = w[1] - w[0];
            density.mass(w[0], w[1]) * width * width
        })
        .sum();
    Ok(MseBound {
        quarter: sum / 4.0,
        highrate_sixth: sum / 6.0,
    })
}
