//! Power-law tail fitting for gradient samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityHistogram;

/// Lower clamp for fitted tail indices. The error terms divide by `γ - 3`.
pub const GAMMA_FLOOR: f64 = 3.01;
/// Upper clamp for fitted tail indices.
pub const GAMMA_CEIL: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("no samples")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("g_min must be positive and finite, got {0}")]
    InvalidGmin(f64),
    #[error("quantile must lie in (0, 1), got {0}")]
    InvalidQuantile(f64),
    #[error("no samples above g_min = {g_min}")]
    NoTailSamples { g_min: f64 },
    #[error("samples are degenerate: {0}")]
    Degenerate(&'static str),
    #[error("|g| = {g} is not above g_min = {g_min}")]
    OutOfSupport { g: f64, g_min: f64 },
    #[error("invalid tail parameters: {0}")]
    InvalidTail(String),
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// One round's worth of gradient values from one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    values: Vec<f64>,
    group_id: String,
}

impl GradientSample {
    pub fn new(values: Vec<f64>, group_id: impl Into<String>) -> Result<Self, TailError> {
        if values.is_empty() {
            return Err(TailError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TailError::NonFinite { index });
        }
        Ok(Self {
            values,
            group_id: group_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn group_id(&self) -> &str {
        &self.group_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Symmetric power-law tail: `p(g) = ρ(γ-1) g_min^{γ-1} |g|^{-γ}` for
/// `|g| > g_min`, so each side carries mass `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTail {
    pub gamma: f64,
    pub g_min: f64,
    pub rho: f64,
    #[serde(default)]
    pub n_tail: usize,
    /// Set when the raw estimate fell outside `[GAMMA_FLOOR, GAMMA_CEIL]`.
    #[serde(skip)]
    pub clamped: bool,
}

impl PowerLawTail {
    /// Validated tail with `γ > 3`, `g_min > 0` and `ρ ∈ [0, 1/2]`.
    pub fn new(gamma: f64, g_min: f64, rho: f64) -> Result<Self, TailError> {
        if !(gamma.is_finite() && gamma > 3.0) {
            return Err(TailError::InvalidTail(format!("gamma = {gamma} must exceed 3")));
        }
        if !(g_min.is_finite() && g_min > 0.0) {
            return Err(TailError::InvalidGmin(g_min));
        }
        if !(0.0..=0.5).contains(&rho) {
            return Err(TailError::InvalidTail(format!("rho = {rho} outside [0, 0.5]")));
        }
        Ok(Self {
            gamma,
            g_min,
            rho,
            n_tail: 0,
            clamped: false,
        })
    }

    pub fn pdf(&self, g: f64) -> Result<f64, TailError> {
        powerlaw_pdf(g, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFitOptions {
    /// `g_min` is this nearest-rank quantile of `|g|`.
    pub quantile: f64,
}

impl Default for TailFitOptions {
    fn default() -> Self {
        Self { quantile: 0.9 }
    }
}

/// Maximum-likelihood tail index over samples with `|g| > g_min`:
/// `γ = 1 + n / Σ ln(|g_j| / g_min)`.
pub fn fit_gamma_mle(samples: &[f64], g_min: f64) -> Result<f64, TailError> {
    if !(g_min.is_finite() && g_min > 0.0) {
        return Err(TailError::InvalidGmin(g_min));
    }
    let (mut n, mut log_sum) = (0usize, 0.0f64);
    for (index, v) in samples.iter().enumerate() {
        if !v.is_finite() {
            return Err(TailError::NonFinite { index });
        }
        let a = v.abs();
        if a > g_min {
            n += 1;
            log_sum += (a / g_min).ln();
        }
    }
    if n == 0 {
        return Err(TailError::NoTailSamples { g_min });
    }
    if log_sum <= 0.0 {
        return Err(TailError::Degenerate("tail log-sum is zero"));
    }
    Ok(1.0 + n as f64 / log_sum)
}

/// Nearest-rank quantile of `|g|`: the `ceil(q n)`-th smallest magnitude.
pub fn select_gmin(samples: &[f64], quantile: f64) -> Result<f64, TailError> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(TailError::InvalidQuantile(quantile));
    }
    if samples.is_empty() {
        return Err(TailError::Empty);
    }
    let mut mags = Vec::with_capacity(samples.len());
    for (index, v) in samples.iter().enumerate() {
        if !v.is_finite() {
            return Err(TailError::NonFinite { index });
        }
        mags.push(v.abs());
    }
    let n = mags.len();
    // the small offset keeps q*n = 9.000000000000002 from ranking as 10
    let rank = ((quantile * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let (_, value, _) = mags.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    let g_min = *value;
    if g_min <= 0.0 {
        return Err(TailError::Degenerate("g_min quantile is zero"));
    }
    Ok(g_min)
}

/// Fraction of samples in one tail, `count(|g| > g_min) / (2n)`.
pub fn estimate_rho(samples: &[f64], g_min: f64) -> Result<f64, TailError> {
    if samples.is_empty() {
        return Err(TailError::Empty);
    }
    if !(g_min.is_finite() && g_min > 0.0) {
        return Err(TailError::InvalidGmin(g_min));
    }
    let count = samples.iter().filter(|v| v.abs() > g_min).count();
    Ok(count as f64 / (2.0 * samples.len() as f64))
}

pub fn powerlaw_pdf(g: f64, tail: &PowerLawTail) -> Result<f64, TailError> {
    let a = g.abs();
    if !(a > tail.g_min) {
        return Err(TailError::OutOfSupport { g, g_min: tail.g_min });
    }
    Ok(tail.rho * (tail.gamma - 1.0) * tail.g_min.powf(tail.gamma - 1.0) * a.powf(-tail.gamma))
}

pub fn empirical_density(samples: &[f64], bins: usize, symmetrize: bool) -> Result<DensityHistogram, TailError> {
    if bins < 2 {
        return Err(TailError::TooFewBins(bins));
    }
    if samples.is_empty() {
        return Err(TailError::Empty);
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(TailError::NonFinite { index });
    }
    Ok(DensityHistogram::from_samples(samples, bins, symmetrize))
}

/// Full tail fit: quantile `g_min`, MLE `γ` clamped to
/// `[GAMMA_FLOOR, GAMMA_CEIL]`, and the tail fraction `ρ`.
pub fn fit_tail(samples: &[f64], opts: &TailFitOptions) -> Result<PowerLawTail, TailError> {
    let g_min = select_gmin(samples, opts.quantile)?;
    let raw = fit_gamma_mle(samples, g_min)?;
    let gamma = raw.clamp(GAMMA_FLOOR, GAMMA_CEIL);
    let n_tail = samples.iter().filter(|v| v.abs() > g_min).count();
    Ok(PowerLawTail {
        gamma,
        g_min,
        rho: n_tail as f64 / (2.0 * samples.len() as f64),
        n_tail,
        clamped: gamma != raw,
    })
}
