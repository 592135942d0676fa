use serde::{Deserialize, Serialize};

use super::QuantError;
use crate::density::Density;

/// How the `s + 1` levels of a codebook on `[-α, α]` are placed.
#[derive(Clone, Copy)]
pub enum DensitySpec<'a> {
    /// Evenly spaced levels.
    Uniform { alpha: f64, s: usize },
    /// Level density proportional to `p^{1/3}`.
    CubeRoot {
        alpha: f64,
        s: usize,
        density: &'a dyn Density,
    },
    /// `s_alpha / 2` even intervals on each outer band `[kα, α]` and
    /// `s_beta` even intervals on the inner band `[-kα, kα]`.
    BiScaled {
        alpha: f64,
        k: f64,
        s_alpha: usize,
        s_beta: usize,
    },
}

impl std::fmt::Debug for DensitySpec<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DensitySpec::Uniform { alpha, s } => write!(f, "Uniform {{ alpha: {alpha}, s: {s} }}"),
            DensitySpec::CubeRoot { alpha, s, .. } => write!(f, "CubeRoot {{ alpha: {alpha}, s: {s} }}"),
            DensitySpec::BiScaled {
                alpha,
                k,
                s_alpha,
                s_beta,
            } => write!(
                f,
                "BiScaled {{ alpha: {alpha}, k: {k}, s_alpha: {s_alpha}, s_beta: {s_beta} }}"
            ),
        }
    }
}

impl DensitySpec<'_> {
    pub fn alpha(&self) -> f64 {
        match *self {
            DensitySpec::Uniform { alpha, .. }
            | DensitySpec::CubeRoot { alpha, .. }
            | DensitySpec::BiScaled { alpha, .. } => alpha,
        }
    }

    /// Number of intervals `s`.
    pub fn intervals(&self) -> usize {
        match *self {
            DensitySpec::Uniform { s, .. } | DensitySpec::CubeRoot { s, .. } => s,
            DensitySpec::BiScaled { s_alpha, s_beta, .. } => s_alpha + s_beta,
        }
    }

    /// Level density `λ_s(g)`: intervals per unit length around `g`.
    pub fn point_density(&self, g: f64) -> f64 {
        let alpha = self.alpha();
        if g.abs() > alpha {
            return 0.0;
        }
        match *self {
            DensitySpec::Uniform { s, .. } => s as f64 / (2.0 * alpha),
            DensitySpec::CubeRoot { s, density, .. } => {
                let total = density.cbrt_mass(-alpha, alpha);
                s as f64 * density.pdf(g).cbrt() / total
            }
            DensitySpec::BiScaled { k, s_alpha, s_beta, .. } => {
                if g.abs() <= k * alpha {
                    s_beta as f64 / (2.0 * k * alpha)
                } else {
                    s_alpha as f64 / (2.0 * (1.0 - k) * alpha)
                }
            }
        }
    }
}

/// Strictly increasing quantization levels `l_0 < … < l_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    levels: Vec<f64>,
}

impl Codebook {
    pub fn new(levels: Vec<f64>) -> Result<Self, QuantError> {
        if levels.len() < 2 || levels.len() > 256 {
            return Err(QuantError::InvalidCodebook(format!(
                "need between 2 and 256 levels, got {}",
                levels.len()
            )));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(QuantError::InvalidCodebook("non-finite level".into()));
        }
        if let Some(i) = levels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(QuantError::InvalidCodebook(format!(
                "levels {i} and {} are not strictly increasing",
                i + 1
            )));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Number of intervals.
    pub fn s(&self) -> usize {
        self.levels.len() - 1
    }

    /// Smallest bit width that can index every level.
    pub fn bits(&self) -> u8 {
        let n = self.levels.len();
        (usize::BITS - (n - 1).leading_zeros()).max(1) as u8
    }

    pub fn lo(&self) -> f64 {
        self.levels[0]
    }

    pub fn hi(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Interval `k` in `1..=s` with `l_{k-1} < g <= l_k`; `g = l_0` maps to 1.
    pub fn interval_of(&self, g: f64) -> Option<usize> {
        if !(g >= self.lo() && g <= self.hi()) {
            return None;
        }
        let j = self.levels.partition_point(|l| *l < g);
        Some(j.max(1))
    }
}

/// Builds the levels for `spec`. Symmetric specs yield codebooks with
/// `l_k = -l_{s-k}` exactly, except cube-root codebooks whose symmetry is
/// only as exact as the density's.
pub fn build_codebook(spec: &DensitySpec<'_>) -> Result<Codebook, QuantError> {
    let alpha = spec.alpha();
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(QuantError::InvalidAlpha(alpha));
    }
    let s = spec.intervals();
    if s == 0 || s > 255 {
        return Err(QuantError::InvalidCodebook(format!("s = {s} outside 1..=255")));
    }
    let levels = match *spec {
        DensitySpec::Uniform { .. } => mirror(s, |k| -alpha + 2.0 * alpha * k as f64 / s as f64),
        DensitySpec::CubeRoot { density, .. } => cube_root_levels(alpha, s, density)?,
        DensitySpec::BiScaled { k, s_alpha, s_beta, .. } => {
            if !(k > 0.0 && k < 1.0) {
                return Err(QuantError::InvalidSplit(format!("k = {k} outside (0, 1)")));
            }
            if s_alpha < 2 || s_alpha % 2 != 0 || s_beta == 0 {
                return Err(QuantError::InvalidSplit(format!(
                    "s_alpha = {s_alpha} must be even and >= 2, s_beta = {s_beta} must be >= 1"
                )));
            }
            let half_outer = s_alpha / 2;
            let beta = k * alpha;
            let outer_step = (alpha - beta) / half_outer as f64;
            let inner_step = 2.0 * beta / s_beta as f64;
            mirror(s, |j| {
                if j <= half_outer {
                    -alpha + outer_step * j as f64
                } else {
                    -beta + inner_step * (j - half_outer) as f64
                }
            })
        }
    };
    Codebook::new(levels)
}

/// Fills the lower half from `level(k)` and mirrors it, so the codebook is
/// exactly symmetric and its endpoints are exactly `±l_0`.
fn mirror(s: usize, level: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut levels = vec![0.0; s + 1];
    for k in 0..=s / 2 {
        levels[k] = level(k);
        levels[s - k] = -levels[k];
    }
    if s.is_multiple_of(2) {
        levels[s / 2] = 0.0;
    }
    levels
}

fn cube_root_levels(alpha: f64, s: usize, density: &dyn Density) -> Result<Vec<f64>, QuantError> {
    let total = density.cbrt_mass(-alpha, alpha);
    if !(total.is_finite() && total > 0.0) {
        return Err(QuantError::EmptyDensity { alpha });
    }
    let mut levels = Vec::with_capacity(s + 1);
    levels.push(-alpha);
    let mut lo = -alpha;
    for k in 1..s {
        let target = total * k as f64 / s as f64;
        let (mut a, mut b) = (lo, alpha);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if density.cbrt_mass(-alpha, mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let x = 0.5 * (a + b);
        levels.push(x);
        lo = x;
    }
    levels.push(alpha);
    Ok(levels)
}
