//! Probability densities over scalar gradient values.
//!
//! Everything downstream (the in-range mass functionals, codebook inversion,
//! the quantizer MSE bounds) only needs two integrals of a density: its mass
//! `∫ p` and its cube-root mass `∫ p^{1/3}` over an interval. [`Density`]
//! exposes exactly those, and the two concrete densities here are a
//! piecewise-constant histogram and the power-law tail model with either a
//! flat or an empirical body.

use rand::Rng;
use thiserror::Error;

use crate::tail::PowerLawTail;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("histogram needs at least one bin and matching edge count (got {edges} edges, {bins} bins)")]
    Shape { edges: usize, bins: usize },
    #[error("histogram edges must be finite and strictly increasing (edge {index})")]
    UnorderedEdges { index: usize },
    #[error("histogram weight {index} is negative or not finite")]
    BadWeight { index: usize },
    #[error("histogram has zero total weight")]
    ZeroMass,
}

/// A density on the real line described through its integrals.
pub trait Density {
    /// `∫_lo^hi p(g) dg`; zero when `hi <= lo`.
    fn mass(&self, lo: f64, hi: f64) -> f64;

    /// `∫_lo^hi p(g)^{1/3} dg`; zero when `hi <= lo`.
    fn cbrt_mass(&self, lo: f64, hi: f64) -> f64;

    /// Point density. Histograms report the density of the containing bin.
    fn pdf(&self, g: f64) -> f64;
}

/// Piecewise-constant density: `mass[i]` spread uniformly over
/// `[edges[i], edges[i + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    edges: Vec<f64>,
    mass: Vec<f64>,
    symmetric: bool,
    // prefix sums, len = bins + 1
    cum_mass: Vec<f64>,
    cum_cbrt: Vec<f64>,
}

impl DensityHistogram {
    /// Builds a histogram from bin edges and non-negative weights, which are
    /// normalized to unit mass.
    pub fn from_weights(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self, DensityError> {
        if weights.is_empty() || edges.len() != weights.len() + 1 {
            return Err(DensityError::Shape {
                edges: edges.len(),
                bins: weights.len(),
            });
        }
        for (i, pair) in edges.windows(2).enumerate() {
            if !(pair[0].is_finite() && pair[1].is_finite() && pair[1] > pair[0]) {
                return Err(DensityError::UnorderedEdges { index: i });
            }
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DensityError::BadWeight { index: i });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DensityError::ZeroMass);
        }
        let mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let symmetric = mirrored(&edges, &mass);
        Ok(Self::assemble(edges, mass, symmetric))
    }

    /// Equal-width histogram of `values` over `[-max|v|, max|v|]`.
    ///
    /// With `symmetrize`, every value contributes half its weight to the bin
    /// of `|v|` and half to the mirrored bin, so the result is exactly
    /// symmetric about zero. All-zero input falls back to the range `[-1, 1]`.
    pub fn from_samples(values: &[f64], bins: usize, symmetrize: bool) -> Self {
        assert!(bins >= 2, "histogram needs at least two bins");
        assert!(!values.is_empty(), "histogram needs samples");
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let half = if max_abs > 0.0 { max_abs } else { 1.0 };
        let width = 2.0 * half / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| -half + width * i as f64).collect();
        edges[bins] = half;
        // exact mirror so the symmetric flag is reliable
        for i in 0..bins / 2 {
            edges[bins - i] = -edges[i];
        }
        if bins.is_multiple_of(2) {
            edges[bins / 2] = 0.0;
        }

        let bin_of = |v: f64| -> usize {
            let idx = ((v + half) / width).floor();
            (idx.max(0.0) as usize).min(bins - 1)
        };
        let mut counts = vec![0.0f64; bins];
        if symmetrize {
            for &v in values {
                let i = bin_of(v.abs());
                counts[i] += 0.5;
                counts[bins - 1 - i] += 0.5;
            }
        } else {
            for &v in values {
                counts[bin_of(v)] += 1.0;
            }
        }
        let n = values.len() as f64;
        let mass: Vec<f64> = counts.iter().map(|c| c / n).collect();
        let symmetric = symmetrize || mirrored(&edges, &mass);
        Self::assemble(edges, mass, symmetric)
    }

    fn assemble(edges: Vec<f64>, mass: Vec<f64>, symmetric: bool) -> Self {
        let mut cum_mass = Vec::with_capacity(mass.len() + 1);
        let mut cum_cbrt = Vec::with_capacity(mass.len() + 1);
        let (mut acc_m, mut acc_c) = (0.0, 0.0);
        cum_mass.push(0.0);
        cum_cbrt.push(0.0);
        for (i, m) in mass.iter().enumerate() {
            let w = edges[i + 1] - edges[i];
            acc_m += m;
            acc_c += (m / w).cbrt() * w;
            cum_mass.push(acc_m);
            cum_cbrt.push(acc_c);
        }
        Self {
            edges,
            mass,
            symmetric,
            cum_mass,
            cum_cbrt,
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn support(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }

    /// Bin containing `x`, or `None` outside the support.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let i = self.edges.partition_point(|e| *e <= x);
        Some(i.saturating_sub(1).min(self.bins() - 1))
    }

    fn cumulative(&self, x: f64, prefix: &[f64], per_bin: impl Fn(usize) -> f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return prefix[self.bins()];
        }
        let i = self.edges.partition_point(|e| *e <= x) - 1;
        let w = self.edges[i + 1] - self.edges[i];
        prefix[i] + per_bin(i) * (x - self.edges[i]) / w
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cumulative(x, &self.cum_mass, |i| self.mass[i])
    }

    fn cbrt_cdf(&self, x: f64) -> f64 {
        self.cumulative(x, &self.cum_cbrt, |i| {
            let w = self.edges[i + 1] - self.edges[i];
            (self.mass[i] / w).cbrt() * w
        })
    }

    /// Draws one value: a bin by mass, then uniformly inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cum_mass
            .partition_point(|c| *c <= u)
            .saturating_sub(1)
            .min(self.bins() - 1);
        let v: f64 = rng.random();
        self.edges[i] + v * (self.edges[i + 1] - self.edges[i])
    }
}

fn mirrored(edges: &[f64], mass: &[f64]) -> bool {
    let n = mass.len();
    let edges_ok = (0..=n).all(|i| (edges[i] + edges[n - i]).abs() <= 1e-12 * edges[n].abs().max(1.0));
    edges_ok && (0..n).all(|i| (mass[i] - mass[n - 1 - i]).abs() <= 1e-15)
}

impl Density for DensityHistogram {
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    fn cbrt_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cbrt_cdf(hi) - self.cbrt_cdf(lo)).max(0.0)
    }

    fn pdf(&self, g: f64) -> f64 {
        match self.bin_of(g) {
            Some(i) => self.mass[i] / (self.edges[i + 1] - self.edges[i]),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    /// `(1 - 2ρ) / (2 g_min)` on `[-g_min, g_min]`.
    Flat,
    /// Histogram restricted to `[-g_min, g_min]`, scaled to mass `1 - 2ρ`.
    Empirical { hist: DensityHistogram, scale: f64 },
}

/// Symmetric power-law tails beyond `g_min` joined to a body on
/// `[-g_min, g_min]` carrying the remaining `1 - 2ρ` of the mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModelDensity {
    tail: PowerLawTail,
    body: Body,
}

impl TailModelDensity {
    /// Tail model with a flat body.
    pub fn flat_body(tail: PowerLawTail) -> Self {
        Self { tail, body: Body::Flat }
    }

    /// Tail model whose body is the empirical histogram. Falls back to a flat
    /// body if the histogram has no mass inside `[-g_min, g_min]`.
    pub fn empirical_body(tail: PowerLawTail, hist: DensityHistogram) -> Self {
        let inside = hist.mass(-tail.g_min, tail.g_min);
        let body_mass = 1.0 - 2.0 * tail.rho;
        let body = if inside > 0.0 {
            Body::Empirical {
                hist,
                scale: body_mass / inside,
            }
        } else {
            Body::Flat
        };
        Self { tail, body }
    }

    pub fn tail(&self) -> &PowerLawTail {
        &self.tail
    }

    fn tail_coefficient(&self) -> f64 {
        let t = &self.tail;
        t.rho * (t.gamma - 1.0) * t.g_min.powf(t.gamma - 1.0)
    }

    /// One-sided tail mass over `[a, b]` with `g_min <= a <= b`.
    fn tail_mass(&self, a: f64, b: f64) -> f64 {
        let t = &self.tail;
        let surv = |x: f64| {
            if x.is_infinite() {
                0.0
            } else {
                (t.g_min / x).powf(t.gamma - 1.0)
            }
        };
        t.rho * (surv(a) - surv(b))
    }

    fn tail_cbrt(&self, a: f64, b: f64) -> f64 {
        let t = &self.tail;
        let c = self.tail_coefficient().cbrt();
        let e = 1.0 - t.gamma / 3.0;
        if e.abs() < 1e-12 {
            return c * (b / a).ln();
        }
        let pow = |x: f64| {
            if x.is_infinite() {
                if e < 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                x.powf(e)
            }
        };
        c * (pow(b) - pow(a)) / e
    }

    fn body_integral(&self, lo: f64, hi: f64, cube_root: bool) -> f64 {
        let g = self.tail.g_min;
        let (lo, hi) = (lo.max(-g), hi.min(g));
        if hi <= lo {
            return 0.0;
        }
        match &self.body {
            Body::Flat => {
                let p = (1.0 - 2.0 * self.tail.rho) / (2.0 * g);
                if cube_root {
                    p.cbrt() * (hi - lo)
                } else {
                    p * (hi - lo)
                }
            }
            Body::Empirical { hist, scale } => {
                if cube_root {
                    scale.cbrt() * hist.cbrt_mass(lo, hi)
                } else {
                    scale * hist.mass(lo, hi)
                }
            }
        }
    }

    fn integral(&self, lo: f64, hi: f64, cube_root: bool) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let g = self.tail.g_min;
        let side = |a: f64, b: f64| -> f64 {
            // a, b are magnitudes on one side, a < b
            let (a, b) = (a.max(g), b);
            if b <= a {
                0.0
            } else if cube_root {
                self.tail_cbrt(a, b)
            } else {
                self.tail_mass(a, b)
            }
        };
        let mut total = self.body_integral(lo, hi, cube_root);
        if hi > g {
            total += side(lo, hi);
        }
        if lo < -g {
            total += side(-hi, -lo);
        }
        total
    }
}

impl Density for TailModelDensity {
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        self.integral(lo, hi, false)
    }

    fn cbrt_mass(&self, lo: f64, hi: f64) -> f64 {
        self.integral(lo, hi, true)
    }

    fn pdf(&self, g: f64) -> f64 {
        let t = &self.tail;
        if g.abs() > t.g_min {
            return self.tail_coefficient() * g.abs().powf(-t.gamma);
        }
        match &self.body {
            Body::Flat => (1.0 - 2.0 * t.rho) / (2.0 * t.g_min),
            Body::Empirical { hist, scale } => scale * hist.pdf(g),
        }
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        (**self).mass(lo, hi)
    }

    fn cbrt_mass(&self, lo: f64, hi: f64) -> f64 {
        (**self).cbrt_mass(lo, hi)
    }

    fn pdf(&self, g: f64) -> f64 {
        (**self).pdf(g)
    }
}
