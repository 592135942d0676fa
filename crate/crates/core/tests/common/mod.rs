//! Reference implementations used by the integration and acceptance tests.
//! Nothing here calls into the library's numerics.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

pub const DUMP_LEN: usize = 50_000;

/// Symmetric γ = 4 sample with g_min = 1: 90% of magnitudes on a midpoint
/// grid over [0, 1), 10% at Pareto inverse-CDF midpoints `u^{-1/3}`.
/// Signs alternate.
pub fn gamma4_dump() -> Vec<f32> {
    let n_tail = DUMP_LEN / 10;
    let n_body = DUMP_LEN - n_tail;
    let body = (0..n_body).map(|j| (j as f64 + 0.5) / n_body as f64);
    let tail = (0..n_tail).map(|j| ((j as f64 + 0.5) / n_tail as f64).powf(-1.0 / 3.0));
    body.chain(tail)
        .enumerate()
        .map(|(i, m)| if i % 2 == 0 { m as f32 } else { -m as f32 })
        .collect()
}

pub fn dump_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn bundled_dump_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/pareto_gamma4.f32")
}

// ---------------------------------------------------------------- quadrature

/// Exp-sinh rule for `∫_a^∞ f`, step `h`, `x = a + exp(π/2 · sinh t)`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64, h: f64) -> f64 {
    let mut sum = 0.0;
    let kmax = (6.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let e = (FRAC_PI_2 * t.sinh()).exp();
        if !e.is_finite() || e == 0.0 {
            continue;
        }
        let w = FRAC_PI_2 * t.cosh() * e;
        let v = f(a + e) * w;
        if v.is_finite() {
            sum += v;
        }
    }
    sum * h
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Symmetric power-law tail density, one side carrying mass `rho`.
pub fn tail_pdf(g: f64, gamma: f64, g_min: f64, rho: f64) -> f64 {
    let a = g.abs();
    if a <= g_min {
        return 0.0;
    }
    rho * (gamma - 1.0) / g_min * (a / g_min).powf(-gamma)
}

/// `2∫_α^∞ (g-α)² p(g) dg` by exp-sinh quadrature.
pub fn bias_by_quadrature(gamma: f64, g_min: f64, rho: f64, alpha: f64) -> f64 {
    assert!(alpha >= g_min);
    2.0 * exp_sinh(
        |g| (g - alpha).powi(2) * tail_pdf(g, gamma, g_min, rho),
        alpha,
        1.0 / 256.0,
    )
}

// ---------------------------------------------------------------- histograms

/// Piecewise-constant density given by edges and bin masses.
#[derive(Debug, Clone)]
pub struct RefHist {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl RefHist {
    pub fn new(edges: Vec<f64>, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        Self {
            mass: weights.iter().map(|w| w / total).collect(),
            edges,
        }
    }

    /// Equal-width bins on `[-1, 1]` with weights `f(midpoint)`.
    pub fn from_fn(bins: usize, f: impl Fn(f64) -> f64) -> Self {
        let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect();
        let w = edges.windows(2).map(|e| f(0.5 * (e[0] + e[1]))).collect();
        Self::new(edges, w)
    }

    pub fn density(&self, i: usize) -> f64 {
        self.mass[i] / (self.edges[i + 1] - self.edges[i])
    }

    /// Mass on `[lo, hi]`, bin by bin.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        (0..self.mass.len())
            .map(|i| {
                let a = self.edges[i].max(lo);
                let b = self.edges[i + 1].min(hi);
                if b > a {
                    self.density(i) * (b - a)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `∫_lo^hi p^{1/3}`.
    pub fn cbrt_between(&self, lo: f64, hi: f64) -> f64 {
        (0..self.mass.len())
            .map(|i| {
                let a = self.edges[i].max(lo);
                let b = self.edges[i + 1].min(hi);
                if b > a {
                    self.density(i).cbrt() * (b - a)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        for i in 0..self.mass.len() {
            if u < self.mass[i] || i + 1 == self.mass.len() {
                let frac = if self.mass[i] > 0.0 {
                    (u / self.mass[i]).min(1.0)
                } else {
                    0.5
                };
                return self.edges[i] + frac * (self.edges[i + 1] - self.edges[i]);
            }
            u -= self.mass[i];
        }
        unreachable!()
    }

    pub fn q_u(&self, alpha: f64) -> f64 {
        self.mass_between(-alpha, alpha)
    }

    pub fn q_n(&self, alpha: f64) -> f64 {
        self.cbrt_between(-alpha, alpha).powi(3) / (2.0 * alpha).powi(2)
    }

    pub fn q_b(&self, alpha: f64, k: f64) -> f64 {
        let inner = self.mass_between(-k * alpha, k * alpha);
        let outer = self.mass_between(-alpha, -k * alpha) + self.mass_between(k * alpha, alpha);
        (outer.cbrt() * (1.0 - k).powf(2.0 / 3.0) + inner.cbrt() * k.powf(2.0 / 3.0)).powi(3)
    }
}

/// A symmetric histogram with random widths and masses on `[-L, L]`.
pub fn random_ref_hist<R: Rng>(rng: &mut R) -> RefHist {
    let half = rng.random_range(1..=24usize);
    let support: f64 = rng.random_range(0.2..10.0);
    let mut widths: Vec<f64> = (0..half).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = widths.iter().sum();
    widths.iter_mut().for_each(|w| *w *= support / total);
    let mut pos = vec![0.0];
    for w in &widths {
        pos.push(pos.last().unwrap() + w);
    }
    *pos.last_mut().unwrap() = support;
    let w_half: Vec<f64> = (0..half)
        .map(|_| rng.random_range(0.0..1.0f64).powi(3) + 1e-6)
        .collect();
    let mut edges: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    edges.extend(&pos[1..]);
    let mut w: Vec<f64> = w_half.iter().rev().copied().collect();
    w.extend(&w_half);
    RefHist::new(edges, w)
}

// ---------------------------------------------------------------- statistics

/// Sample mean and its standard error.
pub fn mean_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Ordinary least-squares slope.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---------------------------------------------------------------- error model

/// `Q α²/s² + 4ρ g_min^{γ-1} α^{3-γ}/((γ-2)(γ-3))` with `d = N = 1`.
pub fn frozen_error(alpha: f64, q: f64, s: usize, gamma: f64, g_min: f64, rho: f64) -> f64 {
    q * alpha * alpha / (s * s) as f64
        + 4.0 * rho * g_min.powf(gamma - 1.0) * alpha.powf(3.0 - gamma) / ((gamma - 2.0) * (gamma - 3.0))
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn argmin_by(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    *xs.iter()
        .min_by(|a, b| f(**a).total_cmp(&f(**b)))
        .expect("non-empty grid")
}

/// Flat-body model mass functionals: uniform density `(1-2ρ)/(2 g_min)` on
/// `[-g_min, g_min]` plus the power-law tails.
pub fn model_q_u(alpha: f64, gamma: f64, g_min: f64, rho: f64) -> f64 {
    if alpha <= g_min {
        (1.0 - 2.0 * rho) * alpha / g_min
    } else {
        1.0 - 2.0 * rho * (g_min / alpha).powf(gamma - 1.0)
    }
}

pub fn model_cbrt_mass(alpha: f64, gamma: f64, g_min: f64, rho: f64) -> f64 {
    let body = ((1.0 - 2.0 * rho) / (2.0 * g_min)).cbrt();
    if alpha <= g_min {
        return 2.0 * body * alpha;
    }
    let c = (rho * (gamma - 1.0) * g_min.powf(gamma - 1.0)).cbrt();
    let e = 1.0 - gamma / 3.0;
    2.0 * body * g_min + 2.0 * c * (alpha.powf(e) - g_min.powf(e)) / e
}

pub fn model_q_n(alpha: f64, gamma: f64, g_min: f64, rho: f64) -> f64 {
    model_cbrt_mass(alpha, gamma, g_min, rho).powi(3) / (2.0 * alpha).powi(2)
}
