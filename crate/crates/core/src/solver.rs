//! Truncation threshold selection and the error/convergence bounds.
//!
//! All three schemes share the fixed point
//! `α = g_min [2ρs² / ((γ-2) Q(α))]^{1/(γ-1)}` and differ only in the mass
//! functional `Q`: in-range mass for uniform levels, the cube-root functional
//! for density-matched levels, and the two-band functional for bi-scaled
//! levels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;
use crate::tail::PowerLawTail;

/// Tail indices at or below this are rejected; the bounds have `γ - 3`
/// denominators.
pub const MIN_SOLVER_GAMMA: f64 = 3.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("tail index {0} is too close to 3 or invalid")]
    GammaOutOfRange(f64),
    #[error("k = {0} must lie in (0, 1)")]
    InvalidK(f64),
    #[error("level budget s = {s} is too small, need at least {min}")]
    BudgetTooSmall { s: usize, min: usize },
    #[error("threshold {alpha} is not above g_min = {g_min}; the tail model does not apply at this budget")]
    AlphaBelowGmin { alpha: f64, g_min: f64 },
    #[error("learning rate {eta} exceeds 1/nu = {limit}")]
    InvalidEta { eta: f64, limit: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mass functional vanished at alpha = {0}")]
    DegenerateQ(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Uniform,
    NonUniform,
    BiScaled,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "tq" | "tqsgd" => Ok(Scheme::Uniform),
            "nonuniform" | "non-uniform" | "tnq" | "tnqsgd" => Ok(Scheme::NonUniform),
            "biscaled" | "bi-scaled" | "tbq" | "tbqsgd" => Ok(Scheme::BiScaled),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// Where the in-range mass comes from.
#[derive(Clone, Copy)]
pub enum MassModel<'a> {
    /// Mass spread uniformly over `[-α, α]` with total 1, so every `Q` is 1.
    Unit,
    Density(&'a dyn Density),
}

impl MassModel<'_> {
    fn mass(&self, lo: f64, hi: f64, alpha: f64) -> f64 {
        match self {
            MassModel::Unit => ((hi.min(alpha) - lo.max(-alpha)) / (2.0 * alpha)).max(0.0),
            MassModel::Density(d) => d.mass(lo, hi),
        }
    }
}

/// `Q_U(α) = ∫_{-α}^{α} p`.
pub fn q_u(alpha: f64, model: MassModel<'_>) -> f64 {
    match model {
        MassModel::Unit => 1.0,
        MassModel::Density(d) => d.mass(-alpha, alpha),
    }
}

/// `Q_N(α) = [∫_{-α}^{α} p^{1/3}]³ / (2α)²`.
pub fn q_n(alpha: f64, model: MassModel<'_>) -> f64 {
    match model {
        MassModel::Unit => 1.0,
        MassModel::Density(d) => d.cbrt_mass(-alpha, alpha).powi(3) / (4.0 * alpha * alpha),
    }
}

/// In-band and out-of-band mass for the bi-scaled split at `k`.
fn band_masses(alpha: f64, k: f64, model: MassModel<'_>) -> (f64, f64) {
    let inner = model.mass(-k * alpha, k * alpha, alpha);
    let outer = (model.mass(-alpha, alpha, alpha) - inner).max(0.0);
    (inner, outer)
}

/// `Q_B(α, k) = [m_out^{1/3} (1-k)^{2/3} + m_in^{1/3} k^{2/3}]³` with
/// `m_in` the mass on `|g| < kα` and `m_out` the rest of `[-α, α]`.
pub fn q_b(alpha: f64, k: f64, model: MassModel<'_>) -> Result<f64, SolverError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(SolverError::InvalidK(k));
    }
    let (inner, outer) = band_masses(alpha, k, model);
    Ok((outer.cbrt() * (1.0 - k).powf(2.0 / 3.0) + inner.cbrt() * k.powf(2.0 / 3.0)).powi(3))
}

/// `k ∈ {0.01, …, 0.99}`.
pub fn k_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

/// Grid minimiser of `Q_B(α, ·)`; the first grid point wins ties. Under
/// [`MassModel::Unit`] every `k` gives 1 and the midpoint is returned.
pub fn best_k(alpha: f64, model: MassModel<'_>) -> (f64, f64) {
    if matches!(model, MassModel::Unit) {
        return (0.5, 1.0);
    }
    let mut best = (0.5, f64::INFINITY);
    for k in k_grid() {
        let q = q_b(alpha, k, model).expect("grid k is in (0, 1)");
        if q < best.1 {
            best = (k, q);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSplit {
    /// Unrounded outer-band intervals.
    pub s_alpha_real: f64,
    /// Unrounded inner-band intervals.
    pub s_beta_real: f64,
    pub s_alpha: usize,
    pub s_beta: usize,
}

/// Splits `s` intervals between the bands from the mean densities
/// `p1` (inner) and `p2` (outer). The outer count is rounded to the nearest
/// even number in `[2, s - 1]` so both outer bands get the same count, and
/// the inner band takes the rest.
pub fn split_from_means(s: usize, k: f64, p1: f64, p2: f64) -> Result<LevelSplit, SolverError> {
    if s < 3 {
        return Err(SolverError::BudgetTooSmall { s, min: 3 });
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(SolverError::InvalidK(k));
    }
    let outer = p2.max(0.0).cbrt() * (1.0 - k);
    let inner = p1.max(0.0).cbrt() * k;
    let share = if outer + inner > 0.0 {
        outer / (outer + inner)
    } else {
        1.0 - k
    };
    let s_alpha_real = share * s as f64;
    let max_even = (s - 1) & !1;
    let s_alpha = ((2.0 * (s_alpha_real / 2.0).round()) as usize).clamp(2, max_even);
    Ok(LevelSplit {
        s_alpha_real,
        s_beta_real: s as f64 - s_alpha_real,
        s_alpha,
        s_beta: s - s_alpha,
    })
}

pub fn split_levels_biscaled(s: usize, k: f64, alpha: f64, model: MassModel<'_>) -> Result<LevelSplit, SolverError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(SolverError::InvalidK(k));
    }
    let (inner, outer) = band_masses(alpha, k, model);
    let p1 = inner / (2.0 * k * alpha);
    let p2 = outer / (2.0 * (1.0 - k) * alpha);
    split_from_means(s, k, p1, p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiScaledMode {
    /// `k*` is chosen once at the `Q = 1` threshold, then `α` iterates with
    /// `k` held fixed.
    #[default]
    OneStep,
    /// `k*` is re-chosen at every `α` update.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub damping: f64,
    pub biscaled_mode: BiScaledMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-6,
            damping: 0.5,
            biscaled_mode: BiScaledMode::OneStep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub scheme: Scheme,
    pub s: usize,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_alpha: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_beta: Option<usize>,
    /// The scheme's `Q` at the returned threshold.
    pub q_value: f64,
}

/// Right-hand side of the fixed point for a given `Q`.
pub fn alpha_from_q(tail: &PowerLawTail, s: usize, q: f64) -> f64 {
    let s = s as f64;
    tail.g_min * (2.0 * tail.rho * s * s / ((tail.gamma - 2.0) * q)).powf(1.0 / (tail.gamma - 1.0))
}

fn check_tail(tail: &PowerLawTail) -> Result<(), SolverError> {
    if !(tail.gamma.is_finite() && tail.gamma > MIN_SOLVER_GAMMA) {
        return Err(SolverError::GammaOutOfRange(tail.gamma));
    }
    if !(tail.g_min.is_finite() && tail.g_min > 0.0) {
        return Err(SolverError::InvalidInput(format!("g_min = {}", tail.g_min)));
    }
    if !(0.0..=0.5).contains(&tail.rho) {
        return Err(SolverError::InvalidInput(format!("rho = {}", tail.rho)));
    }
    Ok(())
}

fn scheme_q(scheme: Scheme, alpha: f64, k: f64, model: MassModel<'_>) -> f64 {
    match scheme {
        Scheme::Uniform => q_u(alpha, model),
        Scheme::NonUniform => q_n(alpha, model),
        Scheme::BiScaled => q_b(alpha, k, model).expect("k from grid"),
    }
}

/// Solves the threshold fixed point, starting from the `Q = 1` closed form.
/// A run that exhausts `max_iter` still returns its last iterate with
/// `converged = false`.
pub fn solve_alpha(
    scheme: Scheme,
    tail: &PowerLawTail,
    s: usize,
    model: MassModel<'_>,
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    check_tail(tail)?;
    if s == 0 {
        return Err(SolverError::BudgetTooSmall { s, min: 1 });
    }
    if scheme == Scheme::BiScaled && s < 3 {
        return Err(SolverError::BudgetTooSmall { s, min: 3 });
    }
    let mut alpha = alpha_from_q(tail, s, 1.0);
    if !(alpha > 0.0) {
        return Err(SolverError::AlphaBelowGmin {
            alpha,
            g_min: tail.g_min,
        });
    }
    let mut k = match scheme {
        Scheme::BiScaled => best_k(alpha, model).0,
        _ => 0.5,
    };

    let mut prev_step = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        if scheme == Scheme::BiScaled && opts.biscaled_mode == BiScaledMode::Alternating {
            k = best_k(alpha, model).0;
        }
        let q = scheme_q(scheme, alpha, k, model);
        if !(q > 0.0 && q.is_finite()) {
            return Err(SolverError::DegenerateQ(alpha));
        }
        let mut step = alpha_from_q(tail, s, q) - alpha;
        if prev_step * step < 0.0 {
            step *= opts.damping;
        }
        let next = alpha + step;
        let done = (next - alpha).abs() <= opts.rel_tol * alpha;
        prev_step = step;
        alpha = next;
        if done {
            converged = true;
            break;
        }
    }

    if alpha <= tail.g_min {
        return Err(SolverError::AlphaBelowGmin {
            alpha,
            g_min: tail.g_min,
        });
    }
    let q_value = scheme_q(scheme, alpha, k, model);
    let (k, s_alpha, s_beta) = if scheme == Scheme::BiScaled {
        let split = split_levels_biscaled(s, k, alpha, model)?;
        (Some(k), Some(split.s_alpha), Some(split.s_beta))
    } else {
        (None, None, None)
    };
    Ok(SolverResult {
        scheme,
        s,
        alpha,
        iterations,
        converged,
        k,
        s_alpha,
        s_beta,
        q_value,
    })
}

/// Level layout whose error is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuantPlan {
    Uniform { s: usize },
    NonUniform { s: usize },
    BiScaled { k: f64, s_alpha: usize, s_beta: usize },
}

impl QuantPlan {
    /// The plan a solver result prescribes.
    pub fn from_result(r: &SolverResult) -> Self {
        match r.scheme {
            Scheme::Uniform => QuantPlan::Uniform { s: r.s },
            Scheme::NonUniform => QuantPlan::NonUniform { s: r.s },
            Scheme::BiScaled => QuantPlan::BiScaled {
                k: r.k.expect("biscaled result has k"),
                s_alpha: r.s_alpha.expect("biscaled result has s_alpha"),
                s_beta: r.s_beta.expect("biscaled result has s_beta"),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub quant_variance: f64,
    pub trunc_bias: f64,
    pub e_tq: f64,
    pub e_dsgd: f64,
    pub total_bound: f64,
}

/// `2d/N ∫_α^∞ (g-α)² p(g) dg` under the power-law tail, in closed form:
/// `4dρ g_min^{γ-1} α^{3-γ} / (N(γ-2)(γ-3))`. Valid for `α ≥ g_min`.
pub fn truncation_bias(tail: &PowerLawTail, alpha: f64, d: usize, n: usize) -> Result<f64, SolverError> {
    let g = tail.gamma;
    if !(g > 3.0) {
        return Err(SolverError::GammaOutOfRange(g));
    }
    if !(alpha > 0.0) {
        return Err(SolverError::InvalidInput(format!("alpha = {alpha}")));
    }
    if n == 0 {
        return Err(SolverError::InvalidInput("N = 0".into()));
    }
    Ok(4.0 * d as f64 * tail.rho * tail.g_min.powf(g - 1.0) * alpha.powf(3.0 - g) / (n as f64 * (g - 2.0) * (g - 3.0)))
}

/// Variance and bias terms of the two-stage quantizer at threshold `alpha`.
/// `e_dsgd` is left at zero and `total_bound` equals `e_tq`.
pub fn error_tq(
    plan: &QuantPlan,
    tail: &PowerLawTail,
    alpha: f64,
    d: usize,
    n: usize,
    model: MassModel<'_>,
) -> Result<ErrorBreakdown, SolverError> {
    let trunc_bias = truncation_bias(tail, alpha, d, n)?;
    let scale = d as f64 / n as f64;
    let quant_variance = match *plan {
        QuantPlan::Uniform { s } => scale * q_u(alpha, model) * alpha * alpha / (s * s) as f64,
        QuantPlan::NonUniform { s } => scale * q_n(alpha, model) * alpha * alpha / (s * s) as f64,
        QuantPlan::BiScaled { k, s_alpha, s_beta } => {
            if !(k > 0.0 && k < 1.0) {
                return Err(SolverError::InvalidK(k));
            }
            if s_alpha == 0 || s_beta == 0 {
                return Err(SolverError::BudgetTooSmall {
                    s: s_alpha + s_beta,
                    min: 3,
                });
            }
            let (inner, outer) = band_masses(alpha, k, model);
            let beta = k * alpha;
            let band = (1.0 - k) * alpha;
            scale * (inner * beta * beta / (s_beta * s_beta) as f64 + outer * band * band / (s_alpha * s_alpha) as f64)
        }
    };
    let e_tq = quant_variance + trunc_bias;
    Ok(ErrorBreakdown {
        quant_variance,
        trunc_bias,
        e_tq,
        e_dsgd: 0.0,
        total_bound: e_tq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Number of clients `N`.
    pub clients: usize,
    /// Per-client minibatch size `B`.
    pub batch: usize,
    /// Model dimension `d`.
    pub dim: usize,
    /// Per-sample gradient variance bound `σ²`.
    pub sigma2: f64,
    /// Smoothness constant `ν`.
    #[serde(default = "one")]
    pub nu: f64,
    /// Learning rate `η`.
    pub eta: f64,
    /// Rounds `T`.
    pub rounds: usize,
    /// `F(θ_0) - F(θ*)`.
    #[serde(default = "one")]
    pub f_gap: f64,
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.clients == 0 || self.batch == 0 || self.dim == 0 || self.rounds == 0 {
            return Err(SolverError::InvalidInput("N, B, d and T must be positive".into()));
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("nu", self.nu),
            ("eta", self.eta),
            ("f_gap", self.f_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolverError::InvalidInput(format!("{name} = {v} must be positive")));
            }
        }
        if self.eta > 1.0 / self.nu {
            return Err(SolverError::InvalidEta {
                eta: self.eta,
                limit: 1.0 / self.nu,
            });
        }
        Ok(())
    }

    /// `2 F_gap / (Tη) + σ² / (NB)`.
    pub fn e_dsgd(&self) -> f64 {
        2.0 * self.f_gap / (self.rounds as f64 * self.eta) + self.sigma2 / (self.clients * self.batch) as f64
    }
}

/// `d g_min² (2ρ)^{2/(γ-1)} s^{(6-2γ)/(γ-1)} / (N(γ-3)(γ-2)^{2/(γ-1)})`, the
/// factor shared by all closed-form quantization terms.
pub fn base_term(tail: &PowerLawTail, s: usize, d: usize, n: usize) -> f64 {
    let g = tail.gamma;
    let e = 2.0 / (g - 1.0);
    d as f64 * tail.g_min * tail.g_min * (2.0 * tail.rho).powf(e) * (s as f64).powf((6.0 - 2.0 * g) / (g - 1.0))
        / (n as f64 * (g - 3.0) * (g - 2.0).powf(e))
}

/// Closed-form quantization term `(γ-1) Q^{(γ-3)/(γ-1)} · base_term`.
pub fn closed_form_term(tail: &PowerLawTail, s: usize, q: f64, d: usize, n: usize) -> f64 {
    let g = tail.gamma;
    (g - 1.0) * q.powf((g - 3.0) / (g - 1.0)) * base_term(tail, s, d, n)
}

/// The uniform-scheme bound with `Q` evaluated at the `Q = 1` threshold
/// `α'` instead of at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformVariant {
    pub alpha_prime: f64,
    pub q_u_prime: f64,
    /// `(γ-3) Q_U(α') + 2`.
    pub coefficient: f64,
    /// `(γ-1) Q_U(α*)^{(γ-3)/(γ-1)}`.
    pub closed_form_coefficient: f64,
    /// `coefficient - closed_form_coefficient`.
    pub epsilon: f64,
    /// `2 (1 - Q_U(α'))`.
    pub epsilon_limit: f64,
    pub quant_term: f64,
    pub total_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub solver: SolverResult,
    /// Error-model variance and bias at the solved threshold.
    pub model: ErrorBreakdown,
    /// Closed-form quantization term replacing `e_tq` in the convergence bound.
    pub quant_term: f64,
    /// `e_dsgd + quant_term` in `total_bound`, with `e_tq = quant_term`.
    pub breakdown: ErrorBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_variant: Option<UniformVariant>,
}

pub fn convergence_bound(
    problem: &ProblemSpec,
    scheme: Scheme,
    tail: &PowerLawTail,
    s: usize,
    model: MassModel<'_>,
    opts: &SolverOptions,
) -> Result<BoundReport, SolverError> {
    problem.validate()?;
    let solver = solve_alpha(scheme, tail, s, model, opts)?;
    let (d, n) = (problem.dim, problem.clients);
    let mut model_err = error_tq(&QuantPlan::from_result(&solver), tail, solver.alpha, d, n, model)?;
    let e_dsgd = problem.e_dsgd();
    model_err.e_dsgd = e_dsgd;
    model_err.total_bound = e_dsgd + model_err.e_tq;

    let quant_term = closed_form_term(tail, s, solver.q_value, d, n);
    let breakdown = ErrorBreakdown {
        quant_variance: model_err.quant_variance,
        trunc_bias: model_err.trunc_bias,
        e_tq: quant_term,
        e_dsgd,
        total_bound: e_dsgd + quant_term,
    };

    let uniform_variant = (scheme == Scheme::Uniform).then(|| {
        let g = tail.gamma;
        let alpha_prime = alpha_from_q(tail, s, 1.0);
        let q_u_prime = q_u(alpha_prime, model);
        let coefficient = (g - 3.0) * q_u_prime + 2.0;
        let closed_form_coefficient = (g - 1.0) * solver.q_value.powf((g - 3.0) / (g - 1.0));
        let quant = coefficient * base_term(tail, s, d, n);
        UniformVariant {
            alpha_prime,
            q_u_prime,
            coefficient,
            closed_form_coefficient,
            epsilon: coefficient - closed_form_coefficient,
            epsilon_limit: 2.0 * (1.0 - q_u_prime),
            quant_term: quant,
            total_bound: e_dsgd + quant,
        }
    });

    Ok(BoundReport {
        solver,
        model: model_err,
        quant_term,
        breakdown,
        uniform_variant,
    })
}
