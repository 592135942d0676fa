//! Self-checks behind `htq verify`. Each suite recomputes a property of the
//! library against an independent numerical reference.

use clap::ValueEnum;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::{DensityHistogram, TailModelDensity};
use crate::quant::{self, Codebook, DensitySpec};
use crate::seed;
use crate::solver::{self, MassModel, ProblemSpec, Scheme, SolverError, SolverOptions};
use crate::tail::PowerLawTail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Monte Carlo MSE against the quarter and high-rate bounds.
    Lemma1,
    /// Truncation bias closed form against quadrature.
    Bias,
    /// Solver threshold against a grid minimizer of the error model.
    Fixedpoint,
    /// `Q_N ≤ Q_U ≤ 1` and `Q_B ≤ 1` on random histograms.
    Holder,
    /// Log-log slope of the quantization term in `s`.
    Slope,
    /// Bound ordering of the non-uniform and bi-scaled schemes.
    Ordering,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Bias => "bias",
            Suite::Fixedpoint => "fixedpoint",
            Suite::Holder => "holder",
            Suite::Slope => "slope",
            Suite::Ordering => "ordering",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let checks = match suite {
        Suite::Lemma1 => lemma1(seed),
        Suite::Bias => bias(),
        Suite::Fixedpoint => fixedpoint(),
        Suite::Holder => holder(seed),
        Suite::Slope => slope(),
        Suite::Ordering => ordering(),
    };
    SuiteReport { suite, seed, checks }
}

// ---------------------------------------------------------------- quadrature

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive 15-point Gauss–Kronrod on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let whole = gk15(&f, a, b).0.abs().max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= rel_tol * whole * (hi - lo) / (b - a) || depth >= 50 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `2∫_α^∞ (g-α)² p(g) dg` under the power-law tail, by quadrature after
/// mapping `g = α u^{-1/(γ-3)}` onto `u ∈ (0, 1]`.
pub fn bias_quadrature(tail: &PowerLawTail, alpha: f64) -> f64 {
    let g = tail.gamma;
    let p = 1.0 / (g - 3.0);
    let c = tail.rho * (g - 1.0) * tail.g_min.powf(g - 1.0);
    let scale = c * alpha.powf(3.0 - g) * p;
    2.0 * scale * integrate(|u: f64| (1.0 - u.powf(p)).powi(2), 0.0, 1.0, 1e-13)
}

// ---------------------------------------------------------------- lemma1

fn gaussian_hist(sd: f64, bins: usize) -> DensityHistogram {
    let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect();
    let w = edges
        .windows(2)
        .map(|e| {
            let m = 0.5 * (e[0] + e[1]);
            (-m * m / (2.0 * sd * sd)).exp()
        })
        .collect();
    DensityHistogram::from_weights(edges, w).expect("valid histogram")
}

fn triangle_hist(bins: usize) -> DensityHistogram {
    let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect();
    let w = edges.windows(2).map(|e| 1.0 - 0.5 * (e[0] + e[1]).abs()).collect();
    DensityHistogram::from_weights(edges, w).expect("valid histogram")
}

fn flat_hist() -> DensityHistogram {
    DensityHistogram::from_weights(vec![-1.0, 0.0, 1.0], vec![1.0, 1.0]).expect("valid histogram")
}

/// Mean and standard error of the squared quantization error over `n`
/// draws from `density`.
fn mc_mse(cb: &Codebook, density: &DensityHistogram, n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let xs: Vec<f64> = (0..n).map(|_| density.sample(rng)).collect();
    let idx = quant::stochastic_quantize_with(&xs, cb, rng).expect("values inside the codebook");
    let ys = quant::dequantize(&idx, cb).expect("valid indices");
    let (mut sum, mut sum2) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let e = (x - y) * (x - y);
        sum += e;
        sum2 += e * e;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

fn lemma1(seed: u64) -> Vec<Check> {
    let mut rng = seed::stream(seed, "verify-lemma1", &[]);
    let densities = [
        ("flat", flat_hist()),
        ("triangle", triangle_hist(64)),
        ("gauss", gaussian_hist(0.35, 64)),
    ];
    let mut checks = Vec::new();
    for (dname, d) in &densities {
        let books = [
            ("uniform s=3", DensitySpec::Uniform { alpha: 1.0, s: 3 }),
            ("uniform s=15", DensitySpec::Uniform { alpha: 1.0, s: 15 }),
            (
                "cube-root s=7",
                DensitySpec::CubeRoot {
                    alpha: 1.0,
                    s: 7,
                    density: d,
                },
            ),
            (
                "biscaled s=7",
                DensitySpec::BiScaled {
                    alpha: 1.0,
                    k: 0.4,
                    s_alpha: 2,
                    s_beta: 5,
                },
            ),
        ];
        for (bname, spec) in books {
            let cb = quant::build_codebook(&spec).expect("valid codebook");
            let bound = quant::mse_bound(&cb, d).expect("density inside codebook");
            let (mse, se) = mc_mse(&cb, d, 200_000, &mut rng);
            checks.push(Check::new(
                format!("quarter bound {dname} {bname}"),
                mse <= bound.quarter + 3.0 * se,
                format!("mse {mse:.6e} ± {se:.1e}, bound {:.6e}", bound.quarter),
            ));
        }
    }
    let smooth = gaussian_hist(0.35, 4096);
    for s in [63, 127, 255] {
        let cb = quant::build_codebook(&DensitySpec::Uniform { alpha: 1.0, s }).expect("valid codebook");
        let bound = quant::mse_bound(&cb, &smooth).expect("density inside codebook");
        let (mse, _) = mc_mse(&cb, &smooth, 200_000, &mut rng);
        let rel = (bound.highrate_sixth - mse).abs() / mse;
        checks.push(Check::new(
            format!("high-rate estimate s={s}"),
            rel <= 0.05,
            format!("mse {mse:.6e}, estimate {:.6e}, rel {rel:.3}", bound.highrate_sixth),
        ));
    }
    checks
}

// ---------------------------------------------------------------- bias

fn bias() -> Vec<Check> {
    let mut checks = Vec::new();
    for gamma in [3.5, 4.0, 4.5, 5.0] {
        for (rho, g_min, alpha) in [(0.1, 0.01, 0.02), (0.3, 1.0, 1.0), (0.05, 0.5, 7.5)] {
            let tail = PowerLawTail::new(gamma, g_min, rho).expect("valid tail");
            let closed = solver::truncation_bias(&tail, alpha, 1, 1).expect("gamma > 3");
            let quad = bias_quadrature(&tail, alpha);
            let rel = (closed - quad).abs() / quad;
            checks.push(Check::new(
                format!("gamma={gamma} rho={rho} g_min={g_min} alpha={alpha}"),
                rel <= 1e-6,
                format!("closed {closed:.12e}, quadrature {quad:.12e}, rel {rel:.1e}"),
            ));
        }
    }
    checks
}

// ---------------------------------------------------------------- fixedpoint

pub const LATTICE_GAMMA: [f64; 4] = [3.5, 4.0, 4.5, 5.0];
pub const LATTICE_RHO: [f64; 3] = [0.05, 0.1, 0.3];
pub const LATTICE_S: [usize; 3] = [3, 7, 15];

/// Minimizer of `Q α²/s² + bias(α)` over a log grid of `points` values in
/// `[g_min, 10³ g_min]`, with `Q` frozen.
pub fn grid_minimizer(tail: &PowerLawTail, s: usize, q: f64, points: usize) -> f64 {
    let (lo, hi) = (tail.g_min.ln(), (1e3 * tail.g_min).ln());
    let objective = |a: f64| q * a * a / (s * s) as f64 + solver::truncation_bias(tail, a, 1, 1).expect("gamma > 3");
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .expect("non-empty grid")
}

fn fixedpoint() -> Vec<Check> {
    let mut checks = Vec::new();
    for scheme in [Scheme::Uniform, Scheme::NonUniform, Scheme::BiScaled] {
        for gamma in LATTICE_GAMMA {
            for rho in LATTICE_RHO {
                for s in LATTICE_S {
                    let tail = PowerLawTail::new(gamma, 1.0, rho).expect("valid tail");
                    let model = TailModelDensity::flat_body(tail);
                    let name = format!("{scheme:?} gamma={gamma} rho={rho} s={s}");
                    match solver::solve_alpha(scheme, &tail, s, MassModel::Density(&model), &SolverOptions::default()) {
                        Ok(r) => {
                            let grid = grid_minimizer(&tail, s, r.q_value, 10_000);
                            let rel = (r.alpha - grid).abs() / grid;
                            checks.push(Check::new(
                                name,
                                r.converged && rel <= 0.02,
                                format!("solver {:.6}, grid {grid:.6}, rel {rel:.2e}", r.alpha),
                            ));
                        }
                        Err(SolverError::AlphaBelowGmin { alpha, .. }) => checks.push(Check::new(
                            name,
                            true,
                            format!("fixed point {alpha:.4} below g_min, rejected"),
                        )),
                        Err(e) => checks.push(Check::new(name, false, e.to_string())),
                    }
                }
            }
        }
    }
    checks
}

// ---------------------------------------------------------------- holder

/// A symmetric histogram on `[-L, L]` with random bin widths and masses.
pub fn random_histogram(rng: &mut ChaCha8Rng) -> DensityHistogram {
    let half = rng.random_range(1..=32usize);
    let support: f64 = rng.random_range(0.5..5.0);
    let mut cuts: Vec<f64> = (0..half - 1).map(|_| rng.random_range(0.0..support)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pos = vec![0.0];
    pos.extend(cuts.into_iter().filter(|c| *c > 1e-9));
    pos.push(support);
    let w_half: Vec<f64> = (0..pos.len() - 1)
        .map(|_| {
            let u: f64 = rng.random();
            u * u
        })
        .collect();
    let mut edges: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    edges.extend(&pos[1..]);
    let mut w: Vec<f64> = w_half.iter().rev().copied().collect();
    w.extend(&w_half);
    if w.iter().all(|x| *x == 0.0) {
        w.iter_mut().for_each(|x| *x = 1.0);
    }
    DensityHistogram::from_weights(edges, w).expect("valid histogram")
}

fn holder(seed: u64) -> Vec<Check> {
    const SLACK: f64 = 1e-12;
    let mut rng = seed::stream(seed, "verify-holder", &[]);
    let (mut worst_nu, mut worst_u1, mut worst_b1, mut worst_bu) = (f64::MIN, f64::MIN, f64::MIN, f64::MIN);
    let mut violations = 0;
    for _ in 0..100 {
        let h = random_histogram(&mut rng);
        let support = h.support().1;
        for _ in 0..5 {
            let alpha = rng.random_range(0.05..1.5) * support;
            let m = MassModel::Density(&h);
            let qu = solver::q_u(alpha, m);
            let qn = solver::q_n(alpha, m);
            let (_, qb) = solver::best_k(alpha, m);
            worst_nu = worst_nu.max(qn - qu);
            worst_u1 = worst_u1.max(qu - 1.0);
            worst_b1 = worst_b1.max(qb - 1.0);
            worst_bu = worst_bu.max(qb - qu);
            if qn > qu + SLACK || qu > 1.0 + SLACK || qb > 1.0 + SLACK {
                violations += 1;
            }
        }
    }
    vec![
        Check::new(
            "Q_N <= Q_U",
            worst_nu <= SLACK,
            format!("max Q_N - Q_U = {worst_nu:.2e}"),
        ),
        Check::new("Q_U <= 1", worst_u1 <= SLACK, format!("max Q_U - 1 = {worst_u1:.2e}")),
        Check::new(
            "Q_B(k*) <= 1",
            worst_b1 <= SLACK,
            format!("max Q_B - 1 = {worst_b1:.2e}"),
        ),
        Check::new(
            "Q_B(k*) <= Q_U",
            worst_bu <= SLACK,
            format!("max Q_B - Q_U = {worst_bu:.2e}"),
        ),
        Check::new("500 evaluations", violations == 0, format!("{violations} violations")),
    ]
}

// ---------------------------------------------------------------- slope

pub const SLOPE_S: [usize; 5] = [7, 15, 31, 63, 127];

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Closed-form quantization term at each `s`, with `Q` taken at the solved
/// threshold under the flat-body model density.
pub fn quant_terms(scheme: Scheme, tail: &PowerLawTail, s_values: &[usize]) -> Result<Vec<f64>, SolverError> {
    let model = TailModelDensity::flat_body(*tail);
    s_values
        .iter()
        .map(|&s| {
            let r = solver::solve_alpha(scheme, tail, s, MassModel::Density(&model), &SolverOptions::default())?;
            Ok(solver::closed_form_term(tail, s, r.q_value, 1, 1))
        })
        .collect()
}

fn slope() -> Vec<Check> {
    let xs: Vec<f64> = SLOPE_S.iter().map(|&s| s as f64).collect();
    let mut checks = Vec::new();
    for scheme in [Scheme::Uniform, Scheme::NonUniform] {
        for gamma in [3.5, 4.0, 5.0] {
            let tail = PowerLawTail::new(gamma, 1.0, 0.1).expect("valid tail");
            let expected = (6.0 - 2.0 * gamma) / (gamma - 1.0);
            let name = format!("{scheme:?} gamma={gamma}");
            match quant_terms(scheme, &tail, &SLOPE_S) {
                Ok(ys) => {
                    let fitted = loglog_slope(&xs, &ys);
                    let rel = (fitted - expected).abs() / expected.abs();
                    checks.push(Check::new(
                        name,
                        rel <= 0.05,
                        format!("slope {fitted:.4}, expected {expected:.4}, rel {rel:.3}"),
                    ));
                }
                Err(e) => checks.push(Check::new(name, false, e.to_string())),
            }
        }
    }
    checks
}

// ---------------------------------------------------------------- ordering

/// Problem used for the bound-ordering lattice.
pub fn ordering_problem() -> ProblemSpec {
    ProblemSpec {
        clients: 8,
        batch: 1,
        dim: 1000,
        sigma2: 1.0,
        nu: 1.0,
        eta: 0.05,
        rounds: 1000,
        f_gap: 1.0,
    }
}

fn ordering() -> Vec<Check> {
    const SLACK: f64 = 1e-12;
    let problem = ordering_problem();
    let opts = SolverOptions::default();
    let mut checks = Vec::new();
    for gamma in LATTICE_GAMMA {
        for rho in LATTICE_RHO {
            for s in LATTICE_S {
                let tail = PowerLawTail::new(gamma, 1.0, rho).expect("valid tail");
                let model = TailModelDensity::flat_body(tail);
                let m = MassModel::Density(&model);
                let bound = |scheme| solver::convergence_bound(&problem, scheme, &tail, s, m, &opts);
                let name = format!("gamma={gamma} rho={rho} s={s}");
                match (
                    bound(Scheme::Uniform),
                    bound(Scheme::NonUniform),
                    bound(Scheme::BiScaled),
                ) {
                    (Ok(u), Ok(n), Ok(b)) => {
                        let (tu, tn, tb) = (
                            u.breakdown.total_bound,
                            n.breakdown.total_bound,
                            b.breakdown.total_bound,
                        );
                        checks.push(Check::new(
                            name,
                            tn <= tu * (1.0 + SLACK) && tb <= tu * (1.0 + SLACK),
                            format!("TQ {tu:.6e}, TNQ {tn:.6e}, TBQ {tb:.6e}"),
                        ));
                    }
                    (u, n, b) => {
                        let below = |r: &Result<_, SolverError>| matches!(r, Err(SolverError::AlphaBelowGmin { .. }));
                        checks.push(Check::new(
                            name,
                            below(&u) || below(&n) || below(&b),
                            "threshold below g_min for at least one scheme, not comparable",
                        ));
                    }
                }
            }
        }
    }
    checks
}
