use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};

use super::config::{LossConfig, SimConfig};
use crate::seed;

/// A finite-sum objective `F = Σ w_i F_i` split across clients.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn clients(&self) -> usize;
    fn initial_point(&self) -> Vec<f64>;
    /// Reported training loss at `theta`.
    fn loss(&self, theta: &[f64]) -> f64;
    /// Exact `∇F(θ)`.
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
    /// Mini-batch stochastic gradient of client `i`.
    fn client_gradient(&self, theta: &[f64], client: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Symmetric Lomax (Pareto type II) draws with tail index `gamma`, scaled
/// to variance `var`: `|x| = c (U^{-1/(γ-1)} - 1)` has
/// `E x² = 2c² / ((γ-2)(γ-3))`.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricPareto {
    scale: f64,
    shape: Option<Pareto<f64>>,
}

impl SymmetricPareto {
    pub fn with_variance(gamma: f64, var: f64) -> Self {
        if var <= 0.0 {
            return Self {
                scale: 0.0,
                shape: None,
            };
        }
        assert!(gamma > 3.0, "finite variance needs gamma > 3");
        let scale = (var * (gamma - 2.0) * (gamma - 3.0) / 2.0).sqrt();
        Self {
            scale,
            shape: Some(Pareto::new(1.0, gamma - 1.0).expect("valid shape")),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(p) = self.shape else { return 0.0 };
        let mag = self.scale * (p.sample(rng) - 1.0);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }
}

/// `F_i(θ) = ½‖θ - θ*_i‖²` plus additive gradient noise.
pub struct NoisyQuadratic {
    optimum: Vec<f64>,
    client_optima: Vec<Vec<f64>>,
    start: Vec<f64>,
    noise: SymmetricPareto,
}

impl NoisyQuadratic {
    pub fn new(cfg: &SimConfig, weights: &[f64]) -> Self {
        let LossConfig::Quadratic {
            noise_tail,
            heterogeneity,
            heterogeneity_tail,
            init_scale,
        } = cfg.loss
        else {
            panic!("quadratic objective needs a quadratic loss config");
        };
        let d = cfg.problem.dim;
        let mut rng = seed::stream(cfg.seed, "optimum", &[]);
        let optimum: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let start: Vec<f64> = optimum
            .iter()
            .map(|o| o + init_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let offsets = SymmetricPareto::with_variance(heterogeneity_tail, heterogeneity * heterogeneity);
        let mut client_optima: Vec<Vec<f64>> = (0..cfg.problem.clients)
            .map(|i| {
                let mut r = seed::stream(cfg.seed, "offset", &[i as u64]);
                (0..d).map(|_| offsets.sample(&mut r)).collect()
            })
            .collect();
        for j in 0..d {
            let mean: f64 = client_optima.iter().zip(weights).map(|(h, w)| w * h[j]).sum();
            for h in client_optima.iter_mut() {
                h[j] += optimum[j] - mean;
            }
        }
        Self {
            optimum,
            client_optima,
            start,
            noise: SymmetricPareto::with_variance(noise_tail, cfg.problem.sigma2 / d as f64),
        }
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn client_optimum(&self, i: usize) -> &[f64] {
        &self.client_optima[i]
    }
}

impl Objective for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.optimum.len()
    }

    fn clients(&self) -> usize {
        self.client_optima.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }

    /// `F(θ) - F*`.
    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * theta
            .iter()
            .zip(&self.optimum)
            .map(|(t, o)| (t - o) * (t - o))
            .sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.optimum).map(|(t, o)| t - o).collect()
    }

    fn client_gradient(&self, theta: &[f64], client: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let inv = 1.0 / batch as f64;
        theta
            .iter()
            .zip(&self.client_optima[client])
            .map(|(t, o)| {
                let noise: f64 = (0..batch).map(|_| self.noise.sample(rng)).sum();
                t - o + noise * inv
            })
            .collect()
    }
}

/// Ridge-regularised logistic regression on a two-Gaussian mixture.
pub struct LogisticSynthetic {
    dim: usize,
    // per client: rows of features (bias appended) and ±1 labels
    features: Vec<Vec<Vec<f64>>>,
    labels: Vec<Vec<f64>>,
    weights: Vec<f64>,
    l2: f64,
}

impl LogisticSynthetic {
    pub fn new(cfg: &SimConfig, weights: &[f64]) -> Self {
        let LossConfig::Logistic { separation, l2, .. } = cfg.loss else {
            panic!("logistic objective needs a logistic loss config");
        };
        let d = cfg.problem.dim;
        let p = d - 1;
        let shift = separation / (p as f64).sqrt();
        let sizes = cfg.resolved_client_sizes();
        let mut features = Vec::with_capacity(sizes.len());
        let mut labels = Vec::with_capacity(sizes.len());
        for (i, &n) in sizes.iter().enumerate() {
            let mut rng = seed::stream(cfg.seed, "data", &[i as u64]);
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut x: Vec<f64> = (0..p)
                    .map(|_| y * shift + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                x.push(1.0);
                xs.push(x);
                ys.push(y);
            }
            features.push(xs);
            labels.push(ys);
        }
        Self {
            dim: d,
            features,
            labels,
            weights: weights.to_vec(),
            l2,
        }
    }

    fn accumulate(
        &self,
        theta: &[f64],
        client: usize,
        rows: impl Iterator<Item = usize>,
        grad: &mut [f64],
        scale: f64,
    ) {
        for r in rows {
            let x = &self.features[client][r];
            let y = self.labels[client][r];
            let margin = y * dot(theta, x);
            // d/dθ log(1 + e^{-m}) = -y x σ(-m)
            let coef = -y * sigmoid(-margin) * scale;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += coef * xi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Objective for LogisticSynthetic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn clients(&self) -> usize {
        self.features.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let data: f64 = (0..self.clients())
            .map(|i| {
                let n = self.labels[i].len() as f64;
                let sum: f64 = self.features[i]
                    .iter()
                    .zip(&self.labels[i])
                    .map(|(x, y)| log1p_exp(-y * dot(theta, x)))
                    .sum();
                self.weights[i] * sum / n
            })
            .sum();
        data + 0.5 * self.l2 * dot(theta, theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut grad: Vec<f64> = theta.iter().map(|t| self.l2 * t).collect();
        for i in 0..self.clients() {
            let n = self.labels[i].len();
            self.accumulate(theta, i, 0..n, &mut grad, self.weights[i] / n as f64);
        }
        grad
    }

    fn client_gradient(&self, theta: &[f64], client: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.labels[client].len();
        let mut grad: Vec<f64> = theta.iter().map(|t| self.l2 * t).collect();
        let rows: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n)).collect();
        self.accumulate(theta, client, rows.into_iter(), &mut grad, 1.0 / batch as f64);
        grad
    }
}

pub fn build_objective(cfg: &SimConfig, weights: &[f64]) -> Box<dyn Objective> {
    match cfg.loss {
        LossConfig::Quadratic { .. } => Box::new(NoisyQuadratic::new(cfg, weights)),
        LossConfig::Logistic { .. } => Box::new(LogisticSynthetic::new(cfg, weights)),
    }
}
