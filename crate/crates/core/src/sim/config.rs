use serde::{Deserialize, Serialize};

use super::SimError;
use crate::solver::{BiScaledMode, ProblemSpec, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimScheme {
    /// Uncompressed f32 gradients.
    Dsgd,
    /// Uniform levels on `[-max|g|, max|g|]` per message.
    Qsgd,
    /// Cube-root levels of the pooled histogram on `[-max|g|, max|g|]`.
    Nqsgd,
    Tqsgd,
    Tnqsgd,
    Tbqsgd,
}

impl SimScheme {
    pub const ALL: [SimScheme; 6] = [
        SimScheme::Dsgd,
        SimScheme::Qsgd,
        SimScheme::Nqsgd,
        SimScheme::Tqsgd,
        SimScheme::Tnqsgd,
        SimScheme::Tbqsgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimScheme::Dsgd => "dsgd",
            SimScheme::Qsgd => "qsgd",
            SimScheme::Nqsgd => "nqsgd",
            SimScheme::Tqsgd => "tqsgd",
            SimScheme::Tnqsgd => "tnqsgd",
            SimScheme::Tbqsgd => "tbqsgd",
        }
    }

    /// Solver scheme for the truncated variants.
    pub fn truncated(self) -> Option<Scheme> {
        match self {
            SimScheme::Tqsgd => Some(Scheme::Uniform),
            SimScheme::Tnqsgd => Some(Scheme::NonUniform),
            SimScheme::Tbqsgd => Some(Scheme::BiScaled),
            _ => None,
        }
    }
}

impl std::fmt::Display for SimScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SimScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SimScheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `w_i = |D_i| / Σ|D_j|`.
    #[default]
    Proportional,
    /// `w_i = 1/N`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossConfig {
    /// `F_i(θ) = ½‖θ - θ*_i‖²` with symmetric Pareto gradient noise. The
    /// client optima `θ*_i = θ* + h_i` have heavy-tailed offsets `h_i`
    /// whose weighted mean is zero, so `F = ½‖θ - θ*‖² + const`.
    Quadratic {
        /// Tail index of the per-coordinate gradient noise.
        #[serde(default = "default_tail")]
        noise_tail: f64,
        /// Scale of the per-coordinate client offsets; zero gives identical clients.
        #[serde(default)]
        heterogeneity: f64,
        /// Tail index of the client offsets.
        #[serde(default = "default_tail")]
        heterogeneity_tail: f64,
        /// Standard deviation of `θ_0 - θ*` per coordinate.
        #[serde(default = "default_init")]
        init_scale: f64,
    },
    /// Two-class Gaussian mixture with logistic loss and a small ridge term;
    /// the last coordinate of `θ` is the bias.
    Logistic {
        #[serde(default = "default_samples")]
        samples_per_client: usize,
        /// Distance of each class mean from the origin.
        #[serde(default = "default_init")]
        separation: f64,
        #[serde(default = "default_l2")]
        l2: f64,
        /// Share of coordinates in the first parameter group.
        #[serde(default = "default_conv_fraction")]
        conv_fraction: f64,
    },
}

fn default_tail() -> f64 {
    3.5
}
fn default_init() -> f64 {
    1.0
}
fn default_samples() -> usize {
    200
}
fn default_l2() -> f64 {
    1e-3
}
fn default_conv_fraction() -> f64 {
    0.5
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::Quadratic {
            noise_tail: default_tail(),
            heterogeneity: 0.0,
            heterogeneity_tail: default_tail(),
            init_scale: default_init(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QSource {
    /// Empirical histogram inside `g_min`, fitted tails outside.
    #[default]
    Spliced,
    /// Flat body with fitted tails.
    Model,
    /// `Q ≡ 1`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSettings {
    pub quantile: f64,
    pub bins: usize,
    pub refit_every: usize,
    pub q_source: QSource,
    pub biscaled_mode: BiScaledMode,
}

impl Default for TailSettings {
    fn default() -> Self {
        Self {
            quantile: 0.9,
            bins: 1024,
            refit_every: 10,
            q_source: QSource::Spliced,
            biscaled_mode: BiScaledMode::OneStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// A contiguous slice of `θ` with its own tail fit and codebook.
pub type ParamGroup = GroupSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub scheme: SimScheme,
    /// Bits per index; ignored by DSGD.
    pub bits: u8,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub weights: WeightMode,
    /// Samples held by each client; defaults to equal sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_sizes: Option<Vec<usize>>,
    /// Parameter groups; defaults to one group for the quadratic loss and
    /// two for the logistic loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupSpec>>,
    #[serde(default)]
    pub tail: TailSettings,
    /// Heavy-ball momentum; zero is plain SGD.
    #[serde(default)]
    pub momentum: f64,
}

impl SimConfig {
    /// Heavy-tailed quadratic: `d = 1000`, `N = 8`, `T = 2000`, Pareto
    /// gradient noise with tail index 3.2 and light-tailed client offsets.
    pub fn heavy_tailed_quadratic(scheme: SimScheme, bits: u8, seed: u64) -> Self {
        Self::quadratic(scheme, bits, seed, 3.2, 0.8)
    }

    /// Same problem with tail index 4.5 noise and wider client offsets.
    /// Truncation bias dominates at low `b` and vanishes by `b = 8`.
    pub fn moderate_tailed_quadratic(scheme: SimScheme, bits: u8, seed: u64) -> Self {
        Self::quadratic(scheme, bits, seed, 4.5, 1.5)
    }

    fn quadratic(scheme: SimScheme, bits: u8, seed: u64, noise_tail: f64, heterogeneity: f64) -> Self {
        SimConfig {
            seed,
            scheme,
            bits,
            problem: ProblemSpec {
                clients: 8,
                batch: 1,
                dim: 1000,
                sigma2: 1000.0,
                nu: 1.0,
                eta: 0.05,
                rounds: 2000,
                f_gap: 500.0,
            },
            loss: LossConfig::Quadratic {
                noise_tail,
                heterogeneity,
                heterogeneity_tail: 10.0,
                init_scale: 1.0,
            },
            weights: WeightMode::Proportional,
            client_sizes: None,
            groups: None,
            tail: TailSettings::default(),
            momentum: 0.0,
        }
    }

    /// Synthetic logistic regression with two parameter groups.
    pub fn logistic(scheme: SimScheme, bits: u8, seed: u64) -> Self {
        SimConfig {
            seed,
            scheme,
            bits,
            problem: ProblemSpec {
                clients: 8,
                batch: 8,
                dim: 101,
                sigma2: 1.0,
                nu: 1.0,
                eta: 0.5,
                rounds: 300,
                f_gap: 1.0,
            },
            loss: LossConfig::Logistic {
                samples_per_client: 200,
                separation: 1.0,
                l2: 1e-3,
                conv_fraction: 0.5,
            },
            weights: WeightMode::Proportional,
            client_sizes: None,
            groups: None,
            tail: TailSettings::default(),
            momentum: 0.0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn intervals(&self) -> usize {
        (1usize << self.bits) - 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let p = &self.problem;
        if p.clients == 0 || p.batch == 0 || p.dim == 0 {
            return bad("clients, batch and dim must be positive".into());
        }
        if !(p.sigma2.is_finite() && p.sigma2 >= 0.0) {
            return bad(format!("sigma2 = {} must be non-negative", p.sigma2));
        }
        if !(p.eta > 0.0 && p.nu > 0.0 && p.eta <= 1.0 / p.nu) {
            return bad(format!("need 0 < eta <= 1/nu, got eta = {}, nu = {}", p.eta, p.nu));
        }
        if self.scheme != SimScheme::Dsgd && !(1..=8).contains(&self.bits) {
            return bad(format!("bits = {} outside 1..=8", self.bits));
        }
        if self.scheme == SimScheme::Tbqsgd && self.bits < 2 {
            return bad("tbqsgd needs at least 2 bits".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum = {} outside [0, 1)", self.momentum));
        }
        if self.tail.refit_every == 0 {
            return bad("refit_every must be positive".into());
        }
        if self.tail.bins < 2 {
            return bad("tail.bins must be at least 2".into());
        }
        if !(self.tail.quantile > 0.0 && self.tail.quantile < 1.0) {
            return bad(format!("tail.quantile = {} outside (0, 1)", self.tail.quantile));
        }
        if let Some(sizes) = &self.client_sizes {
            if sizes.len() != p.clients || sizes.contains(&0) {
                return bad("client_sizes needs one positive entry per client".into());
            }
        }
        match &self.loss {
            LossConfig::Quadratic {
                noise_tail,
                heterogeneity,
                heterogeneity_tail,
                init_scale,
            } => {
                if p.sigma2 > 0.0 && !(*noise_tail > 3.0) {
                    return bad(format!("noise_tail = {noise_tail} must exceed 3 for finite variance"));
                }
                if *heterogeneity < 0.0 || (*heterogeneity > 0.0 && !(*heterogeneity_tail > 3.0)) {
                    return bad("heterogeneity must be >= 0 with heterogeneity_tail > 3".into());
                }
                if !(*init_scale >= 0.0) {
                    return bad("init_scale must be non-negative".into());
                }
            }
            LossConfig::Logistic {
                samples_per_client,
                conv_fraction,
                l2,
                ..
            } => {
                if p.dim < 3 {
                    return bad("logistic loss needs dim >= 3".into());
                }
                if *samples_per_client == 0 || !(*conv_fraction > 0.0 && *conv_fraction < 1.0) || *l2 < 0.0 {
                    return bad("logistic needs samples_per_client > 0, 0 < conv_fraction < 1, l2 >= 0".into());
                }
            }
        }
        let groups = self.resolved_groups();
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.end <= g.start {
                return bad(format!(
                    "group {:?} does not continue a partition of [0, {})",
                    g.name, p.dim
                ));
            }
            next = g.end;
        }
        if next != p.dim {
            return bad(format!("groups cover [0, {next}) but dim = {}", p.dim));
        }
        Ok(())
    }

    pub fn resolved_groups(&self) -> Vec<ParamGroup> {
        if let Some(g) = &self.groups {
            return g.clone();
        }
        let d = self.problem.dim;
        match self.loss {
            LossConfig::Quadratic { .. } => vec![GroupSpec {
                name: "all".into(),
                start: 0,
                end: d,
            }],
            LossConfig::Logistic { conv_fraction, .. } => {
                let split = ((d as f64 * conv_fraction).round() as usize).clamp(1, d - 1);
                vec![
                    GroupSpec {
                        name: "conv".into(),
                        start: 0,
                        end: split,
                    },
                    GroupSpec {
                        name: "fc".into(),
                        start: split,
                        end: d,
                    },
                ]
            }
        }
    }

    pub fn resolved_client_sizes(&self) -> Vec<usize> {
        match (&self.client_sizes, &self.loss) {
            (Some(s), _) => s.clone(),
            (None, LossConfig::Logistic { samples_per_client, .. }) => vec![*samples_per_client; self.problem.clients],
            (None, _) => vec![1; self.problem.clients],
        }
    }

    pub fn resolved_weights(&self) -> Vec<f64> {
        let n = self.problem.clients;
        match self.weights {
            WeightMode::Uniform => vec![1.0 / n as f64; n],
            WeightMode::Proportional => {
                let sizes = self.resolved_client_sizes();
                let total: usize = sizes.iter().sum();
                sizes.iter().map(|&s| s as f64 / total as f64).collect()
            }
        }
    }
}
