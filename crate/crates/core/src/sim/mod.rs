//! Distributed SGD over simulated clients with compressed uplinks.
//!
//! Each round broadcasts `θ_t`, collects one mini-batch gradient per client,
//! compresses every parameter group into a wire message, decodes and
//! aggregates the messages at the server and takes a gradient step. All
//! messages go through the same byte encoding a real deployment would use.

mod config;
mod objective;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{GroupSpec, LossConfig, ParamGroup, QSource, SimConfig, SimScheme, TailSettings, WeightMode};
pub use objective::{build_objective, LogisticSynthetic, NoisyQuadratic, Objective, SymmetricPareto};

use crate::density::{DensityHistogram, TailModelDensity};
use crate::quant::{dequantize, QuantError, QuantizedMessage, TwoStageQuantizer, WireScheme};
use crate::seed;
use crate::solver::{self, MassModel, Scheme, SolverError, SolverOptions};
use crate::tail::{self, PowerLawTail, TailError, TailFitOptions};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("round {round}, group {group}: tail fit failed: {source}")]
    Tail {
        round: usize,
        group: String,
        #[source]
        source: TailError,
    },
    #[error("round {round}, group {group}: solver failed: {source}")]
    Solver {
        round: usize,
        group: String,
        #[source]
        source: SolverError,
    },
    #[error("round {round}, client {client}, group {group}: {source}")]
    Quant {
        round: usize,
        client: usize,
        group: String,
        #[source]
        source: QuantError,
    },
    #[error("message decodes to dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("corrupt message: {0}")]
    CorruptMessage(String),
    #[error("weights must have one entry per message and sum to 1")]
    BadWeights,
    #[error("configs cannot be compared: {0}")]
    IncompatibleConfigs(String),
}

/// Fitted state of one parameter group, as logged each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub name: String,
    pub gamma: f64,
    pub g_min: f64,
    pub rho: f64,
    /// Threshold as transmitted.
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_alpha: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_beta: Option<usize>,
    /// The solved threshold fell at or below `g_min` and was raised to it.
    pub alpha_clamped: bool,
    /// Round of the fit this state came from.
    pub fitted_round: usize,
}

/// Encoder/decoder pair for one parameter group.
#[derive(Debug, Clone)]
pub enum GroupCodec {
    /// Little-endian f32 values, no header.
    Raw,
    /// Threshold and codebook fixed between refits.
    Fixed(TwoStageQuantizer),
    /// Threshold `max|g|` chosen per message; cube-root levels come from the
    /// shared histogram when present.
    PerMessage {
        scheme: WireScheme,
        bits: u8,
        density: Option<Arc<DensityHistogram>>,
    },
}

impl GroupCodec {
    pub fn encode(&self, values: &[f64], seed: u64) -> Result<Vec<u8>, QuantError> {
        match self {
            GroupCodec::Raw => Ok(values.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect()),
            GroupCodec::Fixed(q) => Ok(q.compress(values, seed)?.to_bytes()),
            GroupCodec::PerMessage { scheme, bits, density } => {
                let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let alpha = if max > 0.0 { max } else { f64::from(f32::MIN_POSITIVE) };
                let q = match density {
                    Some(d) => TwoStageQuantizer::cube_root(*scheme, alpha, *bits, d.as_ref())?,
                    None => TwoStageQuantizer::uniform(*scheme, alpha, *bits)?,
                };
                Ok(q.compress(values, seed)?.to_bytes())
            }
        }
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Vec<f64>, SimError> {
        let corrupt = |e: QuantError| SimError::CorruptMessage(e.to_string());
        match self {
            GroupCodec::Raw => {
                if !bytes.len().is_multiple_of(4) {
                    return Err(SimError::CorruptMessage(format!(
                        "raw length {} not a multiple of 4",
                        bytes.len()
                    )));
                }
                Ok(bytes
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                    .collect())
            }
            GroupCodec::Fixed(q) => {
                let msg = QuantizedMessage::from_bytes(bytes).map_err(corrupt)?;
                let h = msg.header();
                if h.scheme != q.scheme() || h.bits != q.bits() || f64::from(h.alpha) != q.alpha() {
                    return Err(SimError::CorruptMessage(
                        "header does not match the current codebook".into(),
                    ));
                }
                dequantize(&msg.indices().map_err(corrupt)?, q.codebook()).map_err(corrupt)
            }
            GroupCodec::PerMessage { density, .. } => {
                let msg = QuantizedMessage::from_bytes(bytes).map_err(corrupt)?;
                let shared = density.as_deref().map(|d| d as &dyn crate::density::Density);
                let codebook = msg.header().codebook(shared).map_err(corrupt)?;
                dequantize(&msg.indices().map_err(corrupt)?, &codebook).map_err(corrupt)
            }
        }
    }
}

/// `Σ w_i v_i` over decoded client vectors, summed in index order.
pub fn weighted_sum(vectors: &[Vec<f64>], weights: &[f64], dim: usize) -> Result<Vec<f64>, SimError> {
    if vectors.len() != weights.len() || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SimError::BadWeights);
    }
    let mut out = vec![0.0; dim];
    for (v, w) in vectors.iter().zip(weights) {
        if v.len() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Decodes one message per client and returns their weighted sum.
pub fn server_aggregate(
    messages: &[Vec<u8>],
    weights: &[f64],
    codec: &GroupCodec,
    dim: usize,
) -> Result<Vec<f64>, SimError> {
    let decoded = messages
        .iter()
        .map(|m| codec.decode(m))
        .collect::<Result<Vec<_>, _>>()?;
    weighted_sum(&decoded, weights, dim)
}

pub fn client_step(
    objective: &dyn Objective,
    theta: &[f64],
    client: usize,
    batch: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    objective.client_gradient(theta, client, batch, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `F(θ_t)` before the update.
    pub loss: f64,
    pub grad_norm_sq: f64,
    /// Uplink bytes sent by each client this round.
    pub client_bytes: Vec<u64>,
    pub round_bytes: u64,
    pub cum_bytes: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: SimScheme,
    pub bits: u8,
    pub seed: u64,
    pub rounds: usize,
    /// `F(θ_T)`.
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub total_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
}

impl MetricsLog {
    /// One JSON object per round, then `{"summary": …}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "summary": self.summary }))?;
        w.write_all(b"\n")
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// Truncated-scheme state of a group: its codec plus what was logged.
#[derive(Debug, Clone)]
struct Fitted {
    codec: GroupCodec,
    state: GroupState,
}

fn fit_truncated(
    scheme: Scheme,
    values: &[f64],
    cfg: &SimConfig,
    name: &str,
    round: usize,
) -> Result<Fitted, SimError> {
    let tail_err = |source| SimError::Tail {
        round,
        group: name.to_string(),
        source,
    };
    let tail = tail::fit_tail(
        values,
        &TailFitOptions {
            quantile: cfg.tail.quantile,
        },
    )
    .map_err(tail_err)?;
    let density = spliced_density(values, &tail, cfg.tail.bins);
    let flat = TailModelDensity::flat_body(tail);
    let model = match cfg.tail.q_source {
        QSource::Spliced => MassModel::Density(&density),
        QSource::Model => MassModel::Density(&flat),
        QSource::Unit => MassModel::Unit,
    };
    let s = cfg.intervals();
    let opts = SolverOptions {
        biscaled_mode: cfg.tail.biscaled_mode,
        ..SolverOptions::default()
    };
    let solver_err = |source| SimError::Solver {
        round,
        group: name.to_string(),
        source,
    };
    let (alpha, k, split, clamped) = match solver::solve_alpha(scheme, &tail, s, model, &opts) {
        Ok(r) => (r.alpha, r.k, r.s_alpha.zip(r.s_beta), false),
        Err(SolverError::AlphaBelowGmin { .. }) => {
            let alpha = tail.g_min;
            if scheme == Scheme::BiScaled {
                let (k, _) = solver::best_k(alpha, model);
                let sp = solver::split_levels_biscaled(s, k, alpha, model).map_err(solver_err)?;
                (alpha, Some(k), Some((sp.s_alpha, sp.s_beta)), true)
            } else {
                (alpha, None, None, true)
            }
        }
        Err(e) => return Err(solver_err(e)),
    };
    let quant_err = |source| SimError::Quant {
        round,
        client: 0,
        group: name.to_string(),
        source,
    };
    let q = match scheme {
        Scheme::Uniform => TwoStageQuantizer::uniform(WireScheme::TqUniform, alpha, cfg.bits),
        Scheme::NonUniform => TwoStageQuantizer::cube_root(WireScheme::Tnq, alpha, cfg.bits, &density),
        Scheme::BiScaled => {
            let (sa, sb) = split.expect("biscaled split");
            TwoStageQuantizer::biscaled(alpha, cfg.bits, k.expect("biscaled k"), sa as u16, sb as u16)
        }
    }
    .map_err(quant_err)?;
    let state = GroupState {
        name: name.to_string(),
        gamma: tail.gamma,
        g_min: tail.g_min,
        rho: tail.rho,
        alpha: q.alpha(),
        k,
        s_alpha: split.map(|s| s.0),
        s_beta: split.map(|s| s.1),
        alpha_clamped: clamped,
        fitted_round: round,
    };
    Ok(Fitted {
        codec: GroupCodec::Fixed(q),
        state,
    })
}

/// Empirical body on `[-g_min, g_min]` joined to the fitted power-law tails.
pub fn spliced_density(values: &[f64], tail: &PowerLawTail, bins: usize) -> TailModelDensity {
    let body: Vec<f64> = values.iter().copied().filter(|v| v.abs() <= tail.g_min).collect();
    if body.is_empty() {
        return TailModelDensity::flat_body(*tail);
    }
    let hist = DensityHistogram::from_samples(&body, bins.max(2), true);
    TailModelDensity::empirical_body(*tail, hist)
}

/// Runs `cfg.problem.rounds` rounds and returns the per-round log.
pub fn run(cfg: &SimConfig) -> Result<MetricsLog, SimError> {
    cfg.validate()?;
    let weights = cfg.resolved_weights();
    let objective = build_objective(cfg, &weights);
    run_with(cfg, objective.as_ref(), &weights)
}

/// [`run`] against a caller-supplied objective.
pub fn run_with(cfg: &SimConfig, objective: &dyn Objective, weights: &[f64]) -> Result<MetricsLog, SimError> {
    cfg.validate()?;
    let p = &cfg.problem;
    if objective.dim() != p.dim || objective.clients() != p.clients || weights.len() != p.clients {
        return Err(SimError::Config(
            "objective does not match the problem dimensions".into(),
        ));
    }
    let groups = cfg.resolved_groups();
    let mut theta = objective.initial_point();
    let mut velocity = vec![0.0; p.dim];
    let mut fitted: Vec<Option<Fitted>> = vec![None; groups.len()];
    let mut records = Vec::with_capacity(p.rounds);
    let mut cum_bytes = 0u64;

    for t in 0..p.rounds {
        let loss = objective.loss(&theta);
        let grad_norm_sq = objective.gradient(&theta).iter().map(|g| g * g).sum();

        let grads: Vec<Vec<f64>> = (0..p.clients)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed::stream(cfg.seed, "client", &[t as u64, i as u64]);
                client_step(objective, &theta, i, p.batch, &mut rng)
            })
            .collect();

        let codecs: Vec<GroupCodec> = groups
            .iter()
            .enumerate()
            .map(|(gi, g)| group_codec(cfg, &grads, g, t, &mut fitted[gi]))
            .collect::<Result<_, _>>()?;

        let messages: Vec<Vec<Vec<u8>>> = (0..p.clients)
            .into_par_iter()
            .map(|i| {
                groups
                    .iter()
                    .zip(&codecs)
                    .enumerate()
                    .map(|(gi, (g, codec))| {
                        let s = seed::derive_seed(cfg.seed, "quant", &[t as u64, i as u64, gi as u64]);
                        codec
                            .encode(&grads[i][g.start..g.end], s)
                            .map_err(|source| SimError::Quant {
                                round: t,
                                client: i,
                                group: g.name.clone(),
                                source,
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;

        let mut update = vec![0.0; p.dim];
        for (gi, (g, codec)) in groups.iter().zip(&codecs).enumerate() {
            let group_msgs: Vec<Vec<u8>> = messages.iter().map(|m| m[gi].clone()).collect();
            let agg = server_aggregate(&group_msgs, weights, codec, g.end - g.start)?;
            update[g.start..g.end].copy_from_slice(&agg);
        }

        let client_bytes: Vec<u64> = messages
            .iter()
            .map(|m| m.iter().map(|b| b.len() as u64).sum())
            .collect();
        let round_bytes: u64 = client_bytes.iter().sum();
        cum_bytes += round_bytes;

        for ((th, v), u) in theta.iter_mut().zip(velocity.iter_mut()).zip(&update) {
            *v = cfg.momentum * *v + u;
            *th -= p.eta * *v;
        }

        records.push(RoundRecord {
            round: t,
            loss,
            grad_norm_sq,
            client_bytes,
            round_bytes,
            cum_bytes,
            groups: fitted.iter().flatten().map(|f| f.state.clone()).collect(),
        });
    }

    let final_loss = objective.loss(&theta);
    let final_grad_norm_sq = objective.gradient(&theta).iter().map(|g| g * g).sum();
    Ok(MetricsLog {
        records,
        summary: RunSummary {
            scheme: cfg.scheme,
            bits: cfg.bits,
            seed: cfg.seed,
            rounds: p.rounds,
            final_loss,
            final_grad_norm_sq,
            total_bytes: cum_bytes,
        },
    })
}

fn pooled(grads: &[Vec<f64>], g: &ParamGroup) -> Vec<f64> {
    grads.iter().flat_map(|v| v[g.start..g.end].iter().copied()).collect()
}

fn group_codec(
    cfg: &SimConfig,
    grads: &[Vec<f64>],
    g: &ParamGroup,
    round: usize,
    slot: &mut Option<Fitted>,
) -> Result<GroupCodec, SimError> {
    let refit = round.is_multiple_of(cfg.tail.refit_every) || slot.is_none();
    match cfg.scheme {
        SimScheme::Dsgd => Ok(GroupCodec::Raw),
        SimScheme::Qsgd => Ok(GroupCodec::PerMessage {
            scheme: WireScheme::Qsgd,
            bits: cfg.bits,
            density: None,
        }),
        SimScheme::Nqsgd => {
            if refit {
                let hist = DensityHistogram::from_samples(&pooled(grads, g), cfg.tail.bins, true);
                *slot = Some(Fitted {
                    codec: GroupCodec::PerMessage {
                        scheme: WireScheme::Nqsgd,
                        bits: cfg.bits,
                        density: Some(Arc::new(hist)),
                    },
                    state: GroupState {
                        name: g.name.clone(),
                        gamma: f64::NAN,
                        g_min: f64::NAN,
                        rho: f64::NAN,
                        alpha: f64::NAN,
                        k: None,
                        s_alpha: None,
                        s_beta: None,
                        alpha_clamped: false,
                        fitted_round: round,
                    },
                });
            }
            Ok(slot.as_ref().expect("fitted above").codec.clone())
        }
        SimScheme::Tqsgd | SimScheme::Tnqsgd | SimScheme::Tbqsgd => {
            if refit {
                let scheme = cfg.scheme.truncated().expect("truncated scheme");
                match fit_truncated(scheme, &pooled(grads, g), cfg, &g.name, round) {
                    Ok(f) => *slot = Some(f),
                    // a failed refit keeps the previous fit when there is one
                    Err(e) if slot.is_none() => return Err(e),
                    Err(_) => {}
                }
            }
            Ok(slot.as_ref().expect("fitted above").codec.clone())
        }
    }
}

/// Aligned runs of several configs on the same problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub runs: Vec<MetricsLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: SimScheme,
    pub bits: u8,
    pub round: usize,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub cum_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub scheme: SimScheme,
    pub bits: u8,
    pub total_bytes: u64,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
}

impl ComparisonTable {
    pub fn rows(&self) -> impl Iterator<Item = ComparisonRow> + '_ {
        self.runs.iter().flat_map(|log| {
            log.records.iter().map(move |r| ComparisonRow {
                scheme: log.summary.scheme,
                bits: log.summary.bits,
                round: r.round,
                loss: r.loss,
                grad_norm_sq: r.grad_norm_sq,
                cum_bytes: r.cum_bytes,
            })
        })
    }

    /// Communication budget against final loss, one row per run.
    pub fn tradeoff(&self) -> Vec<TradeoffRow> {
        self.runs
            .iter()
            .map(|log| TradeoffRow {
                scheme: log.summary.scheme,
                bits: log.summary.bits,
                total_bytes: log.summary.total_bytes,
                final_loss: log.summary.final_loss,
                final_grad_norm_sq: log.summary.final_grad_norm_sq,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.rows() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every config; all must share the seed, loss and problem.
pub fn compare(configs: &[SimConfig]) -> Result<ComparisonTable, SimError> {
    let Some(first) = configs.first() else {
        return Err(SimError::IncompatibleConfigs("no configs".into()));
    };
    for c in &configs[1..] {
        if c.seed != first.seed {
            return Err(SimError::IncompatibleConfigs(format!(
                "seeds {} and {} differ",
                first.seed, c.seed
            )));
        }
        if c.loss != first.loss || c.problem != first.problem {
            return Err(SimError::IncompatibleConfigs("loss or problem settings differ".into()));
        }
        if c.weights != first.weights || c.client_sizes != first.client_sizes {
            return Err(SimError::IncompatibleConfigs("client weights differ".into()));
        }
    }
    let runs = configs.iter().map(run).collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonTable { runs })
}
