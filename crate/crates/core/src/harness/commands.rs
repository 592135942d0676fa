//! Subcommand implementations. Each takes its parsed arguments plus the
//! global seed and returns once every output file and manifest is written.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;

use super::verify::{self, Suite};
use super::{CliError, RunManifest};
use crate::density::{DensityHistogram, TailModelDensity};
use crate::io;
use crate::quant::{self, Codebook, QuantizedMessage, TwoStageQuantizer, WireScheme};
use crate::seed;
use crate::sim::{self, QSource, SimConfig, SimScheme};
use crate::solver::{self, MassModel, ProblemSpec, QuantPlan, Scheme, SolverOptions};
use crate::tail::{self, PowerLawTail, TailFitOptions};

/// Histogram resolution used for densities built from an input file.
pub const DENSITY_BINS: usize = 1024;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("arguments serialize")
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(p) => io::write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value).expect("serializable")),
    }
    Ok(())
}

fn finish(manifest: RunManifest, started: Instant) -> Result<(), CliError> {
    if manifest.outputs.is_empty() {
        return Ok(());
    }
    manifest.write(started.elapsed())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QSourceArg {
    /// Histogram of the samples inside `g_min`, fitted tails outside.
    Spliced,
    /// Flat body with fitted tails.
    Model,
    /// `Q = 1`.
    Unit,
}

impl From<QSourceArg> for QSource {
    fn from(q: QSourceArg) -> Self {
        match q {
            QSourceArg::Spliced => QSource::Spliced,
            QSourceArg::Model => QSource::Model,
            QSourceArg::Unit => QSource::Unit,
        }
    }
}

/// Owns whichever density backs a `MassModel`.
enum Mass {
    Unit,
    Density(TailModelDensity),
}

impl Mass {
    fn build(source: QSourceArg, tail: &PowerLawTail, samples: Option<&[f64]>) -> Result<Self, CliError> {
        Ok(match source {
            QSourceArg::Unit => Mass::Unit,
            QSourceArg::Model => Mass::Density(TailModelDensity::flat_body(*tail)),
            QSourceArg::Spliced => {
                let values = samples.ok_or_else(|| usage("--q-source spliced needs --samples"))?;
                Mass::Density(sim::spliced_density(values, tail, DENSITY_BINS))
            }
        })
    }

    fn model(&self) -> MassModel<'_> {
        match self {
            Mass::Unit => MassModel::Unit,
            Mass::Density(d) => MassModel::Density(d),
        }
    }
}

/// Where the power-law tail comes from: a fitted-tail JSON or explicit
/// parameters.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TailArgs {
    /// Fitted-tail JSON as written by `fit`.
    #[arg(long, conflicts_with_all = ["gamma", "g_min", "rho"])]
    pub tail: Option<PathBuf>,
    #[arg(long, requires_all = ["g_min", "rho"])]
    pub gamma: Option<f64>,
    #[arg(long = "g-min")]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
}

impl TailArgs {
    fn given(&self) -> bool {
        self.tail.is_some() || self.gamma.is_some()
    }

    fn load(&self) -> Result<PowerLawTail, CliError> {
        if let Some(p) = &self.tail {
            let t: PowerLawTail = io::read_json(p)?;
            return PowerLawTail::new(t.gamma, t.g_min, t.rho)
                .map(|fresh| PowerLawTail {
                    n_tail: t.n_tail,
                    ..fresh
                })
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())));
        }
        match (self.gamma, self.g_min, self.rho) {
            (Some(g), Some(m), Some(r)) => PowerLawTail::new(g, m, r).map_err(|e| usage(e.to_string())),
            _ => Err(usage("give --tail FILE or all of --gamma, --g-min, --rho")),
        }
    }
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Gradient dump: raw little-endian f32, or one-column CSV (`.csv`, `.txt`).
    pub input: PathBuf,
    /// Output JSON; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Quantile of |g| used as `g_min`.
    #[arg(long, default_value_t = 0.9)]
    pub quantile: f64,
}

pub fn fit(args: &FitArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let values = io::read_gradients(&args.input)?;
    let fitted = tail::fit_tail(
        &values,
        &TailFitOptions {
            quantile: args.quantile,
        },
    )?;
    if fitted.clamped {
        eprintln!("warning: fitted gamma clamped to {}", fitted.gamma);
    }
    emit_json(args.out.as_deref(), &fitted)?;
    let mut m = RunManifest::new("fit", to_value(args), seed).input(&args.input);
    if let Some(o) = &args.out {
        m = m.output(o);
    }
    finish(m, started)
}

// ---------------------------------------------------------------- solve

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub tail: TailArgs,
    /// uniform (tq), nonuniform (tnq) or biscaled (tbq).
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    #[arg(long)]
    pub bits: u8,
    #[arg(long, default_value_t = 1)]
    pub clients: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Density used for Q(α). Defaults to `spliced` with --samples, else `model`.
    #[arg(long, value_enum)]
    pub q_source: Option<QSourceArg>,
    /// Gradient samples for the spliced density; also fits the tail when
    /// no tail is given.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Re-pick k at every iteration for the biscaled scheme.
    #[arg(long)]
    pub alternating: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    tail: PowerLawTail,
    q_source: QSourceArg,
    #[serde(flatten)]
    result: solver::SolverResult,
    error_tq: solver::ErrorBreakdown,
}

fn intervals(bits: u8) -> Result<usize, CliError> {
    if !(1..=8).contains(&bits) {
        return Err(usage(format!("--bits {bits} outside 1..=8")));
    }
    Ok((1usize << bits) - 1)
}

fn resolve_tail(tail: &TailArgs, samples: Option<&[f64]>) -> Result<PowerLawTail, CliError> {
    match (tail.given(), samples) {
        (true, _) => tail.load(),
        (false, Some(v)) => Ok(tail::fit_tail(v, &TailFitOptions::default())?),
        (false, None) => Err(usage("give a tail (--tail or --gamma/--g-min/--rho) or --samples")),
    }
}

fn solver_options(alternating: bool) -> SolverOptions {
    SolverOptions {
        biscaled_mode: if alternating {
            solver::BiScaledMode::Alternating
        } else {
            solver::BiScaledMode::OneStep
        },
        ..SolverOptions::default()
    }
}

pub fn solve(args: &SolveArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let s = intervals(args.bits)?;
    let samples = args.samples.as_deref().map(io::read_gradients).transpose()?;
    let tail = resolve_tail(&args.tail, samples.as_deref())?;
    let q_source = args.q_source.unwrap_or(if samples.is_some() {
        QSourceArg::Spliced
    } else {
        QSourceArg::Model
    });
    let mass = Mass::build(q_source, &tail, samples.as_deref())?;
    let result = solver::solve_alpha(args.scheme, &tail, s, mass.model(), &solver_options(args.alternating))?;
    if !result.converged {
        eprintln!("warning: no convergence after {} iterations", result.iterations);
    }
    let error_tq = solver::error_tq(
        &QuantPlan::from_result(&result),
        &tail,
        result.alpha,
        args.dim,
        args.clients.max(1),
        mass.model(),
    )?;
    emit_json(
        args.out.as_deref(),
        &SolveOutput {
            tail,
            q_source,
            result,
            error_tq,
        },
    )?;
    let mut m = RunManifest::new("solve", to_value(args), seed);
    for p in [&args.tail.tail, &args.samples].into_iter().flatten() {
        m = m.input(p);
    }
    if let Some(o) = &args.out {
        m = m.output(o);
    }
    finish(m, started)
}

// ---------------------------------------------------------------- bound

fn parse_range(s: &str) -> Result<(u8, u8), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got {s:?}"))?;
    let a: u8 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: u8 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a == 0 || b > 8 || a > b {
        return Err(format!("need 1 <= A <= B <= 8, got {a}:{b}"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub tail: TailArgs,
    #[arg(long, value_parser = parse_scheme, default_value = "uniform")]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 3)]
    pub bits: u8,
    #[arg(long, default_value_t = 8)]
    pub clients: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub rounds: usize,
    #[arg(long = "f-gap", default_value_t = 1.0)]
    pub f_gap: f64,
    #[arg(long, value_enum, default_value = "model")]
    pub q_source: QSourceArg,
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Inclusive bit range `A:B` for the CSV sweep.
    #[arg(long, value_parser = parse_range)]
    pub sweep_bits: Option<(u8, u8)>,
    /// CSV path for the sweep; stdout if omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON path for the report at --bits.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub bits: u8,
    pub s: usize,
    pub alpha: f64,
    pub q_value: f64,
    pub quant_variance: f64,
    pub trunc_bias: f64,
    pub e_tq: f64,
    pub e_dsgd: f64,
    pub total_bound: f64,
}

/// One bound evaluation per bit width in `lo..=hi`.
pub fn bound_sweep(
    problem: &ProblemSpec,
    scheme: Scheme,
    tail: &PowerLawTail,
    model: MassModel<'_>,
    (lo, hi): (u8, u8),
) -> Result<Vec<BoundRow>, CliError> {
    (lo..=hi)
        .map(|b| {
            let s = (1usize << b) - 1;
            let r = solver::convergence_bound(problem, scheme, tail, s, model, &SolverOptions::default())?;
            Ok(BoundRow {
                bits: b,
                s,
                alpha: r.solver.alpha,
                q_value: r.solver.q_value,
                quant_variance: r.breakdown.quant_variance,
                trunc_bias: r.breakdown.trunc_bias,
                e_tq: r.breakdown.e_tq,
                e_dsgd: r.breakdown.e_dsgd,
                total_bound: r.breakdown.total_bound,
            })
        })
        .collect()
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn bound(args: &BoundArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let problem = ProblemSpec {
        clients: args.clients,
        batch: args.batch,
        dim: args.dim,
        sigma2: args.sigma2,
        nu: args.nu,
        eta: args.eta,
        rounds: args.rounds,
        f_gap: args.f_gap,
    };
    problem.validate()?;
    let samples = args.samples.as_deref().map(io::read_gradients).transpose()?;
    let tail = resolve_tail(&args.tail, samples.as_deref())?;
    let mass = Mass::build(args.q_source, &tail, samples.as_deref())?;
    let mut m = RunManifest::new("bound", to_value(args), seed);
    for p in [&args.tail.tail, &args.samples].into_iter().flatten() {
        m = m.input(p);
    }

    if let Some(range) = args.sweep_bits {
        let rows = bound_sweep(&problem, args.scheme, &tail, mass.model(), range)?;
        let text = csv_string(&rows)?;
        match &args.csv {
            Some(p) => {
                io::write_text(p, &text)?;
                m = m.output(p);
            }
            None => print!("{text}"),
        }
    }
    if args.sweep_bits.is_none() || args.out.is_some() {
        let s = intervals(args.bits)?;
        let report =
            solver::convergence_bound(&problem, args.scheme, &tail, s, mass.model(), &SolverOptions::default())?;
        emit_json(args.out.as_deref(), &report)?;
        if let Some(o) = &args.out {
            m = m.output(o);
        }
    }
    finish(m, started)
}

// ---------------------------------------------------------------- quantize

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WireSchemeArg {
    Tq,
    Tnq,
    Tbq,
    Qsgd,
    Nqsgd,
}

impl From<WireSchemeArg> for WireScheme {
    fn from(s: WireSchemeArg) -> Self {
        match s {
            WireSchemeArg::Tq => WireScheme::TqUniform,
            WireSchemeArg::Tnq => WireScheme::Tnq,
            WireSchemeArg::Tbq => WireScheme::Tbq,
            WireSchemeArg::Qsgd => WireScheme::Qsgd,
            WireSchemeArg::Nqsgd => WireScheme::Nqsgd,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuantizeArgs {
    /// Gradient vector (f32 or CSV).
    pub input: PathBuf,
    /// Message file.
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: WireSchemeArg,
    #[arg(long)]
    pub bits: u8,
    /// Tail for the threshold solve; fitted from the input if omitted.
    #[command(flatten)]
    pub tail: TailArgs,
    #[arg(long, value_enum, default_value = "spliced")]
    pub q_source: QSourceArg,
    /// Use this threshold instead of solving for one (truncated schemes).
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Codebook sidecar written next to messages whose levels depend on a density.
pub fn codebook_path(message: &Path) -> PathBuf {
    let mut s = message.as_os_str().to_owned();
    s.push(".codebook.json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
struct QuantizeSummary {
    scheme: WireSchemeArg,
    bits: u8,
    alpha: f64,
    dim: usize,
    bytes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    codebook: Option<PathBuf>,
}

fn build_quantizer(args: &QuantizeArgs, values: &[f64]) -> Result<TwoStageQuantizer, CliError> {
    let wire: WireScheme = args.scheme.into();
    let s = intervals(args.bits)?;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if matches!(wire, WireScheme::Qsgd | WireScheme::Nqsgd) {
        if !(max_abs > 0.0) {
            return Err(CliError::Input("input is all zeros".into()));
        }
        return Ok(match wire {
            WireScheme::Qsgd => TwoStageQuantizer::uniform(wire, max_abs, args.bits)?,
            _ => {
                let hist = DensityHistogram::from_samples(values, DENSITY_BINS, true);
                TwoStageQuantizer::cube_root(wire, max_abs, args.bits, &hist)?
            }
        });
    }

    let scheme = match wire {
        WireScheme::TqUniform => Scheme::Uniform,
        WireScheme::Tnq => Scheme::NonUniform,
        _ => Scheme::BiScaled,
    };
    let tail = if args.tail.given() {
        args.tail.load()?
    } else {
        tail::fit_tail(values, &TailFitOptions::default())?
    };
    let mass = Mass::build(args.q_source, &tail, Some(values))?;
    let solved = solver::solve_alpha(scheme, &tail, s, mass.model(), &SolverOptions::default())?;
    let alpha = args.alpha.unwrap_or(solved.alpha);
    Ok(match scheme {
        Scheme::Uniform => TwoStageQuantizer::uniform(wire, alpha, args.bits)?,
        Scheme::NonUniform => {
            let density = sim::spliced_density(values, &tail, DENSITY_BINS);
            TwoStageQuantizer::cube_root(wire, alpha, args.bits, &density)?
        }
        Scheme::BiScaled => {
            let (k, sa, sb) = match (solved.k, solved.s_alpha, solved.s_beta) {
                (Some(k), Some(a), Some(b)) => (k, a, b),
                _ => return Err(CliError::Numerical("biscaled solve returned no split".into())),
            };
            TwoStageQuantizer::biscaled(alpha, args.bits, k, sa as u16, sb as u16)?
        }
    })
}

pub fn quantize(args: &QuantizeArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let values = io::read_gradients(&args.input)?;
    if values.is_empty() {
        return Err(CliError::Input(format!("{} is empty", args.input.display())));
    }
    let q = build_quantizer(args, &values)?;
    let msg = q.compress(&values, seed::derive_seed(seed, "quant", &[]))?;
    io::write_bytes(&args.output, &msg.to_bytes())?;
    let mut m = RunManifest::new("quantize", to_value(args), seed)
        .input(&args.input)
        .output(&args.output);
    let sidecar = q.scheme().needs_shared_density().then(|| codebook_path(&args.output));
    if let Some(p) = &sidecar {
        io::write_json(p, q.codebook())?;
        m = m.output(p);
    }
    emit_json(
        None,
        &QuantizeSummary {
            scheme: args.scheme,
            bits: args.bits,
            alpha: q.alpha(),
            dim: values.len(),
            bytes: msg.byte_len(),
            codebook: sidecar,
        },
    )?;
    finish(m, started)
}

// ---------------------------------------------------------------- dequantize

#[derive(Debug, Clone, Args, Serialize)]
pub struct DequantizeArgs {
    /// Message file written by `quantize`.
    pub input: PathBuf,
    /// Output vector: f32, or CSV for a `.csv` path.
    pub output: PathBuf,
    /// Codebook JSON for tnq/nqsgd messages; defaults to `<input>.codebook.json`.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
}

pub fn dequantize(args: &DequantizeArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let bytes = io::read_bytes(&args.input)?;
    let msg = QuantizedMessage::from_bytes(&bytes)?;
    let header = msg.header();
    let mut m = RunManifest::new("dequantize", to_value(args), seed).input(&args.input);
    let codebook = if header.scheme.needs_shared_density() {
        let path = args.codebook.clone().unwrap_or_else(|| codebook_path(&args.input));
        let cb: Codebook = io::read_json(&path)?;
        let alpha = f64::from(header.alpha);
        if cb.s() != header.intervals()
            || (cb.hi() - alpha).abs() > 1e-9 * alpha
            || (cb.lo() + alpha).abs() > 1e-9 * alpha
        {
            return Err(CliError::Input(format!(
                "{} does not match the message header (s = {}, alpha = {alpha})",
                path.display(),
                header.intervals()
            )));
        }
        m = m.input(&path);
        cb
    } else {
        header.codebook(None)?
    };
    let values = quant::decompress(&msg, &codebook)?;
    match args.output.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("txt") => {
            let text: String = values.iter().map(|v| format!("{v}\n")).collect();
            io::write_text(&args.output, &text)?;
        }
        _ => io::write_f32_le(&args.output, &values)?,
    }
    finish(m.output(&args.output), started)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML config; see `config print-defaults`.
    #[arg(long)]
    pub config: PathBuf,
    /// Metrics, one JSON record per round plus a final summary line.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut cfg = SimConfig::from_toml(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `seed` overrides the config's seed when given.
pub fn simulate(args: &SimulateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = load_config(&args.config, seed)?;
    let log = sim::run(&cfg)?;
    io::write_text(&args.out, &log.to_jsonl())?;
    let s = &log.summary;
    eprintln!(
        "{} b={} final_loss={:.6e} total_bytes={}",
        s.scheme, s.bits, s.final_loss, s.total_bytes
    );
    RunManifest::new("simulate", to_value(&cfg), cfg.seed)
        .input(&args.config)
        .output(&args.out)
        .write(started.elapsed())
}

// ---------------------------------------------------------------- compare

fn parse_sim_scheme(s: &str) -> Result<SimScheme, String> {
    SimScheme::from_str(s)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Base TOML config; scheme and bits are overridden per run.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_sim_scheme,
          default_value = "dsgd,qsgd,nqsgd,tqsgd,tnqsgd,tbqsgd")]
    pub schemes: Vec<SimScheme>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub bits: Vec<u8>,
    /// Per-round CSV: scheme, bits, round, loss, grad_norm_sq, cum_bytes.
    #[arg(long)]
    pub out: PathBuf,
    /// Budget against final metric, one row per run.
    #[arg(long)]
    pub tradeoff: Option<PathBuf>,
}

/// Expands schemes × bits, running DSGD once.
pub fn expand_configs(base: &SimConfig, schemes: &[SimScheme], bits: &[u8]) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for &scheme in schemes {
        let widths: Vec<u8> = if scheme == SimScheme::Dsgd {
            vec![0]
        } else {
            bits.to_vec()
        };
        for b in widths {
            let mut c = base.clone();
            c.scheme = scheme;
            c.bits = b;
            out.push(c);
        }
    }
    out
}

pub fn compare(args: &CompareArgs, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let base = load_config(&args.config, seed)?;
    let configs = expand_configs(&base, &args.schemes, &args.bits);
    for c in &configs {
        c.validate()?;
    }
    let table = sim::compare(&configs)?;
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    io::write_bytes(&args.out, &buf)?;
    let mut m = RunManifest::new(
        "compare",
        serde_json::json!({ "base": to_value(&base), "args": to_value(args) }),
        base.seed,
    )
    .input(&args.config)
    .output(&args.out);
    if let Some(p) = &args.tradeoff {
        io::write_text(p, &csv_string(&table.tradeoff())?)?;
        m = m.output(p);
    }
    for t in table.tradeoff() {
        eprintln!(
            "{:>7} b={} bytes={} final_loss={:.6e}",
            t.scheme, t.bits, t.total_bytes, t.final_loss
        );
    }
    m.write(started.elapsed())
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    let report = verify::run_suite(args.suite, seed);
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("{}: {} checks, {failed} failed", args.suite.name(), report.checks.len());
    if let Some(p) = &args.out {
        io::write_json(p, &report)?;
        RunManifest::new("verify", to_value(args), seed)
            .output(p)
            .write(started.elapsed())?;
    }
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "suite {} had {failed} failing checks",
            args.suite.name()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Heavy-tailed quadratic benchmark.
    Quadratic,
    /// Quadratic with lighter-tailed noise.
    Moderate,
    /// Synthetic logistic regression with two parameter groups.
    Logistic,
}

pub fn default_config(preset: Preset, scheme: SimScheme, bits: u8, seed: u64) -> SimConfig {
    match preset {
        Preset::Quadratic => SimConfig::heavy_tailed_quadratic(scheme, bits, seed),
        Preset::Moderate => SimConfig::moderate_tailed_quadratic(scheme, bits, seed),
        Preset::Logistic => SimConfig::logistic(scheme, bits, seed),
    }
}

pub fn print_defaults(preset: Preset, seed: u64) -> Result<(), CliError> {
    print!("{}", default_config(preset, SimScheme::Tqsgd, 3, seed).to_toml());
    Ok(())
}
