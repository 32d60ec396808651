//! `dpmac` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpmac_core::designer::{solve_design, DesignProblem};
use dpmac_core::private::{
    self, analyze_private, construct_near_optimal_private, construct_robust_eps_dp, state_count, PrivateReviewProtocol,
};
use dpmac_core::public::{self, analyze_public, construct_eps_ne, EpsNeSchedule, PublicReviewProtocol};
use dpmac_core::sim::{compare_to_analytic, Analytic, DeviantPolicy, DeviantSpec, SignalMode, SimConfig};
use dpmac_core::NetworkConfig;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{cell, json_document, write_csv, RunManifest};
use crate::ranges::{parse_int_list, parse_real_list};

#[derive(Debug, Parser)]
#[command(name = "dpmac", version, about = "Analyze, design, and simulate deviation-proof slotted MAC protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file (stdout when neither this nor an output directory is set).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory receiving `<subcommand>.<ext>` when --out is absent.
    #[arg(long, global = true, env = "DPMAC_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form analysis of one protocol against constant deviations.
    Analyze(AnalyzeArgs),
    /// CSV curve of one quantity over review lengths and margins.
    Sweep(SweepArgs),
    /// Minimum-loss private protocol under a state budget, per p_d.
    Design(DesignArgs),
    /// Robust epsilon-DP (private) or epsilon-NE (public) construction.
    Construct(ConstructArgs),
    /// Monte-Carlo simulation compared against the closed forms.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Private,
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Pf,
    Pm,
    G,
    Mmin,
    Loss,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    #[arg(long, value_enum, default_value_t = Signal::Private)]
    pub signal: Signal,
    /// Number of nodes.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Cooperation probability (default 1/N).
    #[arg(long)]
    pub pc: Option<f64>,
}

impl NetArgs {
    fn network(&mut self) -> Result<NetworkConfig, CliError> {
        let net = match self.pc {
            Some(p) => NetworkConfig::with_coop_prob(self.n, p)?,
            None => NetworkConfig::new(self.n)?,
        };
        self.pc = Some(net.coop_prob());
        Ok(net)
    }

    fn default_margin(&self) -> f64 {
        match self.signal {
            Signal::Private => 0.04,
            Signal::Public => 0.1,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    /// Test margin B (default 0.04 private, 0.1 public).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub l: u64,
    #[arg(long)]
    pub m: u64,
    /// Deviation probabilities, e.g. `0.7` or `0.6..1:0.05`.
    #[arg(long, default_value = "0.7")]
    pub pd: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// Margins (default 0.04 private, 0.1 public).
    #[arg(long)]
    pub b: Option<String>,
    /// Review lengths, e.g. `1..2000`.
    #[arg(long)]
    pub l: String,
    /// Fixed reciprocation/punishment length for `loss` (default ceil(M_min)).
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value = "0.7")]
    pub pd: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DesignArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    /// Candidate margins.
    #[arg(long, default_value = "0.04")]
    pub b: String,
    /// Largest admissible number of automaton states.
    #[arg(long, default_value_t = 256)]
    pub ns_budget: u64,
    #[arg(long, default_value = "0.6..1:0.05")]
    pub pd: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstructArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Public schedule: B = beta L^(rho-1).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.75)]
    pub rho: f64,
    /// Public schedule: M = ceil(mu L), mu > N-1 (default N).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Largest review length tried by private constructions.
    #[arg(long, default_value_t = 5000)]
    pub l_cap: u64,
    /// Private only: build against this single deviation instead.
    #[arg(long)]
    pub pd: Option<f64>,
    /// Margin for the single-deviation construction.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub epochs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub replications: u32,
    /// `IDX:constant:P`, `IDX:punish_aware:PD[:PR]`, or `IDX:best_response`.
    #[arg(long)]
    pub deviant: Vec<String>,
    /// JSON simulation config; replaces the other simulation flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dpmac_core::Error),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot read config {path}: {reason}")]
    Config { path: String, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_infeasible() => 2,
            CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Sink {
    subcommand: &'static str,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
}

impl Sink {
    fn target(&self, ext: &str) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(format!("{}.{ext}", self.subcommand))))
    }

    fn emit(
        &self,
        ext: &str,
        manifest: &mut RunManifest,
        render: impl FnOnce(&RunManifest) -> Result<Vec<u8>, CliError>,
    ) -> Result<(), CliError> {
        let target = self.target(ext);
        if let Some(p) = &target {
            manifest.outputs.push(p.display().to_string());
        }
        let bytes = render(manifest)?;
        match target {
            Some(p) => write_file(&p, &bytes),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(&bytes).and_then(|_| stdout.flush()).map_err(|source| CliError::Write {
                    path: "stdout".into(),
                    source,
                })
            }
        }
    }

    fn emit_json<T: Serialize>(&self, manifest: &mut RunManifest, results: &T) -> Result<(), CliError> {
        self.emit("json", manifest, |m| Ok(json_document(m, results)?.into_bytes()))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dpmac: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let sink = |subcommand| Sink {
        subcommand,
        out: cli.out.clone(),
        out_dir: cli.out_dir.clone(),
    };
    match cli.command {
        Command::Analyze(a) => analyze(a, &sink("analyze")),
        Command::Sweep(a) => sweep(a, &sink("sweep")),
        Command::Design(a) => design(a, &sink("design")),
        Command::Construct(a) => construct(a, &sink("construct")),
        Command::Simulate(a) => simulate(a, &sink("simulate")),
    }
}

fn reals(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    parse_real_list(s).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn analyze(mut a: AnalyzeArgs, sink: &Sink) -> Result<(), CliError> {
    let net = a.net.network()?;
    let b = *a.b.get_or_insert(a.net.default_margin());
    let pds = reals("pd", &a.pd)?;
    let mut results = Vec::new();
    match a.net.signal {
        Signal::Private => {
            let proto = PrivateReviewProtocol::new(net, b, a.l, a.m)?;
            for p_d in pds {
                let an = analyze_private(&proto, p_d)?;
                results.push(json!({ "analysis": an, "state_count": state_count(&proto) }));
            }
        }
        Signal::Public => {
            let proto = PublicReviewProtocol::new(net, b, a.l, a.m)?;
            for p_d in pds {
                let an = analyze_public(&proto, p_d)?;
                results.push(json!({ "analysis": an, "state_count": proto.state_count() }));
            }
        }
    }
    let mut manifest = RunManifest::new("analyze", serde_json::to_value(&a)?);
    sink.emit_json(&mut manifest, &results)
}

/// Quantities of one sweep point.
struct Point {
    pf: f64,
    pm: f64,
    g: f64,
    m_min: f64,
    loss: Option<(u64, f64)>,
}

fn sweep_point(signal: Signal, net: &NetworkConfig, b: f64, l: u64, p_d: f64, m: Option<u64>) -> dpmac_core::Result<Point> {
    match signal {
        Signal::Private => {
            let proto = PrivateReviewProtocol::new(*net, b, l, 1)?;
            let e = proto.error_probs(Some(p_d))?;
            let pm = e.miss_detection.unwrap_or(f64::NAN);
            let g = private::deterrence_margin(net, e.false_punishment, pm, p_d);
            let m_min = private::min_recip_len(net, l, g, p_d);
            let loss = m
                .or_else(|| private::ceil_len(m_min))
                .map(|m| (m, private::efficiency_loss(net, l, m, e.false_punishment)));
            Ok(Point {
                pf: e.false_punishment,
                pm,
                g,
                m_min,
                loss,
            })
        }
        Signal::Public => {
            let proto = PublicReviewProtocol::new(*net, b, l, 1)?;
            let e = proto.error_probs(Some(p_d))?;
            let pm = e.miss_detection.unwrap_or(f64::NAN);
            let g = public::deterrence_margin(net, e.false_punishment, pm, p_d);
            let m_min = private::min_recip_len(net, l, g, p_d);
            let loss = m
                .or_else(|| private::ceil_len(m_min))
                .map(|m| (m, public::efficiency_loss(net, l, m, e.false_punishment)));
            Ok(Point {
                pf: e.false_punishment,
                pm,
                g,
                m_min,
                loss,
            })
        }
    }
}

fn sweep(mut a: SweepArgs, sink: &Sink) -> Result<(), CliError> {
    let net = a.net.network()?;
    let b_spec = a.b.get_or_insert_with(|| a.net.default_margin().to_string()).clone();
    let bs = reals("b", &b_spec)?;
    let ls = parse_int_list(&a.l).map_err(|e| usage(format!("--l: {e}")))?;
    // false punishment does not depend on the deviation
    let pds = if a.quantity == Quantity::Pf { vec![1.0] } else { reals("pd", &a.pd)? };
    let mut grid = Vec::with_capacity(bs.len() * ls.len() * pds.len());
    for &b in &bs {
        for &l in &ls {
            grid.extend(pds.iter().map(|&p| (b, l, p)));
        }
    }
    let signal = a.net.signal;
    let (quantity, m) = (a.quantity, a.m);
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&(b, l, p_d)| {
            let pt = sweep_point(signal, &net, b, l, p_d, m)?;
            let key = vec![cell(Some(b)), l.to_string()];
            let row = match quantity {
                Quantity::Pf => [key, vec![cell(Some(pt.pf))]].concat(),
                Quantity::Pm => [key, vec![cell(Some(p_d)), cell(Some(pt.pm))]].concat(),
                Quantity::G => [key, vec![cell(Some(p_d)), cell(Some(pt.g))]].concat(),
                Quantity::Mmin => [key, vec![cell(Some(p_d)), cell(Some(pt.m_min).filter(|v| v.is_finite()))]].concat(),
                Quantity::Loss => [
                    key,
                    vec![
                        cell(Some(p_d)),
                        pt.loss.map(|(m, _)| m.to_string()).unwrap_or_default(),
                        cell(pt.loss.map(|(_, c)| c)),
                    ],
                ]
                .concat(),
            };
            Ok(row)
        })
        .collect::<dpmac_core::Result<_>>()?;
    let header: &[&str] = match quantity {
        Quantity::Pf => &["b", "l", "pf"],
        Quantity::Pm => &["b", "l", "p_d", "pm"],
        Quantity::G => &["b", "l", "p_d", "g"],
        Quantity::Mmin => &["b", "l", "p_d", "m_min"],
        Quantity::Loss => &["b", "l", "p_d", "m", "loss"],
    };
    let mut manifest = RunManifest::new("sweep", serde_json::to_value(&a)?);
    sink.emit("csv", &mut manifest, |m| {
        let mut buf = Vec::new();
        write_csv(&mut buf, m, header, &rows).map_err(|source| CliError::Write {
            path: "buffer".into(),
            source,
        })?;
        Ok(buf)
    })
}

#[derive(Debug, Serialize)]
struct DesignRow {
    p_d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    review_len: Option<u64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    recip_len: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_loss: Option<f64>,
    /// Loss rounded to 4 decimals.
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_loss_4dp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    states: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feasible_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn design(mut a: DesignArgs, sink: &Sink) -> Result<(), CliError> {
    if a.net.signal != Signal::Private {
        return Err(usage("design supports --signal private only"));
    }
    let net = a.net.network()?;
    let bs = reals("b", &a.b)?;
    let pds = reals("pd", &a.pd)?;
    let problems = pds
        .iter()
        .map(|&p| DesignProblem::new(net, bs.clone(), a.ns_budget, p))
        .collect::<dpmac_core::Result<Vec<_>>>()?;
    let rows: Vec<DesignRow> = problems
        .par_iter()
        .map(|pr| match solve_design(pr) {
            Ok(r) => DesignRow {
                p_d: pr.p_d(),
                margin: Some(r.protocol.margin()),
                review_len: Some(r.protocol.review_len()),
                recip_len: Some(r.protocol.recip_len()),
                efficiency_loss: Some(r.efficiency_loss),
                efficiency_loss_4dp: Some((r.efficiency_loss * 1e4).round() / 1e4),
                states: Some(r.state_count.states),
                feasible_count: Some(r.feasible_count),
                error: None,
            },
            Err(e) => DesignRow {
                p_d: pr.p_d(),
                margin: None,
                review_len: None,
                recip_len: None,
                efficiency_loss: None,
                efficiency_loss_4dp: None,
                states: None,
                feasible_count: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut manifest = RunManifest::new("design", serde_json::to_value(&a)?);
    sink.emit_json(&mut manifest, &rows)?;
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("p_d={}: {e}", r.p_d)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(failed.join("; ")))
    }
}

fn construct(mut a: ConstructArgs, sink: &Sink) -> Result<(), CliError> {
    let net = a.net.network()?;
    let results = match (a.net.signal, a.pd) {
        (Signal::Private, Some(p_d)) => {
            let b = *a.b.get_or_insert(0.04);
            json!({ "kind": "near_optimal", "construction": construct_near_optimal_private(p_d, a.delta, b, &net, a.l_cap)? })
        }
        (Signal::Private, None) => {
            json!({ "kind": "robust_eps_dp", "construction": construct_robust_eps_dp(a.eps, a.delta, &net, a.l_cap)? })
        }
        (Signal::Public, _) => {
            let sched = EpsNeSchedule {
                beta: a.beta,
                rho: a.rho,
                mu: *a.mu.get_or_insert(a.net.n as f64),
            };
            json!({ "kind": "eps_ne", "construction": construct_eps_ne(a.eps, a.delta, sched, &net)? })
        }
    };
    let mut manifest = RunManifest::new("construct", serde_json::to_value(&a)?);
    sink.emit_json(&mut manifest, &results)
}

/// Parses `IDX:constant:P`, `IDX:punish_aware:PD[:PR]`, or `IDX:best_response`.
pub fn parse_deviant(s: &str) -> Result<DeviantSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, String> {
        parts
            .get(i)
            .ok_or_else(|| format!("`{s}`: missing value"))?
            .parse()
            .map_err(|e| format!("`{s}`: {e}"))
    };
    let node_index: usize = parts[0].parse().map_err(|e| format!("`{s}`: node index: {e}"))?;
    let policy = match (parts.get(1).copied(), parts.len()) {
        (Some("constant"), 3) => DeviantPolicy::Constant { p: num(2)? },
        (Some("punish_aware"), 3) => DeviantPolicy::PunishAware { p_d: num(2)?, p_r: 1.0 },
        (Some("punish_aware"), 4) => DeviantPolicy::PunishAware {
            p_d: num(2)?,
            p_r: num(3)?,
        },
        (Some("best_response"), 2) => DeviantPolicy::BestResponse,
        _ => return Err(format!("`{s}`: expected IDX:constant:P, IDX:punish_aware:PD[:PR] or IDX:best_response")),
    };
    Ok(DeviantSpec { node_index, policy })
}

fn sim_config(a: &mut SimulateArgs) -> Result<SimConfig, CliError> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        return serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        });
    }
    let net = a.net.network()?;
    let b = *a.b.get_or_insert(a.net.default_margin());
    let l = a.l.ok_or_else(|| usage("--l is required without --config"))?;
    let m = a.m.ok_or_else(|| usage("--m is required without --config"))?;
    let signal = match a.net.signal {
        Signal::Private => SignalMode::Private,
        Signal::Public => SignalMode::Public,
    };
    let mut cfg = SimConfig::new(net, signal, b, l, m);
    cfg.epochs = a.epochs;
    cfg.master_seed = a.seed;
    cfg.replications = a.replications;
    cfg.deviants = a.deviant.iter().map(|d| parse_deviant(d)).collect::<Result<_, _>>().map_err(usage)?;
    Ok(cfg)
}

fn analytic_for(cfg: &SimConfig) -> Option<Analytic> {
    let p_d = match cfg.deviants.as_slice() {
        [] => 1.0,
        [DeviantSpec {
            policy: DeviantPolicy::Constant { p },
            ..
        }] => *p,
        _ => return None,
    };
    match cfg.signal {
        SignalMode::Private => {
            let proto = PrivateReviewProtocol::new(cfg.network, cfg.margin, cfg.review_len, cfg.recip_len).ok()?;
            analyze_private(&proto, p_d).ok().map(Analytic::Private)
        }
        SignalMode::Public => {
            let proto = PublicReviewProtocol::new(cfg.network, cfg.margin, cfg.review_len, cfg.recip_len).ok()?;
            analyze_public(&proto, p_d).ok().map(Analytic::Public)
        }
    }
}

fn simulate(mut a: SimulateArgs, sink: &Sink) -> Result<(), CliError> {
    let cfg = sim_config(&mut a)?;
    let report = crate::runner::run(&cfg)?;
    let analytic = analytic_for(&cfg);
    let comparison = match &analytic {
        Some(an) => compare_to_analytic(&report, an)?,
        None => Vec::new(),
    };
    let analysis: Value = match analytic {
        Some(Analytic::Private(p)) => serde_json::to_value(p)?,
        Some(Analytic::Public(p)) => serde_json::to_value(p)?,
        None => Value::Null,
    };
    let parameters = if a.config.is_some() {
        json!({ "config_file": a.config, "config": cfg })
    } else {
        serde_json::to_value(&a)?
    };
    let mut manifest = RunManifest::new("simulate", parameters);
    manifest.master_seed = Some(cfg.master_seed);
    let results = json!({ "report": report, "analysis": analysis, "comparison": comparison });
    sink.emit_json(&mut manifest, &results)
}
