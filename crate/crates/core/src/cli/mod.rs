//! Command implementations behind the `spechub` binary.
//!
//! Every command renders into a byte buffer first, so the same code path
//! serves the binary (which writes to `--out` or stdout) and the tests.
//! Outputs start with a header that echoes the tool version, the master seed
//! and the full parsed configuration.

mod specs;
pub mod trace;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::coupling::{
    build_flow, max_flow_value_unsplit, membership_cost, optimal_plan, plan_cost, reconstruct_full_coupling,
    MAX_FULL_VOCAB,
};
use crate::draftjoint::{hub_joint, independent_joint, wor_joint};
use crate::error::{Error, Result};
use crate::simplex::{overlap, Distribution};
use crate::synthlab::{toy_experiment, LogitNoise, ToyConfig, ToyMethod};
use crate::treesim::{run_sim, SyntheticProcess, TraceRecord};
use crate::verify::oracle::{MAX_ORACLE_DRAFTS, MAX_ORACLE_VOCAB};
use crate::verify::{analytic_rates_rrs, analytic_rates_spechub, exact_rates, mc_rates, Method, RateVector};

pub use specs::{parse_number_list, ProcessSpec, TreeSpec};

/// Largest vocabulary for the `V × V` independent and without-replacement joints in `otm`.
pub const MAX_DENSE_OTM_VOCAB: usize = 2048;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Independent,
    Wor,
    Hub,
}

/// Multi-draft speculative sampling experiments.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "spechub", version, about)]
pub struct Cli {
    /// Master seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Mean two-draft acceptance of every method over a grid of toy pairs.
    Toy(ToyArgs),
    /// Per-slot acceptance rates for given distributions.
    Rates(RatesArgs),
    /// Optimal two-draft acceptance via maximum flow.
    Otm(OtmArgs),
    /// Token-tree decoding simulation.
    Simulate(SimulateArgs),
    /// Writes a synthetic trace file.
    GenTrace(GenTraceArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToyArgs {
    #[arg(long = "temps", value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5])]
    pub temperatures: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.7])]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub vocab: usize,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Monte-Carlo repetitions per pair for RRSw.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_values_t = ToyMethod::ALL)]
    pub methods: Vec<ToyMethod>,
    #[arg(long, default_value = "uniform")]
    pub noise: LogitNoise,
}

/// Two distributions given inline or by file.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PairInput {
    /// Target distribution, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "p_file")]
    pub p: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "p")]
    pub p_file: Option<PathBuf>,
    /// Draft distribution, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "q_file")]
    pub q: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "q")]
    pub q_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatesArgs {
    #[command(flatten)]
    pub input: PairInput,
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Single, Method::Rrs, Method::Rrsw, Method::SpecHub])]
    pub methods: Vec<Method>,
    /// Drafts for recursive rejection sampling.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OtmArgs {
    #[command(flatten)]
    pub input: PairInput,
    #[arg(long, value_enum, default_value = "independent")]
    pub joint: JointKind,
    /// Include the acceptance plan as dense row-major matrices (JSON only).
    #[arg(long)]
    pub dump_plan: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// `full:BRANCHING:LEVELS` (levels count the root) or `file:PATH` with a parent vector.
    #[arg(long, default_value = "full:2:4")]
    pub tree: TreeSpec,
    /// `synthetic:T:LAMBDA:V[:NOISE]` or `trace:PATH`.
    #[arg(long, default_value = "synthetic:1:0.7:50")]
    pub process: ProcessSpec,
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Rrs, Method::Rrsw, Method::SpecHub])]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenTraceArgs {
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.7)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub vocab: usize,
    #[arg(long, default_value = "uniform")]
    pub noise: LogitNoise,
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    /// Draft levels per step; records cover depths `0..depth`.
    #[arg(long, default_value_t = 3)]
    pub depth: u64,
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a Cli,
}

impl Cli {
    fn header(&self) -> Header<'_> {
        Header {
            tool: TOOL,
            version: VERSION,
            seed: self.seed,
            config: self,
        }
    }
}

/// Rendered command output in both formats.
struct Report {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: Value,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn write_report(cli: &Cli, report: Report, format: Format, out: &mut impl Write) -> Result<()> {
    let header = cli.header();
    match format {
        Format::Csv => {
            writeln!(out, "# tool: {TOOL} {VERSION}")?;
            writeln!(out, "# seed: {}", cli.seed)?;
            writeln!(out, "# config: {}", serde_json::to_string(&header.config).map_err(json_err)?)?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&report.columns).map_err(csv_err)?;
            for row in &report.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({ "header": header, "result": report.json });
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(json_err)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Internal(format!("JSON encoding failed: {e}"))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("CSV encoding failed: {other:?}")),
    }
}

/// Runs the parsed command and writes its output to `out`.
pub fn run_to_writer(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let (report, default) = match &cli.command {
        Command::Toy(a) => (cmd_toy(cli, a)?, Format::Csv),
        Command::Rates(a) => (cmd_rates(cli, a)?, Format::Json),
        Command::Otm(a) => (cmd_otm(cli, a)?, Format::Json),
        Command::Simulate(a) => (cmd_simulate(cli, a)?, Format::Csv),
        Command::GenTrace(a) => return cmd_gen_trace(cli, a, out),
    };
    write_report(cli, report, cli.format.unwrap_or(default), out)
}

/// Runs the parsed command, writing to `--out` or stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let mut buf = Vec::new();
    run_to_writer(cli, &mut buf)?;
    match &cli.out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn usage(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Usage(m),
        other => other,
    }
}

fn cmd_toy(cli: &Cli, a: &ToyArgs) -> Result<Report> {
    if a.temperatures.is_empty() || a.lambdas.is_empty() || a.methods.is_empty() {
        return Err(Error::Usage("the temperature, lambda and method lists must be non-empty".into()));
    }
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for &t in &a.temperatures {
        for &lambda in &a.lambdas {
            let cfg = ToyConfig {
                temperature: t,
                lambda,
                vocab: a.vocab,
                n_pairs: a.pairs,
                mc_trials: a.trials,
                seed: cli.seed,
                noise: a.noise,
            };
            cfg.validate().map_err(usage)?;
            for row in toy_experiment(&cfg)?.into_iter().filter(|r| a.methods.contains(&r.method)) {
                rows.push(vec![
                    num(t),
                    num(lambda),
                    row.method.to_string(),
                    num(row.mean),
                    num(row.stderr),
                    a.pairs.to_string(),
                    a.trials.to_string(),
                ]);
                json_rows.push(json!({
                    "T": t,
                    "lambda": lambda,
                    "method": row.method,
                    "mean": row.mean,
                    "stderr": row.stderr,
                    "n_pairs": a.pairs,
                    "mc_trials": a.trials,
                    "fallbacks": row.fallbacks,
                }));
            }
        }
    }
    Ok(Report {
        columns: vec!["T", "lambda", "method", "mean", "stderr", "n_pairs", "mc_trials"],
        rows,
        json: json!({ "rows": json_rows }),
    })
}

fn read_dist(inline: &Option<Vec<f64>>, file: &Option<PathBuf>, name: &str) -> Result<Distribution> {
    let values = match (inline, file) {
        (Some(v), _) => v.clone(),
        (None, Some(path)) => parse_number_list(&std::fs::read_to_string(path)?, name)?,
        (None, None) => return Err(Error::Usage(format!("--{name} or --{name}-file is required"))),
    };
    Distribution::new(values).map_err(|e| Error::Usage(format!("{name}: {e}")))
}

fn read_pair(input: &PairInput) -> Result<(Distribution, Distribution)> {
    let p = read_dist(&input.p, &input.p_file, "p")?;
    let q = read_dist(&input.q, &input.q_file, "q")?;
    if p.len() != q.len() {
        return Err(Error::Usage(format!("p has {} entries, q has {}", p.len(), q.len())));
    }
    Ok((p, q))
}

/// Exact rates where a closed form or small-instance enumeration exists.
fn analytic_for(method: Method, p: &Distribution, q: &Distribution, k: usize) -> Result<(Option<RateVector>, &'static str, bool)> {
    Ok(match method {
        Method::Single => (Some(RateVector::new(vec![overlap(p, q)?])), "closed_form", false),
        Method::Rrs => (Some(analytic_rates_rrs(p, q, k)?), "closed_form", false),
        Method::Rrsw if p.len() <= MAX_ORACLE_VOCAB && (1..=MAX_ORACLE_DRAFTS).contains(&k) => {
            (Some(exact_rates(method, p, q, k)?), "enumeration", false)
        }
        Method::Rrsw => (None, "none", false),
        Method::SpecHub => match analytic_rates_spechub(p, q) {
            Ok(r) => (Some(r), "closed_form", false),
            Err(Error::Degenerate(_)) => (Some(RateVector::new(vec![overlap(p, q)?, 0.0])), "closed_form", true),
            Err(e) => return Err(e),
        },
    })
}

fn cmd_rates(cli: &Cli, a: &RatesArgs) -> Result<Report> {
    let (p, q) = read_pair(&a.input)?;
    if a.k == 0 || a.trials == 0 {
        return Err(Error::Usage("k and trials must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (i, &method) in a.methods.iter().enumerate() {
        let (analytic, source, fallback) = analytic_for(method, &p, &q, a.k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        rng.set_stream(i as u64);
        let mc = mc_rates(method, &p, &q, a.k, a.trials, &mut rng)?;
        let slots = mc.rates.per_position.len();
        for s in 0..=slots {
            let (label, exact, est, se) = if s < slots {
                (
                    (s + 1).to_string(),
                    analytic.as_ref().map(|r| r.per_position[s]),
                    mc.rates.per_position[s],
                    mc.stderr[s],
                )
            } else {
                ("total".to_string(), analytic.as_ref().map(|r| r.total), mc.rates.total, mc.total_stderr)
            };
            rows.push(vec![
                method.to_string(),
                label,
                exact.map_or_else(String::new, num),
                num(est),
                num(se),
            ]);
        }
        entries.push(json!({
            "method": method,
            "analytic": analytic,
            "analytic_source": source,
            "fallback": fallback,
            "monte_carlo": mc,
        }));
    }
    Ok(Report {
        columns: vec!["method", "position", "analytic", "monte_carlo", "mc_stderr"],
        rows,
        json: json!({ "vocab": p.len(), "k": a.k, "trials": a.trials, "methods": entries }),
    })
}

fn cmd_otm(cli: &Cli, a: &OtmArgs) -> Result<Report> {
    let (p, q) = read_pair(&a.input)?;
    let v = p.len();
    let joint = match a.joint {
        JointKind::Hub => hub_joint(&q)?,
        _ if v > MAX_DENSE_OTM_VOCAB => {
            return Err(Error::ResourceLimit(format!(
                "dense joints are limited to V <= {MAX_DENSE_OTM_VOCAB}, got {v}; use --joint hub"
            )))
        }
        JointKind::Independent => independent_joint(&q),
        JointKind::Wor => wor_joint(&q)?,
    };
    if a.dump_plan && cli.format == Some(Format::Csv) {
        return Err(Error::Usage("plan dumps need --format json".into()));
    }
    let (plan, flow) = optimal_plan(&joint, &p)?;
    let unsplit = max_flow_value_unsplit(&build_flow(&joint, &p)?);
    let cost = plan_cost(&plan);
    let mut result = json!({
        "joint": a.joint,
        "vocab": v,
        "value": flow.value,
        "cost": cost,
        "value_unsplit": unsplit,
    });
    let mut check = (String::new(), String::new());
    if v <= MAX_FULL_VOCAB {
        let full = reconstruct_full_coupling(&plan)?;
        let err = full.marginal_error(&joint.to_dense(), p.probs());
        let membership = membership_cost(&full);
        result["reconstruction"] = json!({
            "max_marginal_error": err,
            "membership_cost": membership,
            "valid": err <= 1e-9,
        });
        check = (num(err), num(membership));
    }
    if a.dump_plan {
        let (a1, a2) = plan.to_dense()?;
        result["plan"] = json!({ "shape": [v, v], "accept1": a1, "accept2": a2 });
    }
    Ok(Report {
        columns: vec!["joint", "vocab", "value", "cost", "max_marginal_error", "membership_cost"],
        rows: vec![vec![
            serde_json::to_value(a.joint).map_err(json_err)?.as_str().unwrap_or_default().to_string(),
            v.to_string(),
            num(flow.value),
            num(cost),
            check.0,
            check.1,
        ]],
        json: result,
    })
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<Report> {
    if a.methods.is_empty() {
        return Err(Error::Usage("--methods must not be empty".into()));
    }
    let tree = a.tree.build()?;
    let process = a.process.build(cli.seed)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &method in &a.methods {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let r = run_sim(&tree, &process, method, a.steps, &mut rng)?;
        rows.push(vec![
            method.to_string(),
            tree.len().to_string(),
            tree.draft_depth().to_string(),
            a.process.to_string(),
            r.steps.to_string(),
            num(r.mean_tokens_per_step),
            num(r.std_error),
            r.per_position_rates
                .per_position
                .iter()
                .map(|x| num(*x))
                .collect::<Vec<_>>()
                .join(";"),
        ]);
        reports.push(r);
    }
    Ok(Report {
        columns: vec![
            "method",
            "nodes",
            "draft_depth",
            "process",
            "steps",
            "mean_tokens_per_step",
            "std_error",
            "root_slot_rates",
        ],
        rows,
        json: json!({ "reports": reports }),
    })
}

fn cmd_gen_trace(cli: &Cli, a: &GenTraceArgs, out: &mut impl Write) -> Result<()> {
    let process = SyntheticProcess {
        temperature: a.temperature,
        lambda: a.lambda,
        vocab: a.vocab,
        seed: cli.seed,
        noise: a.noise,
    };
    // surface configuration errors before anything is written
    process.pair(0, 0).map_err(usage)?;
    serde_json::to_writer(&mut *out, &json!({ "header": cli.header() })).map_err(json_err)?;
    writeln!(out)?;
    for step in 0..a.steps {
        for depth in 0..a.depth {
            let (p, q) = process.pair(step, depth)?;
            trace::write_record(out, &TraceRecord { step, depth, p, q })?;
        }
    }
    Ok(())
}
