//! Command-line front end. Exit codes: 0 success, 1 model or runtime
//! error, 2 usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::analyze::{analyze, AnalyzeConfig, CheckStrategy};
use crate::cml::{compile, Diagnostic};
use crate::engine::{CausalModel, ExecutionMode};
use crate::interp::{
    branch_run, initial_state, run, write_trace, BranchConfig, Observable, RunConfig,
    TraceFormat,
};
use crate::quantum::{build_bundled, BUNDLED};
use crate::rng::derive_seed;
use crate::state::{Domain, SystemState, TypeKind, Value};

const USAGE: i32 = 2;
const MODEL: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "causalkit", version, about = "Run and analyze causal models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute a model and write its trace.
    Run(RunArgs),
    /// Check consistency and completeness of a model's laws.
    Analyze(AnalyzeArgs),
    /// Execute with a fork at every categorical draw and print the tree.
    Branch(BranchArgs),
    /// List the bundled models.
    ListModels,
    /// Run many seeded trials and bin one observable of the final states.
    Histogram(HistogramArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// A `.cml` file or `builtin:<name>`.
    model: String,
    /// Bundled model parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Timestep; defaults to the model's.
    #[arg(long)]
    dt: Option<f64>,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// `strict` or `first-match`.
    #[arg(long, default_value = "strict")]
    mode: ExecutionMode,
    #[arg(long, default_value_t = 1)]
    record_every: u64,
    /// Comma-separated observable expressions; defaults to scalar fields.
    #[arg(long)]
    observables: Option<String>,
    /// `csv` or `jsonl`.
    #[arg(long, default_value = "csv")]
    format: TraceFormat,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `enumerate`, `sample`, or `trace`.
    #[arg(long, default_value = "sample")]
    strategy: String,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 10)]
    runs: u64,
    /// Steps per trace run.
    #[arg(long, default_value_t = 100)]
    steps: u64,
}

#[derive(Args, Debug)]
struct BranchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value = "strict")]
    mode: ExecutionMode,
    /// Draws allowed per lineage.
    #[arg(long, default_value_t = 16)]
    depth: u32,
    /// Live lineages kept after each fork.
    #[arg(long, default_value_t = 1024)]
    width: usize,
}

#[derive(Args, Debug)]
struct HistogramArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Bin count; integer outcomes with a declared range get one bin per
    /// value when omitted.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value = "strict")]
    mode: ExecutionMode,
    /// Outcome expression; defaults to the bundled model's outcome.
    #[arg(long)]
    observables: Option<String>,
}

/// Failure carrying its exit code; the message is already formatted.
struct Fail(i32, String);

type Res<T> = Result<T, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(USAGE, format!("error: {}", msg.into()))
}

fn model_err(msg: impl Into<String>) -> Fail {
    Fail(MODEL, format!("error: {}", msg.into()))
}

struct Loaded {
    model: CausalModel,
    /// Fixed init state for bundled models; files run their init block per
    /// seed.
    init: Option<SystemState>,
    outcome: Option<&'static str>,
    path: String,
}

impl Loaded {
    fn init_for(&self, seed: u64) -> Res<SystemState> {
        match &self.init {
            Some(s) => Ok(s.clone()),
            None => initial_state(&self.model, seed)
                .map_err(|e| model_err(format!("{}: init failed: {e}", self.path))),
        }
    }
}

fn render_all(path: &str, diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.render(path)).collect::<Vec<_>>().join("\n")
}

fn load(args: &ModelArgs, err: &mut dyn Write) -> Res<Loaded> {
    let mut params = BTreeMap::new();
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects key=value, got `{p}`")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(name) = args.model.strip_prefix("builtin:") {
        let b = build_bundled(name, &params).map_err(|e| match e {
            crate::quantum::BundledError::Compile(_) | crate::quantum::BundledError::Init(_) => {
                model_err(e.to_string())
            }
            other => usage(other.to_string()),
        })?;
        return Ok(Loaded {
            model: b.model,
            init: Some(b.init),
            outcome: b.outcome,
            path: args.model.clone(),
        });
    }
    if !params.is_empty() {
        return Err(usage("--param applies to builtin models only"));
    }
    let path = &args.model;
    let src = std::fs::read_to_string(Path::new(path))
        .map_err(|e| usage(format!("cannot read `{path}`: {e}")))?;
    match compile(&src) {
        Ok(c) => {
            if !c.warnings.is_empty() {
                let _ = writeln!(err, "{}", render_all(path, &c.warnings));
            }
            Ok(Loaded {
                model: c.model,
                init: None,
                outcome: None,
                path: path.clone(),
            })
        }
        Err(diags) => Err(Fail(MODEL, render_all(path, &diags))),
    }
}

/// Splits on commas outside brackets, so calls with several arguments stay
/// whole.
fn split_observables(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out.into_iter()
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

fn observable(m: &Loaded, src: &str) -> Res<Observable> {
    Observable::compile(&m.model.schema, src).map_err(|d| {
        Fail(
            USAGE,
            format!(
                "error[UnknownObservable]: `{src}`: {}",
                d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
            ),
        )
    })
}

fn emit(out_path: &Option<String>, stdout: &mut dyn Write, bytes: &[u8]) -> Res<()> {
    match out_path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| usage(format!("cannot write `{p}`: {e}"))),
        None => stdout
            .write_all(bytes)
            .map_err(|e| model_err(format!("cannot write output: {e}"))),
    }
}

fn run_config(m: &Loaded, dt: Option<f64>, steps: u64, seed: u64, mode: ExecutionMode) -> Res<RunConfig> {
    let mut cfg = RunConfig::for_model(&m.model);
    cfg.dt = dt.unwrap_or(m.model.default_timestep);
    cfg.max_steps = steps;
    cfg.seed = seed;
    cfg.mode = mode;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs, stdout: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    let m = load(&a.model, err)?;
    let mut cfg = run_config(&m, a.model.dt, a.steps, a.model.seed, a.mode)?;
    cfg.record_every = a.record_every;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if let Some(list) = &a.observables {
        cfg.observables = split_observables(list)
            .iter()
            .map(|s| observable(&m, s))
            .collect::<Res<_>>()?;
    }
    let init = m.init_for(a.model.seed)?;
    let trace = run(&m.model, &init, &cfg).map_err(|e| usage(e.to_string()))?;
    let mut buf = Vec::new();
    write_trace(&trace, a.format, &mut buf).map_err(|e| model_err(e.to_string()))?;
    emit(&a.model.out, stdout, &buf)?;
    if trace.termination_reason.is_error() {
        let why = serde_json::to_string(&trace.termination_reason).unwrap_or_default();
        return Err(model_err(format!(
            "{}: run stopped at step {}: {why}",
            m.path, trace.steps
        )));
    }
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs, stdout: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    let m = load(&a.model, err)?;
    let seed = a.model.seed;
    let strategy = match a.strategy.as_str() {
        "enumerate" => CheckStrategy::Enumerate,
        "sample" => CheckStrategy::Sample {
            count: a.samples,
            seed,
        },
        "trace" => CheckStrategy::Trace {
            runs: a.runs,
            steps: a.steps,
            seed,
        },
        other => {
            return Err(usage(format!(
                "unknown strategy `{other}` (expected enumerate, sample, or trace)"
            )))
        }
    };
    let mut cfg = AnalyzeConfig::new(&m.model, strategy);
    if let Some(dt) = a.model.dt {
        cfg.dt = dt;
    }
    let report = analyze(&m.model, &cfg).map_err(|e| model_err(format!("{}: {e}", m.path)))?;
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| model_err(e.to_string()))?;
    json.push(b'\n');
    emit(&a.model.out, stdout, &json)
}

fn cmd_branch(a: &BranchArgs, stdout: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    let m = load(&a.model, err)?;
    let run = run_config(&m, a.model.dt, a.steps, a.model.seed, a.mode)?;
    let init = m.init_for(a.model.seed)?;
    let cfg = BranchConfig {
        run,
        depth: a.depth,
        width: a.width,
    };
    let tree = branch_run(&m.model, &init, &cfg).map_err(|e| match e {
        crate::interp::BranchError::ContinuousRandomNotBranchable(_) => {
            model_err(format!("{}: {e}", m.path))
        }
        other => usage(other.to_string()),
    })?;
    let mut json = serde_json::to_vec_pretty(&tree).map_err(|e| model_err(e.to_string()))?;
    json.push(b'\n');
    emit(&a.model.out, stdout, &json)
}

/// Bin edges for the observed outcomes. Integer observables of a field with
/// a declared range get one unit-wide bin per value unless `bins` is set.
fn bin_edges(m: &Loaded, obs: &str, xs: &[f64], ints: bool, bins: Option<usize>) -> Res<Vec<f64>> {
    let declared = m.model.schema.field_type(obs).and_then(|t| match (&t.kind, &t.domain) {
        (TypeKind::Int, Some(Domain::Interval { lo, hi })) => Some((lo.ceil(), hi.floor())),
        (TypeKind::Int, Some(Domain::Set(vs))) => {
            let ns: Vec<f64> = vs.iter().filter_map(Value::as_int).map(|n| n as f64).collect();
            let lo = ns.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo <= hi).then_some((lo, hi))
        }
        _ => None,
    });
    if let (true, Some((lo, hi)), None) = (ints, declared, bins) {
        let n = (hi - lo + 1.0) as usize;
        return Ok((0..=n).map(|i| lo - 0.5 + i as f64).collect());
    }
    let n = bins.unwrap_or(20);
    if n == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let (mut lo, mut hi) = match declared {
        Some((lo, hi)) => (lo - 0.5, hi + 0.5),
        None => xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        }),
    };
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    Ok((0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect())
}

fn cmd_histogram(a: &HistogramArgs, stdout: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    let m = load(&a.model, err)?;
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let name = match (&a.observables, m.outcome) {
        (Some(list), _) => split_observables(list)
            .into_iter()
            .next()
            .ok_or_else(|| usage("--observables is empty"))?,
        (None, Some(o)) => o.to_string(),
        (None, None) => {
            return Err(usage(
                "error[UnknownObservable]: this model has no default outcome; pass --observables",
            ))
        }
    };
    let obs = observable(&m, &name)?;
    let mut cfg = run_config(&m, a.model.dt, a.steps, a.model.seed, a.mode)?;
    cfg.observables = Vec::new();
    cfg.record_every = a.steps + 1;
    let outcomes: Vec<Res<Value>> = (0..a.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(a.model.seed, t);
            let mut c = cfg.clone();
            c.seed = seed;
            let init = m.init_for(seed)?;
            let trace = run(&m.model, &init, &c).map_err(|e| usage(e.to_string()))?;
            if trace.termination_reason.is_error() {
                let why = serde_json::to_string(&trace.termination_reason).unwrap_or_default();
                return Err(model_err(format!("{}: trial {t} failed: {why}", m.path)));
            }
            obs.eval(&trace.final_state, c.dt)
                .map_err(|e| model_err(format!("{}: trial {t}: {e}", m.path)))
        })
        .collect();
    let mut xs = Vec::with_capacity(outcomes.len());
    let mut ints = true;
    for o in outcomes {
        let v = o?;
        let x = match v {
            Value::Int(n) => n as f64,
            Value::Real(x) => {
                ints = false;
                x
            }
            Value::Bool(b) => f64::from(u8::from(b)),
            other => {
                return Err(usage(format!(
                    "error[UnknownObservable]: `{name}` is {}, not a number",
                    other.kind_name()
                )))
            }
        };
        xs.push(x);
    }
    let edges = bin_edges(&m, &name, &xs, ints, a.bins)?;
    let n = edges.len() - 1;
    let mut counts = vec![0u64; n];
    let (lo, hi) = (edges[0], edges[n]);
    for &x in &xs {
        let i = if x >= hi {
            n - 1
        } else {
            edges.partition_point(|e| *e <= x).saturating_sub(1)
        };
        if x >= lo {
            counts[i.min(n - 1)] += 1;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| model_err(e.to_string());
    w.write_record(["bin", "lower", "upper", "count", "frequency"]).map_err(fail)?;
    let g = crate::interp::format_g17;
    for (i, c) in counts.iter().enumerate() {
        let f = *c as f64 / a.trials as f64;
        w.write_record([
            i.to_string(),
            g(edges[i]),
            g(edges[i + 1]),
            c.to_string(),
            g(f),
        ])
        .map_err(fail)?;
    }
    let buf = w.into_inner().map_err(|e| model_err(e.to_string()))?;
    emit(&a.model.out, stdout, &buf)
}

/// Parses `args` (program name first) and runs the command, returning the
/// exit code.
pub fn main_with(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                USAGE
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let r = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a, stdout, stderr),
        Cmd::Analyze(a) => cmd_analyze(a, stdout, stderr),
        Cmd::Branch(a) => cmd_branch(a, stdout, stderr),
        Cmd::Histogram(a) => cmd_histogram(a, stdout, stderr),
        Cmd::ListModels => {
            for name in BUNDLED {
                let _ = writeln!(stdout, "builtin:{name}");
            }
            Ok(())
        }
    };
    match r {
        Ok(()) => 0,
        Err(Fail(code, msg)) => {
            let _ = writeln!(stderr, "{msg}");
            code
        }
    }
}

/// Entry point over the process arguments and standard streams.
pub fn main() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let code = main_with(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    let _ = std::io::stdout().flush();
    code
}
