//! Whole-model evolution: the uniform-timestep loop, trace recording, and
//! halting. Only the current state and the recorded rows are kept.

mod branch;
mod output;

use serde::Serialize;
use thiserror::Error;

pub use branch::{branch_run, BranchConfig, BranchError, WorldNode, WorldTree};
pub use output::{format_g17, write_trace, SinkError, TraceFormat};

use crate::cml::{check_observable, parse_expr, Diagnostic, Loc};
use crate::engine::ir::Expr;
use crate::engine::{step_to, CausalModel, EngineError, EvalError, Evaluator, ExecutionMode};
use crate::quantum::intrinsics::standard;
use crate::rng::{derive_seed, RngStream};
use crate::state::{StateSchema, SystemState, TypeKind, Value};

/// Stream index reserved for init-block draws so they never overlap with
/// transition draws from the same base seed.
pub const INIT_STREAM: u64 = u64::MAX;

/// A named pure expression evaluated on every recorded state.
#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub expr: Expr,
    pub n_locals: usize,
}

impl Observable {
    /// Compiles `src` against `schema`. The source text is also the name.
    pub fn compile(schema: &StateSchema, src: &str) -> Result<Observable, Vec<Diagnostic>> {
        let ast = parse_expr(src)?;
        let (expr, _, n_locals) = check_observable(schema, standard(), &ast)?;
        Ok(Observable {
            name: src.trim().to_string(),
            expr,
            n_locals,
        })
    }

    /// Reads field `index` directly.
    pub fn field(schema: &StateSchema, index: usize) -> Observable {
        Observable {
            name: schema.fields()[index].0.clone(),
            expr: Expr::new(crate::engine::ir::ExprKind::Field(index), Loc::default()),
            n_locals: 0,
        }
    }

    /// Every scalar field, in declaration order.
    pub fn defaults(schema: &StateSchema) -> Vec<Observable> {
        schema
            .fields()
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| {
                matches!(t.kind, TypeKind::Int | TypeKind::Real | TypeKind::Bool | TypeKind::Complex)
            })
            .map(|(i, _)| Observable::field(schema, i))
            .collect()
    }

    pub fn eval(&self, s: &SystemState, dt: f64) -> Result<Value, EvalError> {
        Evaluator::pure(Some(s), dt, self.n_locals).eval(&self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("dt must be positive and finite, got {0}")]
    Dt(f64),
    #[error("maxSteps must be at least 1")]
    MaxSteps,
    #[error("recordEvery must be at least 1")]
    RecordEvery,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dt: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub mode: ExecutionMode,
    pub record_every: u64,
    pub observables: Vec<Observable>,
    /// Store the full state with every recorded row.
    pub snapshots: bool,
}

impl RunConfig {
    /// Model timestep, 1000 steps, seed 0, strict mode, every step recorded,
    /// scalar fields observed.
    pub fn for_model(model: &CausalModel) -> RunConfig {
        RunConfig {
            dt: model.default_timestep,
            max_steps: 1000,
            seed: 0,
            mode: ExecutionMode::Strict,
            record_every: 1,
            observables: Observable::defaults(&model.schema),
            snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::Dt(self.dt));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::MaxSteps);
        }
        if self.record_every == 0 {
            return Err(ConfigError::RecordEvery);
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            dt: self.dt,
            max_steps: self.max_steps,
            seed: self.seed,
            mode: self.mode,
            record_every: self.record_every,
            observables: self.observables.iter().map(|o| o.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigEcho {
    pub dt: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub mode: ExecutionMode,
    pub record_every: u64,
    pub observables: Vec<String>,
}

/// Why a run or lineage stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum TerminationReason {
    Halted,
    MaxSteps,
    NoApplicableLaw { witness: Box<SystemState> },
    MultipleApplicable { laws: Vec<String>, witness: Box<SystemState> },
    EvalError {
        message: String,
        law: Option<String>,
        line: u32,
        col: u32,
    },
    /// Branching stopped after the lineage's draw budget was spent.
    DepthBound,
    /// Lineage dropped to keep the frontier within its width bound.
    Pruned,
}

impl TerminationReason {
    pub fn is_error(&self) -> bool {
        matches!(
            self,
            TerminationReason::NoApplicableLaw { .. }
                | TerminationReason::MultipleApplicable { .. }
                | TerminationReason::EvalError { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            TerminationReason::Halted => "Halted",
            TerminationReason::MaxSteps => "MaxSteps",
            TerminationReason::NoApplicableLaw { .. } => "NoApplicableLaw",
            TerminationReason::MultipleApplicable { .. } => "MultipleApplicable",
            TerminationReason::EvalError { .. } => "EvalError",
            TerminationReason::DepthBound => "DepthBound",
            TerminationReason::Pruned => "Pruned",
        }
    }
}

impl From<EvalError> for TerminationReason {
    fn from(e: EvalError) -> Self {
        TerminationReason::EvalError {
            message: e.kind.to_string(),
            law: e.law,
            line: e.loc.line,
            col: e.loc.col,
        }
    }
}

impl From<EngineError> for TerminationReason {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::NoApplicableLaw { witness } => TerminationReason::NoApplicableLaw { witness },
            EngineError::MultipleApplicable { laws, witness } => {
                TerminationReason::MultipleApplicable { laws, witness }
            }
            EngineError::Eval(e) => e.into(),
            EngineError::InvalidTimestep(dt) => TerminationReason::EvalError {
                message: format!("timestep must be positive, got {dt}"),
                law: None,
                line: 0,
                col: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub time: f64,
    pub values: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<SystemState>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub model_name: String,
    pub config: ConfigEcho,
    pub observables: Vec<String>,
    pub rows: Vec<TraceRow>,
    pub termination_reason: TerminationReason,
    /// Steps actually taken.
    pub steps: u64,
    #[serde(skip)]
    pub final_state: SystemState,
}

/// Runs the init block with the stream reserved for `seed`.
pub fn initial_state(model: &CausalModel, seed: u64) -> Result<SystemState, EvalError> {
    model.init_state(&mut RngStream::new(derive_seed(seed, INIT_STREAM)))
}

fn record(
    rows: &mut Vec<TraceRow>,
    cfg: &RunConfig,
    step: u64,
    s: &SystemState,
) -> Result<(), EvalError> {
    let values = cfg
        .observables
        .iter()
        .map(|o| o.eval(s, cfg.dt))
        .collect::<Result<Vec<_>, _>>()?;
    rows.push(TraceRow {
        step,
        time: s.time(),
        values,
        state: cfg.snapshots.then(|| s.clone()),
    });
    Ok(())
}

/// Steps from `init` until the halt condition holds, `max_steps` steps have
/// been taken, or the engine reports an error. Errors end up in the
/// termination reason. Rows are recorded at step 0 and every
/// `record_every` steps; times are `t0 + k * dt`.
pub fn run(model: &CausalModel, init: &SystemState, cfg: &RunConfig) -> Result<Trace, ConfigError> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed);
    let t0 = init.time();
    let mut s = init.clone();
    let mut rows = Vec::new();
    let mut k = 0u64;
    let reason = loop {
        if k % cfg.record_every == 0 {
            if let Err(e) = record(&mut rows, cfg, k, &s) {
                break e.into();
            }
        }
        match model.should_halt(&s, cfg.dt) {
            Ok(true) => break TerminationReason::Halted,
            Ok(false) => {}
            Err(e) => break e.into(),
        }
        if k == cfg.max_steps {
            break TerminationReason::MaxSteps;
        }
        let next_time = t0 + (k + 1) as f64 * cfg.dt;
        match step_to(model, &s, cfg.dt, next_time, cfg.mode, &mut rng) {
            Ok(s1) => s = s1,
            Err(e) => break e.into(),
        }
        k += 1;
    };
    Ok(Trace {
        model_name: model.name.clone(),
        config: cfg.echo(),
        observables: cfg.observables.iter().map(|o| o.name.clone()).collect(),
        rows,
        termination_reason: reason,
        steps: k,
        final_state: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cml::compile;
    use crate::quantum::build_bundled;
    use std::collections::BTreeMap;

    fn counter() -> (CausalModel, SystemState) {
        let b = build_bundled("counter", &BTreeMap::new()).unwrap();
        (b.model, b.init)
    }

    #[test]
    fn counter_halts_after_ten_steps() {
        let (m, s0) = counter();
        let cfg = RunConfig {
            dt: 1.0,
            ..RunConfig::for_model(&m)
        };
        let t = run(&m, &s0, &cfg).unwrap();
        assert_eq!(t.termination_reason, TerminationReason::Halted);
        assert_eq!(t.steps, 10);
        assert_eq!(t.final_state.get("n"), Some(&Value::Int(10)));
        assert_eq!(t.rows.len(), 11);
        for (k, r) in t.rows.iter().enumerate() {
            assert_eq!(r.time, k as f64);
        }
    }

    #[test]
    fn record_stride_keeps_uniform_spacing() {
        let (m, s0) = counter();
        let cfg = RunConfig {
            dt: 0.1,
            record_every: 3,
            ..RunConfig::for_model(&m)
        };
        let t = run(&m, &s0, &cfg).unwrap();
        let steps: Vec<u64> = t.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 3, 6, 9]);
        for r in &t.rows {
            assert_eq!(r.time, r.step as f64 * 0.1);
        }
    }

    #[test]
    fn no_applicable_law_carries_the_witness() {
        let c = compile(
            "model M { state { x: real; } init { x = 2.0; } law L { when x < 0.0; then { x = x - 1.0; } } }",
        )
        .unwrap();
        let s0 = c.model.init_state(&mut RngStream::new(0)).unwrap();
        let t = run(&c.model, &s0, &RunConfig::for_model(&c.model)).unwrap();
        match t.termination_reason {
            TerminationReason::NoApplicableLaw { witness } => {
                assert_eq!(witness.get("x"), Some(&Value::Real(2.0)))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn max_steps_bounds_the_run() {
        let (m, s0) = counter();
        let cfg = RunConfig {
            max_steps: 4,
            ..RunConfig::for_model(&m)
        };
        let t = run(&m, &s0, &cfg).unwrap();
        assert_eq!(t.termination_reason, TerminationReason::MaxSteps);
        assert_eq!(t.steps, 4);
    }

    #[test]
    fn bad_config_is_rejected() {
        let (m, s0) = counter();
        for cfg in [
            RunConfig { dt: 0.0, ..RunConfig::for_model(&m) },
            RunConfig { max_steps: 0, ..RunConfig::for_model(&m) },
            RunConfig { record_every: 0, ..RunConfig::for_model(&m) },
        ] {
            assert!(run(&m, &s0, &cfg).is_err());
        }
    }

    #[test]
    fn observables_compile_and_evaluate() {
        let (m, s0) = counter();
        let o = Observable::compile(&m.schema, "n * 2 + 1").unwrap();
        assert_eq!(o.eval(&s0, 1.0).unwrap(), Value::Int(1));
        assert!(Observable::compile(&m.schema, "nope").is_err());
    }
}
