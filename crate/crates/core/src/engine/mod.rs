//! One causal step: guard evaluation, law selection, and transition.

pub mod eval;
pub mod intrinsic;
pub mod ir;
pub mod random;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::cml::Loc;
use crate::state::{StateSchema, SystemState, Value};

pub use eval::{EvalError, EvalErrorKind, Evaluator};
pub use intrinsic::{IntrinsicDef, Registry};
pub use random::{
    born_probabilities, sample_random, BranchSignal, Chooser, Distribution, RandomError, RandomSpec, ValueRange,
};

use ir::{Expr, ExprKind, Stmt};

/// `IF guard(s0) THEN s1 = transition(s0)`.
#[derive(Debug, Clone)]
pub struct Law {
    pub name: String,
    pub guard: Expr,
    pub transition: Vec<Stmt>,
    /// Transition contains `random` or a stochastic intrinsic.
    pub uses_random: bool,
    /// Local slots needed by the guard and transition.
    pub n_locals: usize,
    pub loc: Loc,
}

#[derive(Debug, Clone, Default)]
pub struct InitBlock {
    pub stmts: Vec<Stmt>,
    pub n_locals: usize,
}

#[derive(Debug, Clone)]
pub struct CausalModel {
    pub name: String,
    pub schema: Arc<StateSchema>,
    pub laws: Vec<Law>,
    pub init: InitBlock,
    pub halt: Option<Expr>,
    pub default_timestep: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("a model needs at least one law")]
    NoLaws,
    #[error("duplicate law name `{0}`")]
    DuplicateLaw(String),
    #[error("timestep must be positive, got {0}")]
    InvalidTimestep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    /// Zero or several applicable laws stop the run with a witness.
    #[default]
    Strict,
    /// The first applicable law in declaration order wins.
    FirstMatch,
}

impl std::str::FromStr for ExecutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(ExecutionMode::Strict),
            "first-match" => Ok(ExecutionMode::FirstMatch),
            other => Err(format!("unknown mode `{other}` (expected strict or first-match)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("no law applies")]
    NoApplicableLaw { witness: Box<SystemState> },
    #[error("several laws apply: {}", laws.join(", "))]
    MultipleApplicable {
        laws: Vec<String>,
        witness: Box<SystemState>,
    },
    #[error("{0}")]
    Eval(EvalError),
    #[error("timestep must be positive, got {0}")]
    InvalidTimestep(f64),
}

impl From<EvalError> for EngineError {
    fn from(e: EvalError) -> Self {
        EngineError::Eval(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "laws", rename_all = "lowercase")]
pub enum Determinism {
    Deterministic,
    Nondeterministic(Vec<String>),
}

impl CausalModel {
    pub fn new(
        name: impl Into<String>,
        schema: Arc<StateSchema>,
        laws: Vec<Law>,
        init: InitBlock,
        halt: Option<Expr>,
        default_timestep: f64,
    ) -> Result<Self, ModelError> {
        if laws.is_empty() {
            return Err(ModelError::NoLaws);
        }
        for (i, l) in laws.iter().enumerate() {
            if laws[..i].iter().any(|m| m.name == l.name) {
                return Err(ModelError::DuplicateLaw(l.name.clone()));
            }
        }
        if !(default_timestep > 0.0 && default_timestep.is_finite()) {
            return Err(ModelError::InvalidTimestep(default_timestep));
        }
        Ok(CausalModel {
            name: name.into(),
            schema,
            laws,
            init,
            halt,
            default_timestep,
        })
    }

    pub fn law(&self, name: &str) -> Option<&Law> {
        self.laws.iter().find(|l| l.name == name)
    }

    /// Evaluates the halting predicate; a model without one never halts.
    pub fn should_halt(&self, s: &SystemState, dt: f64) -> Result<bool, EvalError> {
        match &self.halt {
            None => Ok(false),
            Some(h) => Evaluator::pure(Some(s), dt, 0).eval_bool(h),
        }
    }

    /// Names of every law whose guard holds on `s`, in declaration order.
    pub fn applicable_laws(&self, s: &SystemState, dt: f64) -> Result<Vec<&Law>, EvalError> {
        let mut out = Vec::new();
        for law in &self.laws {
            if eval_guard(law, s, dt)? {
                out.push(law);
            }
        }
        Ok(out)
    }

    /// Disjunction of all guards.
    pub fn validstate(&self, s: &SystemState, dt: f64) -> Result<bool, EvalError> {
        for law in &self.laws {
            if eval_guard(law, s, dt)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Runs the init block against a zero-valued state. Fields the block
    /// leaves unassigned keep the values in `base`.
    pub fn initial_state(
        &self,
        base: &SystemState,
        chooser: &mut dyn Chooser,
    ) -> Result<SystemState, EvalError> {
        let mut writes = Vec::new();
        Evaluator::with_chooser(None, self.default_timestep, self.init.n_locals, chooser)
            .exec_block(&self.init.stmts, &mut writes)?;
        let mut s = base.clone();
        eval::apply_writes(&mut s, writes)?;
        s.set_time(0.0);
        for (i, (name, ty)) in self.schema.fields().iter().enumerate() {
            if !self.schema.value_matches(s.value_at(i), ty) {
                return Err(EvalError::new(
                    EvalErrorKind::Type(format!(
                        "init leaves `{name}` as {}, expected {ty}",
                        s.value_at(i).kind_name()
                    )),
                    Loc::default(),
                ));
            }
        }
        Ok(s)
    }

    /// State whose fields hold type-correct placeholders. Used as the base
    /// for `initial_state`.
    pub fn zero_state(&self) -> SystemState {
        let values = self
            .schema
            .fields()
            .iter()
            .map(|(_, t)| self.schema.zero_value(t))
            .collect();
        SystemState::from_parts(self.schema.clone(), 0.0, values)
    }

    /// Runs the init block from placeholders.
    pub fn init_state(&self, chooser: &mut dyn Chooser) -> Result<SystemState, EvalError> {
        self.initial_state(&self.zero_state(), chooser)
    }
}

/// Evaluates a guard on `s`. Guards never draw and never write.
pub fn eval_guard(law: &Law, s: &SystemState, dt: f64) -> Result<bool, EvalError> {
    Evaluator::pure(Some(s), dt, law.n_locals)
        .eval_bool(&law.guard)
        .map_err(|e| e.in_law(&law.name))
}

pub fn select_law<'m>(
    model: &'m CausalModel,
    s: &SystemState,
    dt: f64,
    mode: ExecutionMode,
) -> Result<&'m Law, EngineError> {
    match mode {
        ExecutionMode::FirstMatch => {
            for law in &model.laws {
                if eval_guard(law, s, dt)? {
                    return Ok(law);
                }
            }
            Err(EngineError::NoApplicableLaw {
                witness: Box::new(s.clone()),
            })
        }
        ExecutionMode::Strict => {
            let hits = model.applicable_laws(s, dt)?;
            match hits.len() {
                0 => Err(EngineError::NoApplicableLaw {
                    witness: Box::new(s.clone()),
                }),
                1 => Ok(hits[0]),
                _ => Err(EngineError::MultipleApplicable {
                    laws: hits.iter().map(|l| l.name.clone()).collect(),
                    witness: Box::new(s.clone()),
                }),
            }
        }
    }
}

/// Produces `s1 = f(s0)`. Time is left at `s0.time`.
pub fn apply_law(
    law: &Law,
    s0: &SystemState,
    dt: f64,
    chooser: &mut dyn Chooser,
) -> Result<SystemState, EvalError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EvalError::new(
            EvalErrorKind::Domain(format!("timestep must be positive, got {dt}")),
            law.loc,
        )
        .in_law(&law.name));
    }
    let mut writes = Vec::new();
    Evaluator::with_chooser(Some(s0), dt, law.n_locals, chooser)
        .exec_block(&law.transition, &mut writes)
        .map_err(|e| e.in_law(&law.name))?;
    let mut s1 = s0.clone();
    eval::apply_writes(&mut s1, writes).map_err(|e| e.in_law(&law.name))?;
    Ok(s1)
}

/// Select, apply, then set `time = time_of_next`. Callers that track a step
/// index pass `t0 + (k + 1) * dt` to avoid accumulated drift.
pub fn step_to(
    model: &CausalModel,
    s0: &SystemState,
    dt: f64,
    next_time: f64,
    mode: ExecutionMode,
    chooser: &mut dyn Chooser,
) -> Result<SystemState, EngineError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EngineError::InvalidTimestep(dt));
    }
    let law = select_law(model, s0, dt, mode)?;
    let mut s1 = apply_law(law, s0, dt, chooser)?;
    s1.set_time(next_time);
    Ok(s1)
}

/// One step with `time += dt`.
pub fn step(
    model: &CausalModel,
    s0: &SystemState,
    dt: f64,
    mode: ExecutionMode,
    chooser: &mut dyn Chooser,
) -> Result<SystemState, EngineError> {
    step_to(model, s0, dt, s0.time() + dt, mode, chooser)
}

/// Deterministic iff no law's transition can draw.
pub fn classify_determinism(model: &CausalModel) -> Determinism {
    let laws: Vec<String> = model
        .laws
        .iter()
        .filter(|l| l.uses_random)
        .map(|l| l.name.clone())
        .collect();
    if laws.is_empty() {
        Determinism::Deterministic
    } else {
        Determinism::Nondeterministic(laws)
    }
}

/// Syntactic scan for `random` or a stochastic intrinsic.
pub fn stmts_use_random(stmts: &[Stmt]) -> bool {
    let mut found = false;
    for s in stmts {
        s.walk_exprs(&mut |e| found |= expr_is_random(e));
    }
    found
}

pub fn expr_uses_random(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| found |= expr_is_random(x));
    found
}

fn expr_is_random(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Random(_) => true,
        ExprKind::Intrinsic(call) => call.def.is_some_and(|d| d.stochastic),
        _ => false,
    }
}

/// Value of an expression that reads nothing from the state, the frame, or
/// the random source; `None` otherwise.
pub fn const_fold(e: &Expr) -> Option<Value> {
    let mut closed = true;
    e.walk(&mut |x| {
        closed &= !matches!(
            x.kind,
            ExprKind::Field(_)
                | ExprKind::Local(_)
                | ExprKind::Dt
                | ExprKind::Time
                | ExprKind::Random(_)
                | ExprKind::Intrinsic(_)
                | ExprKind::Comprehension { .. }
        )
    });
    if !closed {
        return None;
    }
    Evaluator::pure(None, 1.0, 0).eval(e).ok()
}
