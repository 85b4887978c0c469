//! Bounded checks of consistency (at most one law applies) and completeness
//! (valid states step to valid states), plus the static classifications.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::ir::{Arg, BinOp, Expr, ExprKind};
use crate::engine::{
    apply_law, classify_determinism, const_fold, CausalModel, Determinism, EvalError,
    ExecutionMode,
};
use crate::rng::{derive_seed, RngStream};
use crate::state::{
    sample_state_with, unsampleable_fields, Domain, SampleConfig, StateError, StateSchema,
    SystemState, TypeDesc, TypeKind, Value,
};

/// How candidate in-states are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum CheckStrategy {
    /// Every state of a finite schema.
    Enumerate,
    /// `count` uniform draws; trial `i` uses seed `derive_seed(seed, i)`.
    Sample { count: u64, seed: u64 },
    /// States visited by `runs` executions of up to `steps` steps from init.
    Trace { runs: u64, steps: u64, seed: u64 },
}

impl CheckStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            CheckStrategy::Enumerate => "enumerate",
            CheckStrategy::Sample { .. } => "sample",
            CheckStrategy::Trace { .. } => "trace",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub strategy: CheckStrategy,
    pub dt: f64,
    pub sample: SampleConfig,
    /// Largest state space `Enumerate` will walk.
    pub enumerate_limit: u64,
    /// Switch to another strategy instead of failing when the requested one
    /// cannot cover the schema.
    pub allow_fallback: bool,
}

impl AnalyzeConfig {
    pub fn new(model: &CausalModel, strategy: CheckStrategy) -> Self {
        AnalyzeConfig {
            strategy,
            dt: model.default_timestep,
            sample: SampleConfig::default(),
            enumerate_limit: 1_000_000,
            allow_fallback: true,
        }
    }
}

/// A state that demonstrates a failed check, with what reproduces it: the
/// trial seed regenerates the state under the strategy that found it.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub state: SystemState,
    pub seed: Option<u64>,
    pub trial: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
}

impl Witness {
    /// Rebuilds the witness state from its JSON serialization.
    pub fn state_from_json(
        schema: &Arc<StateSchema>,
        doc: &serde_json::Value,
    ) -> Result<SystemState, StateError> {
        SystemState::from_json(schema, doc.get("state").unwrap_or(doc))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum Consistency {
    #[serde(rename_all = "camelCase")]
    Pass { states_checked: u64 },
    Fail { witness: Witness, laws: Vec<String> },
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum Completeness {
    /// No checked valid state stepped outside the valid region.
    #[serde(rename_all = "camelCase")]
    PassBounded { states_checked: u64 },
    /// A guard is identically true, so every state is valid.
    PassTrivially { law: String },
    #[serde(rename_all = "camelCase")]
    Fail {
        witness: Witness,
        out_state: SystemState,
        law: String,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComputabilityNotes {
    pub unsampleable_fields: Vec<String>,
    pub intrinsics: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub model_name: String,
    /// Strategy actually used, after any fallback.
    pub strategy: CheckStrategy,
    pub consistency: Consistency,
    pub completeness: Completeness,
    #[serde(serialize_with = "ser_determinism")]
    pub determinism: Determinism,
    pub computability_notes: ComputabilityNotes,
    /// Whether laws match the world is outside what a checker can decide.
    pub reality_conformance: &'static str,
}

fn ser_determinism<S: serde::Serializer>(d: &Determinism, s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    #[serde(tag = "kind", rename_all = "camelCase")]
    enum Repr<'a> {
        Deterministic,
        Nondeterministic { laws: &'a [String] },
    }
    match d {
        Determinism::Deterministic => Repr::Deterministic.serialize(s),
        Determinism::Nondeterministic(laws) => Repr::Nondeterministic { laws }.serialize(s),
    }
}

#[derive(Debug, Clone, Error)]
pub enum AnalyzeError {
    #[error("cannot sample fields: {}", .0.join(", "))]
    UnsampleableField(Vec<String>),
    #[error("state space is not finite or exceeds {limit} states")]
    NotEnumerable { limit: u64 },
    #[error("no valid, non-halting in-state was found to check completeness")]
    NoValidInStateFound,
    #[error("evaluation failed on trial {trial}: {error}")]
    Eval { trial: u64, error: EvalError },
    #[error("init failed: {0}")]
    Init(EvalError),
    #[error("timestep must be positive and finite, got {0}")]
    Dt(f64),
}

/// What one in-state contributed to each check.
enum Verdict {
    /// Halting states never step and are exempt.
    Exempt,
    Checked {
        overlap: Option<Vec<String>>,
        valid: bool,
        escape: Option<(String, SystemState)>,
    },
}

/// Evaluates both checks on `s`. Completeness applies every applicable law,
/// drawing from `rng`.
fn check_state(
    model: &CausalModel,
    s: &SystemState,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Verdict, EvalError> {
    if model.should_halt(s, dt)? {
        return Ok(Verdict::Exempt);
    }
    let hits = model.applicable_laws(s, dt)?;
    let overlap = (hits.len() > 1).then(|| hits.iter().map(|l| l.name.clone()).collect());
    let mut escape = None;
    for law in &hits {
        let mut s1 = apply_law(law, s, dt, rng)?;
        s1.set_time(s.time() + dt);
        if !model.should_halt(&s1, dt)? && !model.validstate(&s1, dt)? {
            escape = Some((law.name.clone(), s1));
            break;
        }
    }
    Ok(Verdict::Checked {
        overlap,
        valid: !hits.is_empty(),
        escape,
    })
}

struct Record {
    trial: u64,
    seed: Option<u64>,
    step: Option<u64>,
    state: SystemState,
    verdict: Verdict,
}

/// Guard that holds on every state: folds to `true` directly, or is a
/// disjunction with such a side, or a conjunction of two.
fn always_true(e: &Expr) -> bool {
    if let Some(Value::Bool(true)) = const_fold(e) {
        return true;
    }
    match &e.kind {
        ExprKind::Binary(BinOp::Or, a, b) => always_true(a) || always_true(b),
        ExprKind::Binary(BinOp::And, a, b) => always_true(a) && always_true(b),
        _ => false,
    }
}

fn intrinsics_used(model: &CausalModel) -> Vec<String> {
    let mut names = BTreeSet::new();
    let mut visit = |e: &Expr| {
        if let ExprKind::Intrinsic(call) = &e.kind {
            names.insert(call.name.clone());
            for a in &call.args {
                if let Arg::Lambda { body, .. } = a {
                    body.walk(&mut |x| {
                        if let ExprKind::Intrinsic(c) = &x.kind {
                            names.insert(c.name.clone());
                        }
                    });
                }
            }
        }
    };
    for law in &model.laws {
        law.guard.walk(&mut visit);
        for s in &law.transition {
            s.walk_exprs(&mut visit);
        }
    }
    names.into_iter().collect()
}

/// Every value a type can take, or `None` if that set is infinite or
/// larger than `limit`.
fn finite_values(schema: &StateSchema, ty: &TypeDesc, limit: u64) -> Option<Vec<Value>> {
    if let Some(Domain::Set(vs)) = &ty.domain {
        return Some(vs.clone());
    }
    match &ty.kind {
        TypeKind::Bool => Some(vec![Value::Bool(false), Value::Bool(true)]),
        TypeKind::Int => match ty.domain {
            Some(Domain::Interval { lo, hi }) => {
                let (lo, hi) = (lo.ceil() as i64, hi.floor() as i64);
                let n = (hi as i128 - lo as i128 + 1).max(0);
                (n as u128 <= limit as u128).then(|| (lo..=hi).map(Value::Int).collect())
            }
            _ => None,
        },
        TypeKind::List {
            elem,
            bound: Some(n),
        } => {
            let one = finite_values(schema, elem, limit)?;
            let mut acc = vec![Vec::new()];
            for _ in 0..*n {
                if acc.len() as u128 * one.len() as u128 > limit as u128 {
                    return None;
                }
                acc = acc
                    .into_iter()
                    .flat_map(|p| {
                        one.iter().map(move |v| {
                            let mut q = p.clone();
                            q.push(v.clone());
                            q
                        })
                    })
                    .collect();
            }
            Some(acc.into_iter().map(Value::List).collect())
        }
        TypeKind::Record { name } => {
            let decl = schema.record(name)?;
            let mut acc: Vec<Vec<(String, Value)>> = vec![Vec::new()];
            for (f, t) in decl {
                let vs = finite_values(schema, t, limit)?;
                if acc.len() as u128 * vs.len() as u128 > limit as u128 {
                    return None;
                }
                acc = acc
                    .into_iter()
                    .flat_map(|p| {
                        vs.iter().map(move |v| {
                            let mut q = p.clone();
                            q.push((f.clone(), v.clone()));
                            q
                        })
                    })
                    .collect();
            }
            Some(
                acc.into_iter()
                    .map(|fields| {
                        Value::Record(crate::state::RecordValue {
                            name: name.clone(),
                            fields,
                        })
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

/// Per-field value lists and the product size, if within `limit`.
fn enumeration(schema: &StateSchema, limit: u64) -> Option<(Vec<Vec<Value>>, u64)> {
    let mut total: u128 = 1;
    let mut cols = Vec::new();
    for (_, ty) in schema.fields() {
        let vs = finite_values(schema, ty, limit)?;
        total *= vs.len() as u128;
        if total > limit as u128 {
            return None;
        }
        cols.push(vs);
    }
    Some((cols, total as u64))
}

/// State number `i` in mixed-radix order, first field most significant.
fn nth_state(schema: &Arc<StateSchema>, cols: &[Vec<Value>], mut i: u64) -> SystemState {
    let mut values = vec![Value::Bool(false); cols.len()];
    for (slot, col) in values.iter_mut().zip(cols).rev() {
        let n = col.len() as u64;
        *slot = col[(i % n) as usize].clone();
        i /= n;
    }
    let time = schema.time_domain().map_or(0.0, |(lo, _)| lo);
    SystemState::from_parts(schema.clone(), time, values)
}

fn collect_enumerated(
    model: &CausalModel,
    cols: &[Vec<Value>],
    total: u64,
    dt: f64,
) -> Result<Vec<Record>, AnalyzeError> {
    (0..total)
        .into_par_iter()
        .map(|i| {
            let s = nth_state(&model.schema, cols, i);
            let mut rng = RngStream::derived(0, i);
            let verdict =
                check_state(model, &s, dt, &mut rng).map_err(|error| AnalyzeError::Eval {
                    trial: i,
                    error,
                })?;
            Ok(Record {
                trial: i,
                seed: None,
                step: None,
                state: s,
                verdict,
            })
        })
        .collect()
}

fn collect_sampled(
    model: &CausalModel,
    cfg: &SampleConfig,
    count: u64,
    seed: u64,
    dt: f64,
) -> Result<Vec<Record>, AnalyzeError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(seed, i);
            let mut rng = RngStream::new(trial_seed);
            let s = sample_state_with(&model.schema, &mut rng, cfg).map_err(|e| match e {
                StateError::UnsampleableField(f) => AnalyzeError::UnsampleableField(vec![f]),
                other => unreachable!("sampling only fails on unsampleable fields: {other}"),
            })?;
            let verdict =
                check_state(model, &s, dt, &mut rng).map_err(|error| AnalyzeError::Eval {
                    trial: i,
                    error,
                })?;
            Ok(Record {
                trial: i,
                seed: Some(trial_seed),
                step: None,
                state: s,
                verdict,
            })
        })
        .collect()
}

/// Walks each run with first-match selection so overlaps do not stop it.
/// A run ends at a halting state, a state with no applicable law, an
/// escape, or after `steps` steps.
fn collect_traced(
    model: &CausalModel,
    runs: u64,
    steps: u64,
    seed: u64,
    dt: f64,
) -> Result<Vec<Record>, AnalyzeError> {
    let per_run: Vec<Result<Vec<Record>, AnalyzeError>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let trial_seed = derive_seed(seed, r);
            let mut rng = RngStream::new(trial_seed);
            let mut s = model.init_state(&mut rng).map_err(AnalyzeError::Init)?;
            let mut out = Vec::new();
            for k in 0..=steps {
                let eval_err = |error| AnalyzeError::Eval { trial: r, error };
                let verdict = check_state(model, &s, dt, &mut rng.clone()).map_err(eval_err)?;
                let stop = match &verdict {
                    Verdict::Exempt => true,
                    Verdict::Checked { valid, escape, .. } => !valid || escape.is_some(),
                };
                let next = if stop || k == steps {
                    None
                } else {
                    Some(
                        crate::engine::step(model, &s, dt, ExecutionMode::FirstMatch, &mut rng)
                            .map_err(|e| match e {
                                crate::engine::EngineError::Eval(error) => {
                                    AnalyzeError::Eval { trial: r, error }
                                }
                                other => unreachable!("first-match step after a valid check: {other}"),
                            })?,
                    )
                };
                out.push(Record {
                    trial: r,
                    seed: Some(trial_seed),
                    step: Some(k),
                    state: s,
                    verdict,
                });
                match next {
                    Some(n) => s = n,
                    None => break,
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_run {
        all.extend(r?);
    }
    Ok(all)
}

/// Runs the consistency and completeness checks under `cfg.strategy`,
/// falling back to sampling or tracing when the schema cannot support it.
pub fn analyze(model: &CausalModel, cfg: &AnalyzeConfig) -> Result<AnalysisReport, AnalyzeError> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(AnalyzeError::Dt(cfg.dt));
    }
    let unsampleable = unsampleable_fields(&model.schema, &cfg.sample);
    let mut notes = ComputabilityNotes {
        unsampleable_fields: unsampleable.clone(),
        intrinsics: intrinsics_used(model),
        notes: Vec::new(),
    };
    let mut strategy = cfg.strategy;
    let fallback_trace = CheckStrategy::Trace {
        runs: 10,
        steps: 100,
        seed: 0,
    };
    let mut enumerated = None;
    if strategy == CheckStrategy::Enumerate {
        match enumeration(&model.schema, cfg.enumerate_limit) {
            Some(e) => enumerated = Some(e),
            None if !cfg.allow_fallback => {
                return Err(AnalyzeError::NotEnumerable {
                    limit: cfg.enumerate_limit,
                })
            }
            None => {
                strategy = if unsampleable.is_empty() {
                    CheckStrategy::Sample {
                        count: 10_000,
                        seed: 0,
                    }
                } else {
                    fallback_trace
                };
                notes.notes.push(format!(
                    "state space is not finite within {} states; used {} instead of enumerate",
                    cfg.enumerate_limit,
                    strategy.name()
                ));
            }
        }
    }
    if let CheckStrategy::Sample { seed, .. } = strategy {
        if !unsampleable.is_empty() {
            if !cfg.allow_fallback {
                return Err(AnalyzeError::UnsampleableField(unsampleable));
            }
            strategy = CheckStrategy::Trace {
                runs: 10,
                steps: 100,
                seed,
            };
            notes.notes.push(format!(
                "fields {} cannot be sampled; used trace instead of sample",
                unsampleable.join(", ")
            ));
        }
    }

    let records = match (strategy, &enumerated) {
        (CheckStrategy::Enumerate, Some((cols, total))) => {
            collect_enumerated(model, cols, *total, cfg.dt)?
        }
        (CheckStrategy::Sample { count, seed }, _) => {
            collect_sampled(model, &cfg.sample, count, seed, cfg.dt)?
        }
        (CheckStrategy::Trace { runs, steps, seed }, _) => {
            collect_traced(model, runs, steps, seed, cfg.dt)?
        }
        (CheckStrategy::Enumerate, None) => unreachable!("enumeration resolved above"),
    };

    let witness = |r: &Record| Witness {
        state: r.state.clone(),
        seed: r.seed,
        trial: r.trial,
        step: r.step,
    };

    let mut checked = 0;
    let mut consistency = None;
    for r in &records {
        if let Verdict::Checked { overlap, .. } = &r.verdict {
            checked += 1;
            if let Some(laws) = overlap {
                consistency = Some(Consistency::Fail {
                    witness: witness(r),
                    laws: laws.clone(),
                });
                break;
            }
        }
    }
    let consistency = consistency.unwrap_or(Consistency::Pass {
        states_checked: checked,
    });

    let completeness = match model.laws.iter().find(|l| always_true(&l.guard)) {
        Some(l) => Completeness::PassTrivially {
            law: l.name.clone(),
        },
        None => {
            let mut valid = 0;
            let mut fail = None;
            for r in &records {
                if let Verdict::Checked {
                    valid: true,
                    escape,
                    ..
                } = &r.verdict
                {
                    valid += 1;
                    if let Some((law, out)) = escape {
                        fail = Some(Completeness::Fail {
                            witness: witness(r),
                            out_state: out.clone(),
                            law: law.clone(),
                        });
                        break;
                    }
                }
            }
            match fail {
                Some(f) => f,
                None if valid == 0 => return Err(AnalyzeError::NoValidInStateFound),
                None => Completeness::PassBounded {
                    states_checked: valid,
                },
            }
        }
    };

    Ok(AnalysisReport {
        model_name: model.name.clone(),
        strategy,
        consistency,
        completeness,
        determinism: classify_determinism(model),
        computability_notes: notes,
        reality_conformance: "NotMachineCheckable",
    })
}
