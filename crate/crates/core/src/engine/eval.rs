//! Expression evaluation and transition execution.
//!
//! Reads always see the pre-state `s0`. Assignments are collected as
//! `(place, value)` writes and applied in program order to a copy of `s0`
//! once the whole block has run, so `a = b; b = a;` swaps.

use std::cell::RefCell;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::intrinsic::ArgValue;
use super::ir::*;
use super::random::{sample_random, BranchSignal, Chooser, Distribution, RandomError, RandomSpec, ValueRange};
use crate::cml::Loc;
use crate::state::{CGrid, RecordValue, SystemState, Value};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum EvalErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("integer overflow")]
    Overflow,
    #[error("type error: {0}")]
    Type(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("random: {0}")]
    Random(String),
    #[error("{0}")]
    Intrinsic(String),
    #[error("{0}")]
    Branch(BranchSignal),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub loc: Loc,
    pub law: Option<String>,
}

impl EvalError {
    pub fn new(kind: EvalErrorKind, loc: Loc) -> Self {
        EvalError {
            kind,
            loc,
            law: None,
        }
    }

    pub fn in_law(mut self, law: &str) -> Self {
        if self.law.is_none() {
            self.law = Some(law.to_string());
        }
        self
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.law {
            Some(l) => write!(f, "{} (law {l}, at {})", self.kind, self.loc),
            None => write!(f, "{} (at {})", self.kind, self.loc),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<RandomError> for EvalErrorKind {
    fn from(e: RandomError) -> Self {
        match e {
            RandomError::Branch(s) => EvalErrorKind::Branch(s),
            other => EvalErrorKind::Random(other.to_string()),
        }
    }
}

type R<T> = Result<T, EvalError>;

fn type_err(msg: impl Into<String>) -> EvalErrorKind {
    EvalErrorKind::Type(msg.into())
}

/// Location inside a state, resolved at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcretePlace {
    pub field: usize,
    pub path: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Member(String),
    Index(usize),
}

#[derive(Debug, Clone)]
struct Local {
    value: Value,
    place: Option<ConcretePlace>,
}

/// Evaluation context for one guard, transition, or observable.
pub struct Evaluator<'a, 'c> {
    state: Option<&'a SystemState>,
    dt: f64,
    locals: Vec<Option<Local>>,
    chooser: Option<&'c mut dyn Chooser>,
}

impl<'a, 'c> Evaluator<'a, 'c> {
    /// Context without a random source; any draw is a type error.
    pub fn pure(state: Option<&'a SystemState>, dt: f64, n_locals: usize) -> Self {
        Evaluator {
            state,
            dt,
            locals: vec![None; n_locals],
            chooser: None,
        }
    }

    pub fn with_chooser(
        state: Option<&'a SystemState>,
        dt: f64,
        n_locals: usize,
        chooser: &'c mut dyn Chooser,
    ) -> Self {
        Evaluator {
            state,
            dt,
            locals: vec![None; n_locals],
            chooser: Some(chooser),
        }
    }

    fn state(&self, loc: Loc) -> R<&'a SystemState> {
        self.state
            .ok_or_else(|| EvalError::new(type_err("no state in this context"), loc))
    }

    fn set_local(&mut self, slot: usize, value: Value, place: Option<ConcretePlace>) {
        if slot >= self.locals.len() {
            self.locals.resize(slot + 1, None);
        }
        self.locals[slot] = Some(Local { value, place });
    }

    fn local(&self, slot: usize, loc: Loc) -> R<&Local> {
        self.locals
            .get(slot)
            .and_then(Option::as_ref)
            .ok_or_else(|| EvalError::new(type_err("unbound local"), loc))
    }

    pub fn eval_bool(&mut self, e: &Expr) -> R<bool> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            v => Err(EvalError::new(
                type_err(format!("expected bool, got {}", v.kind_name())),
                e.loc,
            )),
        }
    }

    pub fn eval(&mut self, e: &Expr) -> R<Value> {
        let at = |k: EvalErrorKind| EvalError::new(k, e.loc);
        match &e.kind {
            ExprKind::Lit(v) => Ok(v.clone()),
            ExprKind::Field(i) => Ok(self.state(e.loc)?.value_at(*i).clone()),
            ExprKind::Local(slot) => Ok(self.local(*slot, e.loc)?.value.clone()),
            ExprKind::Dt => Ok(Value::Real(self.dt)),
            ExprKind::Time => Ok(Value::Real(self.state(e.loc)?.time())),
            ExprKind::Member(base, name) => {
                let v = self.eval(base)?;
                member(&v, name).map_err(at)
            }
            ExprKind::Index(base, idx) => {
                let v = self.eval(base)?;
                let i = self.eval(idx)?;
                index(&v, &i).map_err(at)
            }
            ExprKind::Unary(op, a) => {
                let v = self.eval(a)?;
                unary(*op, v).map_err(at)
            }
            ExprKind::Binary(BinOp::And, a, b) => {
                Ok(Value::Bool(self.eval_bool(a)? && self.eval_bool(b)?))
            }
            ExprKind::Binary(BinOp::Or, a, b) => {
                Ok(Value::Bool(self.eval_bool(a)? || self.eval_bool(b)?))
            }
            ExprKind::Binary(op, a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                binary(*op, x, y).map_err(at)
            }
            ExprKind::Builtin(b, args) => {
                let vals = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
                builtin(*b, vals).map_err(at)
            }
            ExprKind::Intrinsic(call) => self.eval_intrinsic(call, e.loc),
            ExprKind::Random(r) => {
                let spec = self.random_spec(r, e.loc)?;
                let chooser = self.chooser.as_deref_mut().ok_or_else(|| {
                    at(type_err("random draw in a context without a random source"))
                })?;
                sample_random(&spec, chooser).map_err(|err| at(err.into()))
            }
            ExprKind::List(items) => Ok(Value::List(
                items.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?,
            )),
            ExprKind::Record(name, fields) => {
                let fields = fields
                    .iter()
                    .map(|(n, a)| self.eval(a).map(|v| (n.clone(), v)))
                    .collect::<R<Vec<_>>>()?;
                Ok(Value::Record(RecordValue {
                    name: name.clone(),
                    fields,
                }))
            }
            ExprKind::Comprehension { var, source, body } => {
                let src = self.eval(source)?;
                let items = iter_items(src).map_err(at)?;
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    self.set_local(*var, item, None);
                    out.push(self.eval(body)?);
                }
                Ok(Value::List(out))
            }
        }
    }

    fn random_spec(&mut self, r: &RandomCall, loc: Loc) -> R<RandomSpec> {
        let at = |k: EvalErrorKind| EvalError::new(k, loc);
        let range = match &r.range {
            RangeIr::Unbounded => ValueRange::Unbounded,
            RangeIr::Interval(lo, hi) => {
                let lo = self.eval(lo)?.as_f64().ok_or_else(|| at(type_err("interval bound")))?;
                let hi = self.eval(hi)?.as_f64().ok_or_else(|| at(type_err("interval bound")))?;
                ValueRange::Interval { lo, hi }
            }
            RangeIr::Set(items) => ValueRange::Values(
                items.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?,
            ),
        };
        let mut params = Vec::new();
        for p in &r.params {
            match self.eval(p)? {
                Value::List(items) => params.extend(items),
                Value::Vector(xs) => params.extend(xs.into_iter().map(Value::Real)),
                Value::Cgrid(g) => params.extend(g.data.into_iter().map(Value::Complex)),
                v => params.push(v),
            }
        }
        let reals = |params: &[Value]| {
            params
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| at(type_err("expected real parameter"))))
                .collect::<R<Vec<f64>>>()
        };
        let dist = match r.dist {
            DistName::Flat => {
                if !params.is_empty() {
                    return Err(at(EvalErrorKind::Random("FLAT takes no parameters".into())));
                }
                Distribution::Flat
            }
            DistName::Gauss => {
                let p = reals(&params)?;
                if p.len() != 2 {
                    return Err(at(EvalErrorKind::Random(
                        "GAUSS takes (mean, sigma)".into(),
                    )));
                }
                Distribution::Gauss {
                    mean: p[0],
                    sigma: p[1],
                }
            }
            DistName::Weights => Distribution::Weights(reals(&params)?),
            DistName::Psi => Distribution::Psi(
                params
                    .iter()
                    .map(|v| v.as_complex().ok_or_else(|| at(type_err("PSI amplitude"))))
                    .collect::<R<Vec<_>>>()?,
            ),
        };
        Ok(RandomSpec::new(range, dist))
    }

    fn eval_intrinsic(&mut self, call: &IntrinsicCall, loc: Loc) -> R<Value> {
        let at = |k: EvalErrorKind| EvalError::new(k, loc);
        let def = call
            .def
            .ok_or_else(|| at(EvalErrorKind::Intrinsic(format!("unbound intrinsic `{}`", call.name))))?;
        // Lambdas run in a pure sub-context that shares this frame's locals.
        let sub = RefCell::new(Evaluator::pure(self.state, self.dt, 0));
        sub.borrow_mut().locals = self.locals.clone();
        let mut vals: Vec<Option<Value>> = Vec::with_capacity(call.args.len());
        for a in &call.args {
            vals.push(match a {
                Arg::Expr(x) => Some(self.eval(x)?),
                _ => None,
            });
        }
        let closures: Vec<Option<Box<dyn Fn(f64) -> Result<f64, EvalErrorKind> + '_>>> = call
            .args
            .iter()
            .map(|a| match a {
                Arg::Lambda { var, body } => {
                    let sub = &sub;
                    let f: Box<dyn Fn(f64) -> Result<f64, EvalErrorKind> + '_> =
                        Box::new(move |x: f64| {
                            let mut ev = sub.borrow_mut();
                            ev.set_local(*var, Value::Real(x), None);
                            let v = ev.eval(body).map_err(|e| e.kind)?;
                            v.as_f64()
                                .ok_or_else(|| type_err("lambda must return a real"))
                        });
                    Some(f)
                }
                _ => None,
            })
            .collect();
        let mut args: Vec<ArgValue<'_>> = call
            .args
            .iter()
            .zip(vals)
            .zip(&closures)
            .map(|((a, v), c)| match a {
                Arg::Expr(_) => ArgValue::Value(v.expect("evaluated")),
                Arg::Lambda { .. } => ArgValue::Func(c.as_deref().expect("closure")),
                Arg::Str(s) => ArgValue::Str(s.clone()),
            })
            .collect();
        let chooser: Option<&mut dyn Chooser> = match self.chooser {
            Some(ref mut c) => Some(&mut **c),
            None => None,
        };
        (def.eval)(&mut args, chooser, self.dt).map_err(at)
    }

    fn resolve_place(&mut self, p: &Place) -> R<ConcretePlace> {
        let mut cp = match p.root {
            PlaceRoot::Field(i) => ConcretePlace {
                field: i,
                path: Vec::new(),
            },
            PlaceRoot::Local(slot) => self.local(slot, p.loc)?.place.clone().ok_or_else(|| {
                EvalError::new(type_err("loop variable is not assignable"), p.loc)
            })?,
        };
        for el in &p.path {
            match el {
                PlaceElem::Member(m) => cp.path.push(Step::Member(m.clone())),
                PlaceElem::Index(e) => {
                    let i = self.eval(e)?;
                    let i = i.as_int().ok_or_else(|| {
                        EvalError::new(type_err("index must be an int"), e.loc)
                    })?;
                    let len = {
                        let s = self.state(p.loc)?;
                        read_path(s, &cp).map(container_len).unwrap_or(0)
                    };
                    if i < 0 || i as usize >= len {
                        return Err(EvalError::new(
                            EvalErrorKind::IndexOutOfRange { index: i, len },
                            e.loc,
                        ));
                    }
                    cp.path.push(Step::Index(i as usize));
                }
            }
        }
        Ok(cp)
    }

    /// Runs a statement block, appending writes in program order.
    pub fn exec_block(
        &mut self,
        stmts: &[Stmt],
        writes: &mut Vec<(ConcretePlace, Value, Loc)>,
    ) -> R<()> {
        for s in stmts {
            match s {
                Stmt::Assign { target, value } => {
                    let cp = self.resolve_place(target)?;
                    let v = self.eval(value)?;
                    writes.push((cp, v, target.loc));
                }
                Stmt::Let { var, value } => {
                    let v = self.eval(value)?;
                    self.set_local(*var, v, None);
                }
                Stmt::If {
                    cond,
                    then,
                    otherwise,
                } => {
                    if self.eval_bool(cond)? {
                        self.exec_block(then, writes)?;
                    } else {
                        self.exec_block(otherwise, writes)?;
                    }
                }
                Stmt::For {
                    var,
                    source,
                    body,
                    loc,
                } => {
                    let (items, base) = match source {
                        ForSource::Place(p) => {
                            let cp = self.resolve_place(p)?;
                            let s = self.state(p.loc)?;
                            let v = read_path(s, &cp)
                                .ok_or_else(|| EvalError::new(type_err("bad place"), p.loc))?
                                .clone();
                            (v, Some(cp))
                        }
                        ForSource::Expr(e) => (self.eval(e)?, None),
                    };
                    let items = iter_items(items).map_err(|k| EvalError::new(k, *loc))?;
                    for (i, item) in items.into_iter().enumerate() {
                        let place = base.as_ref().map(|b| {
                            let mut p = b.clone();
                            p.path.push(Step::Index(i));
                            p
                        });
                        self.set_local(*var, item, place);
                        self.exec_block(body, writes)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn container_len(v: &Value) -> usize {
    match v {
        Value::List(x) => x.len(),
        Value::Vector(x) => x.len(),
        Value::Cgrid(g) => g.len(),
        _ => 0,
    }
}

/// Reads the value at a place; vector and cgrid elements are materialized.
fn read_path<'s>(s: &'s SystemState, p: &ConcretePlace) -> Option<&'s Value> {
    let mut v = s.value_at(p.field);
    for step in &p.path {
        v = match (v, step) {
            (Value::Record(r), Step::Member(m)) => r.get(m)?,
            (Value::List(items), Step::Index(i)) => items.get(*i)?,
            _ => return None,
        };
    }
    Some(v)
}

fn iter_items(v: Value) -> Result<Vec<Value>, EvalErrorKind> {
    match v {
        Value::List(items) => Ok(items),
        Value::Vector(xs) => Ok(xs.into_iter().map(Value::Real).collect()),
        Value::Cgrid(g) => Ok(g.data.into_iter().map(Value::Complex).collect()),
        other => Err(type_err(format!("cannot iterate over {}", other.kind_name()))),
    }
}

/// Converts `new` to the representation of the value it replaces.
fn coerce_like(old: &Value, new: Value) -> Option<Value> {
    match (old, new) {
        (Value::Real(_), Value::Int(n)) => Some(Value::Real(n as f64)),
        (Value::Complex(_), v @ (Value::Int(_) | Value::Real(_))) => v.as_complex().map(Value::Complex),
        (Value::Vector(o), Value::List(items)) if items.len() == o.len() => items
            .iter()
            .map(Value::as_f64)
            .collect::<Option<Vec<_>>>()
            .map(Value::Vector),
        (Value::Vector(o), v @ Value::Vector(_)) if container_len(&v) == o.len() => Some(v),
        (Value::Cgrid(o), Value::List(items)) if items.len() == o.len() => items
            .iter()
            .map(Value::as_complex)
            .collect::<Option<Vec<_>>>()
            .map(|d| Value::Cgrid(CGrid::new(d, o.dx))),
        (Value::Cgrid(o), Value::Cgrid(g)) if g.len() == o.len() => Some(Value::Cgrid(CGrid::new(g.data, o.dx))),
        (Value::Record(o), Value::Record(n)) if o.name == n.name => Some(Value::Record(n)),
        (Value::List(_), v @ Value::List(_)) => Some(v),
        (o, v) if std::mem::discriminant(o) == std::mem::discriminant(&v)
            && !matches!(o, Value::Vector(_) | Value::Cgrid(_)) => Some(v),
        _ => None,
    }
}

/// Applies collected writes to `s1` in order.
pub fn apply_writes(s1: &mut SystemState, writes: Vec<(ConcretePlace, Value, Loc)>) -> R<()> {
    let schema = s1.schema().clone();
    for (place, value, loc) in writes {
        let (fname, fty) = &schema.fields()[place.field];
        let mismatch = |got: &str| {
            EvalError::new(
                type_err(format!("cannot store {got} into `{fname}` ({fty})")),
                loc,
            )
        };
        let slot = &mut s1.values_mut()[place.field];
        if place.path.is_empty() {
            let got = value.kind_name();
            *slot = schema.coerce(value, fty).ok_or_else(|| mismatch(got))?;
            continue;
        }
        let (last, prefix) = place.path.split_last().expect("non-empty");
        let mut cur: &mut Value = slot;
        for step in prefix {
            cur = match (cur, step) {
                (Value::Record(r), Step::Member(m)) => {
                    r.get_mut(m).ok_or_else(|| mismatch("member"))?
                }
                (Value::List(items), Step::Index(i)) => {
                    let len = items.len();
                    items.get_mut(*i).ok_or_else(|| {
                        EvalError::new(
                            EvalErrorKind::IndexOutOfRange {
                                index: *i as i64,
                                len,
                            },
                            loc,
                        )
                    })?
                }
                _ => return Err(mismatch("value")),
            };
        }
        let got = value.kind_name();
        match (cur, last) {
            (Value::Vector(xs), Step::Index(i)) => {
                let x = value.as_f64().ok_or_else(|| mismatch(got))?;
                let len = xs.len();
                *xs.get_mut(*i).ok_or_else(|| {
                    EvalError::new(EvalErrorKind::IndexOutOfRange { index: *i as i64, len }, loc)
                })? = x;
            }
            (Value::Cgrid(g), Step::Index(i)) => {
                let z = value.as_complex().ok_or_else(|| mismatch(got))?;
                let len = g.len();
                *g.data.get_mut(*i).ok_or_else(|| {
                    EvalError::new(EvalErrorKind::IndexOutOfRange { index: *i as i64, len }, loc)
                })? = z;
            }
            (cur, step) => {
                let target: &mut Value = match (cur, step) {
                    (Value::Record(r), Step::Member(m)) => {
                        r.get_mut(m).ok_or_else(|| mismatch("member"))?
                    }
                    (Value::List(items), Step::Index(i)) => {
                        let len = items.len();
                        items.get_mut(*i).ok_or_else(|| {
                            EvalError::new(
                                EvalErrorKind::IndexOutOfRange {
                                    index: *i as i64,
                                    len,
                                },
                                loc,
                            )
                        })?
                    }
                    _ => return Err(mismatch("value")),
                };
                *target = coerce_like(target, value).ok_or_else(|| mismatch(got))?;
            }
        }
    }
    Ok(())
}

fn member(v: &Value, name: &str) -> Result<Value, EvalErrorKind> {
    match v {
        Value::Record(r) => r
            .get(name)
            .cloned()
            .ok_or_else(|| type_err(format!("record {} has no field `{name}`", r.name))),
        other => Err(type_err(format!("{} has no members", other.kind_name()))),
    }
}

fn index(v: &Value, i: &Value) -> Result<Value, EvalErrorKind> {
    let i = i.as_int().ok_or_else(|| type_err("index must be an int"))?;
    let len = container_len(v);
    if i < 0 || i as usize >= len {
        return Err(EvalErrorKind::IndexOutOfRange { index: i, len });
    }
    let i = i as usize;
    Ok(match v {
        Value::List(items) => items[i].clone(),
        Value::Vector(xs) => Value::Real(xs[i]),
        Value::Cgrid(g) => Value::Complex(g.data[i]),
        other => return Err(type_err(format!("cannot index {}", other.kind_name()))),
    })
}

fn unary(op: UnOp, v: Value) -> Result<Value, EvalErrorKind> {
    match (op, v) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(n)) => n.checked_neg().map(Value::Int).ok_or(EvalErrorKind::Overflow),
        (UnOp::Neg, Value::Real(x)) => Ok(Value::Real(-x)),
        (UnOp::Neg, Value::Complex(z)) => Ok(Value::Complex(-z)),
        (UnOp::Neg, Value::Vector(xs)) => Ok(Value::Vector(xs.into_iter().map(|x| -x).collect())),
        (UnOp::Neg, Value::Cgrid(g)) => Ok(Value::Cgrid(CGrid::new(
            g.data.into_iter().map(|z| -z).collect(),
            g.dx,
        ))),
        (op, v) => Err(type_err(format!("cannot apply {op:?} to {}", v.kind_name()))),
    }
}

fn num_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (x, y) if x.as_f64().is_some() && y.as_f64().is_some() => x.as_f64() == y.as_f64(),
        (x, y) if x.as_complex().is_some() && y.as_complex().is_some() && x.is_scalar() && y.is_scalar() => {
            x.as_complex() == y.as_complex()
        }
        (x, y) => x == y,
    }
}

fn real_div(x: f64, y: f64) -> Result<f64, EvalErrorKind> {
    if y == 0.0 {
        Err(EvalErrorKind::DivisionByZero)
    } else {
        Ok(x / y)
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalErrorKind> {
    use Value::*;
    match op {
        BinOp::Eq => return Ok(Bool(num_eq(&a, &b))),
        BinOp::Ne => return Ok(Bool(!num_eq(&a, &b))),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = match (&a, &b) {
                (Int(x), Int(y)) => {
                    return Ok(Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    }))
                }
                _ => (
                    a.as_f64().ok_or_else(|| type_err("comparison needs numbers"))?,
                    b.as_f64().ok_or_else(|| type_err("comparison needs numbers"))?,
                ),
            };
            return Ok(Bool(match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            }));
        }
        _ => {}
    }
    match (a, b) {
        (Int(x), Int(y)) => match op {
            BinOp::Add => x.checked_add(y).map(Int).ok_or(EvalErrorKind::Overflow),
            BinOp::Sub => x.checked_sub(y).map(Int).ok_or(EvalErrorKind::Overflow),
            BinOp::Mul => x.checked_mul(y).map(Int).ok_or(EvalErrorKind::Overflow),
            BinOp::Div => real_div(x as f64, y as f64).map(Real),
            BinOp::Pow => {
                if y >= 0 {
                    u32::try_from(y)
                        .ok()
                        .and_then(|e| x.checked_pow(e))
                        .map(Int)
                        .ok_or(EvalErrorKind::Overflow)
                } else {
                    Err(EvalErrorKind::Domain(format!(
                        "integer power with negative exponent {y}"
                    )))
                }
            }
            _ => Err(type_err(format!("bad operator {}", op.symbol()))),
        },
        (Vector(x), Vector(y)) => {
            if x.len() != y.len() {
                return Err(type_err("vector length mismatch"));
            }
            let f = match op {
                BinOp::Add => |a: f64, b: f64| a + b,
                BinOp::Sub => |a: f64, b: f64| a - b,
                _ => return Err(type_err("vectors support + and - only")),
            };
            Ok(Vector(x.iter().zip(&y).map(|(a, b)| f(*a, *b)).collect()))
        }
        (Vector(x), s) | (s, Vector(x)) if s.as_f64().is_some() && matches!(op, BinOp::Mul) => {
            let k = s.as_f64().unwrap();
            Ok(Vector(x.into_iter().map(|a| a * k).collect()))
        }
        (Vector(x), s) if s.as_f64().is_some() && matches!(op, BinOp::Div) => {
            let k = s.as_f64().unwrap();
            x.into_iter()
                .map(|a| real_div(a, k))
                .collect::<Result<Vec<_>, _>>()
                .map(Vector)
        }
        (Cgrid(x), Cgrid(y)) => {
            if x.len() != y.len() {
                return Err(type_err("cgrid length mismatch"));
            }
            let data = match op {
                BinOp::Add => x.data.iter().zip(&y.data).map(|(a, b)| a + b).collect(),
                BinOp::Sub => x.data.iter().zip(&y.data).map(|(a, b)| a - b).collect(),
                _ => return Err(type_err("cgrids support + and - only")),
            };
            Ok(Cgrid(CGrid::new(data, x.dx)))
        }
        (Cgrid(g), s) | (s, Cgrid(g)) if s.is_scalar() && matches!(op, BinOp::Mul) => {
            let k = s.as_complex().ok_or_else(|| type_err("cgrid scale"))?;
            Ok(Cgrid(CGrid::new(g.data.into_iter().map(|z| z * k).collect(), g.dx)))
        }
        (Cgrid(g), s) if s.is_scalar() && matches!(op, BinOp::Div) => {
            let k = s.as_complex().ok_or_else(|| type_err("cgrid scale"))?;
            if k == Complex64::new(0.0, 0.0) {
                return Err(EvalErrorKind::DivisionByZero);
            }
            Ok(Cgrid(CGrid::new(g.data.into_iter().map(|z| z / k).collect(), g.dx)))
        }
        (x @ (Real(_) | Int(_)), y @ (Real(_) | Int(_))) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            Ok(Real(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => real_div(x, y)?,
                BinOp::Pow => x.powf(y),
                _ => return Err(type_err(format!("bad operator {}", op.symbol()))),
            }))
        }
        (x, y) if x.is_scalar() && y.is_scalar() => {
            let (x, y) = (
                x.as_complex().ok_or_else(|| type_err("expected number"))?,
                y.as_complex().ok_or_else(|| type_err("expected number"))?,
            );
            Ok(Complex(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == Complex64::new(0.0, 0.0) {
                        return Err(EvalErrorKind::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => {
                    if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() < i32::MAX as f64 {
                        x.powi(y.re as i32)
                    } else {
                        x.powc(y)
                    }
                }
                _ => return Err(type_err(format!("bad operator {}", op.symbol()))),
            }))
        }
        (x, y) => Err(type_err(format!(
            "cannot apply {} to {} and {}",
            op.symbol(),
            x.kind_name(),
            y.kind_name()
        ))),
    }
}

fn map_grid_real(g: &CGrid, f: impl Fn(Complex64) -> f64) -> Value {
    Value::List(g.data.iter().map(|z| Value::Real(f(*z))).collect())
}

fn builtin(b: Builtin, mut args: Vec<Value>) -> Result<Value, EvalErrorKind> {
    use Value::*;
    let arity = |n: usize, args: &[Value]| {
        if args.len() == n {
            Ok(())
        } else {
            Err(type_err(format!("{b:?} expects {n} argument(s)")))
        }
    };
    match b {
        Builtin::Min | Builtin::Max | Builtin::Complex => arity(2, &args)?,
        _ => arity(1, &args)?,
    }
    let a = args.remove(0);
    match (b, a) {
        (Builtin::Abs, Int(n)) => n.checked_abs().map(Int).ok_or(EvalErrorKind::Overflow),
        (Builtin::Abs, Real(x)) => Ok(Real(x.abs())),
        (Builtin::Abs, Complex(z)) => Ok(Real(z.norm())),
        (Builtin::Abs, Cgrid(g)) => Ok(map_grid_real(&g, |z| z.norm())),
        (Builtin::Abs2, Cgrid(g)) => Ok(map_grid_real(&g, |z| z.norm_sqr())),
        (Builtin::Abs2, v) => v
            .as_complex()
            .map(|z| Real(z.norm_sqr()))
            .ok_or_else(|| type_err("abs2 needs a number")),
        (Builtin::Re, Cgrid(g)) => Ok(map_grid_real(&g, |z| z.re)),
        (Builtin::Im, Cgrid(g)) => Ok(map_grid_real(&g, |z| z.im)),
        (Builtin::Conj, Cgrid(g)) => Ok(Cgrid(CGrid::new(g.data.iter().map(|z| z.conj()).collect(), g.dx))),
        (Builtin::Re, v) => v.as_complex().map(|z| Real(z.re)).ok_or_else(|| type_err("re needs a number")),
        (Builtin::Im, v) => v.as_complex().map(|z| Real(z.im)).ok_or_else(|| type_err("im needs a number")),
        (Builtin::Conj, Complex(z)) => Ok(Complex(z.conj())),
        (Builtin::Conj, v @ (Real(_) | Int(_))) => Ok(v),
        (Builtin::Exp | Builtin::Cos | Builtin::Sin | Builtin::Sqrt, Complex(z)) => Ok(Complex(match b {
            Builtin::Exp => z.exp(),
            Builtin::Cos => z.cos(),
            Builtin::Sin => z.sin(),
            _ => z.sqrt(),
        })),
        (Builtin::Exp | Builtin::Cos | Builtin::Sin | Builtin::Sqrt, v) => {
            let x = v.as_f64().ok_or_else(|| type_err("expected a number"))?;
            Ok(Real(match b {
                Builtin::Exp => x.exp(),
                Builtin::Cos => x.cos(),
                Builtin::Sin => x.sin(),
                _ => {
                    if x < 0.0 {
                        return Err(EvalErrorKind::Domain(format!("sqrt of negative {x}")));
                    }
                    x.sqrt()
                }
            }))
        }
        (Builtin::Sum(_), Vector(xs)) => Ok(Real(xs.iter().sum())),
        (Builtin::Sum(zero), List(items)) => {
            let init = match zero {
                NumKind::Int => Int(0),
                NumKind::Real => Real(0.0),
                NumKind::Complex => Complex(Complex64::new(0.0, 0.0)),
            };
            items.into_iter().try_fold(init, |acc, v| binary(BinOp::Add, acc, v))
        }
        (Builtin::Len, Pw(pw)) => Ok(Int(pw.paths.len() as i64)),
        (Builtin::Len, v) => match v {
            List(_) | Vector(_) | Cgrid(_) => Ok(Int(container_len(&v) as i64)),
            other => Err(type_err(format!("len of {}", other.kind_name()))),
        },
        (Builtin::Laplacian, Cgrid(g)) => Ok(Cgrid(crate::quantum::schrodinger::laplacian(&g))),
        (Builtin::Norm2, Cgrid(g)) => Ok(Real(g.norm2())),
        (Builtin::Normalize, Cgrid(g)) => {
            let n = g.norm2();
            if !(n > 0.0) {
                return Err(EvalErrorKind::Domain("cannot normalize a zero grid".into()));
            }
            let s = n.sqrt();
            Ok(Cgrid(CGrid::new(g.data.into_iter().map(|z| z / s).collect(), g.dx)))
        }
        (Builtin::Normalize, List(items)) => {
            let zs = items
                .iter()
                .map(Value::as_complex)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| type_err("normalize needs numbers"))?;
            let n: f64 = zs.iter().map(|z| z.norm_sqr()).sum();
            if !(n > 0.0) {
                return Err(EvalErrorKind::Domain("cannot normalize a zero list".into()));
            }
            let s = n.sqrt();
            Ok(List(zs.into_iter().map(|z| Complex(z / s)).collect()))
        }
        (Builtin::Complex, re) => {
            let im = args.remove(0);
            match (re.as_f64(), im.as_f64()) {
                (Some(x), Some(y)) => Ok(Complex(Complex64::new(x, y))),
                _ => Err(type_err("complex(re, im) needs reals")),
            }
        }
        (Builtin::Floor, v) => {
            let x = v.as_f64().ok_or_else(|| type_err("floor needs a number"))?;
            let f = x.floor();
            if f.is_finite() && f.abs() < 9.0e18 {
                Ok(Int(f as i64))
            } else {
                Err(EvalErrorKind::Overflow)
            }
        }
        (Builtin::Min | Builtin::Max, x) => {
            let y = args.remove(0);
            let pick_first = matches!(binary(BinOp::Le, x.clone(), y.clone())?, Bool(true))
                == matches!(b, Builtin::Min);
            let (p, q) = if pick_first { (x, y) } else { (y, x) };
            // Widen so min(1, 2.5) is real.
            match (&p, &q) {
                (Int(n), Real(_)) => Ok(Real(*n as f64)),
                _ => Ok(p),
            }
        }
        (Builtin::Range, Int(n)) => {
            if n < 0 {
                return Err(EvalErrorKind::Domain(format!("range({n})")));
            }
            Ok(List((0..n).map(Int).collect()))
        }
        (b, v) => Err(type_err(format!("{b:?} does not accept {}", v.kind_name()))),
    }
}
