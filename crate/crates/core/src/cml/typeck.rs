//! Name resolution and type checking. Produces engine IR with constants
//! inlined, fields resolved to schema indices, and locals to frame slots.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::ast::*;
use super::diag::{Diagnostic, Loc};
use super::ty::Ty;
use crate::engine::eval::Evaluator;
use crate::engine::intrinsic::{ArgTy, RecordTable, Registry};
use crate::engine::ir::*;
use crate::engine::InitBlock;
use crate::state::{Constant, StateSchema, TypeDesc, TypeKind, Value};

#[derive(Debug, Clone)]
pub struct TypedLaw {
    pub name: String,
    pub guard: Expr,
    pub transition: Vec<Stmt>,
    pub n_locals: usize,
    pub loc: Loc,
}

/// Output of [`typecheck`]: resolved IR plus the schema it refers to.
#[derive(Debug, Clone)]
pub struct TypedModel {
    pub name: String,
    pub schema: Arc<StateSchema>,
    pub laws: Vec<TypedLaw>,
    pub init: InitBlock,
    pub halt: Option<Expr>,
    pub timestep: f64,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Const,
    Init,
    Guard,
    Halt,
    Transition,
    Observable,
}

impl Ctx {
    fn reads_state(self) -> bool {
        !matches!(self, Ctx::Const | Ctx::Init)
    }

    fn may_draw(self) -> bool {
        matches!(self, Ctx::Init | Ctx::Transition)
    }

    fn describe(self) -> &'static str {
        match self {
            Ctx::Const => "a constant expression",
            Ctx::Init => "the init block",
            Ctx::Guard => "a guard",
            Ctx::Halt => "the halt condition",
            Ctx::Transition => "a transition",
            Ctx::Observable => "an observable",
        }
    }
}

#[derive(Debug, Clone)]
struct Binding {
    name: String,
    slot: usize,
    ty: Ty,
    /// Loop variable over a state location; assignments write through.
    writable: bool,
}

#[derive(Default)]
struct Frame {
    scopes: Vec<Vec<Binding>>,
    next: usize,
}

impl Frame {
    fn new() -> Self {
        Frame {
            scopes: vec![Vec::new()],
            next: 0,
        }
    }

    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.scopes.iter().rev().flat_map(|s| s.iter().rev()).find(|b| b.name == name)
    }

    fn bind(&mut self, name: &str, ty: Ty, writable: bool) -> usize {
        let slot = self.next;
        self.next += 1;
        self.scopes.last_mut().expect("scope").push(Binding {
            name: name.to_string(),
            slot,
            ty,
            writable,
        });
        slot
    }

    fn push(&mut self) {
        self.scopes.push(Vec::new());
    }

    fn pop(&mut self) {
        self.scopes.pop();
    }
}

struct Checker<'r> {
    registry: &'r Registry,
    records: RecordTable,
    consts: BTreeMap<String, (TypeDesc, Value)>,
    fields: Vec<(String, TypeDesc)>,
    /// Schema holding only records, used for value coercion.
    record_schema: StateSchema,
    /// Declarations that already failed; uses are not reported again.
    failed: Vec<String>,
    diags: Vec<Diagnostic>,
}

const RESERVED: &[&str] = &["dt", "time"];

fn poison(loc: Loc) -> (Expr, Ty) {
    (Expr::lit(Value::Bool(false), loc), Ty::Error)
}

/// Wraps `e` so its runtime value has type `to` when `from` widens to it.
fn widen(e: Expr, from: &Ty, to: &Ty) -> Expr {
    let loc = e.loc;
    match (from, to) {
        (Ty::Int, Ty::Real) => match e.kind {
            ExprKind::Lit(Value::Int(n)) => Expr::lit(Value::Real(n as f64), loc),
            _ => Expr::new(
                ExprKind::Binary(BinOp::Mul, Box::new(e), Box::new(Expr::lit(Value::Real(1.0), loc))),
                loc,
            ),
        },
        (Ty::Int | Ty::Real, Ty::Complex) => match e.kind {
            ExprKind::Lit(ref v) if v.as_f64().is_some() => {
                Expr::lit(Value::Complex(Complex64::new(v.as_f64().unwrap(), 0.0)), loc)
            }
            _ => Expr::new(
                ExprKind::Binary(
                    BinOp::Mul,
                    Box::new(e),
                    Box::new(Expr::lit(Value::Complex(Complex64::new(1.0, 0.0)), loc)),
                ),
                loc,
            ),
        },
        _ => e,
    }
}

/// Least type both sides can be stored as.
fn join(a: &Ty, b: &Ty) -> Option<Ty> {
    match (a, b) {
        (Ty::Error, t) | (t, Ty::Error) => Some(t.clone()),
        (x, y) if x == y => Some(x.clone()),
        (Ty::EmptyList, t @ (Ty::List(_) | Ty::Vector(_) | Ty::Cgrid))
        | (t @ (Ty::List(_) | Ty::Vector(_) | Ty::Cgrid), Ty::EmptyList) => Some(t.clone()),
        (Ty::List(x), Ty::List(y)) => join(x, y).map(|t| Ty::List(Box::new(t))),
        (x, y) => Ty::join_numeric(x, y),
    }
}

fn elem_ty(t: &Ty) -> Option<Ty> {
    match t {
        Ty::List(e) => Some((**e).clone()),
        Ty::Vector(_) => Some(Ty::Real),
        Ty::Cgrid => Some(Ty::Complex),
        Ty::EmptyList | Ty::Error => Some(Ty::Error),
        _ => None,
    }
}

impl<'r> Checker<'r> {
    fn err(&mut self, code: &'static str, loc: Loc, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, loc, msg));
    }

    fn has_errors(&self) -> bool {
        self.diags.iter().any(Diagnostic::is_error)
    }

    fn is_taken(&self, name: &str) -> bool {
        RESERVED.contains(&name)
            || self.consts.contains_key(name)
            || self.fields.iter().any(|(n, _)| n == name)
    }

    // ---- types --------------------------------------------------------

    fn const_number(&mut self, e: &ExprAst, want_int: bool) -> Option<f64> {
        let mut frame = Frame::new();
        let (ir, ty) = self.expr(e, Ctx::Const, &mut frame);
        if ty == Ty::Error {
            return None;
        }
        let ok = if want_int { ty == Ty::Int } else { ty.is_numeric() };
        if !ok {
            let want = if want_int { "an int" } else { "a real" };
            self.err("TypeMismatch", e.loc, format!("expected {want} constant, found {ty}"));
            return None;
        }
        match Evaluator::pure(None, 1.0, frame.next).eval(&ir) {
            Ok(v) => v.as_f64(),
            Err(err) => {
                self.err("TypeMismatch", e.loc, format!("cannot evaluate constant: {}", err.kind));
                None
            }
        }
    }

    fn const_value(&mut self, e: &ExprAst) -> Option<(Value, Ty)> {
        let mut frame = Frame::new();
        let (ir, ty) = self.expr(e, Ctx::Const, &mut frame);
        if ty == Ty::Error {
            return None;
        }
        match Evaluator::pure(None, 1.0, frame.next).eval(&ir) {
            Ok(v) => Some((v, ty)),
            Err(err) => {
                self.err("TypeMismatch", e.loc, format!("cannot evaluate constant: {}", err.kind));
                None
            }
        }
    }

    fn size(&mut self, e: &ExprAst) -> Option<usize> {
        let n = self.const_number(e, true)?;
        if n < 1.0 {
            self.err("InvalidType", e.loc, format!("size must be at least 1, got {n}"));
            return None;
        }
        Some(n as usize)
    }

    fn type_desc(&mut self, t: &TypeAst) -> Option<TypeDesc> {
        Some(match &t.kind {
            TypeAstKind::Real => TypeDesc::real(),
            TypeAstKind::Int => TypeDesc::int(),
            TypeAstKind::Bool => TypeDesc::bool(),
            TypeAstKind::Complex => TypeDesc::complex(),
            TypeAstKind::Vector(n) => TypeDesc::vector(self.size(n)?),
            TypeAstKind::Cgrid(n, dx) => {
                let n = self.size(n);
                let d = self.const_number(dx, false);
                let (n, d) = (n?, d?);
                if !(d > 0.0 && d.is_finite()) {
                    self.err("InvalidType", dx.loc, format!("cell width must be positive, got {d}"));
                    return None;
                }
                TypeDesc::cgrid(n, d)
            }
            TypeAstKind::List(e, bound) => {
                let elem = self.type_desc(e);
                let b = match bound {
                    Some(b) => Some(self.size(b)?),
                    None => None,
                };
                TypeDesc::list(elem?, b)
            }
            TypeAstKind::Pw(attrs) => {
                let mut out: Vec<(String, TypeDesc)> = Vec::new();
                for (a, at) in attrs {
                    if out.iter().any(|(n, _)| *n == a.name) {
                        self.err("DuplicateName", a.loc, format!("duplicate pw attribute `{}`", a.name));
                        continue;
                    }
                    let d = self.type_desc(at)?;
                    if !matches!(d.kind, TypeKind::Real | TypeKind::Int | TypeKind::Bool | TypeKind::Complex) {
                        self.err("InvalidType", at.loc, "pw attributes must be scalars");
                        return None;
                    }
                    out.push((a.name.clone(), d));
                }
                TypeDesc::pw(out)
            }
            TypeAstKind::Named(n) => {
                if !self.records.contains_key(n) {
                    self.err("UnknownName", t.loc, format!("unknown type `{n}`"));
                    return None;
                }
                TypeDesc::record(n.clone())
            }
        })
    }

    fn coerce_const(&mut self, v: Value, ty: &TypeDesc, loc: Loc, what: &str) -> Option<Value> {
        let got = v.kind_name();
        match self.record_schema.coerce(v, ty) {
            Some(v) => Some(v),
            None => {
                self.err(
                    "TypeMismatch",
                    loc,
                    format!("{what} has type {ty} but its value is {got}"),
                );
                None
            }
        }
    }

    // ---- expressions ----------------------------------------------------

    fn expr(&mut self, e: &ExprAst, ctx: Ctx, frame: &mut Frame) -> (Expr, Ty) {
        let loc = e.loc;
        let lit = |v: Value, t: Ty| (Expr::lit(v, loc), t);
        match &e.kind {
            ExprAstKind::Int(n) => lit(Value::Int(*n), Ty::Int),
            ExprAstKind::Real(x) => lit(Value::Real(*x), Ty::Real),
            ExprAstKind::Imag(x) => lit(Value::Complex(Complex64::new(0.0, *x)), Ty::Complex),
            ExprAstKind::Bool(b) => lit(Value::Bool(*b), Ty::Bool),
            ExprAstKind::Str(_) => {
                self.err("TypeMismatch", loc, "strings are only allowed as intrinsic arguments");
                poison(loc)
            }
            ExprAstKind::Lambda(..) => {
                self.err("TypeMismatch", loc, "functions are only allowed as intrinsic arguments");
                poison(loc)
            }
            ExprAstKind::Name(n) => self.name(n, loc, ctx, frame),
            ExprAstKind::Member(base, m) => {
                let (b, bt) = self.expr(base, ctx, frame);
                match &bt {
                    Ty::Error => poison(loc),
                    Ty::Record(r) => {
                        let ft = self.records[r].iter().find(|(f, _)| *f == m.name).map(|(_, t)| Ty::from_desc(t));
                        match ft {
                            Some(t) => (Expr::new(ExprKind::Member(Box::new(b), m.name.clone()), loc), t),
                            None => {
                                self.err("UnknownName", m.loc, format!("record `{r}` has no field `{}`", m.name));
                                poison(loc)
                            }
                        }
                    }
                    other => {
                        self.err("TypeMismatch", m.loc, format!("{other} has no fields"));
                        poison(loc)
                    }
                }
            }
            ExprAstKind::Index(base, idx) => {
                let (b, bt) = self.expr(base, ctx, frame);
                let (i, it) = self.expr(idx, ctx, frame);
                if !matches!(it, Ty::Int | Ty::Error) {
                    self.err("TypeMismatch", idx.loc, format!("index must be an int, found {it}"));
                }
                match elem_ty(&bt) {
                    Some(t) => (Expr::new(ExprKind::Index(Box::new(b), Box::new(i)), loc), t),
                    None => {
                        self.err("TypeMismatch", base.loc, format!("cannot index {bt}"));
                        poison(loc)
                    }
                }
            }
            ExprAstKind::Unary(op, a) => {
                let (x, t) = self.expr(a, ctx, frame);
                let ok = match op {
                    UnOp::Not => matches!(t, Ty::Bool | Ty::Error),
                    UnOp::Neg => t.is_scalar_number() || matches!(t, Ty::Vector(_) | Ty::Cgrid | Ty::Error),
                };
                if !ok {
                    self.err("TypeMismatch", loc, format!("cannot apply `{}` to {t}", if *op == UnOp::Not { "!" } else { "-" }));
                    return poison(loc);
                }
                (Expr::new(ExprKind::Unary(*op, Box::new(x)), loc), t)
            }
            ExprAstKind::Binary(op, a, b) => {
                let (x, xt) = self.expr(a, ctx, frame);
                let (y, yt) = self.expr(b, ctx, frame);
                match binary_ty(*op, &xt, &yt) {
                    Some(t) => (Expr::new(ExprKind::Binary(*op, Box::new(x), Box::new(y)), loc), t),
                    None => {
                        self.err(
                            "TypeMismatch",
                            loc,
                            format!("cannot apply `{}` to {xt} and {yt}", op.symbol()),
                        );
                        poison(loc)
                    }
                }
            }
            ExprAstKind::Call(f, args) => self.call(f, args, loc, ctx, frame),
            ExprAstKind::Random { range, dist, params } => self.random(range, dist, params, loc, ctx, frame),
            ExprAstKind::List(items) => {
                let mut irs = Vec::new();
                let mut tys = Vec::new();
                for it in items {
                    let (x, t) = self.expr(it, ctx, frame);
                    irs.push(x);
                    tys.push(t);
                }
                let mut acc = Ty::Error;
                let mut first = true;
                for (t, it) in tys.iter().zip(items) {
                    if first {
                        acc = t.clone();
                        first = false;
                        continue;
                    }
                    match join(&acc, t) {
                        Some(j) => acc = j,
                        None => {
                            self.err("TypeMismatch", it.loc, format!("list element of type {t} does not match {acc}"));
                            return poison(loc);
                        }
                    }
                }
                if first {
                    return (Expr::new(ExprKind::List(vec![]), loc), Ty::EmptyList);
                }
                let irs = irs.into_iter().zip(&tys).map(|(x, t)| widen(x, t, &acc)).collect();
                (Expr::new(ExprKind::List(irs), loc), Ty::List(Box::new(acc)))
            }
            ExprAstKind::Record(name, fields) => {
                let Some(decl) = self.records.get(&name.name).cloned() else {
                    self.err("UnknownName", name.loc, format!("unknown record `{}`", name.name));
                    return poison(loc);
                };
                let mut out = Vec::new();
                for (f, _) in &decl {
                    if !fields.iter().any(|(g, _)| g.name == *f) {
                        self.err("TypeMismatch", loc, format!("record literal `{}` is missing field `{f}`", name.name));
                    }
                }
                for (i, (g, _)) in fields.iter().enumerate() {
                    if fields[..i].iter().any(|(h, _)| h.name == g.name) {
                        self.err("DuplicateName", g.loc, format!("field `{}` given twice", g.name));
                    }
                    if !decl.iter().any(|(f, _)| *f == g.name) {
                        self.err("UnknownName", g.loc, format!("record `{}` has no field `{}`", name.name, g.name));
                    }
                }
                for (f, fty) in &decl {
                    if let Some((_, v)) = fields.iter().find(|(g, _)| g.name == *f) {
                        let (x, t) = self.expr(v, ctx, frame);
                        let want = Ty::from_desc(fty);
                        if !want.accepts(&t) {
                            self.err("TypeMismatch", v.loc, format!("field `{f}` expects {want}, found {t}"));
                        }
                        out.push((f.clone(), widen(x, &t, &want)));
                    }
                }
                (Expr::new(ExprKind::Record(name.name.clone(), out), loc), Ty::Record(name.name.clone()))
            }
            ExprAstKind::Comprehension { body, var, source } => {
                if matches!(ctx, Ctx::Guard | Ctx::Halt) {
                    self.err("InvalidContext", loc, format!("comprehensions are not allowed in {}", ctx.describe()));
                    return poison(loc);
                }
                let (src, st) = self.expr(source, ctx, frame);
                let Some(et) = elem_ty(&st) else {
                    self.err("TypeMismatch", source.loc, format!("cannot iterate over {st}"));
                    return poison(loc);
                };
                frame.push();
                self.check_new_local(&var.name, var.loc, frame);
                let slot = frame.bind(&var.name, et, false);
                let (b, bt) = self.expr(body, ctx, frame);
                frame.pop();
                (
                    Expr::new(
                        ExprKind::Comprehension {
                            var: slot,
                            source: Box::new(src),
                            body: Box::new(b),
                        },
                        loc,
                    ),
                    if bt == Ty::Error { Ty::Error } else { Ty::List(Box::new(bt)) },
                )
            }
        }
    }

    fn check_new_local(&mut self, name: &str, loc: Loc, frame: &Frame) {
        if self.is_taken(name) || frame.lookup(name).is_some() {
            self.err("DuplicateName", loc, format!("`{name}` is already defined"));
        }
    }

    fn name(&mut self, n: &str, loc: Loc, ctx: Ctx, frame: &Frame) -> (Expr, Ty) {
        if let Some(b) = frame.lookup(n) {
            return (Expr::new(ExprKind::Local(b.slot), loc), b.ty.clone());
        }
        match n {
            "dt" if ctx != Ctx::Const => return (Expr::new(ExprKind::Dt, loc), Ty::Real),
            "time" if ctx.reads_state() => return (Expr::new(ExprKind::Time, loc), Ty::Real),
            "dt" | "time" => {
                self.err("InvalidContext", loc, format!("`{n}` is not available in {}", ctx.describe()));
                return poison(loc);
            }
            _ => {}
        }
        if let Some((ty, v)) = self.consts.get(n) {
            return (Expr::lit(v.clone(), loc), Ty::from_desc(ty));
        }
        if let Some(i) = self.fields.iter().position(|(f, _)| f == n) {
            if !ctx.reads_state() {
                self.err(
                    "InvalidContext",
                    loc,
                    format!("state field `{n}` cannot be read in {}", ctx.describe()),
                );
                return poison(loc);
            }
            return (Expr::new(ExprKind::Field(i), loc), Ty::from_desc(&self.fields[i].1));
        }
        if !self.failed.iter().any(|f| f == n) {
            self.err("UnknownName", loc, format!("unknown name `{n}`"));
        }
        poison(loc)
    }

    fn call(&mut self, f: &Ident, args: &[ExprAst], loc: Loc, ctx: Ctx, frame: &mut Frame) -> (Expr, Ty) {
        if let Some(b) = Builtin::from_name(&f.name) {
            let mut irs = Vec::new();
            let mut tys = Vec::new();
            for a in args {
                let (x, t) = self.expr(a, ctx, frame);
                irs.push(x);
                tys.push(t);
            }
            if tys.contains(&Ty::Error) {
                return poison(loc);
            }
            return match builtin_ty(b, &tys) {
                Ok((b, t)) => (Expr::new(ExprKind::Builtin(b, irs), loc), t),
                Err(msg) => {
                    self.err("TypeMismatch", loc, format!("{}: {msg}", f.name));
                    poison(loc)
                }
            };
        }
        let Some(def) = self.registry.get(&f.name).copied() else {
            self.err("UnknownIntrinsic", f.loc, format!("unknown function `{}`", f.name));
            return poison(loc);
        };
        if def.stochastic && !ctx.may_draw() {
            let code = if matches!(ctx, Ctx::Guard | Ctx::Halt) { "RandomInGuard" } else { "InvalidContext" };
            self.err(code, loc, format!("`{}` draws randomness and is not allowed in {}", f.name, ctx.describe()));
            return poison(loc);
        }
        let mut irs = Vec::new();
        let mut tys = Vec::new();
        for a in args {
            match &a.kind {
                ExprAstKind::Lambda(v, body) => {
                    frame.push();
                    self.check_new_local(&v.name, v.loc, frame);
                    let slot = frame.bind(&v.name, Ty::Real, false);
                    // Lambda bodies run without a random source.
                    let inner = if ctx == Ctx::Const { Ctx::Const } else { Ctx::Observable };
                    let (b, t) = self.expr(body, inner, frame);
                    frame.pop();
                    irs.push(Arg::Lambda { var: slot, body: b });
                    tys.push(ArgTy::Lambda(t));
                }
                ExprAstKind::Str(s) => {
                    irs.push(Arg::Str(s.clone()));
                    tys.push(ArgTy::Str(s.clone()));
                }
                _ => {
                    let (x, t) = self.expr(a, ctx, frame);
                    irs.push(Arg::Expr(x));
                    tys.push(ArgTy::Value(t));
                }
            }
        }
        match (def.check)(&tys, &self.records) {
            Ok(t) => (
                Expr::new(
                    ExprKind::Intrinsic(IntrinsicCall {
                        name: f.name.clone(),
                        def: Some(def),
                        args: irs,
                    }),
                    loc,
                ),
                t,
            ),
            Err(msg) => {
                self.err("BadIntrinsicCall", loc, format!("{}: {msg} (signature: {})", f.name, def.signature));
                poison(loc)
            }
        }
    }

    fn random(
        &mut self,
        range: &RangeAst,
        dist: &Ident,
        params: &[ExprAst],
        loc: Loc,
        ctx: Ctx,
        frame: &mut Frame,
    ) -> (Expr, Ty) {
        if !ctx.may_draw() {
            let code = if matches!(ctx, Ctx::Guard | Ctx::Halt) { "RandomInGuard" } else { "InvalidContext" };
            self.err(code, loc, format!("`random` is not allowed in {}", ctx.describe()));
            return poison(loc);
        }
        let Some(d) = DistName::from_name(&dist.name) else {
            self.err(
                "UnknownName",
                dist.loc,
                format!("unknown distribution `{}` (expected FLAT, GAUSS, WEIGHTS or PSI)", dist.name),
            );
            return poison(loc);
        };
        let mut poisoned = false;
        let (range_ir, result, set_len) = match range {
            RangeAst::Unbounded => (RangeIr::Unbounded, Ty::Real, None),
            RangeAst::Interval(lo, hi) => {
                let (a, at) = self.expr(lo, ctx, frame);
                let (b, bt) = self.expr(hi, ctx, frame);
                for (t, e) in [(&at, lo), (&bt, hi)] {
                    if !(t.is_numeric() || *t == Ty::Error) {
                        self.err("TypeMismatch", e.loc, format!("interval bound must be a real, found {t}"));
                        poisoned = true;
                    }
                }
                (RangeIr::Interval(a, b), Ty::Real, None)
            }
            RangeAst::Set(items) => {
                let mut irs = Vec::new();
                let mut acc: Option<Ty> = None;
                let mut tys = Vec::new();
                for it in items {
                    let (x, t) = self.expr(it, ctx, frame);
                    if !(t.is_scalar_number() || matches!(t, Ty::Bool | Ty::Error)) {
                        self.err("TypeMismatch", it.loc, format!("random values must be scalars, found {t}"));
                        poisoned = true;
                    }
                    acc = match acc {
                        None => Some(t.clone()),
                        Some(a) => match join(&a, &t) {
                            Some(j) => Some(j),
                            None => {
                                self.err("TypeMismatch", it.loc, format!("value of type {t} does not match {a}"));
                                poisoned = true;
                                Some(a)
                            }
                        },
                    };
                    irs.push(x);
                    tys.push(t);
                }
                let Some(acc) = acc else {
                    self.err("TypeMismatch", loc, "random value set is empty");
                    return poison(loc);
                };
                let irs = irs.into_iter().zip(&tys).map(|(x, t)| widen(x, t, &acc)).collect();
                (RangeIr::Set(irs), acc, Some(items.len()))
            }
        };
        let mut pirs = Vec::new();
        let mut scalar_count = 0usize;
        let mut all_scalar = true;
        for p in params {
            let (x, t) = self.expr(p, ctx, frame);
            let ok = match d {
                DistName::Flat => false,
                DistName::Gauss => t.is_numeric(),
                DistName::Weights => {
                    t.is_numeric() || matches!(&t, Ty::List(e) if e.is_numeric()) || matches!(t, Ty::Vector(_))
                }
                DistName::Psi => {
                    t.is_scalar_number()
                        || matches!(&t, Ty::List(e) if e.is_scalar_number())
                        || matches!(t, Ty::Vector(_) | Ty::Cgrid)
                }
            } || t == Ty::Error;
            if !ok {
                self.err("TypeMismatch", p.loc, format!("{} does not accept a parameter of type {t}", d.name()));
                poisoned = true;
            }
            if t.is_scalar_number() {
                scalar_count += 1;
            } else {
                all_scalar = false;
            }
            pirs.push(x);
        }
        match d {
            DistName::Flat if !params.is_empty() => {
                self.err("TypeMismatch", loc, "FLAT takes no parameters");
                poisoned = true;
            }
            DistName::Gauss if params.len() != 2 => {
                self.err("TypeMismatch", loc, "GAUSS takes (mean, sigma)");
                poisoned = true;
            }
            DistName::Weights | DistName::Psi => {
                if set_len.is_none() {
                    self.err("TypeMismatch", loc, format!("{} needs a finite value set `{{...}}`", d.name()));
                    poisoned = true;
                } else if all_scalar && Some(scalar_count) != set_len {
                    self.err(
                        "TypeMismatch",
                        loc,
                        format!("{} has {scalar_count} entries for {} values", d.name(), set_len.unwrap_or(0)),
                    );
                    poisoned = true;
                }
            }
            DistName::Flat if matches!(range, RangeAst::Unbounded) => {
                self.err("TypeMismatch", loc, "FLAT needs a value range");
                poisoned = true;
            }
            _ => {}
        }
        if poisoned {
            return poison(loc);
        }
        (
            Expr::new(
                ExprKind::Random(Box::new(RandomCall {
                    range: range_ir,
                    dist: d,
                    params: pirs,
                })),
                loc,
            ),
            result,
        )
    }

    // ---- statements -------------------------------------------------------

    /// Resolves an assignment target. Returns the place and its type.
    fn place(&mut self, e: &ExprAst, ctx: Ctx, frame: &mut Frame) -> Option<(Place, Ty)> {
        match &e.kind {
            ExprAstKind::Name(n) => {
                if let Some(b) = frame.lookup(n).cloned() {
                    if b.writable {
                        return Some((
                            Place {
                                root: PlaceRoot::Local(b.slot),
                                path: vec![],
                                loc: e.loc,
                            },
                            b.ty,
                        ));
                    }
                    self.err("NotAssignable", e.loc, format!("`{n}` is a local value and cannot be assigned"));
                    return None;
                }
                if self.consts.contains_key(n) {
                    self.err("AssignToConstant", e.loc, format!("cannot assign to constant `{n}`"));
                    return None;
                }
                if RESERVED.contains(&n.as_str()) {
                    self.err("NotAssignable", e.loc, format!("`{n}` cannot be assigned"));
                    return None;
                }
                match self.fields.iter().position(|(f, _)| f == n) {
                    Some(i) => Some((
                        Place {
                            root: PlaceRoot::Field(i),
                            path: vec![],
                            loc: e.loc,
                        },
                        Ty::from_desc(&self.fields[i].1),
                    )),
                    None => {
                        if !self.failed.iter().any(|f| f == n) {
                            self.err("UnknownName", e.loc, format!("unknown name `{n}`"));
                        }
                        None
                    }
                }
            }
            ExprAstKind::Member(base, m) => {
                let (mut p, t) = self.place(base, ctx, frame)?;
                match &t {
                    Ty::Record(r) => {
                        let ft = self.records[r].iter().find(|(f, _)| *f == m.name).map(|(_, t)| Ty::from_desc(t));
                        match ft {
                            Some(ft) => {
                                p.path.push(PlaceElem::Member(m.name.clone()));
                                Some((p, ft))
                            }
                            None => {
                                self.err("UnknownName", m.loc, format!("record `{r}` has no field `{}`", m.name));
                                None
                            }
                        }
                    }
                    other => {
                        self.err("TypeMismatch", m.loc, format!("{other} has no fields"));
                        None
                    }
                }
            }
            ExprAstKind::Index(base, idx) => {
                let (mut p, t) = self.place(base, ctx, frame)?;
                let (i, it) = self.expr(idx, ctx, frame);
                if !matches!(it, Ty::Int | Ty::Error) {
                    self.err("TypeMismatch", idx.loc, format!("index must be an int, found {it}"));
                }
                match elem_ty(&t) {
                    Some(et) => {
                        p.path.push(PlaceElem::Index(i));
                        Some((p, et))
                    }
                    None => {
                        self.err("TypeMismatch", base.loc, format!("cannot index {t}"));
                        None
                    }
                }
            }
            _ => {
                self.err("NotAssignable", e.loc, "only state fields, their members, and elements can be assigned");
                None
            }
        }
    }

    fn block(&mut self, stmts: &[StmtAst], ctx: Ctx, frame: &mut Frame, assigned: &mut Vec<usize>) -> Vec<Stmt> {
        frame.push();
        let out = stmts.iter().filter_map(|s| self.stmt(s, ctx, frame, assigned)).collect();
        frame.pop();
        out
    }

    fn stmt(&mut self, s: &StmtAst, ctx: Ctx, frame: &mut Frame, assigned: &mut Vec<usize>) -> Option<Stmt> {
        match s {
            StmtAst::Assign { target, value, .. } => {
                let placed = self.place(target, ctx, frame);
                let (v, vt) = self.expr(value, ctx, frame);
                let (p, pt) = placed?;
                if !pt.accepts(&vt) {
                    self.err("TypeMismatch", value.loc, format!("cannot assign {vt} to a location of type {pt}"));
                    return None;
                }
                if let (PlaceRoot::Field(i), true) = (&p.root, p.path.is_empty()) {
                    assigned.push(*i);
                }
                Some(Stmt::Assign {
                    target: p,
                    value: widen(v, &vt, &pt),
                })
            }
            StmtAst::Let { name, value } => {
                let (v, t) = self.expr(value, ctx, frame);
                self.check_new_local(&name.name, name.loc, frame);
                let var = frame.bind(&name.name, t, false);
                Some(Stmt::Let { var, value: v })
            }
            StmtAst::If { cond, then, otherwise, .. } => {
                let (c, ct) = self.expr(cond, ctx, frame);
                if !matches!(ct, Ty::Bool | Ty::Error) {
                    self.err("TypeMismatch", cond.loc, format!("condition must be bool, found {ct}"));
                }
                let then = self.block(then, ctx, frame, assigned);
                let otherwise = self.block(otherwise, ctx, frame, assigned);
                Some(Stmt::If { cond: c, then, otherwise })
            }
            StmtAst::For { var, source, body, loc } => {
                let n_diag = self.diags.len();
                let as_place = if ctx == Ctx::Transition && is_place_syntax(source, frame) {
                    self.place(source, ctx, frame)
                } else {
                    None
                };
                let (src, st, writable) = match as_place {
                    Some((p, t)) => (ForSource::Place(p), t, true),
                    None => {
                        self.diags.truncate(n_diag);
                        let (x, t) = self.expr(source, ctx, frame);
                        (ForSource::Expr(x), t, false)
                    }
                };
                let Some(et) = elem_ty(&st) else {
                    self.err("TypeMismatch", source.loc, format!("cannot iterate over {st}"));
                    return None;
                };
                frame.push();
                self.check_new_local(&var.name, var.loc, frame);
                let slot = frame.bind(&var.name, et, writable);
                let body = self.block(body, ctx, frame, assigned);
                frame.pop();
                Some(Stmt::For {
                    var: slot,
                    source: src,
                    body,
                    loc: *loc,
                })
            }
        }
    }
}

/// Whether `e` names a state location (`field`, `field.m`, `field[i]`, or a
/// writable loop variable).
fn is_place_syntax(e: &ExprAst, frame: &Frame) -> bool {
    match &e.kind {
        ExprAstKind::Name(n) => frame.lookup(n).map_or(true, |b| b.writable),
        ExprAstKind::Member(b, _) | ExprAstKind::Index(b, _) => is_place_syntax(b, frame),
        _ => false,
    }
}

fn binary_ty(op: BinOp, a: &Ty, b: &Ty) -> Option<Ty> {
    use Ty::*;
    if *a == Error || *b == Error {
        return Some(match op {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => Bool,
            _ => Error,
        });
    }
    match op {
        BinOp::And | BinOp::Or => (*a == Bool && *b == Bool).then_some(Bool),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => (a.is_numeric() && b.is_numeric()).then_some(Bool),
        BinOp::Eq | BinOp::Ne => join(a, b).map(|_| Bool),
        BinOp::Add | BinOp::Sub => match (a, b) {
            (Vector(n), Vector(m)) if n == m => Some(Vector(*n)),
            (Cgrid, Cgrid) => Some(Cgrid),
            _ => Ty::join_numeric(a, b),
        },
        BinOp::Mul => match (a, b) {
            (Vector(n), s) | (s, Vector(n)) if s.is_numeric() => Some(Vector(*n)),
            (Cgrid, s) | (s, Cgrid) if s.is_scalar_number() => Some(Cgrid),
            _ => Ty::join_numeric(a, b),
        },
        BinOp::Div => match (a, b) {
            (Vector(n), s) if s.is_numeric() => Some(Vector(*n)),
            (Cgrid, s) if s.is_scalar_number() => Some(Cgrid),
            (Int, Int) => Some(Real),
            _ => Ty::join_numeric(a, b),
        },
        BinOp::Pow => Ty::join_numeric(a, b),
    }
}

fn builtin_ty(b: Builtin, args: &[Ty]) -> Result<(Builtin, Ty), String> {
    use Ty::*;
    let want = match b {
        Builtin::Min | Builtin::Max | Builtin::Complex => 2,
        _ => 1,
    };
    if args.len() != want {
        return Err(format!("expects {want} argument(s), got {}", args.len()));
    }
    let a = &args[0];
    let bad = || Err(format!("does not accept {a}"));
    let t = match b {
        Builtin::Abs => match a {
            Int => Int,
            Real | Complex => Real,
            Cgrid => List(Box::new(Real)),
            _ => return bad(),
        },
        Builtin::Abs2 | Builtin::Re | Builtin::Im => match a {
            Int | Real | Complex => Real,
            Cgrid => List(Box::new(Real)),
            _ => return bad(),
        },
        Builtin::Conj => match a {
            Int | Real | Complex | Cgrid => a.clone(),
            _ => return bad(),
        },
        Builtin::Exp | Builtin::Cos | Builtin::Sin | Builtin::Sqrt => match a {
            Int | Real => Real,
            Complex => Complex,
            _ => return bad(),
        },
        Builtin::Sum(_) => {
            let (kind, t) = match a {
                Vector(_) | EmptyList => (NumKind::Real, Real),
                List(e) => match e.as_ref() {
                    Int => (NumKind::Int, Int),
                    Real => (NumKind::Real, Real),
                    Complex => (NumKind::Complex, Complex),
                    _ => return bad(),
                },
                _ => return bad(),
            };
            return Ok((Builtin::Sum(kind), t));
        }
        Builtin::Len => match a {
            List(_) | Vector(_) | Cgrid | Pw(_) | EmptyList => Int,
            _ => return bad(),
        },
        Builtin::Laplacian => match a {
            Cgrid => Cgrid,
            _ => return bad(),
        },
        Builtin::Norm2 => match a {
            Cgrid => Real,
            _ => return bad(),
        },
        Builtin::Normalize => match a {
            Cgrid => Cgrid,
            List(e) if e.is_scalar_number() => List(Box::new(Complex)),
            _ => return bad(),
        },
        Builtin::Complex => {
            if a.is_numeric() && args[1].is_numeric() {
                Complex
            } else {
                return Err("expects two reals".into());
            }
        }
        Builtin::Floor => match a {
            Int | Real => Int,
            _ => return bad(),
        },
        Builtin::Min | Builtin::Max => {
            if a.is_numeric() && args[1].is_numeric() {
                Ty::join_numeric(a, &args[1]).expect("numeric")
            } else {
                return Err("expects two numbers".into());
            }
        }
        Builtin::Range => match a {
            Int => List(Box::new(Int)),
            _ => return bad(),
        },
    };
    Ok((b, t))
}

/// Resolves and checks a parsed model. `externs` supplies values for
/// `extern const` declarations.
pub fn typecheck(
    ast: &ModelAst,
    externs: &BTreeMap<String, Value>,
    registry: &Registry,
) -> Result<TypedModel, Vec<Diagnostic>> {
    let mut ck = Checker {
        registry,
        records: RecordTable::new(),
        consts: BTreeMap::new(),
        fields: Vec::new(),
        record_schema: StateSchema::builder().build().expect("empty schema"),
        failed: Vec::new(),
        diags: Vec::new(),
    };

    // Records first; their field types may only use literal sizes.
    let mut record_names: Vec<&Ident> = Vec::new();
    for item in &ast.items {
        if let Item::Record { name, .. } = item {
            if record_names.iter().any(|r| r.name == name.name) {
                ck.err("DuplicateName", name.loc, format!("record `{}` is declared twice", name.name));
            } else {
                record_names.push(name);
            }
            ck.records.insert(name.name.clone(), Vec::new());
        }
    }
    for item in &ast.items {
        if let Item::Record { name, fields } = item {
            let mut decl: Vec<(String, TypeDesc)> = Vec::new();
            for (f, t) in fields {
                if decl.iter().any(|(g, _)| *g == f.name) {
                    ck.err("DuplicateName", f.loc, format!("field `{}` is declared twice", f.name));
                    continue;
                }
                if let Some(d) = ck.type_desc(t) {
                    decl.push((f.name.clone(), d));
                }
            }
            ck.records.insert(name.name.clone(), decl);
        }
    }
    let mut rb = StateSchema::builder();
    for (n, fs) in &ck.records {
        rb = rb.record(n.clone(), fs.clone());
    }
    match rb.build() {
        Ok(s) => ck.record_schema = s,
        Err(e) => {
            let loc = record_names.first().map_or(ast.name.loc, |r| r.loc);
            ck.err("InvalidType", loc, e.to_string());
            return Err(ck.diags);
        }
    }

    // Constants and externs in declaration order.
    let mut constants = Vec::new();
    for item in &ast.items {
        let (name, ty, value) = match item {
            Item::Const { name, ty, value } => (name, ty, Some(value)),
            Item::Extern { name, ty } => (name, ty, None),
            _ => continue,
        };
        if ck.is_taken(&name.name) {
            ck.err("DuplicateName", name.loc, format!("`{}` is already defined", name.name));
            continue;
        }
        ck.failed.push(name.name.clone());
        let Some(desc) = ck.type_desc(ty) else { continue };
        let v = match value {
            Some(e) => match ck.const_value(e) {
                Some((v, _)) => v,
                None => continue,
            },
            None => match externs.get(&name.name) {
                Some(v) => v.clone(),
                None => {
                    ck.err(
                        "MissingExtern",
                        name.loc,
                        format!("no value supplied for extern constant `{}`", name.name),
                    );
                    continue;
                }
            },
        };
        let Some(v) = ck.coerce_const(v, &desc, name.loc, &format!("constant `{}`", name.name)) else {
            continue;
        };
        ck.failed.pop();
        ck.consts.insert(name.name.clone(), (desc.clone(), v.clone()));
        constants.push(Constant {
            name: name.name.clone(),
            ty: desc,
            value: v,
        });
    }

    // State.
    let mut time_domain = None;
    let mut state_seen = false;
    for item in &ast.items {
        let Item::State { fields, time, loc } = item else { continue };
        if state_seen {
            ck.err("DuplicateName", *loc, "the state is declared twice");
            continue;
        }
        state_seen = true;
        for f in fields {
            if ck.is_taken(&f.name.name) {
                ck.err("DuplicateName", f.name.loc, format!("`{}` is already defined", f.name.name));
                continue;
            }
            let Some(mut desc) = ck.type_desc(&f.ty) else {
                ck.failed.push(f.name.name.clone());
                continue;
            };
            match &f.domain {
                None => {}
                Some(DomainAst::Interval(lo, hi)) => {
                    let (a, b) = (ck.const_number(lo, false), ck.const_number(hi, false));
                    if let (Some(a), Some(b)) = (a, b) {
                        desc = desc.in_range(a, b);
                    }
                }
                Some(DomainAst::Set(items)) => {
                    let mut vals = Vec::new();
                    for it in items {
                        if let Some((v, _)) = ck.const_value(it) {
                            if let Some(v) = ck.coerce_const(v, &TypeDesc::new(desc.kind.clone()), it.loc, "domain value") {
                                vals.push(v);
                            }
                        }
                    }
                    desc = desc.in_set(vals);
                }
            }
            if let Err(e) = desc.validate() {
                ck.err("InvalidType", f.name.loc, e.to_string());
                ck.failed.push(f.name.name.clone());
                continue;
            }
            ck.fields.push((f.name.name.clone(), desc));
        }
        if let Some((lo, hi)) = time {
            let (a, b) = (ck.const_number(lo, false), ck.const_number(hi, false));
            if let (Some(a), Some(b)) = (a, b) {
                time_domain = Some((a, b));
            }
        }
    }

    let mut sb = StateSchema::builder();
    for (n, fs) in &ck.records {
        sb = sb.record(n.clone(), fs.clone());
    }
    for (n, t) in &ck.fields {
        sb = sb.field(n.clone(), t.clone());
    }
    for c in &constants {
        sb = sb.constant(c.name.clone(), c.ty.clone(), c.value.clone());
    }
    if let Some((lo, hi)) = time_domain {
        sb = sb.time_domain(lo, hi);
    }
    let schema = match sb.build() {
        Ok(s) => Arc::new(s),
        Err(e) => {
            ck.err("InvalidType", ast.name.loc, e.to_string());
            return Err(ck.diags);
        }
    };

    // Timestep.
    let mut timestep = None;
    for item in &ast.items {
        if let Item::Timestep { value, loc } = item {
            if timestep.is_some() {
                ck.err("DuplicateName", *loc, "timestep is declared twice");
                continue;
            }
            if let Some(x) = ck.const_number(value, false) {
                if !(x > 0.0 && x.is_finite()) {
                    ck.err("InvalidType", value.loc, format!("timestep must be positive, got {x}"));
                }
                timestep = Some(x);
            }
        }
    }

    // Init.
    let mut init = None;
    for item in &ast.items {
        if let Item::Init { body, loc } = item {
            if init.is_some() {
                ck.err("DuplicateName", *loc, "init is declared twice");
                continue;
            }
            let mut frame = Frame::new();
            let mut assigned = Vec::new();
            let stmts = ck.block(body, Ctx::Init, &mut frame, &mut assigned);
            let missing: Vec<&str> = ck
                .fields
                .iter()
                .enumerate()
                .filter(|(i, _)| !assigned.contains(i))
                .map(|(_, (n, _))| n.as_str())
                .collect();
            if !missing.is_empty() {
                ck.err(
                    "MissingInit",
                    *loc,
                    format!("init does not assign {}", missing.iter().map(|m| format!("`{m}`")).collect::<Vec<_>>().join(", ")),
                );
            }
            init = Some(InitBlock {
                stmts,
                n_locals: frame.next,
            });
        }
    }
    if init.is_none() && !ck.fields.is_empty() {
        ck.err("MissingInit", ast.name.loc, "model has no init block");
    }

    // Halt.
    let mut halt = None;
    for item in &ast.items {
        if let Item::Halt { cond, loc } = item {
            if halt.is_some() {
                ck.err("DuplicateName", *loc, "halt is declared twice");
                continue;
            }
            let mut frame = Frame::new();
            let (h, t) = ck.expr(cond, Ctx::Halt, &mut frame);
            if !matches!(t, Ty::Bool | Ty::Error) {
                ck.err("TypeMismatch", cond.loc, format!("halt condition must be bool, found {t}"));
            }
            halt = Some(h);
        }
    }

    // Laws.
    let mut laws: Vec<TypedLaw> = Vec::new();
    for l in ast.laws() {
        if laws.iter().any(|m| m.name == l.name.name) {
            ck.err("DuplicateName", l.name.loc, format!("law `{}` is declared twice", l.name.name));
            continue;
        }
        let mut frame = Frame::new();
        let errors_before = ck.diags.iter().filter(|d| d.is_error()).count();
        let (g, gt) = ck.expr(&l.guard, Ctx::Guard, &mut frame);
        let guard_ok = ck.diags.iter().filter(|d| d.is_error()).count() == errors_before;
        if !matches!(gt, Ty::Bool | Ty::Error) {
            ck.err("TypeMismatch", l.guard.loc, format!("guard must be bool, found {gt}"));
        }
        if guard_ok && matches!(crate::engine::const_fold(&g), Some(Value::Bool(false))) {
            ck.diags.push(Diagnostic::warning(
                "DeadLaw",
                l.guard.loc,
                format!("guard of law `{}` is always false", l.name.name),
            ));
        }
        let transition = ck.block(&l.body, Ctx::Transition, &mut frame, &mut Vec::new());
        laws.push(TypedLaw {
            name: l.name.name.clone(),
            guard: g,
            transition,
            n_locals: frame.next,
            loc: l.name.loc,
        });
    }
    if laws.is_empty() {
        ck.err("MissingLaw", ast.name.loc, "a model needs at least one law");
    }

    if ck.has_errors() {
        return Err(ck.diags);
    }
    Ok(TypedModel {
        name: ast.name.name.clone(),
        schema,
        laws,
        init: init.unwrap_or_default(),
        halt,
        timestep: timestep.unwrap_or(1.0),
        warnings: ck.diags,
    })
}

/// Checks a standalone pure expression against an existing schema.
/// Returns the IR, its type, and the number of local slots it needs.
pub fn check_observable(
    schema: &StateSchema,
    registry: &Registry,
    e: &ExprAst,
) -> Result<(Expr, Ty, usize), Vec<Diagnostic>> {
    let record_schema = {
        let mut b = StateSchema::builder();
        for (n, fs) in schema.records() {
            b = b.record(n.clone(), fs.clone());
        }
        b.build().map_err(|err| vec![Diagnostic::error("InvalidType", e.loc, err.to_string())])?
    };
    let mut ck = Checker {
        registry,
        records: schema.records().clone(),
        consts: schema
            .constants()
            .iter()
            .map(|c| (c.name.clone(), (c.ty.clone(), c.value.clone())))
            .collect(),
        fields: schema.fields().to_vec(),
        record_schema,
        failed: Vec::new(),
        diags: Vec::new(),
    };
    let mut frame = Frame::new();
    let (x, t) = ck.expr(e, Ctx::Observable, &mut frame);
    if ck.has_errors() {
        return Err(ck.diags);
    }
    Ok((x, t, frame.next))
}

#[cfg(test)]
mod tests {
    use super::super::compile;
    use super::*;

    fn codes(src: &str) -> Vec<&'static str> {
        match compile(src) {
            Ok(_) => vec![],
            Err(d) => d.iter().filter(|d| d.is_error()).map(|d| d.code).collect(),
        }
    }

    fn wrap(body: &str) -> String {
        format!("model M {{ state {{ x: real in [0, 1]; n: int; }} init {{ x = 0.0; n = 0; }} {body} }}")
    }

    #[test]
    fn well_typed_model_compiles() {
        let src = wrap("law L { when x < 1.0 && n >= 0; then { x = x + dt; n = n + 1; } }");
        assert_eq!(codes(&src), Vec::<&str>::new());
    }

    #[test]
    fn unknown_name_is_located() {
        let src = wrap("law L { when y > 0; then { x = 1; } }");
        let d = compile(&src).unwrap_err();
        assert_eq!(d[0].code, "UnknownName");
        assert_eq!(d[0].loc.col as usize, src.find("y >").unwrap() + 1);
    }

    #[test]
    fn random_in_guard_is_rejected() {
        assert_eq!(
            codes(&wrap("law L { when random([0, 1], FLAT) < 0.5; then { x = 1; } }")),
            vec!["RandomInGuard"]
        );
    }

    #[test]
    fn assignment_errors() {
        let src = "model M { const C: int = 1; state { n: int; } init { n = 0; } \
                   law L { when true; then { C = 2; } } }";
        assert_eq!(codes(src), vec!["AssignToConstant"]);
        assert_eq!(codes(&wrap("law L { when true; then { x = true; } }")), vec!["TypeMismatch"]);
        assert_eq!(codes(&wrap("law L { when true; then { let y = 1; y = 2; } }")), vec!["NotAssignable"]);
        assert_eq!(codes(&wrap("law L { when true; then { n = x; } }")), vec!["TypeMismatch"]);
    }

    #[test]
    fn guard_must_be_bool() {
        assert_eq!(codes(&wrap("law L { when x; then { x = 1; } }")), vec!["TypeMismatch"]);
    }

    #[test]
    fn missing_init_and_laws() {
        let src = "model M { state { n: int; m: int; } init { n = 0; } law L { when true; then { n = 1; } } }";
        assert_eq!(codes(src), vec!["MissingInit"]);
        let src = "model M { state { n: int; } init { n = 0; } }";
        assert_eq!(codes(src), vec!["MissingLaw"]);
    }

    #[test]
    fn duplicates() {
        assert_eq!(
            codes(&wrap("law L { when true; then { x = 1; } } law L { when true; then { x = 1; } }")),
            vec!["DuplicateName"]
        );
        assert_eq!(codes(&wrap("law L { when true; then { let x = 1; } }")), vec!["DuplicateName"]);
    }

    #[test]
    fn init_cannot_read_state() {
        let src = "model M { state { n: int; } init { n = n + 1; } law L { when true; then { n = 1; } } }";
        assert_eq!(codes(src), vec!["InvalidContext"]);
    }

    #[test]
    fn intrinsic_calls_are_checked() {
        assert_eq!(codes(&wrap("law L { when true; then { x = nosuch(x); } }")), vec!["UnknownIntrinsic"]);
        assert_eq!(
            codes(&wrap("law L { when true; then { n = pw_detect(x, [0.0, 1.0], true); } }")),
            vec!["BadIntrinsicCall"]
        );
    }

    #[test]
    fn missing_extern_is_reported() {
        let src = "model M { extern const E: int; state { n: int; } init { n = E; } law L { when true; then { n = 1; } } }";
        assert_eq!(codes(src), vec!["MissingExtern"]);
        let mut ext = BTreeMap::new();
        ext.insert("E".to_string(), Value::Int(4));
        let c = super::super::compile_with(src, &ext, crate::quantum::intrinsics::standard()).unwrap();
        let s = c.model.init_state(&mut crate::rng::RngStream::new(0)).unwrap();
        assert_eq!(s.get("n"), Some(&Value::Int(4)));
    }

    #[test]
    fn false_guard_warns() {
        let c = compile(&wrap("law L { when 1 > 2; then { x = 1; } } law K { when true; then { x = 0; } }")).unwrap();
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(c.warnings[0].code, "DeadLaw");
    }

    #[test]
    fn int_literals_widen_into_reals() {
        let c = compile(&wrap("law L { when true; then { x = 1; } }")).unwrap();
        let s0 = c.model.init_state(&mut crate::rng::RngStream::new(0)).unwrap();
        let s1 = crate::engine::step(&c.model, &s0, 1.0, Default::default(), &mut crate::rng::RngStream::new(0)).unwrap();
        assert_eq!(s1.get("x"), Some(&Value::Real(1.0)));
    }

    #[test]
    fn writable_loop_variables_update_the_state() {
        let src = "model M { record P { x: real; } state { ps: list<P, 2>; } \
                   init { ps = [P { x: 1.0 }, P { x: 2.0 }]; } \
                   law L { when true; then { for p in ps { p.x = p.x * 10.0; } } } }";
        let c = compile(src).unwrap();
        let s0 = c.model.init_state(&mut crate::rng::RngStream::new(0)).unwrap();
        let s1 = crate::engine::step(&c.model, &s0, 1.0, Default::default(), &mut crate::rng::RngStream::new(0)).unwrap();
        let xs: Vec<f64> = match s1.get("ps").unwrap() {
            Value::List(items) => items
                .iter()
                .map(|v| match v {
                    Value::Record(r) => r.get("x").unwrap().as_f64().unwrap(),
                    _ => panic!(),
                })
                .collect(),
            _ => panic!(),
        };
        assert_eq!(xs, vec![10.0, 20.0]);
    }

    #[test]
    fn observables_check_against_a_schema() {
        let c = compile(&wrap("law L { when true; then { x = 1; } }")).unwrap();
        let reg = crate::quantum::intrinsics::standard();
        let e = super::super::parse_expr("x * 2 + n").unwrap();
        let (_, t, _) = check_observable(&c.model.schema, reg, &e).unwrap();
        assert_eq!(t, Ty::Real);
        let e = super::super::parse_expr("random([0, 1], FLAT)").unwrap();
        assert!(check_observable(&c.model.schema, reg, &e).is_err());
    }
}
