//! Resolved, typed expression and statement trees executed by the engine.
//!
//! Names are already resolved here: state fields are indices into the
//! schema, locals are frame slots, and constants have been inlined as
//! literals.

use crate::cml::Loc;
use crate::state::Value;

use super::intrinsic::IntrinsicDef;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Zero returned by `sum` over an empty list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumKind {
    Int,
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Abs,
    Abs2,
    Re,
    Im,
    Conj,
    Exp,
    Cos,
    Sin,
    Sqrt,
    Sum(NumKind),
    Len,
    Laplacian,
    Norm2,
    Normalize,
    Complex,
    Floor,
    Min,
    Max,
    Range,
}

impl Builtin {
    pub const NAMES: &'static [&'static str] = &[
        "abs", "abs2", "re", "im", "conj", "exp", "cos", "sin", "sqrt", "sum", "len",
        "laplacian", "norm2", "normalize", "complex", "floor", "min", "max", "range",
    ];

    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "abs" => Builtin::Abs,
            "abs2" => Builtin::Abs2,
            "re" => Builtin::Re,
            "im" => Builtin::Im,
            "conj" => Builtin::Conj,
            "exp" => Builtin::Exp,
            "cos" => Builtin::Cos,
            "sin" => Builtin::Sin,
            "sqrt" => Builtin::Sqrt,
            "sum" => Builtin::Sum(NumKind::Real),
            "len" => Builtin::Len,
            "laplacian" => Builtin::Laplacian,
            "norm2" => Builtin::Norm2,
            "normalize" => Builtin::Normalize,
            "complex" => Builtin::Complex,
            "floor" => Builtin::Floor,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "range" => Builtin::Range,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistName {
    Flat,
    Gauss,
    Weights,
    Psi,
}

impl DistName {
    pub fn from_name(name: &str) -> Option<DistName> {
        Some(match name {
            "FLAT" => DistName::Flat,
            "GAUSS" => DistName::Gauss,
            "WEIGHTS" => DistName::Weights,
            "PSI" => DistName::Psi,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DistName::Flat => "FLAT",
            DistName::Gauss => "GAUSS",
            DistName::Weights => "WEIGHTS",
            DistName::Psi => "PSI",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: Loc,
}

impl Expr {
    pub fn new(kind: ExprKind, loc: Loc) -> Self {
        Expr { kind, loc }
    }

    pub fn lit(v: Value, loc: Loc) -> Self {
        Expr::new(ExprKind::Lit(v), loc)
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Lit(_)
            | ExprKind::Field(_)
            | ExprKind::Local(_)
            | ExprKind::Dt
            | ExprKind::Time => {}
            ExprKind::Member(e, _) | ExprKind::Unary(_, e) => e.walk(f),
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Builtin(_, args) | ExprKind::List(args) => {
                args.iter().for_each(|a| a.walk(f))
            }
            ExprKind::Record(_, fields) => fields.iter().for_each(|(_, e)| e.walk(f)),
            ExprKind::Intrinsic(call) => call.args.iter().for_each(|a| match a {
                Arg::Expr(e) | Arg::Lambda { body: e, .. } => e.walk(f),
                Arg::Str(_) => {}
            }),
            ExprKind::Random(r) => {
                match &r.range {
                    RangeIr::Unbounded => {}
                    RangeIr::Interval(a, b) => {
                        a.walk(f);
                        b.walk(f);
                    }
                    RangeIr::Set(items) => items.iter().for_each(|a| a.walk(f)),
                }
                r.params.iter().for_each(|a| a.walk(f));
            }
            ExprKind::Comprehension { source, body, .. } => {
                source.walk(f);
                body.walk(f);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Lit(Value),
    Field(usize),
    Local(usize),
    Dt,
    Time,
    Member(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Builtin(Builtin, Vec<Expr>),
    Intrinsic(IntrinsicCall),
    Random(Box<RandomCall>),
    List(Vec<Expr>),
    Record(String, Vec<(String, Expr)>),
    Comprehension {
        var: usize,
        source: Box<Expr>,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone)]
pub struct IntrinsicCall {
    pub name: String,
    /// Bound during lowering.
    pub def: Option<IntrinsicDef>,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone)]
pub enum Arg {
    Expr(Expr),
    /// `|x| body` with `x` bound to local slot `var`.
    Lambda { var: usize, body: Expr },
    Str(String),
}

#[derive(Debug, Clone)]
pub struct RandomCall {
    pub range: RangeIr,
    pub dist: DistName,
    pub params: Vec<Expr>,
}

#[derive(Debug, Clone)]
pub enum RangeIr {
    Unbounded,
    Interval(Expr, Expr),
    Set(Vec<Expr>),
}

#[derive(Debug, Clone)]
pub enum PlaceRoot {
    Field(usize),
    Local(usize),
}

#[derive(Debug, Clone)]
pub enum PlaceElem {
    Member(String),
    Index(Expr),
}

/// Assignment target rooted at a state field or a writable loop variable.
#[derive(Debug, Clone)]
pub struct Place {
    pub root: PlaceRoot,
    pub path: Vec<PlaceElem>,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub enum ForSource {
    /// Iterating a state location makes the loop variable writable.
    Place(Place),
    Expr(Expr),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Assign {
        target: Place,
        value: Expr,
    },
    Let {
        var: usize,
        value: Expr,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
    },
    For {
        var: usize,
        source: ForSource,
        body: Vec<Stmt>,
        loc: Loc,
    },
}

impl Stmt {
    /// Visits every expression in the statement tree.
    pub fn walk_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        let place = |p: &Place, f: &mut dyn FnMut(&Expr)| {
            for el in &p.path {
                if let PlaceElem::Index(e) = el {
                    e.walk(f);
                }
            }
        };
        match self {
            Stmt::Assign { target, value } => {
                place(target, f);
                value.walk(f);
            }
            Stmt::Let { value, .. } => value.walk(f),
            Stmt::If {
                cond,
                then,
                otherwise,
            } => {
                cond.walk(f);
                then.iter().chain(otherwise).for_each(|s| s.walk_exprs(f));
            }
            Stmt::For { source, body, .. } => {
                match source {
                    ForSource::Place(p) => place(p, f),
                    ForSource::Expr(e) => e.walk(f),
                }
                body.iter().for_each(|s| s.walk_exprs(f));
            }
        }
    }
}

/// Mutable visit over every intrinsic call in an expression tree.
pub fn visit_intrinsics_mut(e: &mut Expr, f: &mut dyn FnMut(&mut IntrinsicCall)) {
    match &mut e.kind {
        ExprKind::Lit(_) | ExprKind::Field(_) | ExprKind::Local(_) | ExprKind::Dt | ExprKind::Time => {}
        ExprKind::Member(a, _) | ExprKind::Unary(_, a) => visit_intrinsics_mut(a, f),
        ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
            visit_intrinsics_mut(a, f);
            visit_intrinsics_mut(b, f);
        }
        ExprKind::Builtin(_, args) | ExprKind::List(args) => {
            args.iter_mut().for_each(|a| visit_intrinsics_mut(a, f))
        }
        ExprKind::Record(_, fields) => fields.iter_mut().for_each(|(_, a)| visit_intrinsics_mut(a, f)),
        ExprKind::Intrinsic(call) => {
            for a in &mut call.args {
                if let Arg::Expr(x) | Arg::Lambda { body: x, .. } = a {
                    visit_intrinsics_mut(x, f);
                }
            }
            f(call);
        }
        ExprKind::Random(r) => {
            match &mut r.range {
                RangeIr::Unbounded => {}
                RangeIr::Interval(a, b) => {
                    visit_intrinsics_mut(a, f);
                    visit_intrinsics_mut(b, f);
                }
                RangeIr::Set(items) => items.iter_mut().for_each(|a| visit_intrinsics_mut(a, f)),
            }
            r.params.iter_mut().for_each(|a| visit_intrinsics_mut(a, f));
        }
        ExprKind::Comprehension { source, body, .. } => {
            visit_intrinsics_mut(source, f);
            visit_intrinsics_mut(body, f);
        }
    }
}

pub fn visit_stmt_intrinsics_mut(s: &mut Stmt, f: &mut dyn FnMut(&mut IntrinsicCall)) {
    let place = |p: &mut Place, f: &mut dyn FnMut(&mut IntrinsicCall)| {
        for el in &mut p.path {
            if let PlaceElem::Index(e) = el {
                visit_intrinsics_mut(e, f);
            }
        }
    };
    match s {
        Stmt::Assign { target, value } => {
            place(target, f);
            visit_intrinsics_mut(value, f);
        }
        Stmt::Let { value, .. } => visit_intrinsics_mut(value, f),
        Stmt::If {
            cond,
            then,
            otherwise,
        } => {
            visit_intrinsics_mut(cond, f);
            then.iter_mut()
                .chain(otherwise.iter_mut())
                .for_each(|s| visit_stmt_intrinsics_mut(s, f));
        }
        Stmt::For { source, body, .. } => {
            match source {
                ForSource::Place(p) => place(p, f),
                ForSource::Expr(e) => visit_intrinsics_mut(e, f),
            }
            body.iter_mut().for_each(|s| visit_stmt_intrinsics_mut(s, f));
        }
    }
}
