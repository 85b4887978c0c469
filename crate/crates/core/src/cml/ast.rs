//! Surface syntax tree. Every node carries the location of its first token.

use super::diag::Loc;
use crate::engine::ir::{BinOp, UnOp};

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub loc: Loc,
}

impl Ident {
    pub fn new(name: impl Into<String>, loc: Loc) -> Self {
        Ident {
            name: name.into(),
            loc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub name: Ident,
    pub items: Vec<Item>,
}

impl ModelAst {
    pub fn laws(&self) -> impl Iterator<Item = &LawDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Law(l) => Some(l),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Const {
        name: Ident,
        ty: TypeAst,
        value: ExprAst,
    },
    /// Value supplied by the host at compile time.
    Extern {
        name: Ident,
        ty: TypeAst,
    },
    Record {
        name: Ident,
        fields: Vec<(Ident, TypeAst)>,
    },
    State {
        fields: Vec<FieldDecl>,
        time: Option<(ExprAst, ExprAst)>,
        loc: Loc,
    },
    Init {
        body: Vec<StmtAst>,
        loc: Loc,
    },
    Halt {
        cond: ExprAst,
        loc: Loc,
    },
    Timestep {
        value: ExprAst,
        loc: Loc,
    },
    Law(LawDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawDecl {
    pub name: Ident,
    pub guard: ExprAst,
    pub body: Vec<StmtAst>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: Ident,
    pub ty: TypeAst,
    pub domain: Option<DomainAst>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainAst {
    Interval(ExprAst, ExprAst),
    Set(Vec<ExprAst>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeAst {
    pub kind: TypeAstKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeAstKind {
    Real,
    Int,
    Bool,
    Complex,
    Vector(Box<ExprAst>),
    List(Box<TypeAst>, Option<Box<ExprAst>>),
    Cgrid(Box<ExprAst>, Box<ExprAst>),
    Pw(Vec<(Ident, TypeAst)>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub kind: ExprAstKind,
    pub loc: Loc,
}

impl ExprAst {
    pub fn new(kind: ExprAstKind, loc: Loc) -> Self {
        ExprAst { kind, loc }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAstKind {
    Int(i64),
    Real(f64),
    Imag(f64),
    Bool(bool),
    Str(String),
    Name(String),
    Member(Box<ExprAst>, Ident),
    Index(Box<ExprAst>, Box<ExprAst>),
    Unary(UnOp, Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Ident, Vec<ExprAst>),
    Lambda(Ident, Box<ExprAst>),
    Random {
        range: RangeAst,
        dist: Ident,
        params: Vec<ExprAst>,
    },
    List(Vec<ExprAst>),
    Record(Ident, Vec<(Ident, ExprAst)>),
    Comprehension {
        body: Box<ExprAst>,
        var: Ident,
        source: Box<ExprAst>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RangeAst {
    Unbounded,
    Interval(Box<ExprAst>, Box<ExprAst>),
    Set(Vec<ExprAst>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtAst {
    Assign {
        target: ExprAst,
        value: ExprAst,
        loc: Loc,
    },
    Let {
        name: Ident,
        value: ExprAst,
    },
    If {
        cond: ExprAst,
        then: Vec<StmtAst>,
        otherwise: Vec<StmtAst>,
        loc: Loc,
    },
    For {
        var: Ident,
        source: ExprAst,
        body: Vec<StmtAst>,
        loc: Loc,
    },
}
