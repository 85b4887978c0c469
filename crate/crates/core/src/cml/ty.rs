use std::fmt;

use crate::state::{TypeDesc, TypeKind};

/// Static type of a CML expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Ty {
    Real,
    Int,
    Bool,
    Complex,
    Vector(usize),
    List(Box<Ty>),
    Record(String),
    Cgrid,
    Pw(Vec<(String, Ty)>),
    /// `[]` before its element type is known.
    EmptyList,
    /// Poison for an expression that already produced a diagnostic.
    Error,
}

impl Ty {
    pub fn from_desc(desc: &TypeDesc) -> Ty {
        match &desc.kind {
            TypeKind::Real => Ty::Real,
            TypeKind::Int => Ty::Int,
            TypeKind::Bool => Ty::Bool,
            TypeKind::Complex => Ty::Complex,
            TypeKind::Vector { len } => Ty::Vector(*len),
            TypeKind::List { elem, .. } => Ty::List(Box::new(Ty::from_desc(elem))),
            TypeKind::Record { name } => Ty::Record(name.clone()),
            TypeKind::Cgrid { .. } => Ty::Cgrid,
            TypeKind::Pw { attrs } => Ty::Pw(
                attrs
                    .iter()
                    .map(|(n, t)| (n.clone(), Ty::from_desc(t)))
                    .collect(),
            ),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Ty::Int | Ty::Real)
    }

    pub fn is_scalar_number(&self) -> bool {
        matches!(self, Ty::Int | Ty::Real | Ty::Complex)
    }

    /// Whether a value of type `from` may be stored where `self` is
    /// expected. Widening (int to real to complex) and list-to-vector/cgrid
    /// conversions are allowed; lengths are checked at run time.
    pub fn accepts(&self, from: &Ty) -> bool {
        match (self, from) {
            (_, Ty::Error) | (Ty::Error, _) => true,
            (a, b) if a == b => true,
            (Ty::Real, Ty::Int) => true,
            (Ty::Complex, Ty::Int | Ty::Real) => true,
            (Ty::Vector(_), Ty::Vector(_)) => true,
            (Ty::Vector(_), Ty::List(e)) => e.is_numeric(),
            (Ty::Cgrid, Ty::List(e)) => e.is_scalar_number(),
            (Ty::List(_) | Ty::Vector(_) | Ty::Cgrid, Ty::EmptyList) => true,
            (Ty::List(a), Ty::List(b)) => a.accepts(b),
            _ => false,
        }
    }

    /// Least common type of two numeric scalars.
    pub fn join_numeric(a: &Ty, b: &Ty) -> Option<Ty> {
        match (a, b) {
            (Ty::Int, Ty::Int) => Some(Ty::Int),
            (Ty::Int | Ty::Real, Ty::Int | Ty::Real) => Some(Ty::Real),
            (x, y) if x.is_scalar_number() && y.is_scalar_number() => Some(Ty::Complex),
            _ => None,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Real => f.write_str("real"),
            Ty::Int => f.write_str("int"),
            Ty::Bool => f.write_str("bool"),
            Ty::Complex => f.write_str("complex"),
            Ty::Vector(n) => write!(f, "vector[{n}]"),
            Ty::List(e) => write!(f, "list<{e}>"),
            Ty::Record(n) => f.write_str(n),
            Ty::Cgrid => f.write_str("cgrid"),
            Ty::Pw(attrs) => {
                f.write_str("pw{")?;
                for (i, (n, t)) in attrs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}: {t}")?;
                }
                f.write_str("}")
            }
            Ty::EmptyList => f.write_str("list<?>"),
            Ty::Error => f.write_str("<error>"),
        }
    }
}
