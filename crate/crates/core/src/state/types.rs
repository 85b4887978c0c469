use std::fmt;

use serde::{Deserialize, Serialize};

use super::{StateError, Value};

/// Shape of a value slot in the system state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TypeKind {
    Real,
    Int,
    Bool,
    Complex,
    Vector {
        len: usize,
    },
    List {
        elem: Box<TypeDesc>,
        /// Length used when sampling; lists without a bound are unsampleable.
        bound: Option<usize>,
    },
    Record {
        name: String,
    },
    Cgrid {
        len: usize,
        dx: f64,
    },
    Pw {
        attrs: Vec<(String, TypeDesc)>,
    },
}

/// Value range attached to a type, used for sampling and enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Finite value set.
    Set(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDesc {
    pub kind: TypeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl TypeDesc {
    pub fn new(kind: TypeKind) -> Self {
        TypeDesc { kind, domain: None }
    }

    pub fn real() -> Self {
        Self::new(TypeKind::Real)
    }

    pub fn int() -> Self {
        Self::new(TypeKind::Int)
    }

    pub fn bool() -> Self {
        Self::new(TypeKind::Bool)
    }

    pub fn complex() -> Self {
        Self::new(TypeKind::Complex)
    }

    pub fn vector(len: usize) -> Self {
        Self::new(TypeKind::Vector { len })
    }

    pub fn list(elem: TypeDesc, bound: Option<usize>) -> Self {
        Self::new(TypeKind::List {
            elem: Box::new(elem),
            bound,
        })
    }

    pub fn record(name: impl Into<String>) -> Self {
        Self::new(TypeKind::Record { name: name.into() })
    }

    pub fn cgrid(len: usize, dx: f64) -> Self {
        Self::new(TypeKind::Cgrid { len, dx })
    }

    pub fn pw(attrs: Vec<(String, TypeDesc)>) -> Self {
        Self::new(TypeKind::Pw { attrs })
    }

    pub fn in_range(mut self, lo: f64, hi: f64) -> Self {
        self.domain = Some(Domain::Interval { lo, hi });
        self
    }

    pub fn in_set(mut self, values: Vec<Value>) -> Self {
        self.domain = Some(Domain::Set(values));
        self
    }

    /// Checks the local invariants of this type (not record resolution).
    pub fn validate(&self) -> Result<(), StateError> {
        let bad = |msg: String| Err(StateError::InvalidType(msg));
        match &self.kind {
            TypeKind::Vector { len } if *len == 0 => return bad("vector length must be >= 1".into()),
            TypeKind::Cgrid { len, dx } => {
                if *len == 0 {
                    return bad("cgrid length must be >= 1".into());
                }
                if !(*dx > 0.0 && dx.is_finite()) {
                    return bad(format!("cgrid dx must be positive, got {dx}"));
                }
            }
            TypeKind::List { elem, .. } => elem.validate()?,
            TypeKind::Pw { attrs } => {
                if attrs.is_empty() {
                    return bad("pw collection needs at least one attribute".into());
                }
                for (i, (name, ty)) in attrs.iter().enumerate() {
                    if attrs[..i].iter().any(|(n, _)| n == name) {
                        return bad(format!("duplicate pw attribute `{name}`"));
                    }
                    ty.validate()?;
                }
            }
            _ => {}
        }
        match &self.domain {
            None => Ok(()),
            Some(Domain::Interval { lo, hi }) => {
                if !matches!(
                    self.kind,
                    TypeKind::Real | TypeKind::Int | TypeKind::Vector { .. }
                ) {
                    return bad(format!("interval domain not allowed on {}", self.kind));
                }
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return bad(format!("empty or non-finite interval [{lo}, {hi}]"));
                }
                if self.kind == TypeKind::Int && lo.ceil() > hi.floor() {
                    return bad(format!("interval [{lo}, {hi}] contains no integer"));
                }
                Ok(())
            }
            Some(Domain::Set(values)) => {
                if values.is_empty() {
                    return bad("empty value set".into());
                }
                let scalar = TypeDesc::new(self.kind.clone());
                for v in values {
                    if !v.is_scalar() || !v.shallow_matches(&scalar) {
                        return bad(format!("set value {v} does not match {}", self.kind));
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeKind::Real => f.write_str("real"),
            TypeKind::Int => f.write_str("int"),
            TypeKind::Bool => f.write_str("bool"),
            TypeKind::Complex => f.write_str("complex"),
            TypeKind::Vector { len } => write!(f, "vector[{len}]"),
            TypeKind::List { elem, bound: None } => write!(f, "list<{}>", elem.kind),
            TypeKind::List {
                elem,
                bound: Some(n),
            } => write!(f, "list<{}, {n}>", elem.kind),
            TypeKind::Record { name } => f.write_str(name),
            TypeKind::Cgrid { len, dx } => write!(f, "cgrid[{len}, {dx:?}]"),
            TypeKind::Pw { attrs } => {
                f.write_str("pw{")?;
                for (i, (n, t)) in attrs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}: {}", t.kind)?;
                }
                f.write_str("}")
            }
        }
    }
}

impl fmt::Display for TypeDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}
