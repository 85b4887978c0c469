use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{TypeDesc, TypeKind};
use crate::quantum::PwCollection;

/// A record instance. Field order follows the record declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordValue {
    pub name: String,
    pub fields: Vec<(String, Value)>,
}

impl RecordValue {
    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == field).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, field: &str) -> Option<&mut Value> {
        self.fields
            .iter_mut()
            .find(|(n, _)| n == field)
            .map(|(_, v)| v)
    }
}

/// Complex amplitudes on a uniform periodic 1-D grid with spacing `dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    pub data: Vec<Complex64>,
    pub dx: f64,
}

impl CGrid {
    pub fn new(data: Vec<Complex64>, dx: f64) -> Self {
        CGrid { data, dx }
    }

    pub fn zeros(len: usize, dx: f64) -> Self {
        CGrid {
            data: vec![Complex64::new(0.0, 0.0); len],
            dx,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `sum |psi_j|^2 dx`
    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Real(f64),
    Int(i64),
    Bool(bool),
    Complex(Complex64),
    Vector(Vec<f64>),
    List(Vec<Value>),
    Record(RecordValue),
    Cgrid(CGrid),
    Pw(PwCollection),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Complex(_) => "complex",
            Value::Vector(_) => "vector",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Cgrid(_) => "cgrid",
            Value::Pw(_) => "pw",
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            Value::Real(_) | Value::Int(_) | Value::Bool(_) | Value::Complex(_)
        )
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Real(x) => Some(x),
            Value::Int(n) => Some(n as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match *self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_complex(&self) -> Option<Complex64> {
        match *self {
            Value::Complex(z) => Some(z),
            Value::Real(x) => Some(Complex64::new(x, 0.0)),
            Value::Int(n) => Some(Complex64::new(n as f64, 0.0)),
            _ => None,
        }
    }

    /// Tag-level match against a type. Record values are checked by name
    /// only; full structural checks need the schema (see
    /// [`StateSchema::value_matches`](super::StateSchema::value_matches)).
    pub fn shallow_matches(&self, ty: &TypeDesc) -> bool {
        match (self, &ty.kind) {
            (Value::Real(_), TypeKind::Real)
            | (Value::Int(_), TypeKind::Int)
            | (Value::Bool(_), TypeKind::Bool)
            | (Value::Complex(_), TypeKind::Complex) => true,
            (Value::Vector(v), TypeKind::Vector { len }) => v.len() == *len,
            (Value::List(items), TypeKind::List { elem, .. }) => {
                items.iter().all(|v| v.shallow_matches(elem))
            }
            (Value::Record(r), TypeKind::Record { name }) => &r.name == name,
            (Value::Cgrid(g), TypeKind::Cgrid { len, .. }) => g.len() == *len,
            (Value::Pw(pw), TypeKind::Pw { attrs }) => pw.matches_attrs(attrs),
            _ => false,
        }
    }

    /// Structural equality with floats compared within absolute `tol`.
    pub fn approx_eq(&self, other: &Value, tol: f64) -> bool {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= tol;
        let cclose = |a: Complex64, b: Complex64| close(a.re, b.re) && close(a.im, b.im);
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => close(*a, *b),
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Complex(a), Value::Complex(b)) => cclose(*a, *b),
            (Value::Vector(a), Value::Vector(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
            }
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, tol))
            }
            (Value::Record(a), Value::Record(b)) => {
                a.name == b.name
                    && a.fields.len() == b.fields.len()
                    && a.fields
                        .iter()
                        .zip(&b.fields)
                        .all(|((na, va), (nb, vb))| na == nb && va.approx_eq(vb, tol))
            }
            (Value::Cgrid(a), Value::Cgrid(b)) => {
                close(a.dx, b.dx)
                    && a.len() == b.len()
                    && a.data.iter().zip(&b.data).all(|(x, y)| cclose(*x, *y))
            }
            (Value::Pw(a), Value::Pw(b)) => a.approx_eq(b, tol),
            _ => false,
        }
    }
}

fn fmt_complex(z: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        write!(f, "{}-{}i", z.re, -z.im)
    } else {
        write!(f, "{}+{}i", z.re, z.im)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Complex(z) => fmt_complex(*z, f),
            Value::Vector(v) => {
                f.write_str("[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::List(items) => {
                f.write_str("[")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::Record(r) => {
                write!(f, "{} {{", r.name)?;
                for (i, (n, v)) in r.fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, " {n}: {v}")?;
                }
                f.write_str(" }")
            }
            Value::Cgrid(g) => write!(f, "cgrid[{}, {}]", g.len(), g.dx),
            Value::Pw(pw) => write!(
                f,
                "pw[{} particle(s), {} path(s)]",
                pw.particles,
                pw.paths.len()
            ),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Complex64> for Value {
    fn from(z: Complex64) -> Self {
        Value::Complex(z)
    }
}
