//! Host-provided functions callable from CML.
//!
//! Intrinsics refine the "complex functions" a model names in its laws.
//! Each one declares whether it consumes randomness; that flag feeds the
//! determinism classification.

use std::collections::BTreeMap;
use std::fmt;

use super::eval::EvalErrorKind;
use super::random::Chooser;
use crate::cml::Ty;
use crate::state::{TypeDesc, Value};

/// Record declarations visible to signature checks.
pub type RecordTable = BTreeMap<String, Vec<(String, TypeDesc)>>;

/// Static argument shape seen by an intrinsic's signature check.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgTy {
    Value(Ty),
    /// `|x| body` where `x: real` and the body has the given type.
    Lambda(Ty),
    Str(String),
}

/// Runtime argument.
pub enum ArgValue<'a> {
    Value(Value),
    Func(&'a dyn Fn(f64) -> Result<f64, EvalErrorKind>),
    Str(String),
}

impl fmt::Debug for ArgValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Value(v) => write!(f, "Value({v})"),
            ArgValue::Func(_) => f.write_str("Func(..)"),
            ArgValue::Str(s) => write!(f, "Str({s:?})"),
        }
    }
}

pub type CheckFn = fn(&[ArgTy], &RecordTable) -> Result<Ty, String>;
pub type EvalFn =
    fn(&mut [ArgValue<'_>], Option<&mut dyn Chooser>, f64) -> Result<Value, EvalErrorKind>;

#[derive(Clone, Copy)]
pub struct IntrinsicDef {
    pub name: &'static str,
    /// Draws from the model's random source.
    pub stochastic: bool,
    pub signature: &'static str,
    pub check: CheckFn,
    /// Receives the arguments, the random source (absent in pure contexts),
    /// and the current `dt`.
    pub eval: EvalFn,
}

impl fmt::Debug for IntrinsicDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntrinsicDef")
            .field("name", &self.name)
            .field("stochastic", &self.stochastic)
            .finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    defs: Vec<IntrinsicDef>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    pub fn register(&mut self, def: IntrinsicDef) {
        self.defs.retain(|d| d.name != def.name);
        self.defs.push(def);
    }

    pub fn get(&self, name: &str) -> Option<&IntrinsicDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IntrinsicDef> {
        self.defs.iter()
    }
}
