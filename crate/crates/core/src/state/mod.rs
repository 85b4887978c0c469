//! Typed value universe, state schemas, and system states.
//!
//! A [`SystemState`] is immutable once built: every schema field holds
//! exactly one value of the declared type, and the time coordinate is
//! finite. Transitions build new states instead of mutating old ones.

mod sample;
mod types;
mod value;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use sample::{sample_state, sample_state_with, unsampleable_fields, SampleConfig};
pub use types::{Domain, TypeDesc, TypeKind};
pub use value::{CGrid, RecordValue, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("type mismatch for `{name}`: expected {expected}, got {got}")]
    TypeMismatch {
        name: String,
        expected: String,
        got: String,
    },
    #[error("field `{0}` cannot be sampled (no domain)")]
    UnsampleableField(String),
    #[error("states belong to different schemas")]
    SchemaMismatch,
    #[error("invalid type: {0}")]
    InvalidType(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("cyclic record definition involving `{0}`")]
    CyclicRecord(String),
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
    #[error("malformed state document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constant {
    pub name: String,
    pub ty: TypeDesc,
    pub value: Value,
}

/// Field layout, record declarations, and named constants of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSchema {
    fields: Vec<(String, TypeDesc)>,
    records: BTreeMap<String, Vec<(String, TypeDesc)>>,
    constants: Vec<Constant>,
    time_domain: Option<(f64, f64)>,
}

#[derive(Debug, Default)]
pub struct SchemaBuilder {
    fields: Vec<(String, TypeDesc)>,
    records: Vec<(String, Vec<(String, TypeDesc)>)>,
    constants: Vec<Constant>,
    time_domain: Option<(f64, f64)>,
}

impl SchemaBuilder {
    pub fn field(mut self, name: impl Into<String>, ty: TypeDesc) -> Self {
        self.fields.push((name.into(), ty));
        self
    }

    pub fn record(mut self, name: impl Into<String>, fields: Vec<(String, TypeDesc)>) -> Self {
        self.records.push((name.into(), fields));
        self
    }

    pub fn constant(mut self, name: impl Into<String>, ty: TypeDesc, value: Value) -> Self {
        self.constants.push(Constant {
            name: name.into(),
            ty,
            value,
        });
        self
    }

    pub fn time_domain(mut self, lo: f64, hi: f64) -> Self {
        self.time_domain = Some((lo, hi));
        self
    }

    pub fn build(self) -> Result<StateSchema, StateError> {
        let mut records = BTreeMap::new();
        for (name, fields) in self.records {
            if records.contains_key(&name) {
                return Err(StateError::DuplicateName(name));
            }
            for (i, (f, ty)) in fields.iter().enumerate() {
                if fields[..i].iter().any(|(g, _)| g == f) {
                    return Err(StateError::DuplicateName(format!("{name}.{f}")));
                }
                ty.validate()?;
            }
            records.insert(name, fields);
        }

        let mut seen: Vec<&str> = Vec::new();
        for name in self
            .fields
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.constants.iter().map(|c| c.name.as_str()))
        {
            if seen.contains(&name) {
                return Err(StateError::DuplicateName(name.to_string()));
            }
            seen.push(name);
        }

        if let Some((lo, hi)) = self.time_domain {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(StateError::InvalidType(format!(
                    "time domain [{lo}, {hi}] is empty"
                )));
            }
        }

        let schema = StateSchema {
            fields: self.fields,
            records,
            constants: self.constants,
            time_domain: self.time_domain,
        };

        for (_, ty) in &schema.fields {
            ty.validate()?;
            schema.check_refs(ty)?;
        }
        for fields in schema.records.values() {
            for (_, ty) in fields {
                schema.check_refs(ty)?;
            }
        }
        for name in schema.records.keys() {
            schema.check_acyclic(name, &mut Vec::new())?;
        }
        for c in &schema.constants {
            c.ty.validate()?;
            schema.check_refs(&c.ty)?;
            if !schema.value_matches(&c.value, &c.ty) {
                return Err(StateError::TypeMismatch {
                    name: c.name.clone(),
                    expected: c.ty.to_string(),
                    got: c.value.kind_name().to_string(),
                });
            }
        }
        Ok(schema)
    }
}

impl StateSchema {
    pub fn builder() -> SchemaBuilder {
        SchemaBuilder::default()
    }

    pub fn fields(&self) -> &[(String, TypeDesc)] {
        &self.fields
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }

    pub fn field_type(&self, name: &str) -> Option<&TypeDesc> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn records(&self) -> &BTreeMap<String, Vec<(String, TypeDesc)>> {
        &self.records
    }

    pub fn record(&self, name: &str) -> Option<&[(String, TypeDesc)]> {
        self.records.get(name).map(Vec::as_slice)
    }

    pub fn constants(&self) -> &[Constant] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<&Constant> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn time_domain(&self) -> Option<(f64, f64)> {
        self.time_domain
    }

    fn check_refs(&self, ty: &TypeDesc) -> Result<(), StateError> {
        match &ty.kind {
            TypeKind::Record { name } if !self.records.contains_key(name) => {
                Err(StateError::UnknownRecord(name.clone()))
            }
            TypeKind::List { elem, .. } => self.check_refs(elem),
            TypeKind::Pw { attrs } => attrs.iter().try_for_each(|(_, t)| self.check_refs(t)),
            _ => Ok(()),
        }
    }

    fn check_acyclic<'a>(&'a self, name: &'a str, path: &mut Vec<&'a str>) -> Result<(), StateError> {
        if path.contains(&name) {
            return Err(StateError::CyclicRecord(name.to_string()));
        }
        path.push(name);
        for (_, ty) in &self.records[name] {
            let mut t = ty;
            while let TypeKind::List { elem, .. } = &t.kind {
                t = elem;
            }
            if let TypeKind::Record { name: inner } = &t.kind {
                self.check_acyclic(inner, path)?;
            }
        }
        path.pop();
        Ok(())
    }

    /// Placeholder of type `ty`: zeros, `false`, empty lists, and records
    /// of placeholders. A pw placeholder has no paths and is not a valid
    /// collection; it only stands in until a field is assigned.
    pub fn zero_value(&self, ty: &TypeDesc) -> Value {
        match &ty.kind {
            TypeKind::Real => Value::Real(0.0),
            TypeKind::Int => Value::Int(0),
            TypeKind::Bool => Value::Bool(false),
            TypeKind::Complex => Value::Complex(Default::default()),
            TypeKind::Vector { len } => Value::Vector(vec![0.0; *len]),
            TypeKind::List { .. } => Value::List(Vec::new()),
            TypeKind::Record { name } => Value::Record(RecordValue {
                name: name.clone(),
                fields: self
                    .records
                    .get(name)
                    .map(|decl| {
                        decl.iter()
                            .map(|(n, t)| (n.clone(), self.zero_value(t)))
                            .collect()
                    })
                    .unwrap_or_default(),
            }),
            TypeKind::Cgrid { len, dx } => Value::Cgrid(CGrid::zeros(*len, *dx)),
            TypeKind::Pw { attrs } => Value::Pw(crate::quantum::PwCollection {
                attrs: attrs.iter().map(|(n, _)| n.clone()).collect(),
                particles: 1,
                paths: Vec::new(),
            }),
        }
    }

    /// Full structural type check, resolving records.
    pub fn value_matches(&self, v: &Value, ty: &TypeDesc) -> bool {
        match (v, &ty.kind) {
            (Value::List(items), TypeKind::List { elem, .. }) => {
                items.iter().all(|x| self.value_matches(x, elem))
            }
            (Value::Record(r), TypeKind::Record { name }) => {
                let Some(decl) = self.records.get(name) else {
                    return false;
                };
                r.name == *name
                    && r.fields.len() == decl.len()
                    && r.fields
                        .iter()
                        .zip(decl)
                        .all(|((n, v), (dn, dt))| n == dn && self.value_matches(v, dt))
            }
            _ => v.shallow_matches(ty),
        }
    }

    /// Converts `v` to `ty`, applying numeric widening (int to real,
    /// real to complex) and list-to-vector/cgrid conversion.
    pub fn coerce(&self, v: Value, ty: &TypeDesc) -> Option<Value> {
        match (v, &ty.kind) {
            (Value::Int(n), TypeKind::Real) => Some(Value::Real(n as f64)),
            (Value::Int(n), TypeKind::Complex) => Some(Value::Complex((n as f64).into())),
            (Value::Real(x), TypeKind::Complex) => Some(Value::Complex(x.into())),
            (Value::List(items), TypeKind::Vector { len }) => {
                if items.len() != *len {
                    return None;
                }
                items.iter().map(Value::as_f64).collect::<Option<Vec<_>>>().map(Value::Vector)
            }
            (Value::List(items), TypeKind::Cgrid { len, dx }) => {
                if items.len() != *len {
                    return None;
                }
                items
                    .iter()
                    .map(Value::as_complex)
                    .collect::<Option<Vec<_>>>()
                    .map(|data| Value::Cgrid(CGrid::new(data, *dx)))
            }
            (Value::Cgrid(g), TypeKind::Cgrid { len, dx }) => {
                (g.len() == *len && (g.dx - dx).abs() <= 1e-12 * dx.abs().max(1.0))
                    .then_some(Value::Cgrid(CGrid::new(g.data, *dx)))
            }
            (Value::List(items), TypeKind::List { elem, .. }) => items
                .into_iter()
                .map(|x| self.coerce(x, elem))
                .collect::<Option<Vec<_>>>()
                .map(Value::List),
            (Value::Record(r), TypeKind::Record { name }) => {
                let decl = self.records.get(name)?;
                if r.name != *name || r.fields.len() != decl.len() {
                    return None;
                }
                let fields = r
                    .fields
                    .into_iter()
                    .zip(decl)
                    .map(|((n, v), (dn, dt))| {
                        if n == *dn {
                            self.coerce(v, dt).map(|v| (n, v))
                        } else {
                            None
                        }
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some(Value::Record(RecordValue {
                    name: r.name,
                    fields,
                }))
            }
            (v, _) => self.value_matches(&v, ty).then_some(v),
        }
    }
}

/// A system state: one value per schema field plus a time coordinate.
#[derive(Debug, Clone)]
pub struct SystemState {
    schema: Arc<StateSchema>,
    time: f64,
    values: Vec<Value>,
}

impl PartialEq for SystemState {
    fn eq(&self, other: &Self) -> bool {
        same_schema(&self.schema, &other.schema)
            && self.time == other.time
            && self.values == other.values
    }
}

fn same_schema(a: &Arc<StateSchema>, b: &Arc<StateSchema>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl SystemState {
    /// Builds a state from already-validated parts.
    pub(crate) fn from_parts(schema: Arc<StateSchema>, time: f64, values: Vec<Value>) -> Self {
        debug_assert_eq!(schema.fields.len(), values.len());
        SystemState {
            schema,
            time,
            values,
        }
    }

    pub fn schema(&self) -> &Arc<StateSchema> {
        &self.schema
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn value_at(&self, index: usize) -> &Value {
        &self.values[index]
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.schema.field_index(name).map(|i| &self.values[i])
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Value] {
        &mut self.values
    }

    /// Copy of this state at a different time.
    pub fn with_time(&self, time: f64) -> Result<SystemState, StateError> {
        if !time.is_finite() {
            return Err(StateError::NonFiniteTime(time));
        }
        let mut s = self.clone();
        s.time = time;
        Ok(s)
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    /// Copy of this state with one field replaced.
    pub fn with_value(&self, name: &str, value: Value) -> Result<SystemState, StateError> {
        let i = self
            .schema
            .field_index(name)
            .ok_or_else(|| StateError::UnknownField(name.to_string()))?;
        let ty = &self.schema.fields[i].1;
        let got = value.kind_name();
        let v = self
            .schema
            .coerce(value, ty)
            .ok_or_else(|| StateError::TypeMismatch {
                name: name.to_string(),
                expected: ty.to_string(),
                got: got.to_string(),
            })?;
        let mut s = self.clone();
        s.values[i] = v;
        Ok(s)
    }

    /// Rebuilds a state from its JSON serialization.
    pub fn from_json(
        schema: &Arc<StateSchema>,
        doc: &serde_json::Value,
    ) -> Result<SystemState, StateError> {
        let malformed = |m: &str| StateError::Malformed(m.to_string());
        let time = doc
            .get("time")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| malformed("missing numeric `time`"))?;
        let values = doc
            .get("values")
            .and_then(serde_json::Value::as_object)
            .ok_or_else(|| malformed("missing `values` object"))?;
        let mut assignments = Vec::with_capacity(values.len());
        for (name, v) in values {
            let v: Value = serde_json::from_value(v.clone())
                .map_err(|e| StateError::Malformed(format!("{name}: {e}")))?;
            assignments.push((name.clone(), v));
        }
        make_initial_state(schema, assignments)?.with_time(time)
    }
}

impl Serialize for SystemState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Values<'a>(&'a SystemState);
        impl Serialize for Values<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.values.len()))?;
                for ((name, _), v) in self.0.schema.fields.iter().zip(&self.0.values) {
                    map.serialize_entry(name, v)?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("time", &self.time)?;
        map.serialize_entry("values", &Values(self))?;
        map.end()
    }
}

/// Builds the time-zero state from an explicit assignment of every field.
pub fn make_initial_state<I>(
    schema: &Arc<StateSchema>,
    assignments: I,
) -> Result<SystemState, StateError>
where
    I: IntoIterator<Item = (String, Value)>,
{
    let mut slots: Vec<Option<Value>> = vec![None; schema.fields.len()];
    for (name, value) in assignments {
        let i = schema
            .field_index(&name)
            .ok_or_else(|| StateError::UnknownField(name.clone()))?;
        let ty = &schema.fields[i].1;
        let got = value.kind_name();
        let v = schema
            .coerce(value, ty)
            .ok_or_else(|| StateError::TypeMismatch {
                name: name.clone(),
                expected: ty.to_string(),
                got: got.to_string(),
            })?;
        slots[i] = Some(v);
    }
    let values = slots
        .into_iter()
        .zip(&schema.fields)
        .map(|(v, (name, _))| v.ok_or_else(|| StateError::MissingField(name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SystemState::from_parts(schema.clone(), 0.0, values))
}

/// True iff time and all values agree, floats within absolute `tol`.
pub fn deep_equal(a: &SystemState, b: &SystemState, tol: f64) -> Result<bool, StateError> {
    if !same_schema(&a.schema, &b.schema) {
        return Err(StateError::SchemaMismatch);
    }
    let time_ok = a.time == b.time || (a.time - b.time).abs() <= tol;
    Ok(time_ok && a.values.iter().zip(&b.values).all(|(x, y)| x.approx_eq(y, tol)))
}
