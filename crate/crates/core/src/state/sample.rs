use std::sync::Arc;

use super::{Domain, RecordValue, StateError, StateSchema, SystemState, TypeDesc, TypeKind, Value};
use crate::rng::RngStream;

/// Fallback domains for fields declared without one. Empty by default:
/// an undeclared domain makes the field unsampleable.
#[derive(Debug, Clone, Default)]
pub struct SampleConfig {
    pub default_real: Option<(f64, f64)>,
    pub default_int: Option<(i64, i64)>,
}

/// Draws a well-typed state with every field uniform over its domain.
pub fn sample_state(schema: &Arc<StateSchema>, rng: &mut RngStream) -> Result<SystemState, StateError> {
    sample_state_with(schema, rng, &SampleConfig::default())
}

pub fn sample_state_with(
    schema: &Arc<StateSchema>,
    rng: &mut RngStream,
    cfg: &SampleConfig,
) -> Result<SystemState, StateError> {
    let mut values = Vec::with_capacity(schema.fields().len());
    for (name, ty) in schema.fields() {
        values.push(sample_value(schema, name, ty, rng, cfg)?);
    }
    let time = match schema.time_domain() {
        Some((lo, hi)) => lo + rng.uniform_closed() * (hi - lo),
        None => 0.0,
    };
    Ok(SystemState::from_parts(schema.clone(), time, values))
}

/// Names of fields that [`sample_state`] cannot draw.
pub fn unsampleable_fields(schema: &StateSchema, cfg: &SampleConfig) -> Vec<String> {
    schema
        .fields()
        .iter()
        .filter(|(_, ty)| !sampleable(schema, ty, cfg))
        .map(|(n, _)| n.clone())
        .collect()
}

fn sampleable(schema: &StateSchema, ty: &TypeDesc, cfg: &SampleConfig) -> bool {
    if matches!(ty.domain, Some(Domain::Set(_))) {
        return true;
    }
    match &ty.kind {
        TypeKind::Bool => true,
        TypeKind::Real | TypeKind::Vector { .. } => {
            ty.domain.is_some() || cfg.default_real.is_some()
        }
        TypeKind::Int => ty.domain.is_some() || cfg.default_int.is_some(),
        TypeKind::Complex | TypeKind::Cgrid { .. } | TypeKind::Pw { .. } => false,
        TypeKind::List { elem, bound } => bound.is_some() && sampleable(schema, elem, cfg),
        TypeKind::Record { name } => schema
            .record(name)
            .is_some_and(|fs| fs.iter().all(|(_, t)| sampleable(schema, t, cfg))),
    }
}

fn sample_value(
    schema: &StateSchema,
    name: &str,
    ty: &TypeDesc,
    rng: &mut RngStream,
    cfg: &SampleConfig,
) -> Result<Value, StateError> {
    let unsampleable = || StateError::UnsampleableField(name.to_string());
    if let Some(Domain::Set(values)) = &ty.domain {
        let i = rng.below(values.len() as u64) as usize;
        return Ok(values[i].clone());
    }
    let interval = match &ty.domain {
        Some(Domain::Interval { lo, hi }) => Some((*lo, *hi)),
        _ => None,
    };
    match &ty.kind {
        TypeKind::Bool => Ok(Value::Bool(rng.below(2) == 1)),
        TypeKind::Real => {
            let (lo, hi) = interval.or(cfg.default_real).ok_or_else(unsampleable)?;
            Ok(Value::Real(uniform_closed(rng, lo, hi)))
        }
        TypeKind::Vector { len } => {
            let (lo, hi) = interval.or(cfg.default_real).ok_or_else(unsampleable)?;
            Ok(Value::Vector(
                (0..*len).map(|_| uniform_closed(rng, lo, hi)).collect(),
            ))
        }
        TypeKind::Int => {
            let (lo, hi) = match interval {
                Some((lo, hi)) => (lo.ceil() as i64, hi.floor() as i64),
                None => cfg.default_int.ok_or_else(unsampleable)?,
            };
            let span = (hi as i128 - lo as i128 + 1) as u64;
            Ok(Value::Int(lo.wrapping_add(rng.below(span) as i64)))
        }
        TypeKind::List { elem, bound } => {
            let n = bound.ok_or_else(unsampleable)?;
            let items = (0..n)
                .map(|_| sample_value(schema, name, elem, rng, cfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::List(items))
        }
        TypeKind::Record { name: rec } => {
            let decl = schema.record(rec).ok_or_else(unsampleable)?;
            let fields = decl
                .iter()
                .map(|(f, t)| sample_value(schema, name, t, rng, cfg).map(|v| (f.clone(), v)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::Record(RecordValue {
                name: rec.clone(),
                fields,
            }))
        }
        TypeKind::Complex | TypeKind::Cgrid { .. } | TypeKind::Pw { .. } => Err(unsampleable()),
    }
}

fn uniform_closed(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    (lo + rng.uniform_closed() * (hi - lo)).clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_draws_stay_in_domain() {
        let schema = Arc::new(
            StateSchema::builder()
                .field("x", TypeDesc::real().in_range(0.0, 1.0))
                .build()
                .unwrap(),
        );
        let mut rng = RngStream::new(3);
        for _ in 0..1000 {
            let s = sample_state(&schema, &mut rng).unwrap();
            let x = s.get("x").unwrap().as_f64().unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn bool_field_hits_both_values() {
        let schema = Arc::new(
            StateSchema::builder()
                .field("b", TypeDesc::bool())
                .build()
                .unwrap(),
        );
        let mut rng = RngStream::new(11);
        let mut seen = [false; 2];
        for _ in 0..100 {
            let s = sample_state(&schema, &mut rng).unwrap();
            seen[s.get("b").unwrap().as_bool().unwrap() as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn cgrid_without_domain_is_unsampleable() {
        let schema = Arc::new(
            StateSchema::builder()
                .field("ψ", TypeDesc::cgrid(64, 0.1))
                .build()
                .unwrap(),
        );
        let err = sample_state(&schema, &mut RngStream::new(0)).unwrap_err();
        assert_eq!(err, StateError::UnsampleableField("ψ".into()));
        assert_eq!(unsampleable_fields(&schema, &SampleConfig::default()), vec!["ψ"]);
    }

    #[test]
    fn undeclared_real_needs_configured_default() {
        let schema = Arc::new(
            StateSchema::builder()
                .field("x", TypeDesc::real())
                .build()
                .unwrap(),
        );
        assert!(sample_state(&schema, &mut RngStream::new(0)).is_err());
        let cfg = SampleConfig {
            default_real: Some((-1.0, 1.0)),
            ..Default::default()
        };
        let s = sample_state_with(&schema, &mut RngStream::new(0), &cfg).unwrap();
        assert!(s.get("x").unwrap().as_f64().unwrap().abs() <= 1.0);
    }
}
