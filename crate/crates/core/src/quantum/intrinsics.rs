//! CML bindings for the numeric and pw-collection operations.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::ca::{ca_step, CaParticle, CaWorld, DEFAULT_ALPHA};
use super::classical::{classical_step, Particle};
use super::pw::{self, DetectMode, Diffraction, PwCollection};
use super::schrodinger::crank_nicolson_step;
use crate::cml::Ty;
use crate::engine::eval::EvalErrorKind;
use crate::engine::intrinsic::{ArgTy, ArgValue, IntrinsicDef, RecordTable, Registry};
use crate::engine::random::Chooser;
use crate::state::{CGrid, RecordValue, TypeKind, Value};

/// Registry holding every intrinsic shipped with the toolkit.
pub fn standard() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r = Registry::empty();
        for def in DEFS {
            r.register(*def);
        }
        r
    })
}

const DEFS: &[IntrinsicDef] = &[
    IntrinsicDef {
        name: "schrodinger_step",
        stochastic: false,
        signature: "schrodinger_step(psi: cgrid, V: list<real>, dt: real[, m: real, hbar: real]) -> cgrid",
        check: check_schrodinger,
        eval: eval_schrodinger,
    },
    IntrinsicDef {
        name: "classical_step",
        stochastic: false,
        signature: "classical_step(ps: list<R{m, x, v: real}>, dt: real, |x| dV/dx) -> list<R>",
        check: check_classical,
        eval: eval_classical,
    },
    IntrinsicDef {
        name: "pw_propagate",
        stochastic: false,
        signature: "pw_propagate(pw, dt: real[, phase: bool]) -> pw",
        check: check_propagate,
        eval: eval_propagate,
    },
    IntrinsicDef {
        name: "pw_interact",
        stochastic: true,
        signature: "pw_interact(pw) -> pw",
        check: check_interact,
        eval: eval_interact,
    },
    IntrinsicDef {
        name: "pw_detect",
        stochastic: true,
        signature: "pw_detect(pw, edges: list<real>, marked: bool) -> int",
        check: check_detect,
        eval: eval_detect,
    },
    IntrinsicDef {
        name: "pw_attr",
        stochastic: false,
        signature: "pw_attr(pw, particle: int, \"attr\") -> attribute type",
        check: check_attr,
        eval: eval_attr,
    },
    IntrinsicDef {
        name: "pw_diffract",
        stochastic: false,
        signature: "pw_diffract(pw, screen: list<real>, distance, width, flight_time, k: real) -> pw",
        check: check_diffract,
        eval: eval_diffract,
    },
    IntrinsicDef {
        name: "ca_step",
        stochastic: false,
        signature: "ca_step(world: W{phi: list<real>, particles: list<P{id, pos, vel, species: int}>}[, alpha: real]) -> W",
        check: check_ca,
        eval: eval_ca,
    },
];

fn arity(args: &[ArgTy], min: usize, max: usize) -> Result<(), String> {
    if args.len() < min || args.len() > max {
        if min == max {
            Err(format!("expects {min} argument(s), got {}", args.len()))
        } else {
            Err(format!("expects {min} to {max} arguments, got {}", args.len()))
        }
    } else {
        Ok(())
    }
}

fn value_arg<'a>(args: &'a [ArgTy], i: usize, what: &str) -> Result<&'a Ty, String> {
    match args.get(i) {
        Some(ArgTy::Value(t)) => Ok(t),
        _ => Err(format!("argument {} must be {what}", i + 1)),
    }
}

fn real_arg(args: &[ArgTy], i: usize) -> Result<(), String> {
    let t = value_arg(args, i, "a real")?;
    if t.is_numeric() || *t == Ty::Error {
        Ok(())
    } else {
        Err(format!("argument {} must be a real, found {t}", i + 1))
    }
}

fn bool_arg(args: &[ArgTy], i: usize) -> Result<(), String> {
    match value_arg(args, i, "a bool")? {
        Ty::Bool | Ty::Error => Ok(()),
        t => Err(format!("argument {} must be a bool, found {t}", i + 1)),
    }
}

fn real_list_arg(args: &[ArgTy], i: usize) -> Result<(), String> {
    match value_arg(args, i, "a list of reals")? {
        Ty::List(e) if e.is_numeric() => Ok(()),
        Ty::Vector(_) | Ty::EmptyList | Ty::Error => Ok(()),
        t => Err(format!("argument {} must be a list of reals, found {t}", i + 1)),
    }
}

fn pw_arg(args: &[ArgTy], i: usize) -> Result<Ty, String> {
    match value_arg(args, i, "a pw collection")? {
        t @ (Ty::Pw(_) | Ty::Error) => Ok(t.clone()),
        t => Err(format!("argument {} must be a pw collection, found {t}", i + 1)),
    }
}

fn pw_needs(t: &Ty, attrs: &[&str]) -> Result<(), String> {
    if let Ty::Pw(decl) = t {
        for a in attrs {
            match decl.iter().find(|(n, _)| n == a) {
                Some((_, ty)) if ty.is_numeric() => {}
                Some((_, ty)) => return Err(format!("pw attribute `{a}` must be real, found {ty}")),
                None => return Err(format!("pw collection needs a `{a}` attribute")),
            }
        }
    }
    Ok(())
}

/// Record `name` declares each of `fields` with a type satisfying `pred`.
fn record_has(
    records: &RecordTable,
    name: &str,
    fields: &[&str],
    pred: &dyn Fn(&TypeKind) -> bool,
    want: &str,
) -> Result<(), String> {
    let decl = records
        .get(name)
        .ok_or_else(|| format!("unknown record `{name}`"))?;
    for f in fields {
        match decl.iter().find(|(n, _)| n == f) {
            Some((_, t)) if pred(&t.kind) => {}
            Some((_, t)) => return Err(format!("field `{name}.{f}` must be {want}, found {t}")),
            None => return Err(format!("record `{name}` needs a field `{f}`")),
        }
    }
    Ok(())
}

fn check_schrodinger(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 3, 5)?;
    match value_arg(args, 0, "a cgrid")? {
        Ty::Cgrid | Ty::Error => {}
        t => return Err(format!("argument 1 must be a cgrid, found {t}")),
    }
    real_list_arg(args, 1)?;
    for i in 2..args.len() {
        real_arg(args, i)?;
    }
    Ok(Ty::Cgrid)
}

fn check_classical(args: &[ArgTy], records: &RecordTable) -> Result<Ty, String> {
    arity(args, 3, 3)?;
    let t = value_arg(args, 0, "a list of particle records")?;
    match t {
        Ty::List(e) => match e.as_ref() {
            Ty::Record(name) => record_has(
                records,
                name,
                &["m", "x", "v"],
                &|k| matches!(k, TypeKind::Real),
                "real",
            )?,
            other => return Err(format!("argument 1 must be a list of records, found list<{other}>")),
        },
        Ty::Error => {}
        other => return Err(format!("argument 1 must be a list of records, found {other}")),
    }
    real_arg(args, 1)?;
    match &args[2] {
        ArgTy::Lambda(body) if body.is_numeric() || *body == Ty::Error => {}
        ArgTy::Lambda(body) => return Err(format!("gradient must return a real, found {body}")),
        _ => return Err("argument 3 must be a gradient `|x| expr`".into()),
    }
    Ok(t.clone())
}

fn check_propagate(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 2, 3)?;
    let t = pw_arg(args, 0)?;
    pw_needs(&t, &["position", "velocity"])?;
    real_arg(args, 1)?;
    if args.len() == 3 {
        bool_arg(args, 2)?;
    }
    Ok(t)
}

fn check_interact(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 1, 1)?;
    pw_arg(args, 0)
}

fn check_detect(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 3, 3)?;
    let t = pw_arg(args, 0)?;
    pw_needs(&t, &["position"])?;
    real_list_arg(args, 1)?;
    bool_arg(args, 2)?;
    Ok(Ty::Int)
}

fn check_attr(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 3, 3)?;
    let t = pw_arg(args, 0)?;
    match value_arg(args, 1, "an int")? {
        Ty::Int | Ty::Error => {}
        other => return Err(format!("argument 2 must be an int, found {other}")),
    }
    let name = match &args[2] {
        ArgTy::Str(s) => s,
        _ => return Err("argument 3 must be an attribute name string".into()),
    };
    match t {
        Ty::Pw(decl) => decl
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, ty)| ty.clone())
            .ok_or_else(|| format!("pw collection has no attribute `{name}`")),
        _ => Ok(Ty::Error),
    }
}

fn check_diffract(args: &[ArgTy], _: &RecordTable) -> Result<Ty, String> {
    arity(args, 6, 6)?;
    let t = pw_arg(args, 0)?;
    pw_needs(&t, &["position", "velocity"])?;
    real_list_arg(args, 1)?;
    for i in 2..6 {
        real_arg(args, i)?;
    }
    Ok(t)
}

fn check_ca(args: &[ArgTy], records: &RecordTable) -> Result<Ty, String> {
    arity(args, 1, 2)?;
    let t = value_arg(args, 0, "a world record")?;
    match t {
        Ty::Record(name) => {
            let decl = records
                .get(name)
                .ok_or_else(|| format!("unknown record `{name}`"))?;
            let find = |f: &str| {
                decl.iter()
                    .find(|(n, _)| n == f)
                    .map(|(_, t)| t)
                    .ok_or_else(|| format!("record `{name}` needs a field `{f}`"))
            };
            match &find("phi")?.kind {
                TypeKind::List { elem, .. } if matches!(elem.kind, TypeKind::Real) => {}
                TypeKind::Vector { .. } => {}
                other => return Err(format!("`{name}.phi` must be a list of reals, found {other:?}")),
            }
            match &find("particles")?.kind {
                TypeKind::List { elem, .. } => match &elem.kind {
                    TypeKind::Record { name: p } => record_has(
                        records,
                        p,
                        &["id", "pos", "vel", "species"],
                        &|k| matches!(k, TypeKind::Int),
                        "int",
                    )?,
                    _ => return Err(format!("`{name}.particles` must be a list of records")),
                },
                _ => return Err(format!("`{name}.particles` must be a list of records")),
            }
        }
        Ty::Error => {}
        other => return Err(format!("argument 1 must be a world record, found {other}")),
    }
    if args.len() == 2 {
        real_arg(args, 1)?;
    }
    Ok(t.clone())
}

fn bad(msg: impl Into<String>) -> EvalErrorKind {
    EvalErrorKind::Intrinsic(msg.into())
}

fn take_value(args: &mut [ArgValue<'_>], i: usize) -> Result<Value, EvalErrorKind> {
    match args.get_mut(i) {
        Some(ArgValue::Value(v)) => Ok(std::mem::replace(v, Value::Bool(false))),
        _ => Err(bad(format!("argument {} must be a value", i + 1))),
    }
}

fn real_at(args: &[ArgValue<'_>], i: usize) -> Result<f64, EvalErrorKind> {
    match args.get(i) {
        Some(ArgValue::Value(v)) => v
            .as_f64()
            .ok_or_else(|| bad(format!("argument {} must be a real", i + 1))),
        _ => Err(bad(format!("argument {} must be a real", i + 1))),
    }
}

fn bool_at(args: &[ArgValue<'_>], i: usize) -> Result<bool, EvalErrorKind> {
    match args.get(i) {
        Some(ArgValue::Value(Value::Bool(b))) => Ok(*b),
        _ => Err(bad(format!("argument {} must be a bool", i + 1))),
    }
}

fn reals(v: &Value) -> Result<Vec<f64>, EvalErrorKind> {
    match v {
        Value::Vector(xs) => Ok(xs.clone()),
        Value::List(items) => items
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| bad("expected a list of reals")))
            .collect(),
        other => Err(bad(format!("expected a list of reals, got {}", other.kind_name()))),
    }
}

fn take_pw(args: &mut [ArgValue<'_>], i: usize) -> Result<PwCollection, EvalErrorKind> {
    match take_value(args, i)? {
        Value::Pw(p) => Ok(p),
        other => Err(bad(format!("expected a pw collection, got {}", other.kind_name()))),
    }
}

fn pw_err(e: pw::PwError) -> EvalErrorKind {
    match e {
        pw::PwError::Draw(s) => EvalErrorKind::Branch(s),
        other => bad(other.to_string()),
    }
}

fn need_chooser<'c>(
    chooser: Option<&'c mut dyn Chooser>,
    name: &str,
) -> Result<&'c mut dyn Chooser, EvalErrorKind> {
    chooser.ok_or_else(|| bad(format!("{name} needs a random source")))
}

fn eval_schrodinger(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let psi = match take_value(args, 0)? {
        Value::Cgrid(g) => g,
        other => return Err(bad(format!("expected a cgrid, got {}", other.kind_name()))),
    };
    let v = match &args[1] {
        ArgValue::Value(v) => reals(v)?,
        _ => return Err(bad("potential must be a list of reals")),
    };
    let dt = real_at(args, 2)?;
    let m = if args.len() > 3 { real_at(args, 3)? } else { 1.0 };
    let hbar = if args.len() > 4 { real_at(args, 4)? } else { 1.0 };
    crank_nicolson_step(&psi, &v, dt, m, hbar)
        .map(Value::Cgrid)
        .map_err(|e| bad(e.to_string()))
}

fn record_real(r: &RecordValue, f: &str) -> Result<f64, EvalErrorKind> {
    r.get(f)
        .and_then(Value::as_f64)
        .ok_or_else(|| bad(format!("record {} has no real field `{f}`", r.name)))
}

fn record_int(r: &RecordValue, f: &str) -> Result<i64, EvalErrorKind> {
    r.get(f)
        .and_then(Value::as_int)
        .ok_or_else(|| bad(format!("record {} has no int field `{f}`", r.name)))
}

fn set_field(r: &mut RecordValue, f: &str, v: Value) {
    if let Some(slot) = r.get_mut(f) {
        *slot = v;
    }
}

fn eval_classical(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let items = match take_value(args, 0)? {
        Value::List(items) => items,
        other => return Err(bad(format!("expected a list of particles, got {}", other.kind_name()))),
    };
    let dt = real_at(args, 1)?;
    let grad = match &args[2] {
        ArgValue::Func(f) => *f,
        _ => return Err(bad("argument 3 must be a gradient function")),
    };
    let mut recs = Vec::with_capacity(items.len());
    let mut ps = Vec::with_capacity(items.len());
    for item in items {
        match item {
            Value::Record(r) => {
                ps.push(Particle {
                    m: record_real(&r, "m")?,
                    x: record_real(&r, "x")?,
                    v: record_real(&r, "v")?,
                });
                recs.push(r);
            }
            other => return Err(bad(format!("expected a particle record, got {}", other.kind_name()))),
        }
    }
    let out = classical_step(&ps, dt, grad).map_err(|e| match e {
        super::classical::ClassicalError::Gradient(k) => k,
        other => bad(other.to_string()),
    })?;
    Ok(Value::List(
        recs.into_iter()
            .zip(out)
            .map(|(mut r, p)| {
                set_field(&mut r, "x", Value::Real(p.x));
                set_field(&mut r, "v", Value::Real(p.v));
                Value::Record(r)
            })
            .collect(),
    ))
}

fn eval_propagate(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let p = take_pw(args, 0)?;
    let dt = real_at(args, 1)?;
    let phase = if args.len() > 2 { bool_at(args, 2)? } else { false };
    pw::pw_propagate(&p, dt, phase).map(Value::Pw).map_err(pw_err)
}

fn eval_interact(
    args: &mut [ArgValue<'_>],
    chooser: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let p = take_pw(args, 0)?;
    let chooser = need_chooser(chooser, "pw_interact")?;
    pw::pw_interact(&p, chooser)
        .map(|(_, c)| Value::Pw(c))
        .map_err(pw_err)
}

fn eval_detect(
    args: &mut [ArgValue<'_>],
    chooser: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let p = take_pw(args, 0)?;
    let edges = match &args[1] {
        ArgValue::Value(v) => reals(v)?,
        _ => return Err(bad("bin edges must be a list of reals")),
    };
    let mode = if bool_at(args, 2)? {
        DetectMode::Marked
    } else {
        DetectMode::Coherent
    };
    let chooser = need_chooser(chooser, "pw_detect")?;
    pw::pw_detect(&p, &edges, mode, chooser)
        .map(|k| Value::Int(k as i64))
        .map_err(pw_err)
}

fn eval_attr(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let p = take_pw(args, 0)?;
    let particle = match &args[1] {
        ArgValue::Value(v) => v.as_int().ok_or_else(|| bad("particle index must be an int"))?,
        _ => return Err(bad("particle index must be an int")),
    };
    let name = match &args[2] {
        ArgValue::Str(s) => s.clone(),
        _ => return Err(bad("attribute name must be a string")),
    };
    let particle = usize::try_from(particle)
        .map_err(|_| EvalErrorKind::IndexOutOfRange { index: particle, len: p.particles })?;
    pw::pw_attr(&p, particle, &name).map_err(pw_err)
}

fn eval_diffract(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let p = take_pw(args, 0)?;
    let screen = match &args[1] {
        ArgValue::Value(v) => reals(v)?,
        _ => return Err(bad("screen must be a list of reals")),
    };
    let geo = Diffraction {
        screen: &screen,
        distance: real_at(args, 2)?,
        width: real_at(args, 3)?,
        flight_time: real_at(args, 4)?,
        k: real_at(args, 5)?,
    };
    pw::pw_diffract(&p, &geo).map(Value::Pw).map_err(pw_err)
}

fn eval_ca(
    args: &mut [ArgValue<'_>],
    _: Option<&mut dyn Chooser>,
    _: f64,
) -> Result<Value, EvalErrorKind> {
    let mut rec = match take_value(args, 0)? {
        Value::Record(r) => r,
        other => return Err(bad(format!("expected a world record, got {}", other.kind_name()))),
    };
    let alpha = if args.len() > 1 { real_at(args, 1)? } else { DEFAULT_ALPHA };
    let phi = reals(rec.get("phi").ok_or_else(|| bad("world needs `phi`"))?)?;
    let items = match rec.get("particles") {
        Some(Value::List(items)) => items.clone(),
        _ => return Err(bad("world needs a `particles` list")),
    };
    let mut prs = Vec::with_capacity(items.len());
    let mut particles = Vec::with_capacity(items.len());
    for item in items {
        match item {
            Value::Record(r) => {
                particles.push(CaParticle {
                    id: record_int(&r, "id")?,
                    pos: record_int(&r, "pos")?,
                    vel: record_int(&r, "vel")?,
                    species: record_int(&r, "species")?,
                });
                prs.push(r);
            }
            other => return Err(bad(format!("expected a particle record, got {}", other.kind_name()))),
        }
    }
    let out = ca_step(&CaWorld { phi, particles }, alpha).map_err(|e| bad(e.to_string()))?;
    let phi_val = match rec.get("phi") {
        Some(Value::Vector(_)) => Value::Vector(out.phi),
        _ => Value::List(out.phi.into_iter().map(Value::Real).collect()),
    };
    set_field(&mut rec, "phi", phi_val);
    let list = prs
        .into_iter()
        .zip(out.particles)
        .map(|(mut r, p)| {
            set_field(&mut r, "pos", Value::Int(p.pos));
            set_field(&mut r, "vel", Value::Int(p.vel));
            Value::Record(r)
        })
        .collect();
    set_field(&mut rec, "particles", Value::List(list));
    Ok(Value::Record(rec))
}

/// Converts a CML world record into the native form.
pub fn ca_world_from_value(v: &Value) -> Option<CaWorld> {
    let Value::Record(r) = v else { return None };
    let phi = reals(r.get("phi")?).ok()?;
    let Value::List(items) = r.get("particles")? else {
        return None;
    };
    let particles = items
        .iter()
        .map(|it| match it {
            Value::Record(p) => Some(CaParticle {
                id: record_int(p, "id").ok()?,
                pos: record_int(p, "pos").ok()?,
                vel: record_int(p, "vel").ok()?,
                species: record_int(p, "species").ok()?,
            }),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(CaWorld { phi, particles })
}

/// Builds the CML value for a native world using record names `world` and
/// `particle`.
pub fn ca_world_to_value(w: &CaWorld, world: &str, particle: &str) -> Value {
    Value::Record(RecordValue {
        name: world.into(),
        fields: vec![
            (
                "phi".into(),
                Value::List(w.phi.iter().map(|x| Value::Real(*x)).collect()),
            ),
            (
                "particles".into(),
                Value::List(
                    w.particles
                        .iter()
                        .map(|p| {
                            Value::Record(RecordValue {
                                name: particle.into(),
                                fields: vec![
                                    ("id".into(), Value::Int(p.id)),
                                    ("pos".into(), Value::Int(p.pos)),
                                    ("vel".into(), Value::Int(p.vel)),
                                    ("species".into(), Value::Int(p.species)),
                                ],
                            })
                        })
                        .collect(),
                ),
            ),
        ],
    })
}

/// Converts a grid of amplitudes to a value, for hosts building states.
pub fn cgrid_value(data: Vec<Complex64>, dx: f64) -> Value {
    Value::Cgrid(CGrid::new(data, dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_flags() {
        let r = standard();
        assert!(!r.get("schrodinger_step").unwrap().stochastic);
        assert!(r.get("pw_interact").unwrap().stochastic);
        assert!(r.get("pw_detect").unwrap().stochastic);
        assert!(!r.get("ca_step").unwrap().stochastic);
        assert!(r.get("nope").is_none());
    }

    #[test]
    fn ca_value_round_trip() {
        let w = CaWorld {
            phi: vec![0.0, 1.0, 0.5],
            particles: vec![CaParticle {
                id: 3,
                pos: 1,
                vel: -1,
                species: 2,
            }],
        };
        let v = ca_world_to_value(&w, "World", "P");
        assert_eq!(ca_world_from_value(&v), Some(w));
    }

    #[test]
    fn check_rejects_wrong_shapes() {
        let recs = RecordTable::new();
        assert!(check_schrodinger(&[ArgTy::Value(Ty::Real)], &recs).is_err());
        assert!(check_detect(
            &[
                ArgTy::Value(Ty::Pw(vec![("spin".into(), Ty::Int)])),
                ArgTy::Value(Ty::List(Box::new(Ty::Real))),
                ArgTy::Value(Ty::Bool)
            ],
            &recs
        )
        .is_err());
        assert_eq!(
            check_attr(
                &[
                    ArgTy::Value(Ty::Pw(vec![("spin".into(), Ty::Int)])),
                    ArgTy::Value(Ty::Int),
                    ArgTy::Str("spin".into())
                ],
                &recs
            ),
            Ok(Ty::Int)
        );
    }
}
