//! Typed model to executable causal model.

use std::collections::BTreeMap;

use super::diag::Diagnostic;
use super::typeck::{typecheck, TypedModel};
use super::parser::parse;
use crate::engine::intrinsic::Registry;
use crate::engine::ir::{visit_intrinsics_mut, visit_stmt_intrinsics_mut, IntrinsicCall};
use crate::engine::{stmts_use_random, CausalModel, Law};
use crate::state::Value;

/// A compiled model plus the non-fatal diagnostics produced on the way.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub model: CausalModel,
    pub warnings: Vec<Diagnostic>,
}

/// Binds every intrinsic call to its definition in `registry` and builds
/// the engine model.
pub fn lower(typed: TypedModel, registry: &Registry) -> Result<CausalModel, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut bind = |call: &mut IntrinsicCall| match registry.get(&call.name) {
        Some(d) => call.def = Some(*d),
        None => diags.push(Diagnostic::error(
            "UnknownIntrinsic",
            Default::default(),
            format!("intrinsic `{}` is not registered", call.name),
        )),
    };
    let mut laws = Vec::new();
    for mut l in typed.laws {
        visit_intrinsics_mut(&mut l.guard, &mut bind);
        l.transition.iter_mut().for_each(|s| visit_stmt_intrinsics_mut(s, &mut bind));
        laws.push(Law {
            uses_random: stmts_use_random(&l.transition),
            name: l.name,
            guard: l.guard,
            transition: l.transition,
            n_locals: l.n_locals,
            loc: l.loc,
        });
    }
    let mut init = typed.init;
    init.stmts.iter_mut().for_each(|s| visit_stmt_intrinsics_mut(s, &mut bind));
    let mut halt = typed.halt;
    if let Some(h) = halt.as_mut() {
        visit_intrinsics_mut(h, &mut bind);
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    CausalModel::new(typed.name, typed.schema, laws, init, halt, typed.timestep)
        .map_err(|e| vec![Diagnostic::error("InvalidModel", Default::default(), e.to_string())])
}

/// Parses, checks, and lowers `src` against the standard intrinsics.
pub fn compile(src: &str) -> Result<Compiled, Vec<Diagnostic>> {
    compile_with(src, &BTreeMap::new(), crate::quantum::intrinsics::standard())
}

pub fn compile_with(
    src: &str,
    externs: &BTreeMap<String, Value>,
    registry: &Registry,
) -> Result<Compiled, Vec<Diagnostic>> {
    let ast = parse(src)?;
    let typed = typecheck(&ast, externs, registry)?;
    let warnings = typed.warnings.clone();
    let model = lower(typed, registry)?;
    Ok(Compiled { model, warnings })
}
