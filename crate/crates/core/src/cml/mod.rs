//! CML: the causal modelling language. Source text is lexed, parsed,
//! checked, and lowered to an engine model.

pub mod ast;
mod diag;
pub mod lexer;
mod lower;
pub mod parser;
pub mod pretty;
mod ty;
pub mod typeck;

pub use diag::{Diagnostic, Loc, Severity};
pub use lower::{compile, compile_with, lower, Compiled};
pub use parser::{parse, parse_expr};
pub use pretty::pretty;
pub use ty::Ty;
pub use typeck::{check_observable, typecheck, TypedModel};
