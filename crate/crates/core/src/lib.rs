//! Guarded-transition causal models: a state schema, laws of the form
//! `IF guard(s0) THEN s1 = transition(s0)`, a uniform-timestep
//! interpreter, model-level property checks, and quantum/classical
//! numerics exposed as intrinsics.

pub mod analyze;
pub mod cli;
pub mod cml;
pub mod engine;
pub mod interp;
pub mod quantum;
pub mod rng;
pub mod state;
