//! Compiles a model from source, runs it, and writes the trace as CSV.

use causalkit::cml::compile;
use causalkit::interp::{initial_state, run, write_trace, RunConfig, TraceFormat};

fn main() {
    let compiled = compile(include_str!("../models/counter.cml")).expect("counter compiles");
    let model = compiled.model;
    let mut cfg = RunConfig::for_model(&model);
    cfg.seed = 1;
    let init = initial_state(&model, cfg.seed).expect("init succeeds");
    let trace = run(&model, &init, &cfg).expect("valid config");
    write_trace(&trace, TraceFormat::Csv, &mut std::io::stdout()).expect("stdout is writable");
    eprintln!("{} steps, {:?}", trace.steps, trace.termination_reason);
}
