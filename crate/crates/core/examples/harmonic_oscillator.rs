//! Velocity Verlet on the bundled oscillator; energy stays near its start.

use causalkit::interp::{run, RunConfig};
use causalkit::quantum::build_bundled;

fn main() {
    let ho = build_bundled("harmonic_oscillator", &Default::default()).expect("bundled");
    let mut cfg = RunConfig::for_model(&ho.model);
    cfg.dt = 0.01;
    cfg.max_steps = 700;
    cfg.record_every = 50;
    let trace = run(&ho.model, &ho.init, &cfg).expect("valid config");
    let xi = trace.observables.iter().position(|o| o == "x").unwrap();
    let vi = trace.observables.iter().position(|o| o == "v").unwrap();
    for row in &trace.rows {
        let x = row.values[xi].as_f64().unwrap();
        let v = row.values[vi].as_f64().unwrap();
        println!("t={:6.2} x={x:+.6} v={v:+.6} E={:.9}", row.time, 0.5 * (x * x + v * v));
    }
}
