//! Collapses the bundled singlet pair many times; the spins always oppose.

use causalkit::interp::{run, RunConfig};
use causalkit::quantum::build_bundled;
use causalkit::rng::derive_seed;
use causalkit::state::Value;

fn main() {
    let m = build_bundled("entangled_pair", &Default::default()).expect("bundled");
    let mut cfg = RunConfig::for_model(&m.model);
    cfg.observables.clear();
    let (mut up, mut down) = (0, 0);
    for t in 0..1000 {
        cfg.seed = derive_seed(1, t);
        let trace = run(&m.model, &m.init, &cfg).expect("valid config");
        let a = trace.final_state.get("spin_a").and_then(Value::as_int).unwrap();
        let b = trace.final_state.get("spin_b").and_then(Value::as_int).unwrap();
        assert_eq!(a, -b);
        if a == 1 { up += 1 } else { down += 1 }
    }
    println!("spin_a up {up}, down {down}; spin_b always opposite");
}
