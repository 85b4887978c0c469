//! Analyzes two models: one whose guards overlap and one whose guards
//! partition the state space.

use causalkit::analyze::{analyze, AnalyzeConfig, CheckStrategy};
use causalkit::cml::compile;

const OVERLAP: &str = "model Overlap {
    state { x: real in [-2, 2]; }
    init { x = 0.0; }
    law Left { when x < 1.0; then { x = x - 0.5; } }
    law Right { when x > -1.0; then { x = x + 0.5; } }
}";

const PARTITION: &str = "model Partition {
    state { x: real in [-2, 2]; }
    init { x = 0.0; }
    law Negative { when x < 0.0; then { x = x / 2.0; } }
    law NonNegative { when x >= 0.0; then { x = x / 2.0; } }
}";

fn main() {
    for src in [OVERLAP, PARTITION] {
        let model = compile(src).expect("compiles").model;
        let cfg = AnalyzeConfig::new(&model, CheckStrategy::Sample { count: 2000, seed: 1 });
        let report = analyze(&model, &cfg).expect("analysis runs");
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    }
}
