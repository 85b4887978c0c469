//! Splits a run into weighted worlds at each discrete random draw.

use causalkit::cml::compile;
use causalkit::interp::{branch_run, initial_state, BranchConfig, RunConfig};

const COINS: &str = "model Coins {
    state { a: int in {0, 1}; b: int in {0, 1}; k: int in [0, 2]; }
    init { a = 0; b = 0; k = 0; }
    halt when k == 2;
    law First { when k == 0; then { a = random({0, 1}, WEIGHTS(0.3, 0.7)); k = 1; } }
    law Second { when k == 1; then { b = random({0, 1}, FLAT); k = 2; } }
}";

fn main() {
    let model = compile(COINS).expect("compiles").model;
    let init = initial_state(&model, 0).expect("init succeeds");
    let cfg = BranchConfig { run: RunConfig::for_model(&model), depth: 4, width: 16 };
    let tree = branch_run(&model, &init, &cfg).expect("branchable");
    for leaf in tree.live_leaves() {
        println!("{:>8} weight {:.3} a={:?} b={:?}", leaf.outcome.as_deref().unwrap_or("root"), leaf.weight, leaf.state.get("a"), leaf.state.get("b"));
    }
    let total: f64 = tree.live_leaves().iter().map(|l| l.weight).sum();
    println!("total {total:.17} pruned {}", tree.pruned_mass);
}
