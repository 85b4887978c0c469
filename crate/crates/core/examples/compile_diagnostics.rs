//! Renders compiler diagnostics for a model with two mistakes.

use causalkit::cml::compile;

const BROKEN: &str = "model Broken {
    state { n: int; ok: bool; }
    init { n = 0; ok = true; }
    law Bump { when n + 1; then { n = ok + 1; } }
}";

fn main() {
    match compile(BROKEN) {
        Ok(_) => println!("unexpectedly compiled"),
        Err(diags) => diags.iter().for_each(|d| println!("{}", d.render("broken.cml"))),
    }
}
