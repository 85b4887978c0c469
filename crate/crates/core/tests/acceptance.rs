//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use causalkit::analyze::Witness;
use causalkit::cli::main_with;
use causalkit::cml::compile;
use causalkit::engine::{born_probabilities, classify_determinism, CausalModel, Determinism};
use causalkit::interp::{run, RunConfig, TerminationReason};
use causalkit::quantum::intrinsics::ca_world_from_value;
use causalkit::quantum::{build_bundled, ca_step, CaParticle, CaWorld, BUNDLED};
use causalkit::rng::{derive_seed, RngStream};
use causalkit::state::{sample_state, SystemState, Value};
use num_complex::Complex64;
use serde_json::Value as Json;

fn cli(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("causalkit")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn load(path: &str) -> CausalModel {
    compile(&std::fs::read_to_string(path).unwrap()).unwrap().model
}

fn bundled(name: &str, params: &[(&str, &str)]) -> causalkit::quantum::BundledModel {
    let p: BTreeMap<String, String> = params
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    build_bundled(name, &p).unwrap()
}

/// Frequencies from `histogram` CSV output (bin, lower, upper, count,
/// frequency), keyed by the center of each bin's range.
fn parse_histogram(csv: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            let lo: f64 = c[1].parse().unwrap();
            let hi: f64 = c[2].parse().unwrap();
            ((lo + hi) / 2.0, c[4].parse().unwrap())
        })
        .collect()
}

/// Fringe visibility over bins whose centers lie within one fringe period
/// of the axis.
fn visibility(h: &[(f64, f64)], period: f64) -> f64 {
    let central: Vec<f64> = h.iter().filter(|(y, _)| y.abs() <= period).map(|(_, f)| *f).collect();
    let max = central.iter().cloned().fold(f64::MIN, f64::max);
    let min = central.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / (max + min)
}

/// Two-path closed form for the default geometry. Each slit at `s` sends
/// amplitude proportional to `exp(-(y - s)^2 / 4w^2) exp(i k r)` to screen
/// point `y`, with `r = sqrt(L^2 + (y - s)^2)`, normalized over the screen.
/// Coherent: `|a_1 + a_2|^2`. Marked: `|a_1|^2 + |a_2|^2`.
fn two_path_oracle(coherent: bool) -> Vec<f64> {
    let (d, l, k, w, bins) = (5.0, 100.0, TAU, 60.0, 64usize);
    let ys: Vec<f64> = (0..bins).map(|j| 2.0 * j as f64 + 1.0 - bins as f64).collect();
    let slit = |s: f64| -> Vec<Complex64> {
        let env: Vec<f64> = ys.iter().map(|y| (-(y - s) * (y - s) / (4.0 * w * w)).exp()).collect();
        let z = env.iter().map(|e| e * e).sum::<f64>().sqrt();
        ys.iter()
            .zip(&env)
            .map(|(y, e)| {
                let r = (l * l + (y - s) * (y - s)).sqrt();
                Complex64::from_polar(e / z / 2f64.sqrt(), k * r)
            })
            .collect()
    };
    let (a, b) = (slit(-d / 2.0), slit(d / 2.0));
    let p: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| if coherent { (x + y).norm_sqr() } else { x.norm_sqr() + y.norm_sqr() })
        .collect();
    let total: f64 = p.iter().sum();
    p.into_iter().map(|x| x / total).collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn within_3_sigma(freq: f64, p: f64, n: f64) -> bool {
    (freq - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt()
}

type Outcome = Result<String, String>;

fn ok(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let period = 20.0;
    let mut details = Vec::new();
    let mut pass = true;
    for (detector, coherent) in [("off", true), ("on", false)] {
        let param = format!("detector={detector}");
        let (code, out, err) = cli(&[
            "histogram", "builtin:double_slit", "--param", &param, "--trials", "100000", "--seed", "11",
        ]);
        if code != 0 {
            return Err(format!("histogram failed: {err}"));
        }
        // Detector bin j covers screen coordinates [2j - 64, 2j - 62).
        let h: Vec<(f64, f64)> = parse_histogram(&out)
            .into_iter()
            .map(|(j, f)| (2.0 * j - 63.0, f))
            .collect();
        let freqs: Vec<f64> = h.iter().map(|(_, f)| *f).collect();
        let v = visibility(&h, period);
        let d = l1(&freqs, &two_path_oracle(coherent));
        let v_ok = if coherent { v > 0.8 } else { v < 0.1 };
        pass &= v_ok && d < 0.05;
        details.push(format!("detector={detector}: visibility {v:.3}, L1 {d:.4}"));
    }
    ok(pass, details.join("; "))
}

fn criterion_2() -> Outcome {
    let (code, out, err) = cli(&[
        "histogram", "fixtures/psi_once.cml", "--observables", "x", "--trials", "100000", "--seed", "5",
    ]);
    if code != 0 {
        return Err(format!("histogram failed: {err}"));
    }
    let h = parse_histogram(&out);
    let f0 = h[0].1;
    let f1 = h[1].1;
    let n = 100_000.0;
    let freq_ok = within_3_sigma(f0, 0.36, n) && within_3_sigma(f1, 0.64, n);
    let base = born_probabilities(&[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..64 {
        let g = Complex64::from_polar(1.0, j as f64 * PI / 32.0 + 0.1);
        let p = born_probabilities(&[g * 0.6, g * Complex64::new(0.0, 0.8)]).unwrap();
        worst = worst.max(l1(&p, &base));
    }
    ok(
        freq_ok && worst <= 1e-12,
        format!("frequencies ({f0:.4}, {f1:.4}); worst phase deviation {worst:.1e}"),
    )
}

fn analyze_json(path: &str, extra: &[&str]) -> Result<Json, String> {
    let mut args = vec!["analyze", path];
    args.extend_from_slice(extra);
    let (code, out, err) = cli(&args);
    if code != 0 {
        return Err(format!("{path}: exit {code}: {err}"));
    }
    serde_json::from_str(&out).map_err(|e| e.to_string())
}

fn criterion_3() -> Outcome {
    let sample = ["--strategy", "sample", "--samples", "10000", "--seed", "1"];
    let overlap = analyze_json("fixtures/overlap.cml", &sample)?;
    let m = load("fixtures/overlap.cml");
    let c = &overlap["consistency"];
    let witness = Witness::state_from_json(&m.schema, &c["witness"]).map_err(|e| e.to_string())?;
    let resampled = sample_state(&m.schema, &mut RngStream::new(c["witness"]["seed"].as_u64().unwrap()))
        .map_err(|e| e.to_string())?;
    let replay_ok = c["result"] == "fail"
        && m.applicable_laws(&witness, 1.0).unwrap().len() >= 2
        && resampled == witness;

    let partition = analyze_json("fixtures/partition.cml", &sample)?;
    let partition_ok = partition["consistency"]["result"] == "pass"
        && partition["consistency"]["statesChecked"] == 10000
        && partition["completeness"]["result"] == "passBounded";

    let trivially = analyze_json("fixtures/guard_true.cml", &sample)?;
    let trivially_ok = trivially["completeness"]["result"] == "passTrivially";

    let escape = analyze_json("fixtures/escape.cml", &sample)?;
    let e = load("fixtures/escape.cml");
    let compl = &escape["completeness"];
    let out = SystemState::from_json(&e.schema, &compl["outState"]).map_err(|e| e.to_string())?;
    let input = Witness::state_from_json(&e.schema, &compl["witness"]).map_err(|e| e.to_string())?;
    let escape_ok = compl["result"] == "fail"
        && e.validstate(&input, 1.0).unwrap()
        && !e.validstate(&out, 1.0).unwrap();

    ok(
        replay_ok && partition_ok && trivially_ok && escape_ok,
        format!(
            "overlap replay {replay_ok}, partition {partition_ok}, guard-true {trivially_ok}, escape {escape_ok}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let s = classify_determinism(&bundled("schrodinger_1d", &[]).model);
    let d = classify_determinism(&bundled("double_slit", &[]).model);
    let pass = s == Determinism::Deterministic
        && d == Determinism::Nondeterministic(vec!["Detect".to_string()]);
    ok(pass, format!("schrodinger_1d {s:?}; double_slit {d:?}"))
}

fn criterion_5() -> Outcome {
    let args = ["run", "builtin:counter", "--seed", "9", "--format", "jsonl"];
    let (c1, a, _) = cli(&args);
    let (c2, b, _) = cli(&args);
    let identical = c1 == 0 && c2 == 0 && a == b;
    let b = bundled("counter", &[]);
    let mut cfg = RunConfig::for_model(&b.model);
    cfg.dt = 0.1;
    let t = run(&b.model, &b.init, &cfg).map_err(|e| e.to_string())?;
    let times_ok = t.rows.iter().all(|r| r.time == r.step as f64 * 0.1);
    let halted = t.termination_reason == TerminationReason::Halted
        && t.steps == 10
        && t.final_state.get("n") == Some(&Value::Int(10));
    ok(
        identical && times_ok && halted,
        format!("byte-identical {identical}, steps {}, times exact {times_ok}", t.steps),
    )
}

fn leaf_weights(path: &str) -> Result<(Vec<f64>, f64, Json), String> {
    let (code, out, err) = cli(&["branch", path, "--depth", "8", "--width", "64"]);
    if code != 0 {
        return Err(err);
    }
    let tree: Json = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    fn walk(n: &Json, out: &mut Vec<f64>) {
        let kids = n["children"].as_array().unwrap();
        if kids.is_empty() {
            out.push(n["weight"].as_f64().unwrap());
        }
        kids.iter().for_each(|k| walk(k, out));
    }
    let mut w = Vec::new();
    walk(&tree["root"], &mut w);
    let pruned = tree["prunedMass"].as_f64().unwrap();
    Ok((w, pruned, tree))
}

fn monte_carlo(model: &CausalModel, runs: u64, outcome: impl Fn(&SystemState) -> usize, k: usize) -> Vec<f64> {
    let mut counts = vec![0.0; k];
    let mut cfg = RunConfig::for_model(model);
    cfg.observables.clear();
    for t in 0..runs {
        cfg.seed = derive_seed(3, t);
        let init = causalkit::interp::initial_state(model, cfg.seed).unwrap();
        let trace = run(model, &init, &cfg).unwrap();
        counts[outcome(&trace.final_state)] += 1.0;
    }
    counts.iter().map(|c| c / runs as f64).collect()
}

fn criterion_6() -> Outcome {
    let (psi, psi_pruned, _) = leaf_weights("fixtures/psi_once.cml")?;
    let (coins, coins_pruned, _) = leaf_weights("fixtures/two_coins.cml")?;
    let psi_ok = psi.len() == 2 && (psi[0] - 0.36).abs() < 1e-12 && (psi[1] - 0.64).abs() < 1e-12;
    let coins_ok = coins.len() == 4 && coins.iter().all(|w| (w - 0.25).abs() < 1e-12);
    let mass_ok = (psi.iter().sum::<f64>() + psi_pruned - 1.0).abs() <= 1e-12
        && (coins.iter().sum::<f64>() + coins_pruned - 1.0).abs() <= 1e-12;

    let int = |s: &SystemState, f: &str| s.get(f).and_then(Value::as_int).unwrap() as usize;
    let n = 10_000;
    let mc_psi = monte_carlo(&load("fixtures/psi_once.cml"), n, |s| int(s, "x"), 2);
    let mc_coins = monte_carlo(&load("fixtures/two_coins.cml"), n, |s| 2 * int(s, "a") + int(s, "b"), 4);
    let mc_ok = mc_psi.iter().zip(&psi).all(|(f, p)| within_3_sigma(*f, *p, n as f64))
        && mc_coins.iter().zip(&coins).all(|(f, p)| within_3_sigma(*f, *p, n as f64));

    // A tight width bound still conserves mass once pruned lineages count.
    let (bounded, bounded_pruned, _) = {
        let (code, out, err) = cli(&["branch", "fixtures/two_coins.cml", "--width", "3"]);
        if code != 0 {
            return Err(err);
        }
        let tree: Json = serde_json::from_str(&out).unwrap();
        let mut w = Vec::new();
        fn walk(n: &Json, out: &mut Vec<f64>) {
            let kids = n["children"].as_array().unwrap();
            if kids.is_empty() && n["termination"]["kind"] != "Pruned" {
                out.push(n["weight"].as_f64().unwrap());
            }
            kids.iter().for_each(|k| walk(k, out));
        }
        walk(&tree["root"], &mut w);
        (w, tree["prunedMass"].as_f64().unwrap(), ())
    };
    let pruned_ok = (bounded.iter().sum::<f64>() + bounded_pruned - 1.0).abs() <= 1e-12 && bounded_pruned > 0.0;

    ok(
        psi_ok && coins_ok && mass_ok && mc_ok && pruned_ok,
        format!(
            "psi leaves {psi:?}; coin leaves {}; mass conserved {mass_ok}/{pruned_ok}; MC psi {mc_psi:?} coins {mc_coins:?}",
            coins.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    // Harmonic oscillator over ten periods.
    let ho = bundled("harmonic_oscillator", &[]);
    let mut cfg = RunConfig::for_model(&ho.model);
    cfg.dt = 0.001;
    let period_steps = (TAU / cfg.dt).round() as u64;
    cfg.max_steps = 10 * period_steps;
    let t = run(&ho.model, &ho.init, &cfg).map_err(|e| e.to_string())?;
    let col = |name: &str| t.observables.iter().position(|o| o == name).unwrap();
    let (xi, vi) = (col("x"), col("v"));
    let energy = |r: &causalkit::interp::TraceRow| {
        let x = r.values[xi].as_f64().unwrap();
        let v = r.values[vi].as_f64().unwrap();
        0.5 * v * v + 0.5 * x * x
    };
    let e0 = energy(&t.rows[0]);
    let drift = t.rows.iter().map(|r| (energy(r) - e0).abs() / e0).fold(0.0, f64::max);
    let x_period = t.rows[period_steps as usize].values[xi].as_f64().unwrap();
    let ho_ok = drift < 1e-4 && (x_period - 1.0).abs() < 1e-3;

    // Schrodinger norm over 1000 steps, and spreading of the free packet.
    let sc = bundled("schrodinger_1d", &[]);
    let mut cfg = RunConfig::for_model(&sc.model);
    cfg.max_steps = 1000;
    cfg.observables.clear();
    cfg.snapshots = true;
    let t = run(&sc.model, &sc.init, &cfg).map_err(|e| e.to_string())?;
    let grid = |s: &SystemState| match s.get("psi") {
        Some(Value::Cgrid(g)) => g.clone(),
        _ => panic!("psi is a grid"),
    };
    let norm0 = grid(&sc.init).norm2();
    let norm_drift = t
        .rows
        .iter()
        .map(|r| (grid(r.state.as_ref().unwrap()).norm2() - norm0).abs())
        .fold(0.0, f64::max);
    // |psi|^2 variance against sigma^2 (1 + (t / 2 sigma^2)^2) with
    // hbar = m = 1 and sigma = 1, checked while the packet is far from the
    // periodic boundary.
    let mut worst_var: f64 = 0.0;
    for step in [50usize, 100, 200] {
        let g = grid(t.rows[step].state.as_ref().unwrap());
        let n = g.len() as f64;
        let xs: Vec<f64> = (0..g.len()).map(|j| (j as f64 - n / 2.0) * g.dx).collect();
        let p: Vec<f64> = g.data.iter().map(|a| a.norm_sqr() * g.dx).collect();
        let mass: f64 = p.iter().sum();
        let mean: f64 = xs.iter().zip(&p).map(|(x, w)| x * w).sum::<f64>() / mass;
        let var: f64 = xs.iter().zip(&p).map(|(x, w)| (x - mean).powi(2) * w).sum::<f64>() / mass;
        let time = step as f64 * cfg.dt;
        let expected = 1.0 + (time / 2.0).powi(2);
        worst_var = worst_var.max((var - expected).abs() / expected);
    }
    ok(
        ho_ok && norm_drift < 1e-8 && worst_var < 0.01,
        format!(
            "HO energy drift {drift:.2e}, x(2pi) {x_period:.6}; norm drift {norm_drift:.2e}; variance error {:.3}%",
            worst_var * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let m = bundled("entangled_pair", &[]);
    let mut cfg = RunConfig::for_model(&m.model);
    cfg.observables.clear();
    let mut exceptions = 0;
    let mut ups = 0;
    let n = 10_000;
    for t in 0..n {
        cfg.seed = derive_seed(8, t);
        let tr = run(&m.model, &m.init, &cfg).map_err(|e| e.to_string())?;
        let a = tr.final_state.get("spin_a").and_then(Value::as_int).unwrap();
        let b = tr.final_state.get("spin_b").and_then(Value::as_int).unwrap();
        if a == 0 || a != -b {
            exceptions += 1;
        }
        ups += i64::from(a == 1);
    }
    ok(
        exceptions == 0,
        format!("{exceptions} exceptions in {n} collapses; spin_a = +1 in {ups}"),
    )
}

fn random_world(rng: &mut RngStream) -> CaWorld {
    let width = 5 + rng.below(36) as usize;
    let phi = (0..width).map(|_| rng.uniform()).collect();
    let count = rng.below(9) as i64;
    let particles = (0..count)
        .map(|id| CaParticle {
            id,
            pos: rng.below(width as u64) as i64,
            vel: rng.below(7) as i64 - 3,
            species: rng.below(2) as i64,
        })
        .collect();
    CaWorld { phi, particles }
}

fn criterion_9() -> Outcome {
    let mut rng = RngStream::new(99);
    let mut violations = 0;
    for _ in 0..1000 {
        let mut w = random_world(&mut rng);
        let p0: i64 = w.particles.iter().map(|p| p.vel).sum();
        for _ in 0..100 {
            w = ca_step(&w, 0.25).map_err(|e| e.to_string())?;
            if w.particles.iter().map(|p| p.vel).sum::<i64>() != p0 {
                violations += 1;
            }
        }
    }

    let fixture: Json =
        serde_json::from_str(&std::fs::read_to_string("fixtures/ca_head_on.json").unwrap()).unwrap();
    let expected = fixture["steps"].as_array().unwrap();
    let m = bundled("qftca_toy", &[("width", "10")]);
    let mut cfg = RunConfig::for_model(&m.model);
    cfg.max_steps = expected.len() as u64 - 1;
    cfg.observables.clear();
    cfg.snapshots = true;
    let t = run(&m.model, &m.init, &cfg).map_err(|e| e.to_string())?;
    let mut mismatches = 0;
    for (row, want) in t.rows.iter().zip(expected) {
        let world = ca_world_from_value(row.state.as_ref().unwrap().get("world").unwrap()).unwrap();
        let mut got: Vec<[i64; 3]> = world.particles.iter().map(|p| [p.id, p.pos, p.vel]).collect();
        got.sort();
        let want: Vec<[i64; 3]> = want
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                let v: Vec<i64> = p.as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        mismatches += usize::from(got != want);
    }
    let rows_ok = t.rows.len() == expected.len();
    ok(
        violations == 0 && mismatches == 0 && rows_ok,
        format!(
            "{violations} momentum violations over 1000 worlds x 100 steps; head-on mismatches {mismatches} of {}",
            expected.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut files: Vec<_> = std::fs::read_dir("fixtures/broken")
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cml"))
        .collect();
    files.sort();
    let mut bad = Vec::new();
    for f in &files {
        let path = f.to_str().unwrap();
        let src = std::fs::read_to_string(f).unwrap();
        let expect = src.lines().next().unwrap().trim_start_matches("// expect: ");
        let (code_name, line) = expect.split_once(' ').unwrap();
        let (code, _, err) = cli(&["run", path]);
        let first = err.lines().next().unwrap_or("");
        let prefix = format!("{path}:{line}:");
        let located = first.starts_with(&prefix)
            && first[prefix.len()..].split(':').next().is_some_and(|c| c.parse::<u32>().is_ok_and(|c| c > 0));
        if code != 1 || !located || !first.contains(&format!("error[{code_name}]")) {
            bad.push(format!("{path}: exit {code}: {first}"));
        }
    }
    let (syntax_code, _, syntax_err) = cli(&["run", "fixtures/syntax_error.cml"]);
    let syntax_ok = syntax_code == 1 && syntax_err.starts_with("fixtures/syntax_error.cml:3:17: ");

    let mut failing_models = Vec::new();
    for name in BUNDLED {
        let (code, out, err) = cli(&["run", &format!("builtin:{name}"), "--format", "jsonl"]);
        let meta: Json = out.lines().last().and_then(|l| serde_json::from_str(l).ok()).unwrap_or(Json::Null);
        let reason = &meta["terminationReason"]["kind"];
        if code != 0 || !(reason == "Halted" || reason == "MaxSteps") {
            failing_models.push(format!("{name}: {err}"));
        }
    }
    ok(
        files.len() >= 20 && bad.is_empty() && syntax_ok && failing_models.is_empty(),
        format!(
            "{} broken fixtures, {} misreported {bad:?}; syntax_error located {syntax_ok}; bundled failures {failing_models:?}",
            files.len(),
            bad.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("double-slit interference and which-path contrast", criterion_1),
        ("Born weights and global-phase invariance", criterion_2),
        ("consistency and completeness checks", criterion_3),
        ("determinism classification", criterion_4),
        ("interpreter loop and reproducible traces", criterion_5),
        ("many-worlds branching", criterion_6),
        ("integrator and wave-equation numerics", criterion_7),
        ("entangled pair anti-correlation", criterion_8),
        ("cellular automaton momentum and head-on trace", criterion_9),
        ("front-end diagnostics and bundled models", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let r = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {} {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
