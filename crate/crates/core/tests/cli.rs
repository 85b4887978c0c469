use causalkit::cli::main_with;

fn cli(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("causalkit")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn syntax_error_is_located_and_exits_1() {
    let (code, out, err) = cli(&["run", "fixtures/syntax_error.cml"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.starts_with("fixtures/syntax_error.cml:3:17: error[Syntax]"), "{err}");
}

#[test]
fn overlap_analysis_reports_fail_with_exit_0() {
    let (code, out, _) = cli(&[
        "analyze", "fixtures/overlap.cml", "--strategy", "sample", "--samples", "10000", "--seed", "1",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["consistency"]["result"], "fail");
    assert_eq!(v["consistency"]["laws"], serde_json::json!(["Left", "Right"]));
    assert!(v["consistency"]["witness"]["seed"].is_u64());
}

#[test]
fn enumerate_and_trace_strategies() {
    let (code, out, _) = cli(&["analyze", "fixtures/swap.cml", "--strategy", "enumerate"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["strategy"]["kind"], "enumerate");
    // k = 4 halts; the other 4 * 4 * 4 states are checked.
    assert_eq!(v["consistency"]["statesChecked"], 64);

    let (code, out, _) = cli(&["analyze", "builtin:double_slit", "--strategy", "sample"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["strategy"]["kind"], "trace");
    assert_eq!(v["computabilityNotes"]["unsampleableFields"], serde_json::json!(["beam"]));
    assert_eq!(v["determinism"]["laws"], serde_json::json!(["Detect"]));
}

#[test]
fn identical_arguments_give_identical_bytes() {
    for args in [
        &["run", "fixtures/gaussian_walk.cml", "--seed", "4"][..],
        &["run", "builtin:qftca_toy", "--steps", "20", "--format", "jsonl"][..],
        &["histogram", "builtin:double_slit", "--trials", "500", "--seed", "2"][..],
        &["branch", "fixtures/two_coins.cml"][..],
        &["analyze", "fixtures/partition.cml", "--samples", "300", "--seed", "6"][..],
    ] {
        let a = cli(args);
        let b = cli(args);
        assert_eq!(a.0, 0, "{args:?}: {}", a.2);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn seeds_change_stochastic_traces() {
    let a = cli(&["run", "fixtures/gaussian_walk.cml", "--seed", "1"]).1;
    let b = cli(&["run", "fixtures/gaussian_walk.cml", "--seed", "2"]).1;
    assert_ne!(a, b);
}

#[test]
fn histogram_frequencies_sum_to_one() {
    let (code, out, _) = cli(&["histogram", "builtin:double_slit", "--trials", "777", "--seed", "3"]);
    assert_eq!(code, 0);
    let mut total = 0.0;
    let mut count = 0;
    for line in out.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        count += cols[3].parse::<u64>().unwrap();
        total += cols[4].parse::<f64>().unwrap();
    }
    assert_eq!(count, 777);
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn single_trial_fills_one_bin() {
    let (code, out, _) = cli(&["histogram", "builtin:double_slit", "--trials", "1"]);
    assert_eq!(code, 0);
    let nonzero: Vec<&str> = out.lines().skip(1).filter(|l| l.split(',').nth(3) != Some("0")).collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0].split(',').nth(3), Some("1"));
}

#[test]
fn histogram_with_explicit_bins_over_a_real_outcome() {
    let (code, out, _) = cli(&[
        "histogram", "fixtures/gaussian_walk.cml", "--observables", "x", "--trials", "200", "--bins", "8",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 9);
    assert!(out.starts_with("bin,lower,upper,count,frequency\n"));
}

#[test]
fn unknown_observable() {
    let (code, _, err) = cli(&["histogram", "builtin:counter", "--observables", "nope"]);
    assert_eq!(code, 2);
    assert!(err.contains("UnknownObservable"), "{err}");
    let (code, _, err) = cli(&["run", "builtin:counter", "--observables", "n, m"]);
    assert_eq!(code, 2);
    assert!(err.contains("UnknownObservable"), "{err}");
}

#[test]
fn observables_and_stride() {
    let (code, out, _) = cli(&[
        "run", "builtin:counter", "--observables", "n * 2, n >= 5", "--record-every", "5", "--dt", "0.5",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "step,time,n * 2,n >= 5\n0,0,0,false\n5,2.5,10,true\n10,5,20,true\n");
}

#[test]
fn out_flag_writes_a_file() {
    let dir = std::env::temp_dir().join(format!("causalkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trace.jsonl");
    let p = path.to_str().unwrap();
    let (code, out, _) = cli(&["run", "builtin:counter", "--format", "jsonl", "--out", p]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["metadata"], true);
    assert_eq!(last["terminationReason"]["kind"], "Halted");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runtime_errors_exit_1_after_writing_the_trace() {
    let (code, out, err) = cli(&["run", "fixtures/escape.cml", "--steps", "5"]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 3);
    assert!(err.contains("NoApplicableLaw"), "{err}");
    let (code, _, err) = cli(&["run", "fixtures/overlap.cml", "--steps", "5"]);
    assert_eq!(code, 1);
    assert!(err.contains("MultipleApplicable"), "{err}");
    let (code, _, _) = cli(&["run", "fixtures/overlap.cml", "--steps", "5", "--mode", "first-match"]);
    assert_eq!(code, 0);
}

#[test]
fn continuous_draws_cannot_branch() {
    let (code, _, err) = cli(&["branch", "fixtures/gaussian_walk.cml"]);
    assert_eq!(code, 1);
    assert!(err.contains("Kick"), "{err}");
}

#[test]
fn branch_of_double_slit_has_one_leaf_per_reachable_bin() {
    let (code, out, _) = cli(&["branch", "builtin:double_slit", "--param", "bins=8", "--param", "width=5"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let kids = v["root"]["children"].as_array().unwrap();
    let total: f64 = kids.iter().map(|k| k["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(kids.iter().all(|k| k["outcome"].as_str().unwrap().starts_with("bin")));
}

#[test]
fn bundled_parameters_are_validated() {
    assert_eq!(cli(&["run", "builtin:double_slit", "--param", "detector=maybe"]).0, 2);
    assert_eq!(cli(&["run", "builtin:qftca_toy", "--param", "alpha=0.9"]).0, 2);
    assert_eq!(cli(&["run", "builtin:qftca_toy", "--param", "width=12", "--steps", "5"]).0, 0);
    assert_eq!(cli(&["run", "fixtures/partition.cml", "--param", "a=1"]).0, 2);
}

#[test]
fn help_and_missing_files() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["run", "analyze", "branch", "list-models", "histogram"] {
        assert!(out.contains(sub), "{sub}");
    }
    assert_eq!(cli(&["run", "fixtures/does_not_exist.cml"]).0, 2);
    assert_eq!(cli(&["analyze", "fixtures/partition.cml", "--strategy", "guess"]).0, 2);
    assert_eq!(cli(&["run", "builtin:counter", "--dt", "-1"]).0, 2);
}
