use std::collections::BTreeMap;

use causalkit::cml::{compile, parse, pretty};
use causalkit::quantum::{build_bundled, BUNDLED};

#[test]
fn bundled_sources_print_and_reparse() {
    for name in BUNDLED {
        let b = build_bundled(name, &BTreeMap::new()).unwrap();
        let ast = parse(&b.source).unwrap();
        let printed = pretty(&ast);
        assert_eq!(parse(&printed).unwrap(), ast, "{name}");
    }
}

#[test]
fn model_files_compile_without_warnings() {
    let mut seen = 0;
    for entry in std::fs::read_dir("models").unwrap() {
        let path = entry.unwrap().path();
        let src = std::fs::read_to_string(&path).unwrap();
        let c = compile(&src).unwrap_or_else(|d| panic!("{}: {d:?}", path.display()));
        assert!(c.warnings.is_empty(), "{}: {:?}", path.display(), c.warnings);
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn good_fixtures_compile() {
    for name in [
        "overlap", "partition", "guard_true", "escape", "swap", "psi_once", "two_coins", "gaussian_walk",
    ] {
        let src = std::fs::read_to_string(format!("fixtures/{name}.cml")).unwrap();
        compile(&src).unwrap_or_else(|d| panic!("{name}: {d:?}"));
    }
}

#[test]
fn broken_fixtures_report_their_expected_code_without_panicking() {
    let mut n = 0;
    for entry in std::fs::read_dir("fixtures/broken").unwrap() {
        let path = entry.unwrap().path();
        let src = std::fs::read_to_string(&path).unwrap();
        let expect = src.lines().next().unwrap().trim_start_matches("// expect: ");
        let (code, line) = expect.split_once(' ').unwrap();
        let diags = compile(&src).expect_err(path.to_str().unwrap());
        let first = diags.iter().find(|d| d.is_error()).unwrap();
        assert_eq!(first.code, code, "{}", path.display());
        assert_eq!(first.loc.line.to_string(), line, "{}", path.display());
        assert!(first.loc.col >= 1);
        n += 1;
    }
    assert!(n >= 20);
}

#[test]
fn swap_reads_the_pre_state() {
    let src = std::fs::read_to_string("fixtures/swap.cml").unwrap();
    let m = compile(&src).unwrap().model;
    let s0 = m.init_state(&mut causalkit::rng::RngStream::new(0)).unwrap();
    let cfg = causalkit::interp::RunConfig::for_model(&m);
    let t = causalkit::interp::run(&m, &s0, &cfg).unwrap();
    let pairs: Vec<(String, String)> = t
        .rows
        .iter()
        .map(|r| (r.values[0].to_string(), r.values[1].to_string()))
        .collect();
    assert_eq!(pairs[0], ("1".into(), "2".into()));
    assert_eq!(pairs[1], ("2".into(), "1".into()));
    assert_eq!(pairs[4], ("1".into(), "2".into()));
}
