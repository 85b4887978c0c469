use proptest::prelude::*;

use causalkit::cml::pretty::expr_str;
use causalkit::cml::{compile, parse_expr};
use causalkit::interp::{branch_run, format_g17, BranchConfig, RunConfig, TerminationReason};
use causalkit::quantum::schrodinger::crank_nicolson_step;
use causalkit::quantum::{ca_step, CaParticle, CaWorld};
use causalkit::rng::RngStream;
use causalkit::state::{sample_state, CGrid, StateSchema, SystemState, TypeDesc, Value};
use num_complex::Complex64;
use std::sync::Arc;

/// Two consecutive draws over `weights.len()` outcomes.
fn weighted_model(weights: &[f64]) -> String {
    let values: Vec<String> = (0..weights.len()).map(|i| i.to_string()).collect();
    let ws: Vec<String> = weights.iter().map(|w| format!("{w:?}")).collect();
    let draw = format!("random({{{}}}, WEIGHTS({}))", values.join(", "), ws.join(", "));
    format!(
        "model W {{ state {{ a: int; b: int; k: int; }} init {{ a = 0; b = 0; k = 0; }} halt when k == 2; \
         law One {{ when k == 0; then {{ a = {draw}; k = 1; }} }} \
         law Two {{ when k == 1; then {{ b = {draw}; k = 2; }} }} }}"
    )
}

fn world() -> impl Strategy<Value = CaWorld> {
    (3usize..30).prop_flat_map(|w| {
        (
            prop::collection::vec(0.0f64..1.0, w),
            prop::collection::vec((0..w as i64, -4i64..=4, 0i64..3), 0..10),
        )
            .prop_map(|(phi, ps)| CaWorld {
                phi,
                particles: ps
                    .into_iter()
                    .enumerate()
                    .map(|(id, (pos, vel, species))| CaParticle {
                        id: id as i64,
                        pos,
                        vel,
                        species,
                    })
                    .collect(),
            })
    })
}

fn expr_src() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..100).prop_map(|n| n.to_string()),
        (0.0f64..10.0).prop_map(|x| format!("{x:?}")),
        prop::sample::select(vec!["x", "y", "flag", "true", "false", "dt", "time"]).prop_map(String::from),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^", "<", "==", "&&", "||"]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("!({a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("max({a}, {b})")),
            prop::collection::vec(inner, 0..3).prop_map(|xs| format!("[{}]", xs.join(", "))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branching_conserves_weight(raw in prop::collection::vec(0.05f64..1.0, 2..5)) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let m = compile(&weighted_model(&weights)).unwrap().model;
        let s0 = m.init_state(&mut RngStream::new(0)).unwrap();
        let cfg = BranchConfig { run: RunConfig::for_model(&m), depth: 4, width: 64 };
        let tree = branch_run(&m, &s0, &cfg).unwrap();
        prop_assert!(tree.root.weights_conserved(1e-12));
        let leaves = tree.live_leaves();
        prop_assert_eq!(leaves.len(), weights.len() * weights.len());
        let sum: f64 = leaves.iter().map(|l| l.weight).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(leaves.iter().all(|l| l.termination == Some(TerminationReason::Halted)));
    }

    #[test]
    fn pruned_mass_accounts_for_dropped_lineages(
        raw in prop::collection::vec(0.05f64..1.0, 2..5),
        width in 1usize..6,
    ) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let m = compile(&weighted_model(&weights)).unwrap().model;
        let s0 = m.init_state(&mut RngStream::new(0)).unwrap();
        let cfg = BranchConfig { run: RunConfig::for_model(&m), depth: 4, width };
        let tree = branch_run(&m, &s0, &cfg).unwrap();
        let live: f64 = tree.live_leaves().iter().map(|l| l.weight).sum();
        prop_assert!((live + tree.pruned_mass - 1.0).abs() <= 1e-12);
        prop_assert!(tree.live_leaves().len() <= width.max(1) * weights.len());
        prop_assert!(tree.root.weights_conserved(1e-12));
    }

    #[test]
    fn ca_momentum_is_conserved(w in world(), alpha in 0.0f64..0.5, steps in 1usize..40) {
        let p0 = w.momentum();
        let phi0: f64 = w.phi.iter().sum();
        let mut cur = w;
        for _ in 0..steps {
            cur = ca_step(&cur, alpha).unwrap();
            prop_assert_eq!(cur.momentum(), p0);
        }
        let phi1: f64 = cur.phi.iter().sum();
        prop_assert!((phi1 - phi0).abs() <= 1e-9 * phi0.abs().max(1.0));
    }

    #[test]
    fn g17_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let s = format_g17(x);
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits(), "{}", s);
    }

    #[test]
    fn crank_nicolson_is_unitary(
        cells in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..10.0), 4..64),
        dt in 0.001f64..0.5,
    ) {
        let psi = CGrid::new(cells.iter().map(|&(a, b, _)| Complex64::new(a, b)).collect(), 0.1);
        let v: Vec<f64> = cells.iter().map(|c| c.2).collect();
        let n0 = psi.norm2();
        prop_assume!(n0 > 1e-6);
        let mut cur = psi;
        for _ in 0..20 {
            cur = crank_nicolson_step(&cur, &v, dt, 1.0, 1.0).unwrap();
        }
        prop_assert!((cur.norm2() - n0).abs() <= 1e-12 * n0);
    }

    #[test]
    fn sampled_states_round_trip_through_json(seed in any::<u64>()) {
        let schema = Arc::new(
            StateSchema::builder()
                .record("P", vec![("x".into(), TypeDesc::real().in_range(-1.0, 1.0)), ("n".into(), TypeDesc::int().in_range(0.0, 9.0))])
                .field("b", TypeDesc::bool())
                .field("ps", TypeDesc::list(TypeDesc::record("P"), Some(3)))
                .field("v", TypeDesc::vector(4).in_range(0.0, 2.0))
                .field("c", TypeDesc::int().in_set(vec![Value::Int(-1), Value::Int(1)]))
                .time_domain(0.0, 5.0)
                .build()
                .unwrap(),
        );
        let s = sample_state(&schema, &mut RngStream::new(seed)).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        let back = SystemState::from_json(&schema, &json).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn expressions_survive_printing(src in expr_src()) {
        let a = parse_expr(&src).unwrap();
        let printed = expr_str(&a);
        let b = parse_expr(&printed).unwrap();
        prop_assert_eq!(a, b, "{} -> {}", src, printed);
    }
}
