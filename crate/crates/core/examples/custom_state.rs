//! Builds a state schema by hand, samples a state within its domains, and
//! round-trips it through JSON.

use std::sync::Arc;

use causalkit::rng::RngStream;
use causalkit::state::{sample_state, StateSchema, SystemState, TypeDesc, Value};

fn main() {
    let schema = Arc::new(
        StateSchema::builder()
            .record("Body", vec![("x".into(), TypeDesc::real().in_range(-1.0, 1.0)), ("m".into(), TypeDesc::real().in_range(0.5, 2.0))])
            .field("bodies", TypeDesc::list(TypeDesc::record("Body"), Some(2)))
            .field("charge", TypeDesc::int().in_set(vec![Value::Int(-1), Value::Int(1)]))
            .time_domain(0.0, 10.0)
            .build()
            .expect("well-formed schema"),
    );
    let state = sample_state(&schema, &mut RngStream::new(5)).expect("sampleable");
    let json = serde_json::to_string_pretty(&state).expect("serializable");
    println!("{json}");
    let back = SystemState::from_json(&schema, &serde_json::from_str(&json).unwrap()).expect("valid");
    assert_eq!(back, state);
    let flipped = state.with_value("charge", Value::Int(-state.get("charge").and_then(Value::as_int).unwrap())).unwrap();
    println!("charge flipped: {:?}", flipped.get("charge"));
}
