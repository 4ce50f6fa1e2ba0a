use polytree_wasm::{certify, gadget_view, learn, learn_view, sample_size};

#[test]
fn certify_returns_report() {
    let v = gadget_view(0.2).unwrap();
    assert!(v.passed);
    assert_eq!(v.atoms.len(), 8);
    let json: serde_json::Value = serde_json::from_str(&certify(0.2)).unwrap();
    assert_eq!(json["passed"], true);
}

#[test]
fn bad_alpha_is_an_error_object() {
    let json: serde_json::Value = serde_json::from_str(&certify(0.9)).unwrap();
    assert!(json["error"].as_str().unwrap().contains("alpha"));
}

#[test]
fn oracle_learning_recovers_truth() {
    let v = learn_view(8, 2, 0, 0.1, 0.0025, 7).unwrap();
    assert_eq!(v.learned_arcs.len(), 7);
    assert!(v.kl_total_bits <= 0.1);
    assert_eq!(v.trace.len(), 7);
}

#[test]
fn empirical_learning_runs() {
    let json: serde_json::Value = serde_json::from_str(&learn(6, 2, 2000, 0.1, 0.5, 3)).unwrap();
    assert_eq!(json["learned_arcs"].as_array().unwrap().len(), 5);
    assert!(json["kl_total_bits"].as_f64().unwrap() >= 0.0);
}

#[test]
fn oversized_requests_are_refused() {
    let json: serde_json::Value = serde_json::from_str(&learn(u32::MAX as usize, 2, 0, 0.1, 0.5, 1)).unwrap();
    assert!(json["error"].as_str().unwrap().contains("limits"));
}

#[test]
fn sample_size_is_a_decimal_string() {
    assert_eq!(sample_size(2, 2, 1, 0.1, 0.1), "\"30061127305\"");
}
