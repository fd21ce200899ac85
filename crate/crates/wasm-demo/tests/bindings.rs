use serde_json::Value;
use tmef_wasm_demo::{efficiency_table, estimate_run, info_curve};

#[test]
fn curve_has_requested_length_and_alpha_two_peaks_at_the_origin() {
    let ys = info_curve(2.0, 1e-3, 3.0, 50);
    assert_eq!(ys.len(), 50);
    assert!((ys[0] - 0.5).abs() < 1e-6);
    assert!(ys.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(info_curve(1.5, 0.4, 3.0, 1).len(), 1);
}

#[test]
fn table_has_eight_rows() {
    let rows: Vec<Value> = serde_json::from_str(&efficiency_table()).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0]["limit"], Value::Bool(true));
}

#[test]
fn estimate_run_is_reproducible() {
    let a = estimate_run(1.5, 0.6, 500, 3, 2).unwrap();
    assert_eq!(a, estimate_run(1.5, 0.6, 500, 3, 2).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    let phi = v["phi_hat"].as_f64().unwrap();
    assert!((phi - 0.6).abs() < 5.0 * v["std_error"].as_f64().unwrap());
    assert!(estimate_run(2.5, 0.6, 500, 3, 1).is_err());
}
