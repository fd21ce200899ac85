//! Browser bindings: information curves, the stable efficiency table and a
//! simulate-then-estimate run. Results cross the boundary as JSON strings.

use serde::Serialize;
use tmef::models::{simulate, stable_efficiency_table, stable_information_factor, SimSpec, StableAr1};
use tmef::selection::{greedy_select, two_step_iterate, SelectionConfig};
use tmef::solver::preliminary_estimate;
use tmef::{information_matrix, KernelFamily};
use wasm_bindgen::prelude::*;

/// `factor(t, alpha)` on `m` evenly spaced points of `[lo, hi]`.
#[wasm_bindgen]
pub fn info_curve(alpha: f64, lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let m = m.max(1);
    (0..m)
        .map(|i| {
            let t = if m == 1 { lo } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 };
            stable_information_factor(t, alpha)
        })
        .collect()
}

#[wasm_bindgen]
pub fn efficiency_table() -> String {
    serde_json::to_string(&stable_efficiency_table()).expect("json")
}

#[derive(Serialize)]
struct Run {
    series: Vec<f64>,
    points: Vec<f64>,
    trace: Vec<f64>,
    phi_hat: f64,
    std_error: f64,
    converged: bool,
}

pub fn estimate_run(alpha: f64, phi: f64, n: usize, seed: u64, k: usize) -> Result<String, String> {
    let model = StableAr1::new(alpha).map_err(|e| e.to_string())?;
    let series = simulate(&model, &SimSpec::new(vec![phi], n, seed)).map_err(|e| e.to_string())?;
    let theta0 = preliminary_estimate(&model, &series).map_err(|e| e.to_string())?;
    let cfg = SelectionConfig { k_max: k.max(1), rel_gain_tol: 0.0, refresh_once: true, ..Default::default() };
    let r = two_step_iterate(&model, KernelFamily::CfReal, &theta0, &series, &cfg, None).map_err(|e| e.to_string())?;
    let (_, trace) = greedy_select(&model, KernelFamily::CfReal, &r.theta, &series, &cfg).map_err(|e| e.to_string())?;
    let info = information_matrix(&model, &r.points, &r.theta, &series).map_err(|e| e.to_string())?;
    let run = Run {
        series: series.values().iter().take(400).copied().collect(),
        points: r.points.points().to_vec(),
        trace: trace.entries.iter().map(|e| e.info).collect(),
        phi_hat: r.theta[0],
        std_error: 1.0 / info.size().sqrt(),
        converged: r.converged,
    };
    Ok(serde_json::to_string(&run).expect("json"))
}

/// Simulates stable AR(1) data, selects `k` points and estimates `phi`.
#[wasm_bindgen]
pub fn simulate_and_estimate(alpha: f64, phi: f64, n: usize, seed: u32, k: usize) -> Result<String, JsError> {
    estimate_run(alpha, phi, n, seed as u64, k).map_err(|e| JsError::new(&e))
}
