//! WebAssembly bindings for the static demo page in `www/`.
// `!(x > 0.0)` checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: catsim::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Predicted figures of merit per pump power, as a JSON array of records.
#[wasm_bindgen]
pub fn predict_table(powers: Vec<f64>, xi: f64, correction: &str) -> Result<String, JsError> {
    let records = demo::predict_table(&powers, xi, correction).map_err(js_err)?;
    serde_json::to_string(&records).map_err(|e| JsError::new(&e.to_string()))
}

/// Row-major Wigner map of the predicted state; `points`² values.
#[wasm_bindgen]
pub fn wigner_grid(power: f64, xi: f64, correction: &str, extent: f64, points: usize) -> Result<Vec<f64>, JsError> {
    demo::wigner_grid(power, xi, correction, extent, points).map_err(js_err)
}

/// Cat fidelity of a squeezed photon at `points` squeezing levels up to `db_max`.
#[wasm_bindgen]
pub fn fidelity_curve(alpha: f64, db_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    demo::fidelity_curve(alpha, db_max, points).map_err(js_err)
}
