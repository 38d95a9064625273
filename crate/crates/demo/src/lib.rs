//! WebAssembly entry points for the static page in `www/`.
//!
//! Every export takes and returns JSON strings. The plain functions in
//! [`api`] do the work and are what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod api;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Trains a binary classifier on clicked points and evaluates it on a grid.
#[wasm_bindgen]
pub fn decision_surface(request: &str) -> Result<String, JsValue> {
    to_js(api::decision_surface(request))
}

/// Radius `delta` as a function of `eta` for `p = 1, 2, inf`.
#[wasm_bindgen]
pub fn delta_curves(request: &str) -> Result<String, JsValue> {
    to_js(api::delta_curves(request))
}

/// Friedman test and Holm comparison from a table of errors or mean ranks.
#[wasm_bindgen]
pub fn rank_test(request: &str) -> Result<String, JsValue> {
    to_js(api::rank_test(request))
}
