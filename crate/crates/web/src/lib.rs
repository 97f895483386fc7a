//! WebAssembly bindings for exploring expression trees in the browser.
//!
//! Every export takes and returns JSON strings. The [`api`] module holds
//! the logic so it can be tested natively.

pub mod api;

use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Metrics, objective, shapes, DOT and a drawing layout for a tree given
/// as JSON or as a canonical key.
#[wasm_bindgen]
pub fn describe(tree: &str) -> Result<String, JsError> {
    js(api::describe(tree))
}

/// A repaired random tree with a computation-node count in `lo..=hi`.
#[wasm_bindgen]
pub fn random_tree(lo: u32, hi: u32, seed: u32) -> Result<String, JsError> {
    js(api::random_tree(lo as usize, hi as usize, u64::from(seed)))
}

/// Applies `exchange`, `delete`, `replace` or `insert`; `other` is the
/// second parent for exchange and ignored otherwise.
#[wasm_bindgen]
pub fn vary(operation: &str, tree: &str, other: &str, seed: u32) -> Result<String, JsError> {
    js(api::vary(operation, tree, other, u64::from(seed)))
}

/// Front ranks and crowding distances for `[[f1, f2], ...]`.
#[wasm_bindgen]
pub fn pareto(points: &str) -> Result<String, JsError> {
    js(api::pareto(points))
}

/// Names and keys of the baseline seed trees.
#[wasm_bindgen]
pub fn seeds() -> String {
    api::seeds()
}
