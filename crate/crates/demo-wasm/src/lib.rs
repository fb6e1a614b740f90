//! Browser bindings. Every export returns JSON text; see `www/index.html`.

pub mod logic;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn knn(points: usize, buckets: u32, k: usize, nprobe: usize, seed: u32, qx: f32, qy: f32) -> String {
    logic::knn(points, buckets as u64, k, nprobe, seed as u64, qx, qy)
}

#[wasm_bindgen]
pub fn ema(k: f64, samples: &str) -> String {
    logic::ema(k, samples)
}

#[wasm_bindgen]
pub struct Playground(logic::Playground);

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Playground, JsError> {
        logic::Playground::new().map(Playground).map_err(|e| JsError::new(&e))
    }

    pub fn explain(&self, query: &str) -> String {
        self.0.explain(query)
    }

    pub fn query(&self, query: &str) -> String {
        self.0.query(query)
    }
}
