//! WebAssembly bindings for the demo page in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: lamp_core::LampError) -> JsError {
    JsError::new(&e.to_string())
}

/// Simulated data, `x` values followed by `y` values.
#[wasm_bindgen]
pub fn simulate(n: usize, wiggle: f64, noise_sd: f64, seed: u64) -> Vec<f64> {
    let (mut xs, ys) = demo::simulate(n, wiggle, noise_sd, seed);
    xs.extend(ys);
    xs
}

#[wasm_bindgen]
pub fn signal_curve(wiggle: f64, grid_size: usize) -> Vec<f64> {
    demo::grid(grid_size).iter().map(|&x| demo::signal(x, wiggle)).collect()
}

#[wasm_bindgen]
pub fn grid(n: usize) -> Vec<f64> {
    demo::grid(n)
}

#[wasm_bindgen]
pub struct Expert(demo::Expert);

#[wasm_bindgen]
impl Expert {
    #[wasm_bindgen(getter)]
    pub fn mu_hat(&self) -> f64 {
        self.0.mu_hat
    }

    #[wasm_bindgen(getter)]
    pub fn mu_tilde(&self) -> f64 {
        self.0.mu_tilde
    }

    #[wasm_bindgen(getter)]
    pub fn n_local(&self) -> usize {
        self.0.n_local
    }

    #[wasm_bindgen(getter)]
    pub fn sd(&self) -> Vec<f64> {
        self.0.sd.clone()
    }
}

#[wasm_bindgen]
pub struct Curve(demo::Curve);

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> Vec<f64> {
        self.0.mean.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sd(&self) -> Vec<f64> {
        self.0.sd.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn centers(&self) -> Vec<f64> {
        self.0.centers.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn bandwidths(&self) -> Vec<f64> {
        self.0.bandwidths.clone()
    }
}

#[wasm_bindgen]
pub fn local_expert(xs: &[f64], ys: &[f64], center: f64, bandwidth: f64, grid_size: usize) -> Result<Expert, JsError> {
    demo::local_expert(xs, ys, center, bandwidth, &demo::grid(grid_size))
        .map(Expert)
        .map_err(js_err)
}

#[wasm_bindgen]
pub fn single_scale(xs: &[f64], ys: &[f64], bandwidth: f64, grid_size: usize, seed: u64) -> Result<Curve, JsError> {
    demo::single_scale(xs, ys, bandwidth, &demo::grid(grid_size), seed)
        .map(Curve)
        .map_err(js_err)
}

#[wasm_bindgen]
pub fn multiscale(xs: &[f64], ys: &[f64], delta: f64, grid_size: usize, seed: u64) -> Result<Curve, JsError> {
    demo::multiscale(xs, ys, &demo::grid(grid_size), delta, seed)
        .map(Curve)
        .map_err(js_err)
}
