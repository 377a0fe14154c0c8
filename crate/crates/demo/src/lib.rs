//! Browser bindings over the two-dimensional ReLU instance with asymmetric
//! noise. Every export returns a flat `Float64Array` so the page can draw it
//! without extra glue.

use oblivious_glm::figure1::{log_grid, sweep};
use oblivious_glm::linalg::{dot, sub};
use oblivious_glm::{draw_samples, empirical_direction, expected_sign, ogd_run, InstanceSpec};
use wasm_bindgen::prelude::*;

fn instance() -> InstanceSpec {
    InstanceSpec::figure1()
}

fn js_err(e: oblivious_glm::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `E[sign(ξ + ε)]` for the demo instance, the offset the fit should use.
#[wasm_bindgen]
pub fn true_offset() -> f64 {
    let spec = instance();
    expected_sign(spec.sigma, &spec.noise)
}

/// Ground-truth weight vector `[w1, w2]`.
#[wasm_bindgen]
pub fn true_weights() -> Vec<f64> {
    instance().wstar
}

/// Empirical separator direction at `n × n` grid points inside the unit disc,
/// as rows `[w1, w2, v1, v2, v·(w − w*)]`.
#[wasm_bindgen]
pub fn direction_field(c: f64, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    let spec = instance();
    let s = draw_samples(&spec, samples.max(1), seed).map_err(js_err)?;
    let mut out = Vec::with_capacity(5 * n * n);
    for i in 0..n {
        for j in 0..n {
            let w = [-1.0 + 2.0 * (i as f64 + 0.5) / n as f64, -1.0 + 2.0 * (j as f64 + 0.5) / n as f64];
            if dot(&w, &w) > 1.0 {
                continue;
            }
            let v = empirical_direction(&w, c, &s, &spec.activation).map_err(js_err)?;
            let progress = dot(&v, &sub(&w, &spec.wstar));
            out.extend_from_slice(&[w[0], w[1], v[0], v[1], progress]);
        }
    }
    Ok(out)
}

/// Projected OGD iterates for offset `c`, as rows `[w1, w2, clean_loss]`,
/// with the clean loss estimated on the fit samples.
#[wasm_bindgen]
pub fn ogd_trajectory(c: f64, horizon: usize, samples: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    let spec = instance();
    let s = draw_samples(&spec, samples.max(1), seed).map_err(js_err)?;
    let g = spec.activation;
    let cands = ogd_run(&s, c, &g, spec.radius, horizon.max(1)).map_err(js_err)?;
    let mut out = Vec::with_capacity(3 * cands.len());
    for cand in &cands {
        let loss = s.iter().map(|(x, _)| (g.eval(dot(&cand.w, x)) - g.eval(dot(&spec.wstar, x))).abs()).sum::<f64>()
            / s.len() as f64;
        out.extend_from_slice(&[cand.w[0], cand.w[1], loss]);
    }
    Ok(out)
}

/// Inner products with `w − w*` along `w = −M w*`, as rows
/// `[M, naive_dot, naive_se, ours_dot, ours_se]`.
#[wasm_bindgen]
pub fn comparison_curve(points: usize, samples: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    let pts = sweep(&instance(), &log_grid(points), samples.max(1), seed).map_err(js_err)?;
    Ok(pts.iter().flat_map(|p| [p.m, p.naive_dot, p.naive_se, p.ours_dot, p.ours_se]).collect())
}
