//! Comparison of the ReLU ℓ₁ subgradient with the separator direction along
//! the ray `w = −M·w*`.
//!
//! The ℓ₁ subgradient only sees samples with `w·x ≥ 0`, so its inner product
//! with `w − w*` vanishes as `M → 0⁺` and it cannot tell `w = 0` from `w*`.
//! The separator direction keeps a positive margin there.

use serde::Serialize;

use crate::analytic::{expected_sign, Estimate};
use crate::error::{Error, Result};
use crate::linalg::{dot, sign, sub};
use crate::model::InstanceSpec;
use crate::sampler::draw_samples;
use crate::separator::naive_l1_term;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "M")]
    pub m: f64,
    pub naive_dot: f64,
    pub naive_se: f64,
    pub ours_dot: f64,
    pub ours_se: f64,
}

/// `points` log-spaced values from `10⁻³` to `2`, both included.
pub fn log_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 2f64.ln());
    match points {
        0 => Vec::new(),
        1 => vec![2.0],
        n => (0..n)
            .map(|k| {
                if k == 0 {
                    1e-3
                } else if k == n - 1 {
                    2.0
                } else {
                    (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

/// Monte Carlo estimates of both inner products at every `M` in `grid`.
///
/// Both directions carry the offset `c = E[sign(ξ + ε)]`. Without it, the
/// ℓ₁ subgradient's inner product tends to a nonzero constant under
/// asymmetric noise. One sample set of size `n_mc` is shared across the grid.
pub fn sweep(spec: &InstanceSpec, grid: &[f64], n_mc: usize, seed: u64) -> Result<Vec<SweepPoint>> {
    if grid.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidParameter("sweep grid values must be positive".into()));
    }
    let samples = draw_samples(spec, n_mc, seed)?;
    let g = spec.activation;
    let c = expected_sign(spec.sigma, &spec.noise);
    let out = grid
        .iter()
        .map(|&m| {
            let w: Vec<f64> = spec.wstar.iter().map(|v| -m * v).collect();
            let u = sub(&w, &spec.wstar);
            let naive = Estimate::from_values(samples.iter().map(|(x, y)| naive_l1_term(&w, c, x, y, &g) * dot(x, &u)));
            let ours =
                Estimate::from_values(samples.iter().map(|(x, y)| (sign(g.eval(dot(&w, x)) - y) + c) * dot(x, &u)));
            SweepPoint { m, naive_dot: naive.mean, naive_se: naive.std_err, ours_dot: ours.mean, ours_se: ours.std_err }
        })
        .collect();
    Ok(out)
}
