//! Closed forms for the noise-smoothed sign, the clean-loss functional, and
//! the tail / translation scans over empirical laws.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, sign};
use crate::model::{InstanceSpec, ObliviousNoiseSpec};
use crate::sampler::draw_covariates;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Mean and standard error of an i.i.d. batch.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in values {
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        let std_err = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Self { mean, std_err }
    }
}

/// `E_ε[sign(t + ε)]` for `ε ~ N(0, σ²)`; reduces to `sign(t)` at `σ = 0`.
pub fn h_sigma(t: f64, sigma: f64) -> f64 {
    if sigma == 0.0 || t == 0.0 {
        return sign(t);
    }
    sign(t) * libm::erf(t.abs() / (sigma * std::f64::consts::SQRT_2))
}

/// `Pr[N(0,1) > z]`.
pub fn gaussian_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `E[sign(ξ + ε)] = Σ_k p_k h_σ(v_k)`.
pub fn expected_sign(sigma: f64, noise: &ObliviousNoiseSpec) -> f64 {
    noise.atoms.iter().map(|a| a.prob * h_sigma(a.value, sigma)).sum()
}

/// `F(t) = E[sign(t + ε + ξ)] − E[sign(ε + ξ)]`, exact for atom noise.
pub fn f_sigma_xi(t: f64, sigma: f64, noise: &ObliviousNoiseSpec) -> f64 {
    noise.atoms.iter().map(|a| a.prob * (h_sigma(t + a.value, sigma) - h_sigma(a.value, sigma))).sum()
}

/// Monte Carlo estimate of `E_x|g(w·x) − g(w*·x)|`.
pub fn clean_loss(w: &[f64], spec: &InstanceSpec, n_mc: usize, seed: u64) -> Result<Estimate> {
    check_dim(spec.dim(), w.len())?;
    if n_mc == 0 {
        return Err(Error::Precondition("n_mc must be >= 1".into()));
    }
    if w == spec.wstar.as_slice() {
        return Ok(Estimate { mean: 0.0, std_err: 0.0 });
    }
    let cov = draw_covariates(&spec.covariates, n_mc, seed)?;
    let g = spec.activation;
    Ok(Estimate::from_values(cov.rows().map(|x| (g.eval(dot(w, x)) - g.eval(dot(&spec.wstar, x))).abs())))
}

/// Offset minimizing `max(Pr[X > A + τ], Pr[X < A − τ])` under an empirical law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailScanResult {
    pub best_a: f64,
    /// `Pr[X > A + τ]`.
    pub tail_plus: f64,
    /// `Pr[X < A − τ]`.
    pub tail_minus: f64,
}

impl TailScanResult {
    pub fn max_tail(&self) -> f64 {
        self.tail_plus.max(self.tail_minus)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Counts `#{v > s}` and `#{v < s}` on sorted data.
fn count_above(sorted: &[f64], s: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= s)
}

fn count_below(sorted: &[f64], s: f64) -> usize {
    sorted.partition_point(|&v| v < s)
}

/// Scans offsets `A` for the one with the smallest larger tail.
///
/// `#{v > A+τ} ≤ k` iff `A ≥ v₍ₙ₋ₖ₎ − τ` and `#{v < A−τ} ≤ k` iff
/// `A ≤ v₍ₖ₊₁₎ + τ` (order statistics, 1-based), so the feasible set for a
/// count `k` is an interval between two breakpoints. The smallest feasible
/// `k` is found directly and `A` is the interval midpoint.
pub fn tail_scan(values: &[f64], tau: f64) -> Result<TailScanResult> {
    if values.is_empty() {
        return Err(Error::Empty("tail_scan needs at least one value"));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    let v = sorted(values);
    let n = v.len();
    // Feasibility is monotone in k; k = n is always feasible.
    let feasible = |k: usize| k >= n || v[n - k - 1] - tau <= v[k] + tau;
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = lo;
    let best_a = if k >= n { 0.5 * (v[0] + v[n - 1]) } else { 0.5 * ((v[n - k - 1] - tau) + (v[k] + tau)) };
    let nf = n as f64;
    Ok(TailScanResult {
        best_a,
        tail_plus: count_above(&v, best_a + tau) as f64 / nf,
        tail_minus: count_below(&v, best_a - tau) as f64 / nf,
    })
}

/// Offset maximizing the mass of `|X − A| ≤ τ` under an empirical law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationScan {
    pub best_a: f64,
    /// `min_A Pr[|X − A| > τ]`.
    pub outside_mass: f64,
}

/// Sliding window of width `2τ` over the sorted values.
pub fn translation_scan(values: &[f64], tau: f64) -> Result<TranslationScan> {
    if values.is_empty() {
        return Err(Error::Empty("translation_scan needs at least one value"));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    let v = sorted(values);
    let (mut best, mut best_lo, mut best_hi) = (0usize, 0usize, 0usize);
    let mut lo = 0usize;
    for hi in 0..v.len() {
        while v[hi] - v[lo] > 2.0 * tau {
            lo += 1;
        }
        if hi - lo + 1 > best {
            best = hi - lo + 1;
            best_lo = lo;
            best_hi = hi;
        }
    }
    Ok(TranslationScan { best_a: 0.5 * (v[best_lo] + v[best_hi]), outside_mass: 1.0 - best as f64 / v.len() as f64 })
}

/// Checks `|â/b̂ − a/b| ≤ 8e/L²` for estimates within `e` of `a` and `b`.
pub fn quotient_bound_check(a: f64, b: f64, a_hat: f64, b_hat: f64, e: f64, l: f64) -> Result<bool> {
    let pre = (0.0..=1.0).contains(&a)
        && l > 0.0
        && l <= b
        && b <= 1.0
        && (a_hat - a).abs() <= e
        && (b_hat - b).abs() <= e
        && e >= 0.0
        && e <= l / 2.0;
    if !pre {
        return Err(Error::Precondition(format!(
            "quotient bound needs 0<=a<=1, L<=b<=1, |â−a|,|b̂−b|<=e<=L/2 \
             (a={a}, b={b}, â={a_hat}, b̂={b_hat}, e={e}, L={l})"
        )));
    }
    Ok((a_hat / b_hat - a / b).abs() <= 8.0 * e / (l * l))
}
