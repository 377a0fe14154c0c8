//! The separating-hyperplane direction used as a pseudo-gradient.
//!
//! For a candidate `w` and offset `c`, the empirical direction is
//!
//! ```text
//! D_c(w) = (1/m) Σ_i (sign(g(w·x_i) − y_i) + c) · x_i
//! ```
//!
//! When `c` equals `E[sign(ξ + ε)]`, `D_c(w)·(w − w*)` is bounded below by a
//! positive multiple of the clean loss whenever the clean loss is large, even
//! though the ℓ₁ loss in `w` is not convex for nonlinear `g`.

use crate::analytic::{expected_sign, f_sigma_xi, Estimate};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, sign, sub};
use crate::model::{Activation, InstanceSpec, SampleSet};
use crate::sampler::{draw_covariates, draw_samples};

/// `(1/m) Σ (sign(g(w·x_i) − y_i) + c) x_i`, with `sign(0) = 0`.
pub fn empirical_direction(w: &[f64], c: f64, samples: &SampleSet, g: &Activation) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical_direction needs samples"));
    }
    check_dim(samples.dim(), w.len())?;
    let mut acc = vec![0.0; w.len()];
    for (x, y) in samples.iter() {
        let s = sign(g.eval(dot(w, x)) - y) + c;
        if s != 0.0 {
            axpy(s, x, &mut acc);
        }
    }
    let m = samples.len() as f64;
    acc.iter_mut().for_each(|v| *v /= m);
    Ok(acc)
}

/// Per-coordinate Monte Carlo estimate of a population direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl DirectionEstimate {
    fn from_terms(d: usize, n: usize, mut term: impl FnMut(usize, &mut [f64])) -> Self {
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for i in 0..n {
            term(i, &mut buf);
            for k in 0..d {
                sum[k] += buf[k];
                sum_sq[k] += buf[k] * buf[k];
            }
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std_err = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, mu)| if n > 1 { ((sq / nf - mu * mu).max(0.0) * nf / (nf - 1.0) / nf).sqrt() } else { 0.0 })
            .collect();
        Self { mean, std_err }
    }
}

/// Full Monte Carlo estimate of `E_{x,y}[(sign(g(w·x) − y) + c) x]`.
pub fn population_direction_oracle(
    w: &[f64],
    c: f64,
    spec: &InstanceSpec,
    n_mc: usize,
    seed: u64,
) -> Result<DirectionEstimate> {
    check_dim(spec.dim(), w.len())?;
    let samples = draw_samples(spec, n_mc, seed)?;
    let g = spec.activation;
    Ok(DirectionEstimate::from_terms(w.len(), samples.len(), |i, out| {
        let x = samples.x(i);
        let s = sign(g.eval(dot(w, x)) - samples.y(i)) + c;
        out.iter_mut().zip(x).for_each(|(o, xi)| *o = s * xi);
    }))
}

/// Monte Carlo estimate of `E[(sign(g(w·x) − y) + c) x] · (w − w*)`.
pub fn population_dot_oracle(w: &[f64], c: f64, spec: &InstanceSpec, n_mc: usize, seed: u64) -> Result<Estimate> {
    check_dim(spec.dim(), w.len())?;
    let samples = draw_samples(spec, n_mc, seed)?;
    let g = spec.activation;
    let u = sub(w, &spec.wstar);
    Ok(Estimate::from_values(samples.iter().map(|(x, y)| (sign(g.eval(dot(w, x)) - y) + c) * dot(x, &u))))
}

/// Same quantity as [`population_dot_oracle`] with `ξ` and `ε` integrated in
/// closed form: `E[sign(g(w·x) − y) | x] = −(F(t) + E[sign(ξ+ε)])` for
/// `t = g(w*·x) − g(w·x)`. Only `x` is sampled.
pub fn noise_averaged_dot(w: &[f64], c: f64, spec: &InstanceSpec, n_mc: usize, seed: u64) -> Result<Estimate> {
    check_dim(spec.dim(), w.len())?;
    let cov = draw_covariates(&spec.covariates, n_mc, seed)?;
    let g = spec.activation;
    let s0 = expected_sign(spec.sigma, &spec.noise);
    let u = sub(w, &spec.wstar);
    Ok(Estimate::from_values(cov.rows().map(|x| {
        let t = g.eval(dot(&spec.wstar, x)) - g.eval(dot(w, x));
        (c - f_sigma_xi(t, spec.sigma, &spec.noise) - s0) * dot(x, &u)
    })))
}

/// `(1/m) Σ_i ∫₀^{w·x_i} (sign(g(z) − y_i) + c) dz`, whose gradient in `w`
/// is [`empirical_direction`] away from the breakpoints.
///
/// In `z` the integrand is `−1` below the lower generalized inverse of
/// `y_i`, `0` on the level set `g(z) = y_i`, and `+1` above it.
pub fn surrogate_loss(w: &[f64], c: f64, samples: &SampleSet, g: &Activation) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("surrogate_loss needs samples"));
    }
    check_dim(samples.dim(), w.len())?;
    let total: f64 = samples
        .iter()
        .map(|(x, y)| {
            let u = dot(w, x);
            let (lo, hi) = (u.min(0.0), u.max(0.0));
            let z0 = g.lower_inverse(y).clamp(lo, hi);
            let z1 = g.upper_inverse(y).clamp(lo, hi);
            let below = u.min(z0) - 0.0f64.min(z0);
            let above = u.max(z1) - 0.0f64.max(z1);
            above - below + c * u
        })
        .sum();
    Ok(total / samples.len() as f64)
}

/// The ℓ₁-loss subgradient for ReLU-type fits, `E[sign(g(w·x) − y)·1(w·x ≥ 0)·x]`,
/// optionally shifted by `c` on the same half-space.
pub fn naive_l1_term(w: &[f64], c: f64, x: &[f64], y: f64, g: &Activation) -> f64 {
    let z = dot(w, x);
    if z >= 0.0 {
        sign(g.eval(z) - y) + c
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::model::{CovariateSource, InstanceSpec, NoiseAtom, ObliviousNoiseSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_fit_leaves_only_offset() {
        let g = Activation::Relu;
        let x = vec![0.3, -0.4];
        let w = vec![1.0, 0.5];
        let y = g.eval(dot(&w, &x));
        let s = SampleSet::from_samples(2, &[crate::model::Sample { x: x.clone(), y }]).unwrap();
        let d = empirical_direction(&w, 0.3, &s, &g).unwrap();
        assert_abs_diff_eq!(d[0], 0.3 * x[0], epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.3 * x[1], epsilon = 1e-15);
    }

    #[test]
    fn huge_labels_give_negative_mean() {
        let spec = InstanceSpec::figure1();
        let mut s = draw_samples(&spec, 200, 1).unwrap();
        let cov = s.covariates().clone();
        s = SampleSet::from_parts(cov.clone(), vec![1e9; cov.len()]).unwrap();
        let d = empirical_direction(&[0.3, 0.2], 0.0, &s, &spec.activation).unwrap();
        for k in 0..2 {
            let mean = cov.rows().map(|x| x[k]).sum::<f64>() / cov.len() as f64;
            assert_abs_diff_eq!(d[k], -mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn direction_errors() {
        let s = SampleSet::new(2);
        assert!(matches!(empirical_direction(&[0.0, 0.0], 0.0, &s, &Activation::Relu), Err(Error::Empty(_))));
        let spec = InstanceSpec::figure1();
        let s = draw_samples(&spec, 5, 1).unwrap();
        assert!(matches!(
            empirical_direction(&[0.0], 0.0, &s, &Activation::Relu),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_noise_at_truth_gives_zero_direction() {
        let spec = InstanceSpec {
            activation: Activation::Relu,
            sigma: 0.3,
            noise: ObliviousNoiseSpec {
                atoms: vec![
                    NoiseAtom { value: -0.5, prob: 0.4 },
                    NoiseAtom { value: 0.0, prob: 0.2 },
                    NoiseAtom { value: 0.5, prob: 0.4 },
                ],
                alpha: 0.2,
            },
            wstar: vec![0.4, -0.2, 0.1],
            radius: 1.0,
            covariates: CovariateSource::UniformBall { dim: 3 },
            seed: 0,
        };
        let est = population_direction_oracle(&spec.wstar.clone(), 0.0, &spec, 400_000, 4).unwrap();
        for (m, se) in est.mean.iter().zip(&est.std_err) {
            assert!(m.abs() < 4.0 * se, "{est:?}");
        }
    }

    #[test]
    fn noiseless_identity_direction_unrolls() {
        let spec = InstanceSpec {
            activation: Activation::Identity,
            sigma: 0.0,
            noise: ObliviousNoiseSpec::zero(),
            wstar: vec![0.2, 0.1],
            radius: 1.0,
            covariates: CovariateSource::UniformBall { dim: 2 },
            seed: 0,
        };
        let w = [0.6, -0.3];
        let c = 0.25;
        let n = 200_000;
        let est = population_direction_oracle(&w, c, &spec, n, 9).unwrap();
        let cov = draw_covariates(&spec.covariates, n, 9).unwrap();
        let u = sub(&w, &spec.wstar);
        for k in 0..2 {
            let direct = cov.rows().map(|x| (sign(dot(&u, x)) + c) * x[k]).sum::<f64>() / n as f64;
            assert_abs_diff_eq!(est.mean[k], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_averaged_dot_agrees_with_full_monte_carlo() {
        let spec = InstanceSpec::figure1();
        let c = expected_sign(spec.sigma, &spec.noise);
        for w in [[0.5, 0.0], [0.1, 0.6], [-0.3, -0.3]] {
            let full = population_dot_oracle(&w, c, &spec, 400_000, 3).unwrap();
            let avg = noise_averaged_dot(&w, c, &spec, 400_000, 5).unwrap();
            let se = (full.std_err.powi(2) + avg.std_err.powi(2)).sqrt();
            assert!((full.mean - avg.mean).abs() < 4.0 * se, "{full:?} {avg:?}");
            assert!(avg.mean > 0.0);
        }
    }

    #[test]
    fn surrogate_examples() {
        let g = Activation::Identity;
        let s = SampleSet::from_samples(1, &[crate::model::Sample { x: vec![0.8], y: 0.3 }]).unwrap();
        assert_eq!(surrogate_loss(&[0.0], 0.4, &s, &g).unwrap(), 0.0);
        // w·x = 0.8 > y = 0.3 > 0 → w·x − 2y = 0.2.
        assert_abs_diff_eq!(surrogate_loss(&[1.0], 0.0, &s, &g).unwrap(), 0.2, epsilon = 1e-15);
    }

    /// Breakpoints sit where `g(w·x_i) = y_i`; keep the finite-difference
    /// probe away from them.
    fn min_breakpoint_gap(w: &[f64], s: &SampleSet, g: &Activation) -> f64 {
        s.iter()
            .map(|(x, y)| {
                let u = dot(w, x);
                let lo = g.lower_inverse(y);
                let hi = g.upper_inverse(y);
                let gap = |z: f64| if z.is_finite() { (u - z).abs() } else { f64::INFINITY };
                gap(lo).min(gap(hi))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn surrogate_gradient_matches_direction() {
        use rand::Rng;
        let kinds = [
            Activation::Identity,
            Activation::Relu,
            Activation::LeakyRelu { slope: 0.3 },
            Activation::Logistic { scale: 0.9 },
            Activation::HardClip { lo: -0.4, hi: 0.5 },
        ];
        let mut rng = crate::sampler::stream_rng(17, 7);
        let mut checked = 0;
        let mut attempt = 0u64;
        while checked < 20 {
            attempt += 1;
            let g = kinds[checked % kinds.len()];
            let mut spec = InstanceSpec::figure1();
            spec.activation = g;
            spec.wstar = vec![rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let s = draw_samples(&spec, 15, attempt).unwrap();
            let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let c: f64 = rng.random_range(-1.0..1.0);
            let h = 1e-7;
            if min_breakpoint_gap(&w, &s, &g) < 20.0 * h {
                continue;
            }
            let grad = empirical_direction(&w, c, &s, &g).unwrap();
            for k in 0..2 {
                let mut wp = w;
                let mut wm = w;
                wp[k] += h;
                wm[k] -= h;
                let fd =
                    (surrogate_loss(&wp, c, &s, &g).unwrap() - surrogate_loss(&wm, c, &s, &g).unwrap()) / (2.0 * h);
                let tol = 1e-5 * grad[k].abs().max(1e-3);
                assert!((fd - grad[k]).abs() <= tol, "{g:?} k={k}: fd={fd} grad={}", grad[k]);
            }
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn direction_norm_is_bounded(
            w in proptest::collection::vec(-1.0f64..1.0, 2),
            c in -1.0f64..1.0,
            seed in 0u64..1000,
        ) {
            let spec = InstanceSpec::figure1();
            let s = draw_samples(&spec, 64, seed).unwrap();
            let d = empirical_direction(&w, c, &s, &spec.activation).unwrap();
            prop_assert!(norm(&d) <= 1.0 + c.abs() + 1e-12);
        }
    }
}
