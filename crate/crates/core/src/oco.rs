//! Projected online gradient descent over the radius-`R` ball.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::model::{Activation, Candidate, SampleSet};
use crate::separator::empirical_direction;

/// Bound on `‖v_t‖` used in the step size. The separator direction has norm
/// at most `1 + |c| ≤ 2` for covariates in the unit ball.
pub const GRADIENT_BOUND: f64 = 2.0;

/// Euclidean projection onto `{‖w‖ ≤ R}`.
pub fn project_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub fn project_ball_in_place(v: &mut [f64], radius: f64) {
    let n = norm(v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
        // Rounding can leave the norm an ulp above R; nudge inside so that
        // projecting again is a no-op.
        while norm(v) > radius {
            v.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
        }
    }
}

/// Step-by-step projected OGD with `η_t = R / (G √t)`, started at the origin.
#[derive(Debug, Clone)]
pub struct ProjectedOgd {
    radius: f64,
    bound: f64,
    round: usize,
    w: Vec<f64>,
}

impl ProjectedOgd {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        Self::with_bound(dim, radius, GRADIENT_BOUND)
    }

    pub fn with_bound(dim: usize, radius: f64, bound: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("gradient bound must be positive, got {bound}")));
        }
        Ok(Self { radius, bound, round: 1, w: vec![0.0; dim] })
    }

    /// The current iterate `w_t`.
    pub fn current(&self) -> &[f64] {
        &self.w
    }

    /// 1-based index of the current iterate.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn step_size(&self) -> f64 {
        self.radius / (self.bound * (self.round as f64).sqrt())
    }

    /// Play loss vector `v_t` and advance to `w_{t+1}`.
    pub fn observe(&mut self, v: &[f64]) -> Result<()> {
        check_dim(self.w.len(), v.len())?;
        let eta = self.step_size();
        axpy(-eta, v, &mut self.w);
        project_ball_in_place(&mut self.w, self.radius);
        self.round += 1;
        Ok(())
    }
}

/// Run `T` rounds of OGD against the separator direction on a fixed sample
/// set and return every iterate `w_1, …, w_T` tagged with `(c, t)`.
pub fn ogd_run(samples: &SampleSet, c: f64, g: &Activation, radius: f64, horizon: usize) -> Result<Vec<Candidate>> {
    if horizon == 0 {
        return Err(Error::Precondition("ogd_run needs T >= 1".into()));
    }
    let mut ogd = ProjectedOgd::new(samples.dim(), radius)?;
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        out.push(Candidate { w: ogd.current().to_vec(), c_value: c, iterate_index: t });
        if t < horizon {
            let v = empirical_direction(ogd.current(), c, samples, g)?;
            ogd.observe(&v)?;
        }
    }
    Ok(out)
}

/// `Σ v_t·w_t − min_{‖w‖≤R} Σ v_t·w = Σ v_t·w_t + R ‖Σ v_t‖`.
pub fn regret(iterates: &[Vec<f64>], losses: &[Vec<f64>], radius: f64) -> Result<f64> {
    if iterates.len() != losses.len() {
        return Err(Error::DimensionMismatch { expected: iterates.len(), found: losses.len() });
    }
    let Some(first) = losses.first() else {
        return Ok(0.0);
    };
    let mut total = vec![0.0; first.len()];
    let mut played = 0.0;
    for (w, v) in iterates.iter().zip(losses) {
        check_dim(total.len(), v.len())?;
        check_dim(total.len(), w.len())?;
        played += dot(v, w);
        axpy(1.0, v, &mut total);
    }
    Ok(played + radius * norm(&total))
}
