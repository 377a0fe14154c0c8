//! Tournament pruning of a candidate list.
//!
//! Every candidate `w_i` is tested against every other candidate `w_j`. With
//! `d_k = g(w_j·x_k) − g(w_i·x_k)` and residuals `r_k = y_k − g(w_i·x_k)`, the
//! pair is informative when some offset `A` leaves enough samples on both
//! sides of the band `[A − τ/2, A + τ/2]`. If `w_i` were the truth, `r − A`
//! would have the same sign distribution on both sides; a large gap between
//! the two conditional sign means rejects `w_i`.
//!
//! After the tournament, survivors that are pairwise within `3Δ` in empirical
//! ℓ₁ distance collapse to one uniformly chosen member; otherwise the whole
//! survivor list is returned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, sign};
use crate::model::{Activation, Candidate, SampleSet};
use crate::sampler::{stream_rng, STREAM_SELECTION};

/// Above this many cached predictions (`|W|·m`), predictions are recomputed
/// per pair instead of stored.
pub const PREDICTION_CACHE_LIMIT: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub tau: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Accuracy target for the pairwise `3Δ` closeness check.
    pub delta: f64,
    pub event_count_threshold_scale: f64,
    pub reject_threshold_scale: f64,
    /// Use only the first `m` pruning samples.
    pub m_override: Option<usize>,
    pub seed: u64,
}

impl PruneConfig {
    pub fn new(tau: f64, alpha: f64, sigma: f64, delta: f64) -> Self {
        Self {
            tau,
            alpha,
            sigma,
            delta,
            event_count_threshold_scale: 1.0,
            reject_threshold_scale: 1.0,
            m_override: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("event_count_threshold_scale", self.event_count_threshold_scale),
            ("reject_threshold_scale", self.reject_threshold_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.alpha > 1.0 {
            return Err(Error::InvalidParameter(format!("alpha must be at most 1, got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.m_override == Some(0) {
            return Err(Error::InvalidParameter("m_override must be positive".into()));
        }
        Ok(())
    }

    /// `scale · α m min(τ/2σ, 1/4)`, the minimum size of each event set.
    pub fn event_count_threshold(&self, m: usize) -> f64 {
        self.event_count_threshold_scale * self.alpha * m as f64 * capped_ratio(self.tau, 2.0 * self.sigma, 0.25)
    }

    /// Integer form of [`Self::event_count_threshold`], at least 1.
    pub fn event_count(&self, m: usize) -> usize {
        let t = self.event_count_threshold(m).ceil();
        if t >= usize::MAX as f64 {
            usize::MAX
        } else {
            (t as usize).max(1)
        }
    }

    /// `scale · α min(τ/16σ, 1/8)`.
    pub fn reject_threshold(&self) -> f64 {
        self.reject_threshold_scale * self.alpha * capped_ratio(self.tau, 16.0 * self.sigma, 0.125)
    }
}

/// `min(num/den, cap)` with `den = 0` treated as an infinite ratio.
fn capped_ratio(num: f64, den: f64, cap: f64) -> f64 {
    if den == 0.0 {
        cap
    } else {
        (num / den).min(cap)
    }
}

/// An offset `A` with at least `threshold_count` diffs above `A + τ/2` and
/// at least as many below `A − τ/2`, or `None` when no such `A` exists.
///
/// The feasible set is the open interval between the `k`-th smallest diff
/// plus `τ/2` and the `k`-th largest minus `τ/2`; its midpoint is returned.
pub fn admissible_a_range(diffs: &[f64], tau: f64, threshold_count: usize) -> Option<f64> {
    let mut scratch = Vec::with_capacity(diffs.len());
    admissible_a_with(diffs, tau, threshold_count, &mut scratch)
}

fn admissible_a_with(diffs: &[f64], tau: f64, k: usize, scratch: &mut Vec<f64>) -> Option<f64> {
    let m = diffs.len();
    if k == 0 || k > m {
        return None;
    }
    let (lo, hi) = diffs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    if hi - lo <= tau {
        return None;
    }
    scratch.clear();
    scratch.extend_from_slice(diffs);
    let kth_smallest = *scratch.select_nth_unstable_by(k - 1, f64::total_cmp).1;
    let kth_largest = *scratch.select_nth_unstable_by(m - k, f64::total_cmp).1;
    let left = kth_smallest + 0.5 * tau;
    let right = kth_largest - 0.5 * tau;
    if left < right {
        let a = 0.5 * (left + right);
        (a > left && a < right).then_some(a)
    } else {
        None
    }
}

/// Conditional sign means of `r − A` on the two event sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub a: f64,
    pub plus_mean: f64,
    pub minus_mean: f64,
    pub plus_count: usize,
    pub minus_count: usize,
}

impl PairStats {
    pub fn gap(&self) -> f64 {
        (self.plus_mean - self.minus_mean).abs()
    }
}

fn split_residuals(tested: &[f64], reference: &[f64], labels: &[f64], a: f64, tau: f64) -> PairStats {
    let (hi, lo) = (a + 0.5 * tau, a - 0.5 * tau);
    let (mut sp, mut sm) = (0.0, 0.0);
    let (mut np, mut nm) = (0usize, 0usize);
    for ((&pi, &pj), &y) in tested.iter().zip(reference).zip(labels) {
        let d = pj - pi;
        if d > hi {
            sp += sign(y - pi - a);
            np += 1;
        } else if d < lo {
            sm += sign(y - pi - a);
            nm += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    PairStats { a, plus_mean: mean(sp, np), minus_mean: mean(sm, nm), plus_count: np, minus_count: nm }
}

/// Decide whether `candidate_i` is rejected when tested against
/// `candidate_j` at offset `a` (normally from [`admissible_a_range`]).
pub fn quantile_reject_test(
    candidate_i: &Candidate,
    candidate_j: &Candidate,
    samples: &SampleSet,
    g: &Activation,
    a: f64,
    config: &PruneConfig,
) -> Result<bool> {
    check_dim(samples.dim(), candidate_i.w.len())?;
    check_dim(samples.dim(), candidate_j.w.len())?;
    let pi = samples.covariates().predict(&candidate_i.w, g);
    let pj = samples.covariates().predict(&candidate_j.w, g);
    let stats = split_residuals(&pi, &pj, samples.labels(), a, config.tau);
    if stats.plus_count == 0 || stats.minus_count == 0 {
        return Err(Error::Precondition(format!("offset {a} leaves an empty event set")));
    }
    Ok(stats.gap() > config.reject_threshold())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Index of the candidate the rejected one was tested against.
    pub by: usize,
    pub stats: PairStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// The pruner's output: one survivor, or every survivor.
    pub output: Vec<Candidate>,
    pub singleton: bool,
    /// Indices into the input list of every candidate that was not rejected.
    pub survivors: Vec<usize>,
    /// Per input candidate, the first test that rejected it.
    pub rejections: Vec<Option<Rejection>>,
    /// First survivor pair found farther apart than `3Δ`, with its distance.
    pub far_pair: Option<(usize, usize, f64)>,
    pub samples_used: usize,
    pub event_count: usize,
    pub reject_threshold: f64,
}

enum Predictions<'a> {
    Cached(Vec<Vec<f64>>),
    Lazy { candidates: &'a [Candidate], samples: &'a SampleSet, g: Activation, m: usize },
}

impl<'a> Predictions<'a> {
    fn new(candidates: &'a [Candidate], samples: &'a SampleSet, g: Activation, m: usize) -> Self {
        if candidates.len().saturating_mul(m) <= PREDICTION_CACHE_LIMIT {
            let rows = candidates.iter().map(|c| predict_prefix(&c.w, samples, &g, m)).collect();
            Predictions::Cached(rows)
        } else {
            Predictions::Lazy { candidates, samples, g, m }
        }
    }

    fn view<'s>(&'s self, i: usize, scratch: &'s mut Vec<f64>) -> &'s [f64] {
        match self {
            Predictions::Cached(rows) => &rows[i],
            Predictions::Lazy { candidates, samples, g, m } => {
                scratch.clear();
                scratch.extend((0..*m).map(|k| g.eval(dot(&candidates[i].w, samples.x(k)))));
                scratch
            }
        }
    }
}

fn predict_prefix(w: &[f64], samples: &SampleSet, g: &Activation, m: usize) -> Vec<f64> {
    (0..m).map(|k| g.eval(dot(w, samples.x(k)))).collect()
}

#[derive(Default)]
struct Scratch {
    tested: Vec<f64>,
    reference: Vec<f64>,
    diffs: Vec<f64>,
    select: Vec<f64>,
}

struct Tournament<'a> {
    preds: Predictions<'a>,
    labels: &'a [f64],
    tau: f64,
    count: usize,
    threshold: f64,
    p: usize,
}

impl Tournament<'_> {
    fn test(&self, i: usize, s: &mut Scratch) -> Option<Rejection> {
        let Scratch { tested, reference, diffs, select } = s;
        let pi = self.preds.view(i, tested);
        for j in (0..self.p).filter(|&j| j != i) {
            let pj = self.preds.view(j, reference);
            diffs.clear();
            diffs.extend(pj.iter().zip(pi).map(|(b, a)| b - a));
            let Some(a) = admissible_a_with(diffs, self.tau, self.count, select) else {
                continue;
            };
            let stats = split_residuals(pi, pj, self.labels, a, self.tau);
            if stats.gap() > self.threshold {
                return Some(Rejection { by: j, stats });
            }
        }
        None
    }

    fn distance(&self, a: usize, b: usize, s: &mut Scratch) -> f64 {
        let pa = self.preds.view(a, &mut s.tested);
        let pb = self.preds.view(b, &mut s.reference);
        pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / pa.len() as f64
    }
}

pub fn prune(
    candidates: &[Candidate],
    samples: &SampleSet,
    g: &Activation,
    config: &PruneConfig,
) -> Result<Vec<Candidate>> {
    prune_with_report(candidates, samples, g, config).map(|r| r.output)
}

/// Full tournament with diagnostics. Fails with [`Error::EmptySurvivorSet`]
/// when every candidate is rejected.
pub fn prune_with_report(
    candidates: &[Candidate],
    samples: &SampleSet,
    g: &Activation,
    config: &PruneConfig,
) -> Result<PruneReport> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::Empty("prune needs at least one candidate"));
    }
    if samples.is_empty() {
        return Err(Error::Empty("prune needs samples"));
    }
    for c in candidates {
        check_dim(samples.dim(), c.w.len())?;
    }
    let m = config.m_override.map_or(samples.len(), |m| m.min(samples.len()));
    let p = candidates.len();
    let t = Tournament {
        preds: Predictions::new(candidates, samples, *g, m),
        labels: &samples.labels()[..m],
        tau: config.tau,
        count: config.event_count(m),
        threshold: config.reject_threshold(),
        p,
    };

    let rejections = run_indexed(p, |i, s| t.test(i, s));
    let survivors: Vec<usize> = (0..p).filter(|&i| rejections[i].is_none()).collect();
    if survivors.is_empty() {
        return Err(Error::EmptySurvivorSet);
    }

    let limit = 3.0 * config.delta;
    let far_pair = first_indexed(survivors.len(), |a, s| {
        (a + 1..survivors.len()).find_map(|b| {
            let (i, j) = (survivors[a], survivors[b]);
            let dist = t.distance(i, j, s);
            (dist > limit).then_some((i, j, dist))
        })
    });

    let output = if far_pair.is_some() {
        survivors.iter().map(|&i| candidates[i].clone()).collect()
    } else {
        let pick = stream_rng(config.seed, STREAM_SELECTION).random_range(0..survivors.len());
        vec![candidates[survivors[pick]].clone()]
    };
    Ok(PruneReport {
        singleton: far_pair.is_none(),
        output,
        survivors,
        rejections,
        far_pair,
        samples_used: m,
        event_count: t.count,
        reject_threshold: t.threshold,
    })
}

#[cfg(feature = "parallel")]
fn run_indexed<T: Send>(n: usize, f: impl Fn(usize, &mut Scratch) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map_init(Scratch::default, |s, i| f(i, s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_indexed<T>(n: usize, f: impl Fn(usize, &mut Scratch) -> T) -> Vec<T> {
    let mut s = Scratch::default();
    (0..n).map(|i| f(i, &mut s)).collect()
}

#[cfg(feature = "parallel")]
fn first_indexed<T: Send>(n: usize, f: impl Fn(usize, &mut Scratch) -> Option<T> + Sync + Send) -> Option<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map_init(Scratch::default, |s, i| f(i, s)).find_map_first(|x| x)
}

#[cfg(not(feature = "parallel"))]
fn first_indexed<T>(n: usize, f: impl Fn(usize, &mut Scratch) -> Option<T>) -> Option<T> {
    let mut s = Scratch::default();
    (0..n).find_map(|i| f(i, &mut s))
}
