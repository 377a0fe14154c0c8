//! The full regression pipeline: parameter derivation, one OGD run per cell
//! of a grid over the unknown offset `c ∈ [−1, 1]`, and candidate pruning.

use serde::{Deserialize, Serialize};

use crate::analytic::{tail_scan, translation_scan, TailScanResult};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::model::{Activation, AlgoParams, Candidate, Covariates, SampleSet, ScaleConstants};
use crate::oco::ogd_run;
use crate::pruner::{prune_with_report, PruneConfig, PruneReport};

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Round a non-negative real up to a count, saturating at `usize::MAX`.
fn to_count(x: f64) -> usize {
    let c = x.ceil();
    if c >= usize::MAX as f64 {
        usize::MAX
    } else {
        c.max(0.0) as usize
    }
}

/// Number of equal cells covering `[−1, 1]` at the given step.
pub fn grid_cells(step: f64) -> usize {
    to_count(2.0 / step - 1e-12).max(1)
}

/// Cell midpoints of a uniform partition of `[−1, 1]` with cell width at
/// most `step`. Every `c ∈ [−1, 1]` is within `step/2` of a grid point.
pub fn offset_grid(step: f64) -> Vec<f64> {
    let n = grid_cells(step);
    let width = 2.0 / n as f64;
    (0..n).map(|k| -1.0 + (k as f64 + 0.5) * width).collect()
}

/// Derive the horizon, grid step and sample budgets from the accuracy
/// targets.
pub fn derive_params(
    delta: f64,
    tau: f64,
    alpha: f64,
    sigma: f64,
    radius: f64,
    failure_delta: f64,
    scale_constants: ScaleConstants,
) -> Result<AlgoParams> {
    require_positive("delta", delta)?;
    require_positive("tau", tau)?;
    require_positive("alpha", alpha)?;
    require_positive("radius", radius)?;
    require_positive("failure_delta", failure_delta)?;
    if alpha > 1.0 {
        return Err(Error::InvalidParameter(format!("alpha must be at most 1, got {alpha}")));
    }
    if failure_delta >= 1.0 {
        return Err(Error::InvalidParameter(format!("failure_delta must be below 1, got {failure_delta}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma}")));
    }
    let sc = scale_constants;
    for (name, v) in [
        ("scale_constants.horizon", sc.horizon),
        ("scale_constants.grid", sc.grid),
        ("scale_constants.fit_samples", sc.fit_samples),
        ("scale_constants.prune_samples", sc.prune_samples),
        ("scale_constants.event_count_threshold", sc.event_count_threshold),
        ("scale_constants.reject_threshold", sc.reject_threshold),
    ] {
        require_positive(name, v)?;
    }

    let gamma = if sigma == 0.0 { 0.5 } else { (delta / (4.0 * sigma)).min(0.5) };
    let delta_prime = (delta / 3.0).min(tau * tau / 48.0);
    let ga = gamma * alpha;
    let horizon = to_count(sc.horizon * (radius / ga).powi(2)).max(1);
    let grid_step = (sc.grid * ga * delta / (64.0 * radius)).min(2.0);

    let fit_samples =
        to_count(sc.fit_samples * radius * radius * (horizon as f64 / failure_delta).ln() / (ga * delta_prime).powi(2))
            .max(1);

    let list_size = horizon.saturating_mul(grid_cells(grid_step));
    let prune_samples =
        prune_sample_budget(list_size, alpha, tau, sigma, radius, delta, failure_delta, sc.prune_samples);

    Ok(AlgoParams {
        delta,
        tau,
        alpha,
        sigma,
        radius,
        failure_delta,
        gamma,
        horizon,
        samples: fit_samples.saturating_add(prune_samples),
        fit_samples,
        prune_samples,
        grid_step,
        delta_prime,
        scale_constants,
    })
}

/// Pruning samples for a list of `list_size` candidates:
/// `C (log(|W|²/δ)/(α²τ⁴ min(τ/σ, 1)²) + R² log(|W|²/δ)/Δ²)`.
#[allow(clippy::too_many_arguments)]
pub fn prune_sample_budget(
    list_size: usize,
    alpha: f64,
    tau: f64,
    sigma: f64,
    radius: f64,
    delta: f64,
    failure_delta: f64,
    constant: f64,
) -> usize {
    let w = list_size.max(1) as f64;
    let log_term = (w * w / failure_delta).ln();
    let sigma_factor = if sigma == 0.0 { 1.0 } else { (tau / sigma).min(1.0) };
    to_count(
        constant
            * (log_term / (alpha * alpha * tau.powi(4) * sigma_factor * sigma_factor)
                + radius * radius * log_term / (delta * delta)),
    )
    .max(1)
}

impl AlgoParams {
    pub fn offset_grid(&self) -> Vec<f64> {
        offset_grid(self.grid_step)
    }

    /// Candidate list size `T · |P|`.
    pub fn list_size(&self) -> usize {
        self.horizon.saturating_mul(grid_cells(self.grid_step))
    }

    pub fn prune_config(&self, seed: u64) -> PruneConfig {
        PruneConfig {
            tau: self.tau,
            alpha: self.alpha,
            sigma: self.sigma,
            delta: self.delta,
            event_count_threshold_scale: self.scale_constants.event_count_threshold,
            reject_threshold_scale: self.scale_constants.reject_threshold,
            m_override: None,
            seed,
        }
    }
}

/// Run OGD once per grid offset and concatenate the iterates in grid order.
pub fn fit_candidates(
    samples: &SampleSet,
    g: &Activation,
    grid: &[f64],
    radius: f64,
    horizon: usize,
) -> Result<Vec<Candidate>> {
    if samples.is_empty() {
        return Err(Error::Empty("fit needs samples"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("offset grid is empty"));
    }
    let runs = run_cells(grid, |c| ogd_run(samples, c, g, radius, horizon));
    let mut out = Vec::with_capacity(grid.len() * horizon);
    for run in runs {
        out.extend(run?);
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn run_cells<T: Send>(grid: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    grid.par_iter().map(|&c| f(c)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_cells<T>(grid: &[f64], f: impl Fn(f64) -> T) -> Vec<T> {
    grid.iter().map(|&c| f(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub grid: Vec<f64>,
    /// Every OGD iterate from every cell, before pruning.
    pub candidates: Vec<Candidate>,
    pub prune: PruneReport,
}

impl PipelineReport {
    pub fn output(&self) -> &[Candidate] {
        &self.prune.output
    }

    pub fn singleton(&self) -> bool {
        self.prune.singleton
    }
}

fn check_pipeline_inputs(fit: &SampleSet, prune: &SampleSet) -> Result<()> {
    if fit.is_empty() {
        return Err(Error::Empty("fit samples are empty"));
    }
    if prune.is_empty() {
        return Err(Error::Empty("prune samples are empty"));
    }
    check_dim(fit.dim(), prune.dim())
}

/// Fit on `samples_fit` over the derived grid, then prune on `samples_prune`.
pub fn run_pipeline(
    samples_fit: &SampleSet,
    samples_prune: &SampleSet,
    g: &Activation,
    params: &AlgoParams,
) -> Result<Vec<Candidate>> {
    run_pipeline_report(samples_fit, samples_prune, g, params, &params.offset_grid(), 0).map(|r| r.prune.output)
}

/// [`run_pipeline`] over an explicit offset grid, returning diagnostics.
pub fn run_pipeline_report(
    samples_fit: &SampleSet,
    samples_prune: &SampleSet,
    g: &Activation,
    params: &AlgoParams,
    grid: &[f64],
    seed: u64,
) -> Result<PipelineReport> {
    check_pipeline_inputs(samples_fit, samples_prune)?;
    let candidates = fit_candidates(samples_fit, g, grid, params.radius, params.horizon)?;
    let prune = prune_with_report(&candidates, samples_prune, g, &params.prune_config(seed))?;
    Ok(PipelineReport { grid: grid.to_vec(), candidates, prune })
}

/// Pruning-sample budget when `K` values of `τ` are tried: the single-`τ`
/// budget times the union-bound factor `1 + ln K`.
pub fn auto_tau_prune_budget(params: &AlgoParams, k: usize) -> usize {
    to_count(params.prune_samples as f64 * (1.0 + (k.max(1) as f64).ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoTauReport {
    /// `(τ, output size)` for every value tried, in order.
    pub tried: Vec<(f64, usize)>,
    pub tau: f64,
    pub output: Vec<Candidate>,
    pub singleton: bool,
}

/// Prune a fixed candidate list with `τ = 2^{−k}` for `k = 1..=K`, stopping
/// at the first singleton. Returns the last list when none is found.
pub fn auto_tau_candidates(
    candidates: &[Candidate],
    samples_prune: &SampleSet,
    g: &Activation,
    base_params: &AlgoParams,
    k_max: usize,
    seed: u64,
) -> Result<AutoTauReport> {
    if k_max == 0 {
        return Err(Error::Precondition("auto_tau needs K >= 1".into()));
    }
    let mut tried = Vec::with_capacity(k_max);
    let mut last = None;
    for k in 1..=k_max {
        let tau = 0.5f64.powi(k as i32);
        let mut config = base_params.prune_config(seed);
        config.tau = tau;
        let report = prune_with_report(candidates, samples_prune, g, &config)?;
        tried.push((tau, report.output.len()));
        let done = report.singleton;
        last = Some((tau, report));
        if done {
            break;
        }
    }
    let (tau, report) = last.expect("k_max >= 1");
    Ok(AutoTauReport { tried, tau, singleton: report.singleton, output: report.output })
}

/// Fit once with `base_params` over its grid, then search `τ`.
pub fn auto_tau(
    samples_fit: &SampleSet,
    samples_prune: &SampleSet,
    g: &Activation,
    base_params: &AlgoParams,
    k_max: usize,
) -> Result<Vec<Candidate>> {
    if k_max == 0 {
        return Err(Error::Precondition("auto_tau needs K >= 1".into()));
    }
    check_pipeline_inputs(samples_fit, samples_prune)?;
    let candidates =
        fit_candidates(samples_fit, g, &base_params.offset_grid(), base_params.radius, base_params.horizon)?;
    auto_tau_candidates(&candidates, samples_prune, g, base_params, k_max, 0).map(|r| r.output)
}

/// Whether two hypotheses can be told apart at translation scale `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// `mean |g(u·x) − g(v·x)|`.
    pub separation: f64,
    /// An offset `A` with `Pr[|g(u·x) − g(v·x) − A| > τ] ≤ τ`, when one exists:
    /// the pair is then a translation of each other up to `τ`.
    pub witness_a: Option<f64>,
    /// `min_A Pr[|g(u·x) − g(v·x) − A| > τ]`.
    pub outside_mass: f64,
    /// Offset balancing the two one-sided tails, and those tails.
    pub tail_a: f64,
    pub tail_plus: f64,
    pub tail_minus: f64,
}

pub fn check_identifiability(
    u: &[f64],
    v: &[f64],
    tau: f64,
    g: &Activation,
    covariates: &Covariates,
) -> Result<IdentifiabilityReport> {
    check_dim(u.len(), v.len())?;
    check_dim(covariates.dim(), u.len())?;
    if covariates.is_empty() {
        return Err(Error::Empty("check_identifiability needs covariates"));
    }
    let diffs: Vec<f64> = covariates.rows().map(|x| g.eval(dot(u, x)) - g.eval(dot(v, x))).collect();
    let separation = diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64;
    let scan = translation_scan(&diffs, tau)?;
    let TailScanResult { best_a, tail_plus, tail_minus } = tail_scan(&diffs, tau)?;
    Ok(IdentifiabilityReport {
        separation,
        witness_a: (scan.outside_mass <= tau).then_some(scan.best_a),
        outside_mass: scan.outside_mass,
        tail_a: best_a,
        tail_plus,
        tail_minus,
    })
}
