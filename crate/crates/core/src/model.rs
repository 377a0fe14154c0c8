//! Domain types for GLM regression with oblivious label noise.
//!
//! An instance draws `x` from a law supported in the unit ball and labels it
//! as `y = g(w*·x) + ξ + ε`, with `ξ` an atom mixture carrying mass at least
//! `alpha` on zero and `ε ~ N(0, σ²)`.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm;

/// Slack allowed on `‖x‖₂ ≤ 1` for covariates read from files.
pub const FILE_NORM_SLACK: f64 = 1e-9;

/// Number of grid points used by the monotone / Lipschitz certificate.
pub const CERTIFICATE_GRID: usize = 10_000;

/// Monotone non-decreasing, 1-Lipschitz link functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    /// `t` for `t ≥ 0`, `slope·t` otherwise.
    LeakyRelu {
        slope: f64,
    },
    /// `clamp(t, lo, hi)`.
    HardClip {
        lo: f64,
        hi: f64,
    },
    /// `scale / (1 + exp(-4t/scale))`: range `(0, scale)`, slope 1 at the origin.
    Logistic {
        scale: f64,
    },
}

impl Activation {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Activation::Identity => t,
            Activation::Relu => t.max(0.0),
            Activation::LeakyRelu { slope } => {
                if t >= 0.0 {
                    t
                } else {
                    slope * t
                }
            }
            Activation::HardClip { lo, hi } => t.clamp(lo, hi),
            Activation::Logistic { scale } => scale / (1.0 + (-4.0 * t / scale).exp()),
        }
    }

    /// Smallest `z` with `g(z) ≥ y`; `-∞` if every `z` qualifies, `+∞` if none does.
    pub fn lower_inverse(&self, y: f64) -> f64 {
        match *self {
            Activation::Identity => y,
            Activation::Relu => {
                if y <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    y
                }
            }
            Activation::LeakyRelu { slope } => leaky_inverse(slope, y, true),
            Activation::HardClip { lo, hi } => {
                if y <= lo {
                    f64::NEG_INFINITY
                } else if y > hi {
                    f64::INFINITY
                } else {
                    y
                }
            }
            Activation::Logistic { scale } => {
                if y <= 0.0 {
                    f64::NEG_INFINITY
                } else if y >= scale {
                    f64::INFINITY
                } else {
                    0.25 * scale * (y / (scale - y)).ln()
                }
            }
        }
    }

    /// Largest `z` with `g(z) ≤ y`; `-∞` if none does, `+∞` if every `z` qualifies.
    pub fn upper_inverse(&self, y: f64) -> f64 {
        match *self {
            Activation::Identity => y,
            Activation::Relu => {
                if y < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    y
                }
            }
            Activation::LeakyRelu { slope } => leaky_inverse(slope, y, false),
            Activation::HardClip { lo, hi } => {
                if y < lo {
                    f64::NEG_INFINITY
                } else if y >= hi {
                    f64::INFINITY
                } else {
                    y
                }
            }
            Activation::Logistic { scale } => {
                if y <= 0.0 {
                    f64::NEG_INFINITY
                } else if y >= scale {
                    f64::INFINITY
                } else {
                    0.25 * scale * (y / (scale - y)).ln()
                }
            }
        }
    }

    /// Parameter-range problems; empty when the parameters are admissible.
    pub fn parameter_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match *self {
            Activation::LeakyRelu { slope } if !(0.0..=1.0).contains(&slope) => {
                out.push(format!("leaky_relu slope must lie in [0, 1], got {slope}"));
            }
            Activation::HardClip { lo, hi } if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() => {
                out.push(format!("hard_clip needs finite lo <= hi, got lo={lo}, hi={hi}"));
            }
            Activation::Logistic { scale } if !(scale > 0.0 && scale <= 1.0) => {
                out.push(format!("logistic scale must lie in (0, 1], got {scale}"));
            }
            _ => {}
        }
        out
    }

    /// Grid certificate of monotonicity and the 1-Lipschitz bound on
    /// `[-half_width, half_width]`. Consecutive-pair checks suffice: summing
    /// `0 ≤ Δg ≤ Δt` over a chain covers every pair of grid points.
    pub fn certify(&self, half_width: f64, points: usize) -> ActivationCertificate {
        let points = points.max(2);
        let step = 2.0 * half_width / (points - 1) as f64;
        let mut cert = ActivationCertificate::default();
        let mut prev_t = -half_width;
        let mut prev_g = self.eval(prev_t);
        for k in 1..points {
            let t = -half_width + k as f64 * step;
            let g = self.eval(t);
            let dt = t - prev_t;
            let dg = g - prev_g;
            let tol = 1e-12 * (1.0 + g.abs().max(prev_g.abs()));
            if dg < -tol {
                cert.monotone_violations += 1;
            }
            if dg.abs() > dt + tol {
                cert.lipschitz_violations += 1;
            }
            cert.max_slope = cert.max_slope.max(dg.abs() / dt);
            prev_t = t;
            prev_g = g;
        }
        cert
    }
}

fn leaky_inverse(slope: f64, y: f64, lower: bool) -> f64 {
    if y > 0.0 {
        y
    } else if slope > 0.0 {
        y / slope
    } else if y < 0.0 || lower {
        // slope 0: g(z) = 0 on z ≤ 0
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActivationCertificate {
    pub monotone_violations: usize,
    pub lipschitz_violations: usize,
    pub max_slope: f64,
}

impl ActivationCertificate {
    pub fn passed(&self) -> bool {
        self.monotone_violations == 0 && self.lipschitz_violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseAtom {
    pub value: f64,
    pub prob: f64,
}

/// Finite atom mixture for the oblivious noise `ξ`, with `Pr[ξ = 0] ≥ alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousNoiseSpec {
    pub atoms: Vec<NoiseAtom>,
    pub alpha: f64,
}

impl ObliviousNoiseSpec {
    /// Builds a spec and rejects it if any invariant fails.
    pub fn new(atoms: Vec<(f64, f64)>, alpha: f64) -> Result<Self> {
        let spec = Self { atoms: atoms.into_iter().map(|(value, prob)| NoiseAtom { value, prob }).collect(), alpha };
        let v = spec.violations();
        if v.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }

    /// `ξ ≡ 0`.
    pub fn zero() -> Self {
        Self { atoms: vec![NoiseAtom { value: 0.0, prob: 1.0 }], alpha: 1.0 }
    }

    pub fn zero_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| a.value == 0.0).map(|a| a.prob).sum()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push("noise needs at least one atom".to_string());
            return out;
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            out.push(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.atoms.iter().any(|a| !(a.prob > 0.0) || !a.value.is_finite()) {
            out.push("atom probs must be > 0 and values finite".to_string());
        }
        let total: f64 = self.atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            out.push(format!("probs must sum to 1 (got {total})"));
        }
        let zero = self.zero_mass();
        if zero == 0.0 {
            out.push("noise must have an atom at 0".to_string());
        } else if zero < self.alpha {
            out.push(format!("zero-atom mass {zero} is below alpha {}", self.alpha));
        }
        out
    }
}

/// Law of the covariate `x`; every emitted vector lies in the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateSource {
    UniformBall {
        dim: usize,
    },
    UniformSphere {
        dim: usize,
        radius: f64,
    },
    /// Finitely supported law: `(point, probability)` pairs.
    PointMasses(Vec<(Vec<f64>, f64)>),
    /// Uniform resampling of rows read from a file.
    Dataset {
        path: PathBuf,
        rows: Arc<Vec<Vec<f64>>>,
    },
}

impl CovariateSource {
    pub fn dim(&self) -> usize {
        match self {
            CovariateSource::UniformBall { dim } | CovariateSource::UniformSphere { dim, .. } => *dim,
            CovariateSource::PointMasses(p) => p.first().map_or(0, |(x, _)| x.len()),
            CovariateSource::Dataset { rows, .. } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            CovariateSource::UniformBall { dim } => {
                if *dim == 0 {
                    out.push("covariate dimension must be >= 1".to_string());
                }
            }
            CovariateSource::UniformSphere { dim, radius } => {
                if *dim == 0 {
                    out.push("covariate dimension must be >= 1".to_string());
                }
                if !(*radius > 0.0 && *radius <= 1.0) {
                    out.push(format!("sphere radius must lie in (0, 1], got {radius}"));
                }
            }
            CovariateSource::PointMasses(points) => {
                if points.is_empty() {
                    out.push("point-mass law needs at least one point".to_string());
                }
                let d = self.dim();
                let total: f64 = points.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 {
                    out.push(format!("point-mass probs must sum to 1 (got {total})"));
                }
                for (k, (x, p)) in points.iter().enumerate() {
                    if x.len() != d {
                        out.push(format!("point {k} has dim {} != {d}", x.len()));
                    }
                    if !(*p > 0.0) {
                        out.push(format!("point {k} has non-positive prob {p}"));
                    }
                    if norm(x) > 1.0 + FILE_NORM_SLACK {
                        out.push(format!("point {k} lies outside the unit ball"));
                    }
                }
            }
            CovariateSource::Dataset { rows, .. } => {
                if rows.is_empty() {
                    out.push("covariate dataset is empty".to_string());
                }
                if rows.iter().any(|x| norm(x) > 1.0 + FILE_NORM_SLACK) {
                    out.push("covariate dataset has a row outside the unit ball".to_string());
                }
            }
        }
        out
    }
}

/// Full generative description of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub activation: Activation,
    pub sigma: f64,
    pub noise: ObliviousNoiseSpec,
    pub wstar: Vec<f64>,
    pub radius: f64,
    pub covariates: CovariateSource,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn dim(&self) -> usize {
        self.wstar.len()
    }

    /// The instance drawn in the separating-hyperplane comparison figure:
    /// ReLU, `w* = (-1, 0)`, `ξ ∈ {-0.15, 0, 0.15}` with probs
    /// `(0.3, 0.1, 0.6)`, `σ = 0.5`, `x` uniform on the unit disc.
    pub fn figure1() -> Self {
        Self {
            activation: Activation::Relu,
            sigma: 0.5,
            noise: ObliviousNoiseSpec {
                atoms: vec![
                    NoiseAtom { value: -0.15, prob: 0.3 },
                    NoiseAtom { value: 0.0, prob: 0.1 },
                    NoiseAtom { value: 0.15, prob: 0.6 },
                ],
                alpha: 0.1,
            },
            wstar: vec![-1.0, 0.0],
            radius: 1.0,
            covariates: CovariateSource::UniformBall { dim: 2 },
            seed: 1,
        }
    }

    /// Returns the spec unchanged if [`validate_instance`] reports no problems.
    pub fn validated(self) -> Result<Self> {
        let report = validate_instance(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(report.violations.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every instance invariant and collects the failures.
pub fn validate_instance(spec: &InstanceSpec) -> ValidationReport {
    let mut violations = spec.activation.parameter_violations();
    if violations.is_empty() {
        let cert = spec.activation.certify(spec.radius.abs() + 1.0, CERTIFICATE_GRID);
        if cert.monotone_violations > 0 {
            violations.push(format!("activation not monotone on {} grid pairs", cert.monotone_violations));
        }
        if cert.lipschitz_violations > 0 {
            violations.push(format!(
                "activation exceeds slope 1 on {} grid pairs (max slope {})",
                cert.lipschitz_violations, cert.max_slope
            ));
        }
    }
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        violations.push(format!("sigma must be >= 0, got {}", spec.sigma));
    }
    violations.extend(spec.noise.violations());
    if !(spec.radius > 0.0) {
        violations.push(format!("radius must be > 0, got {}", spec.radius));
    }
    if spec.wstar.is_empty() {
        violations.push("wstar must have dimension >= 1".to_string());
    }
    if norm(&spec.wstar) > spec.radius {
        violations.push(format!("wstar exceeds radius ({} > {})", norm(&spec.wstar), spec.radius));
    }
    violations.extend(spec.covariates.violations());
    if spec.covariates.dim() != spec.wstar.len() {
        violations.push(format!(
            "covariate dim {} does not match wstar dim {}",
            spec.covariates.dim(),
            spec.wstar.len()
        ));
    }
    ValidationReport { violations }
}

/// Covariate vectors stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Covariates {
    dim: usize,
    data: Vec<f64>,
}

impl Covariates {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * rows) }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut out = Self::with_capacity(dim, rows.len());
        for r in rows {
            out.push(r)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        self.data.extend_from_slice(x);
        Ok(())
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// `g(w·x_k)` for every row.
    pub fn predict(&self, w: &[f64], g: &Activation) -> Vec<f64> {
        self.rows().map(|x| g.eval(crate::linalg::dot(w, x))).collect()
    }

    pub(crate) fn data_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }
}

/// One covariate vector with its noisy label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A batch of samples: covariates plus labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    covariates: Covariates,
    labels: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        Self { covariates: Covariates::new(dim), labels: Vec::new() }
    }

    pub fn from_parts(covariates: Covariates, labels: Vec<f64>) -> Result<Self> {
        check_dim(covariates.len(), labels.len())?;
        Ok(Self { covariates, labels })
    }

    pub fn from_samples(dim: usize, samples: &[Sample]) -> Result<Self> {
        let mut out = Self::new(dim);
        for s in samples {
            out.push(&s.x, s.y)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.covariates.push(x)?;
        self.labels.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.covariates.rows().zip(self.labels.iter().copied())
    }

    pub fn get(&self, i: usize) -> Sample {
        Sample { x: self.x(i).to_vec(), y: self.y(i) }
    }
}

/// A weight vector tagged with the grid value `c` and OGD round that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub w: Vec<f64>,
    pub c_value: f64,
    pub iterate_index: usize,
}

/// Multipliers on the theory constants. `1.0` everywhere except the sample
/// constants reproduces the formulas verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    /// Multiplies `(R/γα)²` to give the OGD horizon.
    pub horizon: f64,
    /// Multiplies the c-grid granularity `γαΔ/(64R)`.
    pub grid: f64,
    /// Constant in front of `R² ln(T/δ)/(γαΔ')²` (fit sample budget).
    pub fit_samples: f64,
    /// Constant in front of the pruning sample budget.
    pub prune_samples: f64,
    /// Multiplies the event-count threshold `α m min(τ/2σ, 1/4)`.
    pub event_count_threshold: f64,
    /// Multiplies the rejection threshold `α min(τ/16σ, 1/8)`.
    pub reject_threshold: f64,
}

impl Default for ScaleConstants {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            grid: 1.0,
            // Hoeffding with t = γαΔ/32 and range 4R: m = 8·32²·R² ln(1/δ)/(γαΔ)².
            fit_samples: 8192.0,
            prune_samples: 64.0,
            event_count_threshold: 1.0,
            reject_threshold: 1.0,
        }
    }
}

/// Run parameters derived from the user's accuracy targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    /// Target excess loss Δ.
    pub delta: f64,
    pub tau: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub radius: f64,
    pub failure_delta: f64,
    /// `min(Δ/4σ, 1/2)`.
    pub gamma: f64,
    /// OGD horizon T.
    pub horizon: usize,
    /// Total sample budget (`fit_samples + prune_samples`).
    pub samples: usize,
    pub fit_samples: usize,
    pub prune_samples: usize,
    /// c-grid granularity.
    pub grid_step: f64,
    /// Inner OCO accuracy `min(Δ/3, τ²/48)`.
    pub delta_prime: f64,
    pub scale_constants: ScaleConstants,
}
