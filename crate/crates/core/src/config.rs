//! TOML instance configuration.
//!
//! ```toml
//! activation = "relu"         # identity | relu | leaky_relu | hard_clip | logistic
//! # slope = 0.1               # leaky_relu
//! # lo = -0.5                 # hard_clip
//! # hi = 0.5                  # hard_clip
//! # scale = 1.0               # logistic
//! sigma = 0.5
//! alpha = 0.1
//! noise_atoms = ["-0.15:0.3", "0:0.1", "0.15:0.6"]   # or [[-0.15, 0.3], ...]
//! wstar = [-1.0, 0.0]         # or "random:<seed>"
//! radius = 1.0
//! covariates = "uniform_ball" # | "sphere:<r>" | "pointmass:<file>" | "file:<path>"
//! dim = 2
//! seed = 1
//! ```
//!
//! Unknown keys are rejected. Relative file paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Activation, CovariateSource, InstanceSpec, NoiseAtom, ObliviousNoiseSpec};
use crate::sampler::{load_covariate_rows, load_point_masses, stream_rng, uniform_ball, STREAM_WSTAR};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    activation: String,
    slope: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    scale: Option<f64>,
    sigma: f64,
    alpha: f64,
    noise_atoms: Vec<RawAtom>,
    wstar: RawWstar,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default = "default_covariates")]
    covariates: String,
    dim: Option<usize>,
    #[serde(default)]
    seed: u64,
}

fn default_radius() -> f64 {
    1.0
}

fn default_covariates() -> String {
    "uniform_ball".into()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAtom {
    Pair([f64; 2]),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawWstar {
    Vector(Vec<f64>),
    Text(String),
}

fn parse_atom(atom: &RawAtom) -> Result<NoiseAtom> {
    match atom {
        RawAtom::Pair([value, prob]) => Ok(NoiseAtom { value: *value, prob: *prob }),
        RawAtom::Text(s) => {
            let bad = || Error::Config(format!("noise atom '{s}' must look like 'value:prob'"));
            let (v, p) = s.split_once(':').ok_or_else(bad)?;
            Ok(NoiseAtom { value: v.trim().parse().map_err(|_| bad())?, prob: p.trim().parse().map_err(|_| bad())? })
        }
    }
}

fn parse_activation(raw: &RawConfig) -> Result<Activation> {
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| Error::Config(format!("activation '{}' needs key '{name}'", raw.activation)))
    };
    let unused = |names: &[(&str, Option<f64>)]| -> Result<()> {
        match names.iter().find(|(_, v)| v.is_some()) {
            Some((name, _)) => {
                Err(Error::Config(format!("key '{name}' does not apply to activation '{}'", raw.activation)))
            }
            None => Ok(()),
        }
    };
    let g = match raw.activation.as_str() {
        "identity" => Activation::Identity,
        "relu" => Activation::Relu,
        "leaky_relu" => Activation::LeakyRelu { slope: need("slope", raw.slope)? },
        "hard_clip" => Activation::HardClip { lo: need("lo", raw.lo)?, hi: need("hi", raw.hi)? },
        "logistic" => Activation::Logistic { scale: need("scale", raw.scale)? },
        other => {
            return Err(Error::Config(format!(
                "unknown activation '{other}' (expected identity, relu, leaky_relu, hard_clip or logistic)"
            )))
        }
    };
    match g {
        Activation::Identity | Activation::Relu => {
            unused(&[("slope", raw.slope), ("lo", raw.lo), ("hi", raw.hi), ("scale", raw.scale)])?
        }
        Activation::LeakyRelu { .. } => unused(&[("lo", raw.lo), ("hi", raw.hi), ("scale", raw.scale)])?,
        Activation::HardClip { .. } => unused(&[("slope", raw.slope), ("scale", raw.scale)])?,
        Activation::Logistic { .. } => unused(&[("slope", raw.slope), ("lo", raw.lo), ("hi", raw.hi)])?,
    }
    Ok(g)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_covariates(spec: &str, dim: Option<usize>, base: &Path) -> Result<CovariateSource> {
    let need_dim = || dim.ok_or_else(|| Error::Config(format!("covariates '{spec}' needs 'dim' or an explicit wstar")));
    if spec == "uniform_ball" {
        return Ok(CovariateSource::UniformBall { dim: need_dim()? });
    }
    let (kind, arg) = spec.split_once(':').ok_or_else(|| Error::Config(format!("unknown covariates '{spec}'")))?;
    match kind {
        "sphere" => {
            let radius =
                arg.trim().parse().map_err(|_| Error::Config(format!("sphere radius '{arg}' is not a number")))?;
            Ok(CovariateSource::UniformSphere { dim: need_dim()?, radius })
        }
        "pointmass" => Ok(CovariateSource::PointMasses(load_point_masses(resolve(base, arg))?)),
        "file" => {
            let path = resolve(base, arg);
            let rows = load_covariate_rows(&path)?;
            Ok(CovariateSource::Dataset { path, rows: Arc::new(rows) })
        }
        _ => Err(Error::Config(format!("unknown covariates kind '{kind}'"))),
    }
}

/// `w*` drawn uniformly from the radius-`R` ball.
pub fn random_wstar(dim: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut w = vec![0.0; dim];
    uniform_ball(&mut stream_rng(seed, STREAM_WSTAR), &mut w);
    w.iter_mut().for_each(|v| *v *= radius);
    w
}

/// Parse config text; `base` anchors relative paths.
pub fn parse_instance_config(text: &str, base: &Path) -> Result<InstanceSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let activation = parse_activation(&raw)?;
    let atoms = raw.noise_atoms.iter().map(parse_atom).collect::<Result<Vec<_>>>()?;
    let noise = ObliviousNoiseSpec { atoms, alpha: raw.alpha };

    let dim_hint = raw.dim.or(match &raw.wstar {
        RawWstar::Vector(v) => Some(v.len()),
        RawWstar::Text(_) => None,
    });
    let covariates = parse_covariates(&raw.covariates, dim_hint, base)?;
    let dim = covariates.dim();
    if let Some(d) = raw.dim {
        if d != dim {
            return Err(Error::Config(format!("dim = {d} but covariates have dimension {dim}")));
        }
    }
    let wstar = match raw.wstar {
        RawWstar::Vector(v) => v,
        RawWstar::Text(s) => {
            let seed = s
                .strip_prefix("random:")
                .and_then(|n| n.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::Config(format!("wstar '{s}' must be a vector or 'random:<seed>'")))?;
            random_wstar(dim, raw.radius, seed)
        }
    };
    if wstar.len() != dim {
        return Err(Error::Config(format!("wstar has {} entries but covariates have dimension {dim}", wstar.len())));
    }
    let spec =
        InstanceSpec { activation, sigma: raw.sigma, noise, wstar, radius: raw.radius, covariates, seed: raw.seed };
    spec.validated().map_err(|e| match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    })
}

/// Read and parse an instance config file.
pub fn load_instance_config(path: impl AsRef<Path>) -> Result<InstanceSpec> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Config(format!("config not found: {}", path.display())))
        }
        Err(e) => return Err(e.into()),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    parse_instance_config(&text, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
