//! Robust generalized linear regression under oblivious noise.
//!
//! Labels follow `y = g(w*·x) + ξ + ε` where `ξ` is arbitrary noise
//! independent of `x` that vanishes with probability at least `α`, and `ε` is
//! Gaussian. The pipeline fits one candidate per offset `c` on a grid with
//! projected online gradient descent on a separating-hyperplane direction,
//! then prunes the candidate list with a pairwise quantile tournament.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod driver;
pub mod error;
pub mod figure1;
pub mod linalg;
pub mod model;
pub mod oco;
pub mod pruner;
pub mod sampler;
pub mod separator;

pub use analytic::{clean_loss, expected_sign, f_sigma_xi, h_sigma, tail_scan, translation_scan, Estimate};
pub use config::{load_instance_config, parse_instance_config};
pub use driver::{
    auto_tau, check_identifiability, derive_params, run_pipeline, run_pipeline_report, IdentifiabilityReport,
    PipelineReport,
};
pub use error::{Error, Result};
pub use model::{
    validate_instance, Activation, AlgoParams, Candidate, CovariateSource, Covariates, InstanceSpec, NoiseAtom,
    ObliviousNoiseSpec, Sample, SampleSet, ScaleConstants, ValidationReport,
};
pub use oco::{ogd_run, project_ball, regret};
pub use pruner::{prune, prune_with_report, PruneConfig, PruneReport};
pub use sampler::{draw_covariates, draw_samples, load_dataset, write_samples_csv};
pub use separator::{empirical_direction, surrogate_loss};
