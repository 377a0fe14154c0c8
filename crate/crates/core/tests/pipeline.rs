use oblivious_glm::analytic::{clean_loss, expected_sign};
use oblivious_glm::driver::{derive_params, run_pipeline_report};
use oblivious_glm::linalg::dot;
use oblivious_glm::model::{Activation, CovariateSource, InstanceSpec, ObliviousNoiseSpec, ScaleConstants};
use oblivious_glm::parse_instance_config;
use oblivious_glm::sampler::draw_samples;
use oblivious_glm::separator::{empirical_direction, population_direction_oracle};

fn relu_instance() -> InstanceSpec {
    InstanceSpec {
        activation: Activation::Relu,
        sigma: 0.25,
        noise: ObliviousNoiseSpec::new(vec![(0.0, 0.3), (0.5, 0.4), (-0.6, 0.3)], 0.3).unwrap(),
        wstar: vec![0.7, -0.5, 0.4],
        radius: 1.0,
        covariates: CovariateSource::UniformBall { dim: 3 },
        seed: 0,
    }
}

#[test]
fn empirical_direction_concentrates_within_hoeffding_rate() {
    let spec = relu_instance();
    let w = [0.1, 0.2, -0.3];
    let c = expected_sign(spec.sigma, &spec.noise);
    let v = [0.6, 0.0, 0.8];
    let pop = population_direction_oracle(&w, c, &spec, 2_000_000, 99).unwrap();
    let pop_v = dot(&pop.mean, &v);
    for m in [1_000usize, 10_000] {
        // Failure budget 0.1 from exp(-m t² / 8) with R = 1.
        let t = (8.0 * (1.0f64 / 0.1).ln() / m as f64).sqrt();
        let trials = 200;
        let misses = (0..trials)
            .filter(|&k| {
                let s = draw_samples(&spec, m, 10_000 + k).unwrap();
                let d = empirical_direction(&w, c, &s, &spec.activation).unwrap();
                (dot(&d, &v) - pop_v).abs() > t
            })
            .count();
        assert!(misses as f64 / trials as f64 <= 0.1, "m={m}: {misses}/{trials}");
    }
}

#[cfg(feature = "parallel")]
#[test]
fn pipeline_is_identical_across_thread_counts() {
    let spec = relu_instance();
    let mut params = derive_params(0.2, 0.4, 0.3, 0.25, 1.0, 0.05, ScaleConstants::default()).unwrap();
    params.horizon = 60;
    let fit = draw_samples(&spec, 3_000, 1).unwrap();
    let prune = draw_samples(&spec, 3_000, 2).unwrap();
    let grid = [-0.5, 0.0, 0.5];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_pipeline_report(&fit, &prune, &spec.activation, &params, &grid, 3).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn config_to_pipeline_recovers_noiseless_truth() {
    let text = r#"
activation = "identity"
sigma = 0.0
alpha = 1.0
noise_atoms = ["0:1"]
wstar = [0.5, -0.3]
covariates = "uniform_ball"
seed = 4
"#;
    let spec = parse_instance_config(text, std::path::Path::new(".")).unwrap();
    let sc = ScaleConstants { grid: 1e4, ..ScaleConstants::default() };
    let mut params = derive_params(0.05, 0.1, 1.0, 0.0, 1.0, 0.05, sc).unwrap();
    params.horizon = 400;
    let fit = draw_samples(&spec, 4_000, 1).unwrap();
    let prune = draw_samples(&spec, 4_000, 2).unwrap();
    let report = run_pipeline_report(&fit, &prune, &spec.activation, &params, &params.offset_grid(), 0).unwrap();
    assert!(report.singleton());
    let loss = clean_loss(&report.output()[0].w, &spec, 200_000, 5).unwrap();
    assert!(loss.mean <= 0.05, "{loss:?}");
}
