use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use oblivious_glm::{draw_samples, load_dataset, load_instance_config};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn oglm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oglm")).args(args).env_remove("OGLM_SEED").output().expect("spawn oglm")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_requested_rows_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = config("figure1.toml");
    let o = oglm(&["simulate", "--config", path_str(&cfg), "--m", "1000", "--seed", "5", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("dim=2"));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));

    let spec = load_instance_config(&cfg).unwrap();
    let expected = draw_samples(&spec, 1000, 5).unwrap();
    assert_eq!(load_dataset(&out).unwrap(), expected);
}

#[test]
fn simulate_missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = oglm(&["simulate", "--config", "/nonexistent/x.toml", "--m", "10", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config not found"));
    assert!(!out.exists());
}

#[test]
fn simulate_million_rows_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let start = Instant::now();
    let o =
        oglm(&["simulate", "--config", path_str(&config("figure1.toml")), "--m", "1000000", "--out", path_str(&out)]);
    assert!(o.status.success());
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
}

#[test]
fn seed_env_is_default_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("identifiable_d3.toml");
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_oglm"));
        cmd.env_remove("OGLM_SEED");
        cmd.args(["simulate", "--config", path_str(&cfg), "--m", "50", "--out", path_str(&out)]);
        if let Some(s) = env {
            cmd.env("OGLM_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let by_flag = run("a.csv", None, Some("7"));
    assert_eq!(run("b.csv", Some("7"), None), by_flag);
    assert_eq!(run("c.csv", Some("8"), Some("7")), by_flag);
    assert_ne!(run("d.csv", Some("8"), None), by_flag);
}

#[test]
fn fit_identifiable_instance_yields_singleton() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = oglm(&[
        "fit",
        "--config",
        path_str(&config("identifiable_d3.toml")),
        "--delta",
        "0.2",
        "--tau",
        "0.4",
        "--t-scale",
        "0.25",
        "--grid-scale",
        "3556",
        "--samples-fit",
        "20000",
        "--samples-prune",
        "20000",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("c.csv.summary.json"));
    assert_eq!(s["singleton"], true);
    assert_eq!(s["grid_cells"], 3);
    assert!(s["best_clean_loss"].as_f64().unwrap() <= 0.8);
    assert!(s["wall_time_s"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("c_value,iterate_index,w_1,w_2,w_3,clean_loss_mc"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn fit_point_mass_instance_emits_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let summary_path = dir.path().join("run.json");
    let o = oglm(&[
        "fit",
        "--config",
        path_str(&config("pointmass.toml")),
        "--delta",
        "0.1",
        "--tau",
        "0.3",
        "--t-scale",
        "0.25",
        "--grid-scale",
        "3200",
        "--samples-fit",
        "5000",
        "--samples-prune",
        "5000",
        "--out",
        path_str(&out),
        "--summary",
        path_str(&summary_path),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&summary_path);
    assert_eq!(s["singleton"], false);
    assert!(s["output"].as_u64().unwrap() > 1);
    assert!(s["best_clean_loss"].as_f64().unwrap() <= 0.1);
}

#[test]
fn fit_results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}.csv"));
        let o = oglm(&[
            "fit",
            "--config",
            path_str(&config("identifiable_d3.toml")),
            "--delta",
            "0.2",
            "--tau",
            "0.4",
            "--t-scale",
            "0.1",
            "--grid-scale",
            "2000",
            "--samples-fit",
            "3000",
            "--samples-prune",
            "3000",
            "--threads",
            threads,
            "--out",
            path_str(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn fit_rejects_zero_delta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = oglm(&[
        "fit",
        "--config",
        path_str(&config("identifiable_d3.toml")),
        "--delta",
        "0",
        "--tau",
        "0.4",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_three_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing_dir").join("s.csv");
    let o = oglm(&["simulate", "--config", path_str(&config("figure1.toml")), "--m", "10", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn figure1_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = oglm(&["figure1", "--samples", "200000", "--out", path_str(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,naive_dot,naive_se,ours_dot,ours_se"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 25);
    assert_eq!(rows[0][0], 1e-3);
    assert_eq!(rows[24][0], 2.0);
    assert!(rows[0][1].abs() <= 3.0 * rows[0][2]);
    assert!(rows[0][3] >= 5.0 * rows[0][4]);
    assert!(rows.iter().all(|r| r[3] > 0.0));
}

#[test]
fn identify_exit_codes() {
    let o = oglm(&[
        "identify",
        "--config",
        path_str(&config("pointmass.toml")),
        "--u",
        "0.3,0",
        "--v",
        "0.3,0.9",
        "--tau",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("witness_A="));
    let o = oglm(&[
        "identify",
        "--config",
        path_str(&config("identifiable_d3.toml")),
        "--u",
        "0.7,-0.5,0.4",
        "--v",
        "-0.2,0.1,0.3",
        "--tau",
        "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("witness_A=none"));
    let o = oglm(&[
        "identify",
        "--config",
        path_str(&config("pointmass.toml")),
        "--u",
        "0.3",
        "--v",
        "0.3,0",
        "--tau",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
