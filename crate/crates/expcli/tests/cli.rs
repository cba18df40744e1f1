use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, SymmetricEigen};
use qcollide::config::parse_config;
use qcollide::output::{read_csv, MANIFEST_FILE, RESULTS_FILE};
use qcollide::{run_experiment, run_to_dir};
use qcollide_core::collision::{step, EngineConfig, Protocol, STRONG_GAMMA_INTRA};

const BIN: &str = env!("CARGO_BIN_EXE_qcollide");

const SMALL: &str = r#"{
    "engine": {"register_size": 2, "gamma_intra": 1.4922565104551517, "iterations": 6,
               "noise": {"p_miss": 0.4}},
    "measures": [
        {"measure": "negativity", "subset": ["r1", "s2"], "reductions": ["trace"]},
        {"measure": "gmn", "reductions": ["trace", "project"]}
    ],
    "realizations": 4,
    "seed": 11
}"#;

fn qcollide(args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .env_remove("QCOLLIDE_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn one_row_per_iteration_measure_and_reduction() {
    let rows = run_experiment(&parse_config(SMALL).unwrap(), 11).unwrap();
    assert_eq!(rows.len(), 6 * 3);
    for r in &rows {
        assert_eq!(r.realizations, 4);
        assert!(r.mean >= 0.0 && r.stderr >= 0.0);
        assert_eq!(r.sweep_parameter, "");
    }
    let subsets: Vec<&str> = rows.iter().take(3).map(|r| r.subset.as_str()).collect();
    assert_eq!(subsets, ["r1-r2-s1-s2", "r1-r2-s1-s2", "r1-s2"]);
}

#[test]
fn same_seed_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL);
    for out in ["a", "b"] {
        let o = dir.path().join(out);
        let status = qcollide(&["run", "--config", &config, "--out", o.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let a = fs::read(dir.path().join("a").join(RESULTS_FILE)).unwrap();
    let b = fs::read(dir.path().join("b").join(RESULTS_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_reruns_to_the_same_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = parse_config(SMALL).unwrap();
    config.seed = None;
    let first = dir.path().join("first");
    run_to_dir(&config, 99, &first).unwrap();

    let manifest = first.join(MANIFEST_FILE);
    let again = dir.path().join("again");
    let out = qcollide(&["run", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(first.join(RESULTS_FILE)).unwrap(),
        fs::read(again.join(RESULTS_FILE)).unwrap()
    );
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);
    assert_eq!(m["rows"], 18);
}

#[test]
fn environment_seed_is_used_when_the_config_has_none() {
    let dir = tempfile::tempdir().unwrap();
    let unseeded = SMALL.replace("\"seed\": 11", "\"seed\": null");
    let config = write(dir.path(), "c.json", &unseeded);
    let out = dir.path().join("env");
    let status = Command::new(BIN)
        .args(["run", "--config", &config, "--out", out.to_str().unwrap()])
        .env("QCOLLIDE_SEED", "11")
        .status()
        .unwrap();
    assert!(status.success());
    let expected = run_experiment(&parse_config(SMALL).unwrap(), 11).unwrap();
    assert_eq!(read_csv(&out.join(RESULTS_FILE)).unwrap(), expected);
}

fn brute_negativity(rho: &DMatrix<nalgebra::Complex<f64>>) -> f64 {
    // partial transpose on the second qubit of a two-qubit state
    let pt = DMatrix::from_fn(4, 4, |i, j| {
        let (ia, ib, ja, jb) = (i >> 1, i & 1, j >> 1, j & 1);
        rho[((ia << 1) | jb, (ja << 1) | ib)]
    });
    let eig = SymmetricEigen::new(pt).eigenvalues;
    eig.iter().filter(|&&e| e < 0.0).map(|e| -e).sum()
}

#[test]
fn subset_negativity_matches_a_direct_partial_trace() {
    let mut config = parse_config(SMALL).unwrap();
    config.engine.noise.p_miss = 0.0;
    config.realizations = 1;
    let rows = run_experiment(&config, 1).unwrap();

    let engine = EngineConfig::clean(2, STRONG_GAMMA_INTRA, 6);
    let protocol = Protocol::from_config(&engine).unwrap();
    let layout = engine.layout().unwrap();
    let (r1, s2, n) = (layout.r(1), layout.s(2), layout.total_qubits());
    let mut state = engine.initial_state().unwrap();
    let mut rng = rand::thread_rng();
    for iteration in 1..=6 {
        step(&mut state, &protocol, &mut rng).unwrap();
        let full = state.density();
        let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
        let mut reduced = DMatrix::<nalgebra::Complex<f64>>::zeros(4, 4);
        for i in 0..full.dim() {
            for j in 0..full.dim() {
                let rest = |x: usize| x & !((1 << (n - 1 - r1)) | (1 << (n - 1 - s2)));
                if rest(i) != rest(j) {
                    continue;
                }
                let a = (bit(i, r1) << 1) | bit(i, s2);
                let b = (bit(j, r1) << 1) | bit(j, s2);
                let z = full[(i, j)];
                reduced[(a, b)] += nalgebra::Complex::new(z.re, z.im);
            }
        }
        let row = rows
            .iter()
            .find(|r| r.iteration == iteration && r.subset == "r1-s2")
            .unwrap();
        let oracle = brute_negativity(&reduced);
        assert!((row.mean - oracle).abs() < 1e-10, "iteration {iteration}: {} vs {oracle}", row.mean);
    }
}

fn exit_code(args: &[&str]) -> i32 {
    qcollide(args).status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = write(dir.path(), "bad.json", &SMALL.replace("\"p_miss\": 0.4", "\"p_miss\": 1.5"));
    assert_eq!(exit_code(&["run", "--config", &bad, "--out", out]), 2);
    let typo = write(dir.path(), "typo.json", &SMALL.replace("realizations", "realisations"));
    let o = qcollide(&["run", "--config", &typo, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("realisations"));

    assert_eq!(exit_code(&["preset", "nonsense", "--out", out]), 2);
    assert_eq!(exit_code(&["qmap", "--t", "1e-6", "--t2", "0"]), 2);

    let blocker = write(dir.path(), "file", "");
    let good = write(dir.path(), "good.json", SMALL);
    assert_eq!(exit_code(&["run", "--config", &good, "--out", &format!("{blocker}/sub")]), 4);
}

#[test]
fn qmap_prints_q() {
    let o = qcollide(&["qmap", "--t", "1e-6", "--t2", "2e-4"]);
    assert!(o.status.success());
    let q: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((q - ((-1e-6f64 / 4e-4).exp() + 1.0) / 2.0).abs() < 1e-15);
}
