use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ijt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ijt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ijt(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn small_instance(dir: &Path) {
    ok(
        dir,
        &[
            "gen", "--N", "120", "--M", "60", "--k", "4", "--seed", "5", "--out", "inst",
        ],
    );
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"instance": {"A": "inst/instance.A.txt", "y": "inst/instance.y.txt",
                         "x_true": "inst/instance.xtrue.txt"},
            "penalty": {"family": "power", "q": 0.5},
            "solver": {"lambda": 0.001, "mu_frac": 0.99, "init": "l1", "tol": 1e-10}}"#,
    )
    .unwrap();
}

#[test]
fn gen_is_deterministic_and_writes_manifest() {
    let t = TempDir::new().unwrap();
    let args = [
        "gen",
        "--N",
        "50",
        "--M",
        "20",
        "--k",
        "3",
        "--var-inv-M",
        "--seed",
        "7",
    ];
    ok(t.path(), &[&args[..], &["--out", "a"]].concat());
    ok(t.path(), &[&args[..], &["--out", "b"]].concat());
    for f in [
        "instance.A.txt",
        "instance.xtrue.txt",
        "instance.y.txt",
        "instance.manifest.json",
    ] {
        assert_eq!(
            read(t.path(), &format!("a/{f}")),
            read(t.path(), &format!("b/{f}")),
            "{f}"
        );
    }
    let m = json(t.path(), "a/instance.manifest.json");
    assert_eq!(m["spec"]["seed"], 7);
    assert_eq!(m["spec"]["variance"], 0.05);
    let nonzeros = read(t.path(), "a/instance.xtrue.txt")
        .lines()
        .skip(1)
        .filter(|l| l.parse::<f64>().unwrap() != 0.0)
        .count();
    assert_eq!(nonzeros, 3);
}

#[test]
fn zero_sparsity_gives_zero_files() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["gen", "--N", "4", "--M", "2", "--k", "0", "--seed", "1"],
    );
    for f in ["instance.xtrue.txt", "instance.y.txt"] {
        let text = read(t.path(), f);
        assert!(
            text.lines()
                .skip(1)
                .all(|l| l.parse::<f64>().unwrap() == 0.0),
            "{text}"
        );
    }
}

#[test]
fn zero_data_converges_to_zero_immediately() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["gen", "--N", "4", "--M", "2", "--k", "0", "--seed", "1"],
    );
    ok(
        t.path(),
        &[
            "solve",
            "--A",
            "instance.A.txt",
            "--y",
            "instance.y.txt",
            "--x-true",
            "instance.xtrue.txt",
        ],
    );
    let s = json(t.path(), "summary.json");
    assert_eq!(s["status"], "converged");
    assert!(s["iterations"].as_u64().unwrap() <= 2);
    assert_eq!(s["mse"], 0.0);
}

#[test]
fn solve_recovers_and_writes_artifacts() {
    let t = TempDir::new().unwrap();
    small_instance(t.path());
    ok(t.path(), &["solve", "--config", "cfg.json", "--out", "l1"]);
    ok(
        t.path(),
        &[
            "solve", "--config", "cfg.json", "--init", "zero", "--out", "zero",
        ],
    );
    let l1 = json(t.path(), "l1/summary.json");
    let zero = json(t.path(), "zero/summary.json");
    assert!(l1["mse"].as_f64().unwrap() <= 1e-4);
    assert!(zero["mse"].as_f64().unwrap() <= 1e-4);
    assert!(zero["iterations"].as_u64() > l1["iterations"].as_u64());
    let d = &l1["diagnostics"];
    assert_eq!(d["rho_star_kind"], "asymptotic");
    assert!(d["optimality_residual_support"].as_f64().unwrap() <= 1e-6);
    assert!(d["optimality_residual_offsupport"].as_f64().unwrap() <= 1e-6);
    assert!(read(t.path(), "l1/trace.csv").starts_with("iter,objective,step_norm"));
    assert!(read(t.path(), "l1/error.svg").starts_with("<svg"));
}

#[test]
fn baselines_run_from_the_command_line() {
    let t = TempDir::new().unwrap();
    small_instance(t.path());
    for algo in ["irls", "irl1", "soft", "hard"] {
        let out = ijt(
            t.path(),
            &[
                "solve", "--config", "cfg.json", "--algo", algo, "--out", algo,
            ],
        );
        assert!(matches!(out.status.code(), Some(0 | 2)), "{algo}");
        assert_eq!(
            json(t.path(), &format!("{algo}/summary.json"))["algo"],
            algo
        );
    }
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    small_instance(t.path());

    let out = ijt(
        t.path(),
        &[
            "solve",
            "--config",
            "cfg.json",
            "--init",
            "zero",
            "--max-iters",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(t.path(), "summary.json")["status"], "max-iters");

    std::fs::write(t.path().join("bad.json"), r#"{"solver": {"lamda": 0.1}}"#).unwrap();
    assert_eq!(
        ijt(t.path(), &["solve", "--config", "bad.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ijt(t.path(), &["solve"]).status.code(), Some(1));
    assert_eq!(
        ijt(t.path(), &["solve", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ijt(t.path(), &["prox-table", "--samples", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ijt(t.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn prox_table_exposes_the_jump() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "prox-table",
            "--q",
            "0.5",
            "--lambda",
            "1",
            "--mu",
            "1",
            "--from=-3",
            "--to",
            "3",
        ],
    );
    let text = read(t.path(), "prox_table.csv");
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (z, v) = l.split_once(',').unwrap();
            (z.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 601 + 4);
    assert!(rows.iter().all(|(_, v)| *v == 0.0 || v.abs() >= 1.0 - 1e-9));
    let at = |z: f64| rows.iter().find(|(x, _)| *x == z).unwrap().1;
    assert_eq!(at(1.5 * (1.0 - 1e-9)), 0.0);
    assert!((at(1.5 * (1.0 + 1e-9)) - 1.0).abs() < 1e-6);
    assert!(read(t.path(), "prox_table.svg").contains("<polyline"));
}

#[test]
fn soft_prox_table_is_continuous() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["prox-table", "--rule", "soft", "--emit", "csv"]);
    let vals: Vec<f64> = read(t.path(), "prox_table.csv")
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 601);
    assert!(vals.windows(2).all(|w| (w[1] - w[0]).abs() <= 0.01 + 1e-12));
    assert!(!t.path().join("prox_table.svg").exists());
}

#[test]
fn sweep_is_reproducible_and_single_point_matches_solve() {
    let t = TempDir::new().unwrap();
    small_instance(t.path());
    ok(
        t.path(),
        &[
            "sweep-mu", "--config", "cfg.json", "--grid", "6", "--out", "s1",
        ],
    );
    ok(
        t.path(),
        &[
            "sweep-mu", "--config", "cfg.json", "--grid", "6", "--out", "s2", "--jobs", "3",
        ],
    );
    assert_eq!(
        read(t.path(), "s1/sweep.csv"),
        read(t.path(), "s2/sweep.csv")
    );
    assert_eq!(read(t.path(), "s1/sweep.csv").lines().count(), 7);

    ok(
        t.path(),
        &[
            "sweep-mu", "--config", "cfg.json", "--grid", "1", "--out", "g1",
        ],
    );
    ok(
        t.path(),
        &[
            "solve",
            "--config",
            "cfg.json",
            "--mu-frac",
            "0.5",
            "--out",
            "half",
        ],
    );
    let row = read(t.path(), "g1/sweep.csv")
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    let iters: u64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(
        Some(iters),
        json(t.path(), "half/summary.json")["iterations"].as_u64()
    );
}

#[test]
fn bench_single_size_has_one_row_per_method() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["bench", "--sizes", "250", "--reps", "1"]);
    let text = read(t.path(), "bench.csv");
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("algo,N,wall_time,mse,iterations,time_ratio,converged")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let mse: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!(mse <= 1e-3, "{r}");
    }
}

#[test]
fn check_reports_residuals_and_degenerate_support() {
    let t = TempDir::new().unwrap();
    small_instance(t.path());
    ok(t.path(), &["solve", "--config", "cfg.json", "--out", "run"]);
    ok(
        t.path(),
        &[
            "check",
            "--config",
            "cfg.json",
            "--solution",
            "run/solution.txt",
            "--oracle",
            "--out",
            "ck",
        ],
    );
    let c = json(t.path(), "ck/check.json");
    assert!(c["optimality_residual_support"].as_f64().unwrap() <= 1e-6);
    assert!(c["oracle_max_prox_gap"].as_f64().unwrap() <= 1e-6);
    assert!(c["gram_min_eig"].is_number());

    let zeros = format!("120 1\n{}", "0\n".repeat(120));
    std::fs::write(t.path().join("zero.txt"), zeros).unwrap();
    ok(
        t.path(),
        &[
            "check",
            "--config",
            "cfg.json",
            "--solution",
            "zero.txt",
            "--out",
            "ck0",
        ],
    );
    let z = json(t.path(), "ck0/check.json");
    assert!(z["gram_min_eig"].is_null());
    assert!(z["optimality_residual_offsupport"].as_f64().unwrap() > 0.0);

    std::fs::write(t.path().join("short.txt"), "3 1\n0\n0\n0\n").unwrap();
    let out = ijt(
        t.path(),
        &["check", "--config", "cfg.json", "--solution", "short.txt"],
    );
    assert_eq!(out.status.code(), Some(1));
}
