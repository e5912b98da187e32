use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 15] = [
    "billiard-fractions",
    "billiard-orbit",
    "quasimode-count",
    "quasimode-residual",
    "quasimode-gram",
    "grid-spectrum",
    "weyl-check",
    "eigen-branches",
    "kam-circle",
    "homological-solve",
    "fourier-bounds",
    "diophantine-measure",
    "quasi-lattice",
    "flow-sim",
    "density-lemma",
];

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qergo-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn qergo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qergo"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QERGO_THREADS")
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

fn meta(dir: &Path, sub: &str) -> serde_json::Map<String, Value> {
    let text = std::fs::read_to_string(dir.join(format!("{sub}.meta.json"))).unwrap();
    match serde_json::from_str(&text).unwrap() {
        Value::Object(m) => m,
        other => panic!("metadata is not an object: {other}"),
    }
}

#[test]
fn billiard_fractions_example() {
    let dir = scratch("bf");
    let out = qergo(&["billiard-fractions", "--r1", "1", "--r2", "2", "--t", "1", "--samples", "1e6", "--seed", "7"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.join("billiard-fractions.csv"));
    assert_eq!(rows.len(), 1);
    for c in ["d", "d_hat", "stderr"] {
        assert!(h.iter().any(|x| x == c));
    }
    let (d, d_hat, se) = (column(&h, &rows[0], "d"), column(&h, &rows[0], "d_hat"), column(&h, &rows[0], "stderr"));
    // binomial standard error at 1e6 samples
    assert!((se - (d_hat * (1.0 - d_hat) / 1e6).sqrt()).abs() < 1e-6);
    assert!((d - d_hat).abs() < 3.0 * se, "{d} vs {d_hat} ± {se}");
    let m = meta(&dir, "billiard-fractions");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["param.samples"], 1_000_000);
    assert_eq!(m["subcommand"], "billiard-fractions");
    assert!(m.values().all(|v| !v.is_object() && !v.is_array()));
    for k in ["version", "wall_time_s", "timestamp_unix", "threads", "rows", "columns", "table"] {
        assert!(m.contains_key(k), "missing {k}");
    }
}

#[test]
fn quasimode_count_example() {
    let dir = scratch("qc");
    let out = qergo(&["quasimode-count", "--r1", "1", "--r2", "2", "--lambda", "200", "--eps", "0.01"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.join("quasimode-count.csv"));
    let c: f64 = 2.0;
    let pi = std::f64::consts::PI;
    let oracle = (4.0 / 8.0) * (1.0 - 2.0 / (pi * c * c) * (c * c - 1.0).sqrt() - 2.0 / pi * (1.0 / c).asin());
    assert!((column(&h, &rows[0], "closed_form") - oracle).abs() < 1e-12);
    let count = column(&h, &rows[0], "count");
    assert!((column(&h, &rows[0], "count_over_lambda_sq") - count / 40_000.0).abs() < 1e-12);
    assert!((count / 40_000.0 - oracle).abs() / oracle < 0.05);
}

#[test]
fn unknown_flag_and_subcommand_fail_with_usage() {
    let dir = scratch("bad");
    let out = qergo(&["quasimode-count", "--bogus", "1"], &dir);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    let out = qergo(&["no-such-experiment"], &dir);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn module_errors_are_reported() {
    let dir = scratch("moderr");
    let out = qergo(&["billiard-fractions", "--r1", "3", "--r2", "2"], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("billiard-fractions"));
    let out = qergo(&["flow-sim", "--b", "1.5"], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordering"));
    assert!(!dir.join("flow-sim.csv").exists());
}

#[test]
fn every_subcommand_has_a_dry_run() {
    let dir = scratch("dry");
    for sub in SUBCOMMANDS {
        let out = qergo(&[sub, "--dry-run"], &dir);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("parameters valid"));
    }
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 0);
    let out = qergo(&["grid-spectrum", "--dry-run", "--h", "0.001"], &dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_runs_give_identical_tables() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let args = ["flow-sim", "--n-lines", "300", "--seeds", "2", "--seed", "5"];
    assert!(qergo(&args, &a).status.success());
    assert!(qergo(&args, &b).status.success());
    assert_eq!(std::fs::read(a.join("flow-sim.csv")).unwrap(), std::fs::read(b.join("flow-sim.csv")).unwrap());
    let (mut ma, mut mb) = (meta(&a, "flow-sim"), meta(&b, "flow-sim"));
    for k in ["wall_time_s", "timestamp_unix"] {
        ma.remove(k);
        mb.remove(k);
    }
    assert_eq!(ma, mb);
    let args = ["billiard-fractions", "--samples", "2e5", "--seed", "3"];
    assert!(qergo(&args, &a).status.success());
    assert!(qergo(&args, &b).status.success());
    assert_eq!(
        std::fs::read(a.join("billiard-fractions.csv")).unwrap(),
        std::fs::read(b.join("billiard-fractions.csv")).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("cfg");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# quasimode counting\nlambda = 40\neps = 0.2\nr2 = 3\n").unwrap();
    let out = qergo(&["--config", cfg.to_str().unwrap(), "quasimode-count", "--eps", "0.1"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = meta(&dir, "quasimode-count");
    assert_eq!(m["param.lambda"], 40.0);
    assert_eq!(m["param.eps"], 0.1);
    assert_eq!(m["param.r2"], 3.0);
    std::fs::write(&cfg, "lambda 40\n").unwrap();
    let out = qergo(&["--config", cfg.to_str().unwrap(), "quasimode-count"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_from_environment_and_flag() {
    let dir = scratch("thr");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_qergo"));
        c.args(["fourier-bounds", "--out"]).arg(&dir);
        if let Some(f) = flag {
            c.args(["--threads", f]);
        }
        match env {
            Some(v) => c.env("QERGO_THREADS", v),
            None => c.env_remove("QERGO_THREADS"),
        };
        c.output().unwrap()
    };
    assert!(run(Some("1"), None).status.success());
    assert_eq!(meta(&dir, "fourier-bounds")["threads"], 1);
    assert!(run(Some("1"), Some("2")).status.success());
    assert_eq!(meta(&dir, "fourier-bounds")["threads"], 2);
    assert_eq!(run(Some("zero"), None).status.code(), Some(1));
    assert_eq!(run(None, Some("0")).status.code(), Some(1));
}

#[test]
fn print_flag_echoes_the_table() {
    let dir = scratch("print");
    let out = qergo(&["kam-circle", "--print"], &dir);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.as_bytes(), std::fs::read(dir.join("kam-circle.csv")).unwrap());
    assert!(stdout.starts_with("iteration,eps,sigma,delta,defect,grid_size\n"));
    let m = meta(&dir, "kam-circle");
    assert_eq!(m["result.converged"], true);
    assert!(m["result.defect"].as_f64().unwrap() < 1e-10);
}
