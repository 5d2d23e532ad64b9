use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_ns1d");

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, format!("name = \"{name}\"\n{body}")).unwrap();
    path
}

const SMALL: &str = r#"
[params]
alpha = 1.0
gamma = 2.0
[grid]
L = 4.0
N = 64
[initial]
family = "gaussian-bump"
amplitude = 0.5
[run]
T = 0.1
output_dt = 0.05
"#;

#[test]
fn run_writes_artifacts_under_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "small", SMALL);
    let out = dir.path().join("results");
    let status = Command::new(BIN).arg("run").arg(&cfg).env("NS1D_OUT_DIR", &out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["timeseries.csv", "summary.csv", "fields_t0.000000.csv", "fields_t0.100000.csv"] {
        assert!(out.join("small").join(f).exists(), "{f}");
    }
    let ts = fs::read_to_string(out.join("small/timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 4);
    assert!(ts.starts_with("form,t,mass,"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "det", SMALL);
    let mut seen = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let st = Command::new(BIN).args(["--out"]).arg(&out).arg("run").arg(&cfg).status().unwrap();
        assert!(st.success());
        seen.push((fs::read(out.join("timeseries.csv")).unwrap(), fs::read(out.join("summary.csv")).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "bad", &SMALL.replace("gamma = 2.0\n", ""));
    let out = Command::new(BIN).arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
    let out = Command::new(BIN).arg("validate").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "io", SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = Command::new(BIN).arg("--out").arg(blocker.join("sub")).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn out_of_theorem_validate_reports_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "wide", &SMALL.replace("alpha = 1.0", "alpha = 0.4"));
    let out = Command::new(BIN).arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("1/2 < alpha <= 1"));
}

#[test]
fn vacuum_breach_is_a_recorded_outcome() {
    let dir = tempfile::tempdir().unwrap();
    // deep well drained by a strong outflow, nearly inviscid and outside the existence region
    let mut table = String::from("x,rho,u\n");
    for i in 0..=400 {
        let x = -4.0 + 8.0 * i as f64 / 400.0;
        let g = (-x * x).exp();
        table.push_str(&format!("{x},{},{}\n", 1.0 - 0.99 * g, 10.0 * x * g));
    }
    fs::write(dir.path().join("well.csv"), table).unwrap();
    let body = r#"
[params]
alpha = 1.0
gamma = 1.01
a = 0.01
mu = 0.001
[grid]
L = 4.0
N = 64
[initial]
family = "custom-table"
table = "well.csv"
[run]
T = 1.0
output_dt = 0.05
form = "V"
"#;
    let cfg = write_scenario(dir.path(), "vac", body);
    let out_dir = dir.path().join("out");
    let out = Command::new(BIN).arg("--out").arg(&out_dir).arg("run").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("vacuum"), "yes");
    assert!(col("vacuum_time").parse::<f64>().unwrap() < 1.0);
    assert_eq!(col("completed"), "false");
    // the time series stops at the last state before the breach
    let ts = fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    let last_t: f64 = ts.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last_t < 1.0);
}

#[test]
fn studies_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "st", &SMALL.replace("N = 64", "N = 32"));
    let out = dir.path().join("o");
    let st = Command::new(BIN)
        .arg("--out")
        .arg(&out)
        .args(["sweep", cfg.to_str().unwrap(), "--alpha", "0.8,1.0", "--gamma", "2.0"])
        .status()
        .unwrap();
    assert!(st.success());
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    let st = Command::new(BIN)
        .arg("--out")
        .arg(&out)
        .args(["refine", cfg.to_str().unwrap(), "--N", "32,64,128"])
        .status()
        .unwrap();
    assert!(st.success());
    assert!(fs::read_to_string(out.join("orders.csv")).unwrap().starts_with("quantity,form,n_a,n_b"));
    let st = Command::new(BIN)
        .arg("--out")
        .arg(&out)
        .args(["regularize", cfg.to_str().unwrap(), "--n", "2,4,8"])
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(fs::read_to_string(out.join("regularization.csv")).unwrap().lines().count(), 4);
}
