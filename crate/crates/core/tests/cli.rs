use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wptopt(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wptopt")).args(args).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn bench_writes_sweep_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wptopt(&["bench", "--scenario", "sweep_power", "--realizations", "4"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("p_eh_w,strategy,mean_objective,stderr,realizations"));
    // 5 powers x 5 strategies
    assert_eq!(lines.count(), 25);
    assert!(!tmp.path().join("flagged.csv").exists());
}

#[test]
fn alloc_and_channel_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wptopt(&["bench", "--scenario", "alloc_single_realization"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let alloc = fs::read_to_string(tmp.path().join("alloc.csv")).unwrap();
    assert!(alloc.starts_with("tone,h_norm,g_norm,strategy,x_over_2p\n"));
    let channel = fs::read_to_string(tmp.path().join("channel.csv")).unwrap();
    assert!(channel.starts_with("tone,antenna,link,re,im\n"));
}

#[test]
fn seed_flag_changes_output_and_reruns_match() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let dir = tmp.path().join(name);
        let out = wptopt(&["bench", "--scenario", "miso_sweep", "--realizations", "5", "--seed", seed], &dir);
        assert_eq!(out.status.code(), Some(0));
        fs::read(dir.join("sweep.csv")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_ne!(a, run("2", "c"));
}

#[test]
fn solve_runs_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "sweep_power", "p_eh_w": [2e-5], "realizations": 3, "strategies": ["bb", "equal"]}"#,
    );
    let out = wptopt(&["solve", "--config", &cfg], &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(tmp.path().join("o/sweep.csv")).unwrap();
    let rows: Vec<_> = sweep.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("2e-5,bb,"));
    assert!(rows[1].starts_with("2e-5,equal,"));
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"scenario": "sweep_power", "n_tonez": 4}"#);
    let out = wptopt(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_tonez"));

    let cfg = write_config(tmp.path(), r#"{"scenario": "sweep_power", "realizations": 0}"#);
    let out = wptopt(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("realizations"));

    let out = wptopt(&["bench", "--scenario", "no_such_thing"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn node_limit_flags_rows_and_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "sweep_power", "p_eh_w": [1e-4], "realizations": 3, "strategies": ["bb"], "node_limit": 1}"#,
    );
    let out = wptopt(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let flagged = fs::read_to_string(tmp.path().join("flagged.csv")).unwrap();
    assert!(flagged.lines().count() > 1);
    assert!(tmp.path().join("sweep.csv").exists());
}

#[test]
fn fit_reports_coefficients() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/rectifier_region1.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_wptopt")).args(["fit", "--data", data]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "coef,value,std_error");
    let beta1: f64 = lines[1].strip_prefix("beta1,").unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((beta1 - 1500.0).abs() < 30.0, "beta1 = {beta1}");
}

#[test]
fn fit_rejects_bad_header() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "x,y\n1,2\n2,3\n3,5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wptopt"))
        .args(["fit", "--data"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
