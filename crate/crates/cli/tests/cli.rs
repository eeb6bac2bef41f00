use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relay-bargain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_is_deterministic_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["generate", "--seed", "4"]);
    let b = run(&["generate", "--seed", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let inst = dir.path().join("inst.toml");
    std::fs::write(&inst, &a.stdout).unwrap();
    let replay = run(&["solve", "--instance", inst.to_str().unwrap()]);
    let direct = run(&["solve", "--seed", "4"]);
    assert_eq!(replay.status.code(), direct.status.code());
    assert_eq!(replay.stdout, direct.stdout);
}

#[test]
fn solve_prints_json() {
    let o = run(&["solve", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("\"feasible\": true"), "{text}");
    assert!(text.contains("\"dedicators\""));
}

#[test]
fn infeasible_exits_two() {
    let o = run(&["solve", "--seed", "3", "--e0", "1000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn errors_exit_one() {
    assert_eq!(run(&["solve", "--config", "/no/such/file.toml"]).status.code(), Some(1));
    assert_eq!(run(&["trace", "--seeds", "4..2"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--e0", "0.1,0.2"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pairs = 3\n");
    let o = run(&["generate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairs"));
}

#[test]
fn sweep_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_pairs = 3\n");
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--experiment",
        "dedicator_sweep",
        "--config",
        &cfg,
        "--seeds",
        "0..=1",
        "--e0",
        "0.02,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "seed,e0,k,feasible,phi,sum_capacity,residual_energy");
    assert_eq!(lines.count(), 2 * 2 * 3);
}

#[test]
fn modes_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_pairs = 3\ne0_per_t_mw = 0.02\n");
    let base = run(&["solve", "--config", &cfg, "--seed", "1"]);
    let other = run(&[
        "solve",
        "--config",
        &cfg,
        "--seed",
        "1",
        "--mode",
        "exhaustive",
        "--power-mode",
        "dual-ascent",
        "--time-mode",
        "dual-ascent",
    ]);
    assert_eq!(base.status.code(), Some(0));
    assert_eq!(other.status.code(), Some(0));
    assert!(stdout(&other).matches("\"alternations\"").count() == 7);
}

#[test]
fn trace_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_pairs = 3\ne0_per_t_mw = 0.02\n");
    let t = run(&["trace", "--config", &cfg, "--seeds", "0,1"]);
    assert_eq!(t.status.code(), Some(0));
    let text = stdout(&t);
    assert!(text.starts_with("seed,iteration,phase,phi\n"));
    assert_eq!(text.matches(",gain_ratio,").count(), 2);

    let c = run(&["check", "--config", &cfg, "--seeds", "0..2", "--exhaustive-gap"]);
    assert_eq!(c.status.code(), Some(0), "{}", String::from_utf8_lossy(&c.stderr));
    assert!(stdout(&c).contains(",pruned_gap,true,"));
}

#[test]
fn oracle_compare_and_scans() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_pairs = 1\ne0_per_t_mw = 0.02\n");
    let o = run(&["oracle", "--config", &cfg, "--seeds", "0..3", "--resolution", "40,40,40"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("seed,solver_phi,oracle_phi,ratio"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")), "{text}");

    let s = run(&["oracle", "--config", &cfg, "--seed", "0", "--scans"]);
    assert_eq!(s.status.code(), Some(0));
    assert!(stdout(&s).contains("relay_power,1000,"));
}

#[test]
fn oracle_rejects_large_networks() {
    let o = run(&["oracle", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
