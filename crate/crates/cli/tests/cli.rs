use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fblsec(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fblsec"));
    cmd.args(args).env_remove("FBLSEC_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const SMALL_EVAL: &str = r#"{"eval": {"m": {"from": 20, "to": 3000, "points": 8},
                                      "p": {"from": 1e-3, "to": 10, "points": 6, "log": true}}}"#;

#[test]
fn eval_writes_grid_with_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "eval.json", SMALL_EVAL);
    let out = fblsec(&["eval", "--config", &config], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,p,eps_b,eps_e,eps_lf,flag_insecure"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 48);
    let mut flags = [0, 0];
    for r in &rows {
        let (eb, ee, lfp): (f64, f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
        let want = eb * ee + (1.0 - ee);
        assert!((lfp - want).abs() <= 1e-12, "{r:?}");
        let flag: usize = r[5].parse().unwrap();
        assert_eq!(flag, usize::from(lfp >= 0.5));
        flags[flag] += 1;
    }
    assert!(flags[0] > 0 && flags[1] > 0, "{flags:?}");
}

#[test]
fn out_flag_overrides_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let from_config = dir.path().join("config.csv");
    let from_flag = dir.path().join("flag.csv");
    let json = format!(
        r#"{{"eval": {{"m": [100, 200], "p": [1.0]}}, "output": {{"path": {:?}}}}}"#,
        from_config.to_str().unwrap()
    );
    let config = write_config(&dir, "c.json", &json);

    assert!(fblsec(&["eval", "--config", &config], &[]).status.success());
    assert_eq!(read(&from_config).lines().count(), 3);

    std::fs::remove_file(&from_config).unwrap();
    assert!(fblsec(&["eval", "--config", &config, "--out", from_flag.to_str().unwrap()], &[]).status.success());
    assert!(!from_config.exists());
    assert_eq!(read(&from_flag).lines().count(), 3);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        &dir,
        "sweep.json",
        r#"{"sweep": {"variable": "z_b", "values": [1.5, 1.8, 2.0]},
            "constraints": {"delta_max": 0.5, "eps_b_max": 0.5, "power": 1.0,
                            "fading": {"estimator": "monte_carlo", "samples": 1000}}}"#,
    );
    let runs: Vec<Vec<u8>> = [(&["--threads", "1"][..], &[][..]), (&[][..], &[("FBLSEC_THREADS", "4")][..]), (&["--threads", "3"][..], &[][..])]
        .iter()
        .map(|(flags, env)| {
            let mut args = vec!["sweep", "--config", &config, "--seed", "5"];
            args.extend_from_slice(flags);
            let out = fblsec(&args, env);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        })
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn bad_thread_env_is_config_error() {
    let out = fblsec(&["oracle"], &[("FBLSEC_THREADS", "many")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, json) in [
        ("unknown.json", r#"{"scenery": {}}"#),
        ("syntax.json", r#"{"scenario": "#),
        ("variable.json", r#"{"sweep": {"variable": "colour", "values": [1]}}"#),
        ("empty.json", r#"{"sweep": {"variable": "d", "values": []}}"#),
    ] {
        let config = write_config(&dir, name, json);
        let out = fblsec(&["sweep", "--config", &config], &[]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn unreadable_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(fblsec(&["eval", "--config", missing.to_str().unwrap()], &[]).status.code(), Some(1));
}

#[test]
fn infeasible_point_becomes_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        &dir,
        "c.json",
        r#"{"constraints": {"delta_max": 1e-3, "eps_b_max": 1e-3, "power": 1.0},
            "sweep": {"variable": "d", "values": [320], "objective": "blocklength"}}"#,
    );
    let out = fblsec(&["sweep", "--config", &config], &[]);
    // Without trend assertions an infeasible point becomes an error row.
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("error"), "{text}");
}

#[test]
fn failed_trend_exits_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    // LFP falls as Bob's gain grows, so asserting an increase must fail.
    let config = write_config(
        &dir,
        "c.json",
        r#"{"sweep": {"variable": "z_b", "values": [1.2, 1.5, 2.0], "trend": "increasing"}}"#,
    );
    let out = fblsec(&["sweep", "--config", &config, "--out", csv.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!csv.exists());

    let config = write_config(
        &dir,
        "ok.json",
        r#"{"sweep": {"variable": "z_b", "values": [1.2, 1.5, 2.0], "trend": "decreasing"}}"#,
    );
    let out = fblsec(&["sweep", "--config", &config, "--out", csv.to_str().unwrap()], &[]);
    assert!(out.status.success());
    assert_eq!(read(&csv).lines().count(), 4);
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig3_solve_zb15.json", "fig4_zb_ze10.json", "fig7_n_passive.json"] {
        let cmd = if name.contains("solve") { "solve" } else { "sweep" };
        let out_path = dir.path().join(name.replace(".json", ".csv"));
        let out = fblsec(
            &[cmd, "--config", root.join(name).to_str().unwrap(), "--out", out_path.to_str().unwrap()],
            &[],
        );
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(read(&out_path).lines().count() > 1);
    }
}
