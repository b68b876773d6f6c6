use std::process::Command;

fn bench() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_conserve-bench"));
    c.env_remove("CONSERVE_OUT");
    c
}

#[test]
fn run_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench()
        .args([
            "run",
            "--problem",
            "soliton1",
            "--scheme",
            "mc2",
            "--lambda",
            "-0.1",
            "--dx",
            "1",
            "--dt",
            "1",
            "--T",
            "4",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.csv", "series.csv", "profile.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("MC2,1.0000000000000000e0,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "problem = \"soliton1\"\nscheme = \"EC2\"\ndx = 1.0\ndt = 1.0\nT = 3.0\ndomain = \"-40:40\"\n",
    )
    .unwrap();
    let out = bench()
        .args(["run", "--dt", "0.5", "--config"])
        .arg(&cfg)
        .env("CONSERVE_OUT", dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(dir.path().join("o/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 7);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bench().args(args).output().unwrap().status.code();
    assert_eq!(code(&["run", "--problem", "pkp", "--scheme", "MC2"]), Some(2));
    assert_eq!(code(&["run", "--scheme", "MC2", "--domain", "1-2"]), Some(2));
    assert_eq!(code(&["run", "--scheme", "MC2", "--dx", "0"]), Some(2));
    assert_eq!(code(&["run", "--scheme", "MC2", "--T", "2", "--newton-max-iter", "1"]), Some(3));
    assert_eq!(code(&["run", "--problem", "missing.csv", "--scheme", "MC2"]), Some(4));
    assert_eq!(code(&["table", "3"]), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scheme = \"MC2\"\nstep = 0.1\n").unwrap();
    let out = bench().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}
