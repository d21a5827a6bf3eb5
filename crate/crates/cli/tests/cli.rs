use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mrdist");

fn configs(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(sub)
}

fn mrdist(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("MRDIST_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn mrdist")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const DELTA_POISSON: &str = r#"
name = "p"
pipeline = "delta-poisson"
[mra]
filter = "haar"
[grids]
j = [0, 1]
"#;

#[test]
fn list_shows_catalog() {
    let out = mrdist(&["list"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    for name in [
        "haar",
        "d4",
        "d6",
        "d8",
        "heaviside",
        "abs_pow(a)",
        "delta",
        "cantor",
        "default4",
        "delta-poisson",
    ] {
        assert!(lines.contains(&name), "{name} missing");
    }
    assert_eq!(text, String::from_utf8(mrdist(&["list"], &[]).stdout).unwrap());
}

#[test]
fn malformed_filter_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &DELTA_POISSON.replace("haar", "d5"));
    let out_dir = tmp.path().join("out");
    let out = mrdist(
        &[
            "delta-poisson",
            "--config",
            &config,
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), DELTA_POISSON);
    assert_eq!(mrdist(&["bogus"], &[]).status.code(), Some(1));
    assert_eq!(mrdist(&["info"], &[]).status.code(), Some(1));
    assert_eq!(
        mrdist(&["info", "--config", "/nonexistent.toml"], &[])
            .status
            .code(),
        Some(1)
    );
    // The config names a different pipeline.
    assert_eq!(mrdist(&["info", "--config", &config], &[]).status.code(), Some(1));
    let out = tmp.path().join("o");
    let threads = mrdist(
        &[
            "delta-poisson",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
        ],
        &[("MRDIST_THREADS", "zero")],
    );
    assert_eq!(threads.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(mrdist(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two_with_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let qbc2 = configs("acceptance").join("density_delta.toml");
    let out = tmp.path().join("d");
    let run = mrdist(
        &[
            "density",
            "--config",
            qbc2.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(run.status.code(), Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failing"][0], "mass_bound");
    assert!(summary["error"].as_str().unwrap().contains("mass_bound"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs("acceptance").join("qbth3_heaviside.toml");
    let mut texts = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        let run = mrdist(
            &[
                "qbth3",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[("MRDIST_THREADS", threads)],
        );
        assert!(run.status.success());
        texts.push((
            fs::read(out.join("qbth3.csv")).unwrap(),
            fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn example_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut entries: Vec<PathBuf> = fs::read_dir(configs("examples"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    entries.sort();
    assert!(!entries.is_empty());
    for path in entries {
        let text = fs::read_to_string(&path).unwrap();
        let pipeline = text
            .lines()
            .find_map(|l| l.strip_prefix("pipeline = "))
            .map(|p| p.trim_matches('"').to_string())
            .unwrap();
        let out = tmp.path().join(path.file_stem().unwrap());
        let run = mrdist(
            &[
                &pipeline,
                "--config",
                path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert!(
            run.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&run.stderr)
        );
        assert!(out.join("summary.json").exists());
    }
}
