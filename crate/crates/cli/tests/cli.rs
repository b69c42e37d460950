use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 7
algorithms = ["basic", "random"]

[network.grid]
cols = 6
rows = 6

[pois]
count = 200

[sim]
objects = 40
duration = 40.0

[attack]
replays = 4
budget = 200
injections = [0, 1]
max_regions = 5
"#;

fn starcloak(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starcloak"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = setup();
    let d = dir.path();
    ok(&starcloak(d, &["--config", "run.toml", "build"]));
    assert!(d.join("out/index.bundle").is_file());

    ok(&starcloak(d, &["--config", "run.toml", "--sweep", "sigma_s=2,3", "simulate"]));
    assert_eq!(lines(&d.join("out/metrics.csv")), 1 + 2 * 2);
    assert_eq!(lines(&d.join("out/timing.csv")), 1 + 2 * 2);
    for point in ["sigma_s=2", "sigma_s=3"] {
        for alg in ["basic", "random"] {
            let run = d.join("out").join(point).join(alg);
            for f in ["events.csv", "regions.jsonl", "metrics.csv", "timing.csv", "run.json"] {
                assert!(run.join(f).is_file(), "{}", run.join(f).display());
            }
        }
    }

    ok(&starcloak(d, &["--config", "run.toml", "--sweep", "sigma_s=2,3", "report"]));
    let tables: Vec<_> = fs::read_dir(d.join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("table_"))
        .collect();
    assert!(!tables.is_empty());

    ok(&starcloak(d, &["--config", "run.toml", "--sweep", "sigma_s=2,3", "attack"]));
    assert!(lines(&d.join("out/attack.csv")) > 1);
    assert_eq!(lines(&d.join("out/attack_summary.csv")), 1 + 2 * 2 * 2);

    for cmd in ["build", "simulate", "report", "attack"] {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join(format!("out/manifest-{cmd}.json"))).unwrap()).unwrap();
        assert_eq!(m["command"], cmd);
        assert_eq!(m["seed"], 7);
        assert!(m["config_hash"].as_str().is_some_and(|h| !h.is_empty()));
    }
}

#[test]
fn same_seed_same_output() {
    let dir = setup();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(&starcloak(d, &["--config", "run.toml", "--out", out, "simulate"]));
    }
    assert_eq!(fs::read(d.join("a/metrics.csv")).unwrap(), fs::read(d.join("b/metrics.csv")).unwrap());
    for alg in ["basic", "random"] {
        let events = |o: &str| fs::read(d.join(o).join("default").join(alg).join("events.csv")).unwrap();
        assert_eq!(events("a"), events("b"));
    }
    ok(&starcloak(d, &["--config", "run.toml", "--seed", "8", "--out", "c", "simulate"]));
    assert_ne!(fs::read(d.join("a/metrics.csv")).unwrap(), fs::read(d.join("c/metrics.csv")).unwrap());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = setup();
    let d = dir.path();
    let bad_sweep = starcloak(d, &["--config", "run.toml", "--sweep", "warp=1,2", "simulate"]);
    assert_eq!(bad_sweep.status.code(), Some(2));
    let missing = starcloak(d, &["--config", "absent.toml", "build"]);
    assert_eq!(missing.status.code(), Some(2));
    fs::write(d.join("typo.toml"), "seeed = 3\n").unwrap();
    assert_eq!(starcloak(d, &["--config", "typo.toml", "build"]).status.code(), Some(2));
    assert_eq!(starcloak(d, &["--algorithm", "nope", "build"]).status.code(), Some(2));
}

#[test]
fn report_without_runs_fails() {
    let dir = setup();
    let out = starcloak(dir.path(), &["--config", "run.toml", "report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metrics.csv"));
}
