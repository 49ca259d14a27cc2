use std::path::Path;
use std::process::{Command, Output};

use mnm_lab::records::RECORD_HEADER;

fn lab(args: &[&str], output_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnm-lab"))
        .args(args)
        .env("MNM_LAB_OUTPUT_DIR", output_dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_CURVES: &str = r#"
[experiment]
name = "gridworld-curves"
seeds = [0, 1]
methods = ["mnm", "q-learning"]

[environment]
preset = "stochastic-d2"

[qlearning]
episodes = 200
eval_every = 50
"#;

#[test]
fn list_presets_names_every_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["list-presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["stochastic-d2", "manhattan-d2", "bound-trace", "aliased-15", "windy-three-state"] {
        assert!(text.lines().any(|l| l == name), "{name} missing from {text}");
    }
}

#[test]
fn run_writes_seed_aggregate_and_summary_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "curves.toml", SMALL_CURVES);
    let out_dir = dir.path().join("out");
    let out = lab(&["run", &config], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let exp = out_dir.join("gridworld-curves");
    for file in ["seed-0.csv", "seed-1.csv", "aggregate.csv", "summary.csv"] {
        assert!(exp.join(file).is_file(), "{file} not written");
    }
    let seed = std::fs::read_to_string(exp.join("seed-0.csv")).unwrap();
    assert_eq!(seed.lines().next().unwrap(), RECORD_HEADER.join(","));
    assert!(seed.lines().skip(1).all(|l| l.starts_with("gridworld-curves,0,")));
    let aggregate = std::fs::read_to_string(exp.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().next().unwrap(), "experiment,method,step,metric,median,q25,q75");
    let summary = std::fs::read_to_string(exp.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.starts_with("gridworld-curves,all,")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "curves.toml", SMALL_CURVES);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(lab(&["run", &config], &a).status.success());
    assert!(lab(&["run", &config], &b).status.success());
    for file in ["seed-0.csv", "seed-1.csv", "aggregate.csv", "summary.csv"] {
        let x = std::fs::read(a.join("gridworld-curves").join(file)).unwrap();
        let y = std::fs::read(b.join("gridworld-curves").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn config_errors_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown-key.toml", "[experiment]\nname = \"aliasing\"\nseeds = [0]\ncolour = 3\n"),
        ("bad-kind.toml", "[experiment]\nname = \"nope\"\nseeds = [0]\n"),
        ("no-seeds.toml", "[experiment]\nname = \"aliasing\"\nseeds = []\n"),
        (
            "bad-method.toml",
            "[experiment]\nname = \"aliasing\"\nseeds = [0]\nmethods = [\"q-learning\"]\n",
        ),
        (
            "bad-polyak.toml",
            "[experiment]\nname = \"three-state\"\nseeds = [0]\n[solver]\npolyak = 1.5\n",
        ),
    ];
    for (name, text) in cases {
        let config = write_config(dir.path(), name, text);
        let out = lab(&["run", &config], dir.path());
        assert_eq!(out.status.code(), Some(1), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(!out.stderr.is_empty(), "{name} printed no error");
    }
    let missing = dir.path().join("missing.toml");
    let out = lab(&["run", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_bounds_passes_and_reports_each_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify-bounds", "--cases", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lower-bound"));
    assert!(text.contains("goal-verbatim"));
    assert!(dir.path().join("verify-bounds").join("summary.csv").is_file());
}

#[test]
fn verify_bounds_rejects_zero_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify-bounds", "--seeds", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
