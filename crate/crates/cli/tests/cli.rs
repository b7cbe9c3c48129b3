use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[scenario]
users = 2
sbs_antennas = 2
mu_radius = 10.0

[surface]
rows = 2
cols = 2

[run]
trials = 2
seed = 3

[sweep]
sizes = [1, 2]
bits = [1, 2]
epsilons = [0.5, 1.0]
split_fractions = [0.0, 1.0]

[heatmap]
x_range = [95.0, 105.0]
y_range = [-2.0, 2.0]
x_steps = 3
y_steps = 2

[verify]
epsilon_instances = 20
derivative_instances = 20
ratio_instances = 200
split_trials = 20
"#;

fn omnisurf(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    Command::new(env!("CARGO_BIN_EXE_omnisurf"))
        .arg("--config")
        .arg(&config)
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn sweep_writes_one_row_per_value_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(dir.path(), &["sweep-size", "--out", "size.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&dir.path().join("size.csv"));
    assert_eq!(lines[0], "axis,value,variant,mean_sum_rate,std_error,trials,budget_exhausted");
    assert_eq!(lines.len(), 1 + 2 * 3);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.toml", "b.toml"] {
        let out = omnisurf(dir.path(), &["run", "--out", name]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.toml")).unwrap();
    let b = std::fs::read(dir.path().join("b.toml")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().contains("sum_rate"));
}

#[test]
fn variant_and_value_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(
        dir.path(),
        &["sweep-epsilon", "--radius", "5", "--values", "0.25,4", "--variant", "ios", "--out", "e.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&dir.path().join("e.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("epsilon,0.25,ios,"));
}

#[test]
fn heatmap_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(dir.path(), &["heatmap", "--epsilon", "1", "--out", "h.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_lines(&dir.path().join("h.csv")).len(), 1 + 3 * 2);
}

#[test]
fn verify_prints_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(dir.path(), &["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("passivity") && !stdout.contains("FAIL"));
}

#[test]
fn zero_trials_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(dir.path(), &["sweep-bits", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn unknown_variant_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = omnisurf(dir.path(), &["sweep-size", "--variant", "mirror"]);
    assert!(!out.status.success());
}
