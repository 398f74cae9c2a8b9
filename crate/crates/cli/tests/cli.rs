use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_chemotaxis");

fn small_scenario(t_end: f64) -> String {
    format!(
        r#"master_seed = 5

[signal]
family = "linear-in-x"
gradient = [0.5]

[kernel]
response = "tanh"
chi = 0.5
base_rate = 1.0

[grid]
length = 20.0
n_x = 100
velocities = 4
v_max = 1.0
n_y = 64
y_max = 8.0
profile = {{ kind = "cosine-bump", center = 10.0, half_width = 3.0 }}

[solver]
eps = 0.1
dt = 0.01
t_end = {t_end}
transport = "muscl-minmod"
output_interval = 0.1

[particles]
count = 100
t_end = 0.2

[sweep]
eps = [0.2]

[output]
directory = "unused"
formats = ["csv", "snapshot"]
plots = true
"#
    )
}

fn run(dir: &Path, scenario: &str, args: &[&str]) -> Output {
    let cfg = dir.join("scenario.toml");
    std::fs::write(&cfg, scenario).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn zero_end_time_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &small_scenario(0.0), &["run-grid"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&dir.path().join("out/run-grid/diagnostics.csv")), 1);
    assert!(dir.path().join("out/run-grid/final.snap.meta").exists());
    assert!(dir.path().join("out/run-grid/manifest.toml").exists());
}

#[test]
fn row_count_matches_output_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &small_scenario(0.5), &["run-grid"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&dir.path().join("out/run-grid/diagnostics.csv")), 6);
}

#[test]
fn missing_kernel_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_scenario(0.5);
    let start = text.find("[kernel]").unwrap();
    let end = text.find("[grid]").unwrap();
    let text = format!("{}{}", &text[..start], &text[end..]);
    let out = run(dir.path(), &text, &["run-grid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_sweep_order_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_scenario(0.5).replace("eps = [0.2]", "eps = [0.05, 0.2]");
    let out = run(dir.path(), &text, &["validate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cfl_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_scenario(0.5).replace("dt = 0.01", "dt = 0.25");
    let out = run(dir.path(), &text, &["run-grid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_csv_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run(d.path(), &small_scenario(0.3), &["run-grid"]).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("out/run-grid/diagnostics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn limit_run_writes_csv_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &small_scenario(0.5), &["run-limit"]);
    assert!(out.status.success());
    assert_eq!(rows(&dir.path().join("out/run-limit/limit.csv")), 6);
    assert!(dir.path().join("out/run-limit/final.snap").exists());
}

#[test]
fn small_particle_comparison_warns_but_succeeds() {
    let first = tempfile::tempdir().unwrap();
    let out = run(first.path(), &small_scenario(0.5), &["compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient statistics"));
    let second = tempfile::tempdir().unwrap();
    assert!(run(second.path(), &small_scenario(0.5), &["compare"]).status.success());
    let report = |d: &tempfile::TempDir| std::fs::read(d.path().join("out/compare/report.toml")).unwrap();
    assert_eq!(report(&first), report(&second));
}

#[test]
fn particles_are_checkpointed_and_exported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &small_scenario(0.5), &["run-particles", "--seed", "9"]);
    assert!(out.status.success());
    assert_eq!(rows(&dir.path().join("out/run-particles/particles.csv")), 100);
    let manifest = std::fs::read_to_string(dir.path().join("out/run-particles/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"));
}

#[test]
fn single_eps_sweep_reports_without_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &small_scenario(0.4), &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fit needs at least three"));
    assert_eq!(rows(&dir.path().join("out/sweep/rates.csv")), 1);
    assert!(!dir.path().join("out/sweep/rate_pointwise_l1.svg").exists());
}

#[test]
fn flat_constant_sweep_is_at_floor() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_scenario(0.4)
        .replace("family = \"linear-in-x\"\ngradient = [0.5]", "family = \"constant\"\nvalue = 1.0")
        .replace("response = \"tanh\"\nchi = 0.5", "response = \"flat\"")
        .replace("eps = [0.2]", "eps = [0.2, 0.1, 0.05]");
    let out = run(dir.path(), &text, &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rates = std::fs::read_to_string(dir.path().join("out/sweep/rates.toml")).unwrap();
    assert_eq!(rates.matches("at_floor = true").count(), 2, "{rates}");
}

#[test]
fn plot_rates_with_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rates.csv");
    std::fs::write(&csv, "eps,pointwise_l1\n0.2,0.02\n0.1,0.01\n").unwrap();
    let out = Command::new(BIN).arg("plot").arg(&csv).output().unwrap();
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.path().join("rates_pointwise_l1.svg")).unwrap();
    assert_eq!(svg.matches("class=\"fit\"").count(), 1);
}

#[test]
fn plot_rejects_empty_and_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "t,mass\n").unwrap();
    let out = Command::new(BIN).arg("plot").arg(&empty).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,mass\n0.0,abc\n").unwrap();
    let out = Command::new(BIN).arg("plot").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnostics_csv_plots_every_column() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &small_scenario(0.3), &["run-grid"]).status.success());
    let csv = dir.path().join("out/run-grid/diagnostics.csv");
    let plots = dir.path().join("plots");
    let out = Command::new(BIN).arg("plot").arg(&csv).arg("--out").arg(&plots).output().unwrap();
    assert!(out.status.success());
    // l1_to_limit is empty for a standalone run
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 8);
}

#[test]
fn default_scenario_validates() {
    let out = Command::new(BIN).arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scenario ok"));
}
