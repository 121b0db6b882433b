use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regvi"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn solve(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("solve").arg(cfg).arg("--output").arg(out).args(extra).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_OBSTACLE: &str = r#"
problem = "obstacle"

[mesh]
domain = "interval"
extents = [[0.0, 1.0]]
n = [20]

[coefficients]
f = -30.0

[obstacle]
lower = "-0.1 + 0*x1"
"#;

#[test]
fn shipped_configs_succeed() {
    for name in ["poisson", "obstacle", "signorini", "tresca", "vi3", "gnep_demo"] {
        let dir = tempfile::tempdir().unwrap();
        let out = solve(&config(&format!("{name}.toml")), dir.path(), &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join("report.json").exists());
    }
}

#[test]
fn obstacle_outputs_have_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_OBSTACLE);
    let out = solve(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(dir.path().join("out/u.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["node_id", "x1", "x2", "u", "lambda", "active"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 22);
    let active = rows.iter().filter(|r| &r[5] == "1").count();
    assert!(active > 0);
    for r in &rows {
        let u: f64 = r[3].parse().unwrap();
        assert!(u >= -0.1 - 1e-12 || &r[1] == "0" || &r[1] == "1");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "success");
    assert_eq!(report["config"]["solver"]["method"], "pdas");
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_OBSTACLE}\n[solver]\nmethod = \"psor\"\nmax_iter = 1\n");
    let cfg = write_config(dir.path(), &text);
    let out = solve(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_OBSTACLE.replace("[obstacle]", "[obstacle]\nheight = 3");
    let cfg = write_config(dir.path(), &text);
    let out = solve(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("height"));
}

#[test]
fn bad_expression_names_its_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_OBSTACLE.replace("-0.1 + 0*x1", "-0.1 + z");
    let cfg = write_config(dir.path(), &text);
    let out = solve(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("obstacle.lower"));
}

#[test]
fn dumps_mesh_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_OBSTACLE);
    let out = solve(&cfg, &dir.path().join("out"), &["--dump-mesh", "--dump-matrix"]);
    assert_eq!(out.status.code(), Some(0));
    let mesh: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/mesh.json")).unwrap()).unwrap();
    assert!(mesh.is_object());
    let mtx = std::fs::read_to_string(dir.path().join("out/matrix.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket"));
}

#[test]
fn repeated_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("tresca.toml");
    for k in 0..2 {
        assert_eq!(solve(&cfg, &dir.path().join(k.to_string()), &[]).status.code(), Some(0));
    }
    for name in ["u.csv", "iterations.csv"] {
        let a = std::fs::read(dir.path().join("0").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("1").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn environment_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_OBSTACLE);
    let target = dir.path().join("from_env");
    let out = bin().arg("solve").arg(&cfg).env("REGVI_OUTPUT_DIR", &target).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("u.csv").exists());
}

#[test]
fn fixtures_list_and_run() {
    let out = bin().args(["fixtures", "list"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["smooth_square", "lshape_corner", "kinderlehrer_signorini"] {
        assert!(text.contains(name));
    }
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["fixtures", "run", "smooth_square", "--levels", "4,8,16", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("order"));
    let rows = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
}

#[test]
fn unknown_fixture_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["fixtures", "run", "nonexistent", "--output"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn too_few_levels_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["fixtures", "run", "smooth_square", "--levels", "4,8", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
