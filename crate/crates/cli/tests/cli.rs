use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const MINIMAL: &str = r#"
seed = 3

[grids.line]
dim = 1
lower = [-2.0]
upper = [2.0]
h = 0.0625

[spaces.l2]
kind = "lebesgue"
p = 2.0

[functions.chi]
kind = "indicator"
lo = [-1.0]
hi = [1.0]

[functions.bump]
kind = "smooth_bump"
center = [0.25]
radius = 0.75
power = 2
amplitude = 1.0

[[experiments]]
id = "pairing"
type = "holder_check"
paper_anchor = "pairing bound against the associate norm"
[experiments.params]
grid = "line"
space = "l2"
pairs = [{ f = "chi", g = "bump" }, { f = "bump", g = "bump" }]
"#;

const NEGATIVE: &str = r#"
[[experiments]]
id = "pairing-wrong-dual"
type = "holder_check"
paper_anchor = "pairing bound with a space in place of its associate"
negative_control = true
[experiments.params]
grid = "line"
space = { kind = "lebesgue", p = 3.0 }
dual_override = { kind = "lebesgue", p = 3.0 }
pairs = [{ f = "chi", g = "chi" }, { f = "bump", g = "chi" }]
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morrey-lab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn json_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json") && n != "summary.json")
        .collect();
    v.sort();
    v
}

#[test]
fn minimal_config_exits_zero_with_one_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "min.toml", MINIMAL);
    let out = tmp.path().join("out");
    let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_files(&out), vec!["pairing.json"]);
    let r = read_json(&out.join("pairing.json"));
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["paper_anchor"], "pairing bound against the associate norm");
    assert!(out.join("summary.json").exists());
}

#[test]
fn negative_control_counts_as_one_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "neg.toml", &format!("{MINIMAL}{NEGATIVE}"));
    let out = tmp.path().join("out");
    let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = read_json(&out.join("pairing-wrong-dual.json"));
    assert_eq!(r["verdict"], "fail");
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["failed"], 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL (negative control)"));
}

#[test]
fn undeclared_kernel_is_named_in_the_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{MINIMAL}
[[experiments]]
id = \"ladder\"
type = \"truncation_convergence_check\"
paper_anchor = \"truncation ladder\"
[experiments.params]
grid = \"line\"
f = \"chi\"
g = \"bump\"
kernel = \"riesz_three\"
nodes = [[0.0]]
eps0 = 0.5
"
    );
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    for action in ["run", "describe"] {
        let o = lab(&[action, "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(64));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("kernel `riesz_three`"), "{err}");
    }
}

#[test]
fn out_of_range_order_cites_the_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{MINIMAL}
[kernels.too_singular]
kind = \"fractional\"
alpha = 2.5

[[experiments]]
id = \"ladder\"
type = \"truncation_convergence_check\"
paper_anchor = \"truncation ladder\"
[experiments.params]
grid = \"line\"
f = \"chi\"
g = \"bump\"
kernel = \"too_singular\"
nodes = [[0.0]]
eps0 = 0.5
"
    );
    let cfg = write_config(tmp.path(), "alpha.toml", &text);
    let o = lab(&["describe", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(64));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("(0, 2n)") && err.contains("admissible orders"), "{err}");
}

#[test]
fn parse_errors_report_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "broken.toml", "seed = 1\n[grids.line\ndim = 1\n");
    let o = lab(&["describe", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(64));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column"), "{err}");
}

#[test]
fn halved_resolution_still_passes_and_leaves_the_file_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "min.toml", MINIMAL);
    let out = tmp.path().join("out");
    let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap(), "--resolution-override", "h/2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), MINIMAL);
    let r = read_json(&out.join("pairing.json"));
    assert_eq!(r["config"]["grid"]["h"], 0.03125);
}

#[test]
fn identical_runs_give_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{MINIMAL}
[[experiments]]
id = \"axioms\"
type = \"bfs_axiom_check\"
paper_anchor = \"ball Banach function space axioms\"
[experiments.params]
grid = \"line\"
space = \"l2\"
count = 6
set_lo = [-1.0]
set_hi = [1.0]
"
    );
    let cfg = write_config(tmp.path(), "det.toml", &text);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|d| {
            let out = tmp.path().join(d);
            let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
            assert_eq!(o.status.code(), Some(0));
            out
        })
        .collect();
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    for name in json_files(&runs[0]) {
        assert_eq!(strip(read_json(&runs[0].join(&name))), strip(read_json(&runs[1].join(&name))), "{name}");
    }
    let (s0, s1) = (read_json(&runs[0].join("summary.json")), read_json(&runs[1].join("summary.json")));
    assert_eq!(s0["determinism_hash"], s1["determinism_hash"]);
    assert_eq!(read_json(&runs[0].join("axioms.json"))["config"]["seed"], 3);
}

#[test]
fn seed_flag_reaches_random_families() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{MINIMAL}
[[experiments]]
id = \"axioms\"
type = \"bfs_axiom_check\"
paper_anchor = \"ball Banach function space axioms\"
[experiments.params]
grid = \"line\"
space = \"l2\"
count = 6
set_lo = [-1.0]
set_hi = [1.0]
"
    );
    let cfg = write_config(tmp.path(), "seed.toml", &text);
    let out = tmp.path().join("out");
    let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&out.join("axioms.json"))["config"]["seed"], 11);
}

#[test]
fn csv_format_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "min.toml", MINIMAL);
    let out = tmp.path().join("out");
    let o = lab(&["--config", &cfg, "--out", out.to_str().unwrap(), "--format", "both"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("pairing.csv")).unwrap();
    assert!(csv.starts_with("input,measured,bound,ratio\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("pairing.json").exists());
}

const LARGE_2D: &str = r#"
seed = 1

[grids.plane]
dim = 2
lower = [-2.0, -2.0]
upper = [2.0, 2.0]
h = 0.03125

[functions.wide]
kind = "ball_indicator"
center = [0.0, 0.0]
radius = 1.5

[[experiments]]
id = "plane-balls"
type = "ball_independence_check"
paper_anchor = "extended operator does not depend on the ball, plane"
[experiments.params]
grid = "plane"
f = "wide"
g = "wide"
kernel = { kind = "fractional", alpha = 1.0 }
pairs = [{ first = { center = [0.0, 0.0], radius = 0.5 }, second = { center = [0.1, 0.0], radius = 0.7 }, nodes = [[0.0, 0.0]] }]
"#;

#[test]
fn large_planar_quadrature_warns_and_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "plane.toml", LARGE_2D);
    let d = lab(&["describe", "--config", &cfg]);
    assert_eq!(d.status.code(), Some(0));
    let plan = String::from_utf8_lossy(&d.stdout);
    assert!(plan.contains("WARNING") && plan.contains("extended operator does not depend on the ball, plane"), "{plan}");
    let r = lab(&["--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--force"));
}

#[test]
fn list_shows_every_preset() {
    let o = lab(&["--list"]);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert_eq!(s.lines().count(), morrey_cli::presets::PRESETS.len());
    assert!(s.contains("variable-rough-boundedness"));
}

#[test]
fn presets_describe_cleanly() {
    for p in morrey_cli::presets::PRESETS {
        let o = lab(&["describe", "--config", &format!("preset:{}", p.name)]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", p.name, String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains(p.anchor), "{}", p.name);
    }
}
