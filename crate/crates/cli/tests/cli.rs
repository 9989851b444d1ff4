use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use floquet_cli::{config::prepare, Summary};

const HARMONIC: &str = r#"
[protocol]
segments = [{ kind = "harmonic", L = 1.0, A = 0.1, omega = 3.141592653589793 }]
"#;

fn floquet(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_floquet"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn run_ok(config: &str) -> (tempfile::TempDir, PathBuf, Summary) {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = floquet(dir.path(), config, &[]);
    assert!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    let summary = read_summary(&out);
    (dir, out, summary)
}

fn read_summary(out: &Path) -> Summary {
    serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap()
}

/// Data rows of a CSV, skipping metadata and header.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn scalar(s: &Summary, key: &str) -> f64 {
    s.scalars[key].as_f64().unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn fixed_points_of_the_reference_drive() {
    let (_d, out, s) = run_ok(&format!("{HARMONIC}\n[command.fixed-points]\n"));
    let rows = csv_rows(&out.join("fixed_points.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(scalar(&s, "count"), 2.0);
    let kinds: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert!(kinds.contains(&"stable") && kinds.contains(&"unstable"), "{kinds:?}");
    for r in &rows {
        let m: f64 = r[1].parse().unwrap();
        assert_eq!(m < 1.0, r[2] == "stable");
    }
    let text = std::fs::read_to_string(out.join("fixed_points.csv")).unwrap();
    assert!(text.starts_with("# generator: floquet"));
    assert!(text.contains("\nx,multiplier,stability,multiplicity,t_m,mirror_speed\n"));
}

#[test]
fn time_reverse_returns_rays() {
    let cfg = r#"
[protocol]
segments = [{ kind = "harmonic", L = 1.0, A = 0.15, omega = 3.141592653589793 }]

[command.time-reverse]
periods = 16
rays = 128
field_points = 256
"#;
    let (_d, out, s) = run_ok(cfg);
    assert!(scalar(&s, "max_ray_return_error") <= 1e-8, "{:?}", s.scalars);
    assert!(scalar(&s, "max_field_return_error") <= 1e-6);
    assert_eq!(s.scalars["splice_valid"], serde_json::Value::Bool(true));
    assert_eq!(csv_rows(&out.join("time_reverse.csv")).len(), 128);
}

#[test]
fn casimir_q1_is_uniform() {
    let cfg = r#"
[protocol]
segments = [{ kind = "harmonic", L = 1.0, A = 0.02, omega = 3.141592653589793 }]

[command.casimir]
q = 1
times = [0.0, 1.3, 7.0]
points = 64
"#;
    let (_d, out, s) = run_ok(cfg);
    let c = scalar(&s, "static_density");
    assert!((c + std::f64::consts::PI / 48.0).abs() < 1e-15);
    let rows = csv_rows(&out.join("casimir.csv"));
    assert_eq!(rows.len(), 3 * 64);
    for r in rows {
        let v: f64 = r[2].parse().unwrap();
        assert!((v - c).abs() <= 1e-12 * c.abs());
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let superluminal = "[protocol]\nsegments = [{ kind = \"harmonic\", L = 1.0, A = 0.4, omega = 3.0 }]\n[command.map]\n";
    let (o, _) = floquet(dir.path(), superluminal, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("superluminal"));

    let typo = HARMONIC.replace("A = 0.1", "amplitdue = 0.1") + "[command.map]\n";
    let (o, _) = floquet(dir.path(), &typo, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("protocol.segments[0].amplitdue"), "{err}");
}

#[test]
fn horizon_failure_exits_3() {
    // The only segment ends at t = 1, before one drive period has elapsed.
    let cfg = "[protocol]\nsegments = [{ kind = \"harmonic\", L = 1.0, A = 0.1, omega = 3.141592653589793, duration = 1.0 }]\n[command.fixed-points]\n";
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = floquet(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_floquet"))
        .arg("--config")
        .arg(dir.path().join("absent.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn identical_configs_give_identical_files() {
    let cfg = format!("seed = 11\n{HARMONIC}\n[command.iterate]\nsteps = 20\nstarts = [0.3]\nrandom_starts = 4\n");
    let (_a, out_a, _) = run_ok(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let (o, out_b) = floquet(dir.path(), &cfg, &["--threads", "1"]);
    assert!(o.status.success());
    let a = std::fs::read(out_a.join("iterate.csv")).unwrap();
    let b = std::fs::read(out_b.join("iterate.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_rows(&out_a.join("iterate.csv")).len(), 5 * 21);
}

#[test]
fn summary_reparses_under_the_schema() {
    let (_d, out, s) = run_ok(&format!("{HARMONIC}\n[command.map]\nsamples = 64\n"));
    let again: Summary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(again, s);
    assert_eq!(s.outputs, ["map.csv"]);
    assert!(s.wall_time_s >= 0.0);
    prepare(s.config).unwrap();
    assert_eq!(csv_rows(&out.join("map.csv")).len(), 64);
}

#[test]
fn json_format_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{HARMONIC}\n[command.lightcones]\nsamples = 256\ngrid = 32\n");
    let (o, out) = floquet(dir.path(), &cfg, &["--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("lightcones.json")).unwrap()).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["x", "velocity"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 32);
    assert_eq!(read_summary(&out).scalars["horizons"].as_array().unwrap().len(), 2);
}

#[test]
fn remaining_commands_run() {
    let cases = [
        ("scan", "l_min = 0.85\nl_max = 1.0\nsteps = 4\nsamples = 512\n"),
        ("evolve", "periods = 2\npoints = 64\nprofile = { kind = \"sine\", mode = 1, amplitude = 1.0 }\n"),
        (
            "energy",
            "periods = 3\npoints = 128\nweak_q = 1\ndensity = true\nprofile = { kind = \"uniform\", slope = 1.0 }\n",
        ),
        ("sweep-estimate", "finesse = 1000.0\nmodulation_quality = 200.0\n"),
    ];
    for (name, body) in cases {
        let (_d, out, s) = run_ok(&format!("{HARMONIC}\n[command.{name}]\n{body}"));
        assert_eq!(s.command, name);
        for f in &s.outputs {
            assert!(out.join(f).exists(), "{name}: {f}");
        }
    }
    let (_d, _, s) = run_ok(&format!(
        "{HARMONIC}\n[command.energy]\nperiods = 2\npoints = 256\nweak_q = 1\nprofile = {{ kind = \"uniform\", slope = 1.0 }}\n"
    ));
    // Energy grows on resonance.
    assert!(scalar(&s, "final_ratio") > 1.0);
}

#[test]
fn medium_command_conserves_the_invariant() {
    let cfg = r#"
[command.medium]
t_end = 6.0
packets = [{ x = -0.5, omega = 400.0 }, { x = 0.25, omega = 400.0, amplitude = 2.0 }]

[command.medium.schedule]
half_length = 1.0

[[command.medium.schedule.regions]]
x_lo = 0.0
x_hi = 1.0
epsilon = { period = 2.0, origin = 0.0, levels = [[0.0, 1.44], [1.0, 1.0]] }
mu = { levels = [[0.0, 1.0]] }
"#;
    let (_d, out, s) = run_ok(cfg);
    assert!(scalar(&s, "max_relative_invariant_drift") <= 1e-12, "{:?}", s.scalars);
    assert_eq!(s.scalars["semiclassical"], serde_json::Value::Bool(true));
    assert!(csv_rows(&out.join("medium.csv")).len() > 4);
}
