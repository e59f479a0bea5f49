use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quadstab_cli::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn quadstab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadstab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config_arg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn shipped_preset_configs_match_defaults() {
    for name in quadstab::lab::PRESETS {
        let path = configs().join(format!("{name}.toml"));
        let cfg =
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg, ExperimentConfig::for_preset(name).unwrap(), "{name}");
    }
}

#[test]
fn certify_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadstab(
        &["certify", "--config", &config_arg("bounded-0.1-seed1.toml")],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["certificate"]["rows"].as_array().unwrap().len(), 6);
    let cert = std::fs::read_to_string(dir.path().join("certificate.csv")).unwrap();
    assert_eq!(cert.lines().next(), Some("x,measured,bound,margin"));
    assert_eq!(cert.lines().count(), 7);
    let traces = std::fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert_eq!(traces.lines().next(), Some("x,n,s,residual,bound"));
}

#[test]
fn csv_format_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadstab(
        &[
            "certify",
            "--format",
            "csv",
            "--config",
            &config_arg("exact-square.toml"),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.starts_with("x,measured,bound,margin\n-4.0,0.0,0.0,0.0\n"),
        "{stdout}"
    );
}

#[test]
fn down_constant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadstab(
        &["certify", "--config", &config_arg("down-constant.toml")],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergent series"));
}

#[test]
fn axiom_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadstab(&["verify-axioms"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let suite: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("axioms.json")).unwrap()).unwrap();
    assert_eq!(suite["samples"], 200);
    assert_eq!(suite["seed"], 0);

    let out = quadstab(
        &[
            "verify-axioms",
            "--config",
            &config_arg("abs-plus-one.toml"),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("axioms.csv")).unwrap();
    assert!(
        csv.contains("modular custom[abs-plus-one],zero,false,"),
        "{csv}"
    );
}

#[test]
fn bad_fields_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[tolerances]\nextraction = -1.0\n", "tolerances.extraction"),
        (
            "[instance]\npreset = \"bounded-0.1-seed1\"\n[grid]\npoints = [0.3]\n",
            "grid.points",
        ),
        ("[instance]\npreset = \"nope\"\n", "instance.preset"),
        (
            "[instance]\npreset = \"bounded-0.1-seed1\"\n[mode]\nkind = \"beta\"\n",
            "mode.kind",
        ),
        (
            "[instance]\npreset = \"exact-square\"\n[space]\nkind = \"fnorm\"\nbeta = 2.0\n",
            "space.beta",
        ),
        ("[instance]\npreset = \"exact-square\"\n[gird]\n", "gird"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, text).unwrap();
        let out = quadstab(
            &["extract", "--config", path.to_str().unwrap()],
            &dir.path().join("o"),
        );
        assert_eq!(out.status.code(), Some(2), "{text}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(field), "{text}: {stderr}");
    }
    let out = quadstab(&["certify"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn corollary_table_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = quadstab(&["corollary-table"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("corollary.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[1]["verdict"], "discrepant");
    assert_eq!(rows[1]["oracle"], 1.0);
    // +inf has no JSON representation
    assert!(rows[1]["closed_form"].is_null());
    assert_eq!(rows[3]["verdict"], "match");
}

#[test]
fn cauchy_and_uniqueness_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_arg("bounded-0.1-seed1.toml");
    let out = quadstab(&["cauchy-profile", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("cauchy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 210);

    let out = quadstab(&["uniqueness", "--seed", "2", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let u: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("uniqueness.json")).unwrap())
            .unwrap();
    assert_eq!(u["seeds"], serde_json::json!([2, 3]));
    assert!(u["max_discrepancy"].as_f64().unwrap() <= 2e-10);

    let out = quadstab(
        &[
            "cauchy-profile",
            "--config",
            &config_arg("power-r3-tau2.toml"),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extract_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    std::fs::write(
        &path,
        "[instance]\npreset = \"power-s1-seed1\"\n[tolerances]\nn_max = 10\n",
    )
    .unwrap();
    let out = quadstab(
        &["extract", "--config", path.to_str().unwrap()],
        &dir.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(1));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/extraction.json")).unwrap())
            .unwrap();
    assert!(r["points"][0]["error"]
        .as_str()
        .unwrap()
        .contains("no convergence"));
}

#[test]
fn seed_changes_output_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_arg("bounded-0.1-seed1.toml");
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("traces.csv")).unwrap();
    for (sub, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let out = quadstab(
            &["extract", "--seed", seed, "--config", &cfg],
            &dir.path().join(sub),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}
