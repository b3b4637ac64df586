use std::path::Path;
use std::process::{Command, Output};

fn aqmap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqmap"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn bundled_csv(id: &str) -> String {
    format!(
        "{}/../core/data/scenarios/{id}.csv",
        env!("CARGO_MANIFEST_DIR")
    )
}

#[test]
fn demo_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = aqmap(&["demo", "--out", "o", "--grid", "10x8"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = std::fs::read_dir(dir.path().join("o")).unwrap().count();
    assert_eq!(files, 9);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 9);
}

#[test]
fn map_type_and_seed_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = aqmap(
        &[
            "demo",
            "--scenario",
            "b",
            "--out",
            "o",
            "--map-type",
            "smoothed_dotmap,risk-contours",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("o/b_smoothed_dotmap.svg").exists());
    assert!(dir.path().join("o/b_risk_contours.svg").exists());
    assert!(!dir.path().join("o/b_interp_only.svg").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"grid": [6, 5], "seed": 3}"#).unwrap();
    let out = aqmap(
        &[
            "interpolate",
            "krige",
            &bundled_csv("a"),
            "--config",
            "c.json",
            "--grid",
            "7x4",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let grid: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/a_mean.json")).unwrap())
            .unwrap();
    assert_eq!(grid["spec"]["nx"], 7);
    assert_eq!(grid["spec"]["ny"], 4);
    assert_eq!(grid["values"].as_array().unwrap().len(), 28);
}

#[test]
fn ingest_then_render_from_scenario_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = aqmap(&["ingest", &bundled_csv("b"), "--out", "o"], dir.path());
    assert!(out.status.success());
    let out = aqmap(
        &[
            "render",
            "o/b.scenario.json",
            "--out",
            "r",
            "--grid",
            "8x6",
            "--map-type",
            "interp_sensors",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("r/b_interp_sensors.svg").exists());
}

#[test]
fn idw_and_ensemble_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let csv = bundled_csv("a");
    let out = aqmap(
        &[
            "interpolate",
            "idw",
            &csv,
            "--idw-p",
            "2",
            "--idw-k",
            "4",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("o/a_idw.json").exists());
    let out = aqmap(
        &[
            "ensemble",
            &csv,
            "--quantiles",
            "0.25,0.5,0.75",
            "--grid",
            "5x5",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ens: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("o/a_ensemble.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(ens["quantiles"].as_array().unwrap().len(), 3);
}

#[test]
fn studyplan_prints_thirty_stimuli() {
    let dir = tempfile::tempdir().unwrap();
    let out = aqmap(&["studyplan"], dir.path());
    assert!(out.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["stimuli"].as_array().unwrap().len(), 30);
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["render", "missing.csv"],
        vec!["demo", "--grid", "3x3"],
        vec!["demo", "--variogram", "cubic"],
        vec!["demo", "--map-type", "heatmap"],
        vec!["demo", "--quantiles", "0.9,0.1"],
        vec!["demo", "--space", "ppm"],
        vec!["render", &bundled_csv("a"), "--format", "xml"],
    ] {
        let out = aqmap(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    std::fs::write(
        dir.path().join("bad.csv"),
        "id,lat,lon,pm25,class,timestamp\na,37.7,-122.3,abc,gov,\n",
    )
    .unwrap();
    let out = aqmap(&["render", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn numerical_failure_exits_with_3() {
    // two sensors a fraction of a nanometre apart under a smooth model
    let dir = tempfile::tempdir().unwrap();
    let out = aqmap(
        &[
            "render",
            &data("near_duplicate.csv"),
            "--variogram",
            "gaussian",
            "--space",
            "concentration",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("krige stage failed"), "{err}");
    assert!(!dir.path().join("o").exists());
}
