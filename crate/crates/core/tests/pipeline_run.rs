use std::fs;

use aqmap::aqi::{concentration_to_aqi, AqiScale};
use aqmap::geo::{unproject, GridSpec, ScalarGrid};
use aqmap::interp::{SensorClass, SensorReading};
use aqmap::pipeline::{self, RunConfig};
use aqmap::render::{ActivityCircle, MapType};
use aqmap::scenario::{ingest_str, IngestOptions, InputFormat, Scenario};
use aqmap::{bundled, Error};

fn small() -> RunConfig {
    RunConfig {
        grid: (12, 10),
        fine_multiplier: 2,
        ..Default::default()
    }
}

#[test]
fn run_writes_six_maps_and_three_grids() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = bundled::scenario_a();
    let outputs = pipeline::run(&small(), &scenario, &MapType::ALL, dir.path()).unwrap();
    assert_eq!(outputs.iter().filter(|o| o.kind == "svg").count(), 6);
    assert_eq!(outputs.iter().filter(|o| o.kind != "svg").count(), 3);
    for m in MapType::ALL {
        assert!(dir.path().join(format!("a_{m}.svg")).exists());
    }
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 9, "no temporary files left: {names:?}");

    let mean: ScalarGrid =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a_mean.json")).unwrap()).unwrap();
    assert_eq!((mean.spec.nx, mean.spec.ny), (12, 10));
    let ens: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a_ensemble.json")).unwrap())
            .unwrap();
    assert_eq!(ens["quantiles"].as_array().unwrap().len(), 9);
    assert_eq!(ens["realizations"].as_array().unwrap().len(), 120);
    assert_eq!(ens["spec"]["nx"], 12);
}

#[test]
fn same_config_twice_is_byte_identical() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = bundled::scenario_b();
    let config = RunConfig {
        seed: 42,
        ..small()
    };
    pipeline::run(&config, &scenario, &MapType::ALL, d1.path()).unwrap();
    pipeline::run(&config, &scenario, &MapType::ALL, d2.path()).unwrap();
    for e in fs::read_dir(d1.path()).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(
            fs::read(d1.path().join(&name)).unwrap(),
            fs::read(d2.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn mean_grid_reproduces_readings_at_sensor_cells() {
    // sensors placed exactly on cell centers of the ensemble grid
    let bbox = bundled::bbox();
    let spec = GridSpec::new(bbox, 12, 10).unwrap();
    let cells = [
        (1, 1),
        (3, 7),
        (5, 2),
        (8, 8),
        (10, 4),
        (6, 5),
        (2, 9),
        (11, 0),
        (0, 5),
        (9, 1),
    ];
    let readings: Vec<SensorReading> = cells
        .iter()
        .enumerate()
        .map(|(n, &(i, j))| {
            let p = unproject(spec.cell_center(i, j).unwrap(), &bbox).unwrap();
            let v = 40.0 + 11.0 * n as f64 + (i * j) as f64;
            SensorReading::new(format!("s{n}"), p, v, SensorClass::Government)
        })
        .collect();
    let circle = ActivityCircle {
        center: unproject(spec.cell_center(6, 5).unwrap(), &bbox).unwrap(),
        radius_km: 2.0,
    };
    let scenario = Scenario::new("cells", bbox, readings.clone(), circle).unwrap();
    let dir = tempfile::tempdir().unwrap();
    pipeline::run(&small(), &scenario, &[MapType::InterpOnly], dir.path()).unwrap();
    let mean: ScalarGrid =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cells_mean.json")).unwrap())
            .unwrap();
    let sd: ScalarGrid =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cells_stddev.json")).unwrap())
            .unwrap();
    for (r, &(i, j)) in readings.iter().zip(&cells) {
        assert!((mean.get(i, j) - r.value).abs() < 1e-8);
        assert!(sd.get(i, j) <= 1e-6);
    }
}

#[test]
fn failed_stage_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = bundled::scenario_a();
    let config = RunConfig {
        quantiles: vec![0.1, 0.5, 0.9],
        ..small()
    };
    let err = pipeline::run(&config, &scenario, &MapType::ALL, dir.path()).unwrap_err();
    assert_eq!(err.stage(), Some("render"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    assert!(!err.is_numerical());
}

#[test]
fn ingest_agrees_with_the_conversion_row_by_row() {
    let csv = bundled::csv("a").unwrap();
    let scale = AqiScale::default();
    let s = ingest_str(csv, "a", InputFormat::Csv, &IngestOptions::default())
        .unwrap()
        .scenario;
    let rows: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), s.readings.len());
    for (pm, r) in rows.iter().zip(&s.readings) {
        assert_eq!(r.value, concentration_to_aqi(*pm, &scale).unwrap());
    }
}

#[test]
fn ingest_examples() {
    let text = "id,lat,lon,pm25,class,timestamp\n\
                a,37.70,-122.30,12.0,gov,2018-11-15T20:00:00Z\n\
                b,37.80,-122.20,-1,lowcost,2018-11-15T20:00:00Z\n\
                c,37.75,-122.10,35.4,lowcost,\n\
                d,37.72,-122.25,55.0,lowcost,2018-11-15T20:00:00Z\n";
    let out = ingest_str(text, "t", InputFormat::Csv, &IngestOptions::default()).unwrap();
    assert_eq!(out.scenario.readings.len(), 3);
    assert_eq!(out.warnings.len(), 1);
    assert_eq!(out.warnings[0].line, 3);
    assert_eq!(out.scenario.readings[0].value, 50.0);

    let bad = "id,lat,lon,pm25,class,timestamp\na,37.7,-122.3,abc,gov,\n";
    assert!(matches!(
        ingest_str(bad, "t", InputFormat::Csv, &IngestOptions::default()),
        Err(Error::Format { line: 2, .. })
    ));

    let pa = r#"[
  {"ID": 1, "Lat": 37.70, "Lon": -122.30, "PM2_5Value": "12.0", "LastSeen": 1542312000},
  {"ID": 2, "Lat": 37.80, "Lon": -122.20, "PM2_5Value": "20.5", "LastSeen": 1542312000}
]"#;
    let out = ingest_str(
        pa,
        "pa",
        InputFormat::PurpleairJson,
        &IngestOptions::default(),
    )
    .unwrap();
    assert_eq!(out.scenario.readings.len(), 2);
    assert!(out
        .scenario
        .readings
        .iter()
        .all(|r| r.class == SensorClass::Lowcost));
}
