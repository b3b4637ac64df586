//! Two small built-in scenarios for demos, examples and tests.
//!
//! Both cover the same synthetic bay-area box: a dense cluster of low-cost
//! sensors in the north-west, a few scattered ones elsewhere, and four
//! government monitors. In `a` the activity circle sits where coverage is
//! thin; in `b` it sits on an isolated hot spot seen by one monitor.

use crate::geo::{BBox, GeoPoint};
use crate::render::ActivityCircle;
use crate::scenario::{ingest_str, IngestOptions, InputFormat, Scenario};

const A_CSV: &str = include_str!("../data/scenarios/a.csv");
const B_CSV: &str = include_str!("../data/scenarios/b.csv");

pub fn bbox() -> BBox {
    BBox::new(
        GeoPoint::new(-122.45, 37.60).unwrap(),
        GeoPoint::new(-121.95, 37.95).unwrap(),
    )
    .unwrap()
}

fn load(id: &str, csv: &str, center: (f64, f64), radius_km: f64) -> Scenario {
    let options = IngestOptions {
        bbox: Some(bbox()),
        circle: Some(ActivityCircle {
            center: GeoPoint::new(center.0, center.1).unwrap(),
            radius_km,
        }),
        ..Default::default()
    };
    ingest_str(csv, id, InputFormat::Csv, &options)
        .expect("bundled scenario is valid")
        .scenario
}

pub fn scenario_a() -> Scenario {
    load("a", A_CSV, (-122.03, 37.80), 3.0)
}

pub fn scenario_b() -> Scenario {
    load("b", B_CSV, (-122.12, 37.72), 3.0)
}

pub fn all() -> Vec<Scenario> {
    vec![scenario_a(), scenario_b()]
}

/// Raw CSV text of a bundled scenario, by id.
pub fn csv(id: &str) -> Option<&'static str> {
    match id {
        "a" => Some(A_CSV),
        "b" => Some(B_CSV),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::SensorClass;

    #[test]
    fn scenarios_load() {
        for s in all() {
            assert!(s.readings.len() > 30);
            let gov = s
                .readings
                .iter()
                .filter(|r| r.class == SensorClass::Government)
                .count();
            assert_eq!(gov, 4);
            assert!(s.readings.iter().all(|r| (0.0..=500.0).contains(&r.value)));
        }
        assert_eq!(scenario_a().readings[0].timestamp, 1_542_312_000);
    }
}
