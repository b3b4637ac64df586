//! Scenarios (one time, one place, all readings), file ingestion, and the
//! stimulus ordering used to present maps to study participants.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aqi::{concentration_to_aqi, AqiScale};
use crate::geo::{self, BBox, GeoPoint};
use crate::interp::{KrigedField, SensorClass, SensorReading};
use crate::render::ActivityCircle;
use crate::{Error, Result};

/// Margin added around the readings when a scenario has no explicit box.
pub const BBOX_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub bbox: BBox,
    pub readings: Vec<SensorReading>,
    pub circle: ActivityCircle,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        bbox: BBox,
        readings: Vec<SensorReading>,
        circle: ActivityCircle,
    ) -> Result<Self> {
        let s = Self {
            id: id.into(),
            bbox,
            readings,
            circle,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = self
            .readings
            .iter()
            .filter(|r| self.bbox.contains(r.location))
            .count();
        if inside < 2 {
            return Err(Error::InsufficientData(format!(
                "scenario '{}' has {inside} readings inside its bounding box, need >= 2",
                self.id
            )));
        }
        if !circle_inside(&self.circle, &self.bbox)? {
            return Err(Error::Domain(format!(
                "activity circle of scenario '{}' leaves the bounding box",
                self.id
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn circle_inside(circle: &ActivityCircle, bbox: &BBox) -> Result<bool> {
    if !(circle.radius_km > 0.0) || !bbox.contains(circle.center) {
        return Ok(false);
    }
    let c = geo::project(circle.center, bbox)?;
    let (w, h) = bbox.extent_km();
    let r = circle.radius_km;
    Ok(c.x - r >= 0.0 && c.x + r <= w && c.y - r >= 0.0 && c.y + r <= h)
}

/// Circle at the box center with a radius of 10% of the shorter side.
pub fn default_circle(bbox: &BBox) -> ActivityCircle {
    let (w, h) = bbox.extent_km();
    ActivityCircle {
        center: GeoPoint {
            lon: (bbox.min.lon + bbox.max.lon) / 2.0,
            lat: bbox.mid_lat(),
        },
        radius_km: 0.1 * w.min(h),
    }
}

/// Mean kriging standard deviation over cells whose centers fall inside the
/// circle, to help place circles where the map is actually uncertain.
pub fn circle_uncertainty(field: &KrigedField, circle: &ActivityCircle) -> Result<Option<f64>> {
    let spec = field.spec();
    let c = geo::project(circle.center, &spec.bbox)?;
    let (sum, n) = spec
        .centers()
        .iter()
        .zip(&field.stddev.values)
        .filter(|(p, _)| geo::distance(**p, c) <= circle.radius_km)
        .fold((0.0, 0usize), |(s, n), (_, &sd)| (s + sd, n + 1));
    Ok((n > 0).then(|| sum / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Csv,
    PurpleairJson,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "purpleair-json" | "purpleair_json" => Ok(InputFormat::PurpleairJson),
            other => Err(Error::Config(format!("unknown input format '{other}'"))),
        }
    }
}

/// Which unit readings carry through interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValueSpace {
    /// Convert PM2.5 to AQI at ingest and interpolate AQI.
    #[default]
    Aqi,
    /// Interpolate PM2.5 and convert the interpolated grids to AQI.
    Concentration,
}

impl FromStr for ValueSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aqi" => Ok(ValueSpace::Aqi),
            "concentration" => Ok(ValueSpace::Concentration),
            other => Err(Error::Config(format!("unknown value space '{other}'"))),
        }
    }
}

impl fmt::Display for ValueSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueSpace::Aqi => "aqi",
            ValueSpace::Concentration => "concentration",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub scale: AqiScale,
    pub space: ValueSpace,
    pub bbox: Option<BBox>,
    pub circle: Option<ActivityCircle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub scenario: Scenario,
    pub warnings: Vec<Warning>,
}

pub fn ingest(path: &Path, format: InputFormat, options: &IngestOptions) -> Result<Ingested> {
    let text = std::fs::read_to_string(path)?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    ingest_str(&text, id, format, options)
}

pub fn ingest_str(
    text: &str,
    id: &str,
    format: InputFormat,
    options: &IngestOptions,
) -> Result<Ingested> {
    let mut warnings = Vec::new();
    let raw = match format {
        InputFormat::Csv => parse_csv(text, &mut warnings)?,
        InputFormat::PurpleairJson => parse_purpleair(text, &mut warnings)?,
    };

    let mut readings = Vec::with_capacity(raw.len());
    for (line, mut r) in raw {
        if let Some(b) = &options.bbox {
            if !b.contains(r.location) {
                warnings.push(Warning {
                    line,
                    message: format!("sensor '{}' lies outside the bounding box", r.id),
                });
                continue;
            }
        }
        if options.space == ValueSpace::Aqi {
            r.value = concentration_to_aqi(r.value, &options.scale)?;
        }
        readings.push(r);
    }
    for w in &warnings {
        log::warn!("{id}: {w}");
    }
    if readings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{id}: {} valid readings, need >= 2",
            readings.len()
        )));
    }
    let bbox = match options.bbox {
        Some(b) => b,
        None => BBox::around(readings.iter().map(|r| r.location), BBOX_MARGIN)?,
    };
    let circle = options.circle.unwrap_or_else(|| default_circle(&bbox));
    Ok(Ingested {
        scenario: Scenario::new(id, bbox, readings, circle)?,
        warnings,
    })
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_class(s: &str, line: usize) -> Result<SensorClass> {
    match s.trim().to_ascii_lowercase().as_str() {
        "gov" | "government" => Ok(SensorClass::Government),
        "lowcost" | "low-cost" | "purpleair" => Ok(SensorClass::Lowcost),
        other => Err(format_err(line, format!("unknown sensor class '{other}'"))),
    }
}

fn parse_timestamp(s: &str, line: usize) -> Result<i64> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(0);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc().timestamp());
        }
    }
    Err(format_err(line, format!("timestamp '{s}' is not ISO-8601")))
}

/// `id,lat,lon,pm25,class,timestamp`
fn parse_csv(text: &str, warnings: &mut Vec<Warning>) -> Result<Vec<(usize, SensorReading)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| format_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| format_err(1, format!("missing column '{name}'")))
    };
    let (c_id, c_lat, c_lon, c_pm, c_class, c_ts) = (
        col("id")?,
        col("lat")?,
        col("lon")?,
        col("pm25")?,
        col("class")?,
        col("timestamp")?,
    );

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            format_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| rec.get(k).unwrap_or("");
        let number = |k: usize, what: &str| -> Result<Option<f64>> {
            let s = field(k);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| format_err(line, format!("{what} '{s}' is not a number")))
        };
        let (lat, lon) = (number(c_lat, "lat")?, number(c_lon, "lon")?);
        let pm = number(c_pm, "pm25")?;
        let id = field(c_id).to_string();
        let (Some(lat), Some(lon)) = (lat, lon) else {
            warnings.push(Warning {
                line,
                message: format!("sensor '{id}' has no coordinates; row skipped"),
            });
            continue;
        };
        let Some(pm) = pm else {
            warnings.push(Warning {
                line,
                message: format!("sensor '{id}' has no PM2.5 value; row skipped"),
            });
            continue;
        };
        if let Some(w) = check_row(&id, lon, lat, pm, line) {
            warnings.push(w);
            continue;
        }
        let class = parse_class(field(c_class), line)?;
        let timestamp = parse_timestamp(field(c_ts), line)?;
        out.push((
            line,
            SensorReading {
                id,
                location: GeoPoint { lon, lat },
                value: pm,
                class,
                timestamp,
            },
        ));
    }
    Ok(out)
}

fn check_row(id: &str, lon: f64, lat: f64, pm: f64, line: usize) -> Option<Warning> {
    if GeoPoint::new(lon, lat).is_err() {
        return Some(Warning {
            line,
            message: format!("sensor '{id}' has invalid coordinates ({lat}, {lon}); row skipped"),
        });
    }
    if !(pm.is_finite() && pm >= 0.0) {
        return Some(Warning {
            line,
            message: format!("sensor '{id}' has negative PM2.5 {pm}; row skipped"),
        });
    }
    None
}

/// Array of `{ID, Lat, Lon, PM2_5Value, LastSeen}` objects; all sensors are
/// low-cost. `PM2_5Value` may be a number or a numeric string.
fn parse_purpleair(text: &str, warnings: &mut Vec<Warning>) -> Result<Vec<(usize, SensorReading)>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| format_err(e.line(), e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(format_err(1, "expected a JSON array of sensor objects"));
    };
    let lines = object_lines(text);
    let mut out = Vec::new();
    for (n, item) in items.iter().enumerate() {
        let line = lines.get(n).copied().unwrap_or(0);
        let Value::Object(obj) = item else {
            return Err(format_err(line, "array element is not an object"));
        };
        let num = |key: &str| -> Result<Option<f64>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::Number(x)) => Ok(x.as_f64()),
                Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
                Some(Value::String(s)) => s
                    .trim()
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| format_err(line, format!("{key} '{s}' is not a number"))),
                Some(other) => Err(format_err(
                    line,
                    format!("{key} has unexpected value {other}"),
                )),
            }
        };
        let id = match obj.get("ID") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(x)) => x.to_string(),
            _ => format!("purpleair-{n}"),
        };
        let (Some(lat), Some(lon)) = (num("Lat")?, num("Lon")?) else {
            warnings.push(Warning {
                line,
                message: format!("sensor '{id}' has no coordinates; record skipped"),
            });
            continue;
        };
        let Some(pm) = num("PM2_5Value")? else {
            warnings.push(Warning {
                line,
                message: format!("sensor '{id}' has no PM2.5 value; record skipped"),
            });
            continue;
        };
        if let Some(w) = check_row(&id, lon, lat, pm, line) {
            warnings.push(w);
            continue;
        }
        let timestamp = num("LastSeen")?.map(|t| t as i64).unwrap_or(0);
        out.push((
            line,
            SensorReading {
                id,
                location: GeoPoint { lon, lat },
                value: pm,
                class: SensorClass::Lowcost,
                timestamp,
            },
        ));
    }
    Ok(out)
}

/// 1-based line of each top-level array element's opening brace.
fn object_lines(text: &str) -> Vec<usize> {
    let (mut line, mut depth, mut in_str, mut escaped) = (1usize, 0i32, false, false);
    let mut out = Vec::new();
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_str {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '[' | '{' => {
                if depth == 1 && ch == '{' {
                    out.push(line);
                }
                depth += 1;
            }
            ']' | '}' => depth -= 1,
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub scenario: usize,
    pub map_type: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub stimuli: Vec<Stimulus>,
}

/// Presentation order for `scenarios × map_types` stimuli.
///
/// Every scenario is first shown in the baseline map type. Then come
/// `map_types − 1` rounds; in round `r` stimulus `i` shows scenario
/// `(i + offset) mod S` in the `((i + r) mod (M − 1))`-th non-baseline type,
/// so no scenario repeats within a round and every scenario meets every
/// non-baseline type exactly once.
pub fn study_plan(
    scenarios: usize,
    map_types: usize,
    baseline: usize,
    scenario_offset: usize,
) -> Result<StudyPlan> {
    if scenarios < 1 {
        return Err(Error::Domain(
            "study plan needs at least one scenario".into(),
        ));
    }
    if map_types < 2 {
        return Err(Error::Domain(
            "study plan needs at least two map types".into(),
        ));
    }
    if baseline >= map_types {
        return Err(Error::Domain(format!(
            "baseline map type {baseline} out of range 0..{map_types}"
        )));
    }
    let others: Vec<usize> = (0..map_types).filter(|&m| m != baseline).collect();
    let mut stimuli = Vec::with_capacity(scenarios * map_types);
    stimuli.extend((0..scenarios).map(|s| Stimulus {
        scenario: s,
        map_type: baseline,
    }));
    for round in 0..others.len() {
        for i in 0..scenarios {
            stimuli.push(Stimulus {
                scenario: (i + scenario_offset) % scenarios,
                map_type: others[(i + round) % others.len()],
            });
        }
    }
    Ok(StudyPlan { stimuli })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    const CSV: &str = "id,lat,lon,pm25,class,timestamp\n\
        a,37.80,-122.30,12.0,gov,2018-11-15T20:00:00Z\n\
        b,37.85,-122.25,35.4,lowcost,2018-11-15T20:00:00Z\n\
        c,37.75,-122.20,55.4,lowcost,2018-11-15T20:00:00Z\n";

    #[test]
    fn csv_rows_are_counted_and_converted() {
        let out = ingest_str(CSV, "t", InputFormat::Csv, &IngestOptions::default()).unwrap();
        let s = out.scenario;
        assert_eq!(s.readings.len(), 3);
        assert!(out.warnings.is_empty());
        assert_eq!(s.readings[0].value, 50.0);
        assert_eq!(s.readings[1].value, 100.0);
        assert_eq!(s.readings[2].value, 150.0);
        assert_eq!(s.readings[0].class, SensorClass::Government);
        assert_eq!(s.readings[0].timestamp, 1_542_312_000);
        assert!(s.readings.iter().all(|r| s.bbox.contains(r.location)));
    }

    #[test]
    fn negative_rows_are_rejected_with_line_numbers() {
        let text = format!(
            "{CSV}d,37.78,-122.28,-1,lowcost,2018-11-15T20:00:00Z\ne,,-122.28,5,lowcost,\n"
        );
        let out = ingest_str(&text, "t", InputFormat::Csv, &IngestOptions::default()).unwrap();
        assert_eq!(out.scenario.readings.len(), 3);
        assert_eq!(out.warnings.len(), 2);
        assert_eq!(out.warnings[0].line, 5);
        assert_eq!(out.warnings[1].line, 6);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = format!("{CSV}d,37.78,-122.28,abc,lowcost,\n");
        match ingest_str(&text, "t", InputFormat::Csv, &IngestOptions::default()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let text = "id,lat,lon,pm25\n";
        assert!(matches!(
            ingest_str(text, "t", InputFormat::Csv, &IngestOptions::default()),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn too_few_readings() {
        let text = "id,lat,lon,pm25,class,timestamp\na,37.8,-122.3,10,gov,\n";
        assert!(matches!(
            ingest_str(text, "t", InputFormat::Csv, &IngestOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn concentration_space_keeps_raw_values() {
        let opts = IngestOptions {
            space: ValueSpace::Concentration,
            ..Default::default()
        };
        let out = ingest_str(CSV, "t", InputFormat::Csv, &opts).unwrap();
        assert_eq!(out.scenario.readings[1].value, 35.4);
    }

    #[test]
    fn purpleair_json() {
        let text = r#"[
  {"ID": 101, "Lat": 37.80, "Lon": -122.30, "PM2_5Value": "12.0", "LastSeen": 1542312000},
  {"ID": 102, "Lat": null, "Lon": -122.25, "PM2_5Value": 20.0, "LastSeen": 1542312000},
  {"ID": 103, "Lat": 37.75, "Lon": -122.20, "PM2_5Value": 35.4, "LastSeen": 1542312000},
  {"ID": 104, "Lat": 37.76, "Lon": -122.21, "PM2_5Value": -3, "LastSeen": 1542312000}
]"#;
        let out = ingest_str(
            text,
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
        assert_eq!(out.scenario.readings[0].value, 50.0);
        assert_eq!(out.scenario.readings[0].id, "101");
        assert_eq!(
            out.warnings.iter().map(|w| w.line).collect::<Vec<_>>(),
            vec![3, 5]
        );

        match ingest_str(
            "[{\"ID\": 1,,}]",
            "pa",
            InputFormat::PurpleairJson,
            &IngestOptions::default(),
        ) {
            Err(Error::Format { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_bbox_drops_outside_readings() {
        let bbox = BBox::new(
            GeoPoint {
                lon: -122.35,
                lat: 37.70,
            },
            GeoPoint {
                lon: -122.22,
                lat: 37.90,
            },
        )
        .unwrap();
        let opts = IngestOptions {
            bbox: Some(bbox),
            ..Default::default()
        };
        let out = ingest_str(CSV, "t", InputFormat::Csv, &opts).unwrap();
        assert_eq!(out.scenario.readings.len(), 2);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn circle_must_fit() {
        let out = ingest_str(CSV, "t", InputFormat::Csv, &IngestOptions::default()).unwrap();
        let mut s = out.scenario;
        assert!(s.validate().is_ok());
        s.circle.radius_km = 1000.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn plan_for_five_scenarios_six_types() {
        let plan = study_plan(5, 6, 0, 0).unwrap();
        assert_eq!(plan.stimuli.len(), 30);
        for (s, st) in plan.stimuli[..5].iter().enumerate() {
            assert_eq!(
                *st,
                Stimulus {
                    scenario: s,
                    map_type: 0
                }
            );
        }
        // non-baseline types M0..M4 are map types 1..5
        let round0: Vec<_> = plan.stimuli[5..10]
            .iter()
            .map(|s| (s.scenario, s.map_type - 1))
            .collect();
        assert_eq!(round0, vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        let round1: Vec<_> = plan.stimuli[10..15]
            .iter()
            .map(|s| (s.scenario, s.map_type - 1))
            .collect();
        assert_eq!(round1, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
    }

    #[test]
    fn smallest_plans() {
        let plan = study_plan(1, 2, 1, 0).unwrap();
        assert_eq!(
            plan.stimuli,
            vec![
                Stimulus {
                    scenario: 0,
                    map_type: 1
                },
                Stimulus {
                    scenario: 0,
                    map_type: 0
                }
            ]
        );
        let plan = study_plan(2, 3, 0, 0).unwrap();
        let got: Vec<_> = plan
            .stimuli
            .iter()
            .map(|s| (s.scenario, s.map_type))
            .collect();
        assert_eq!(got, vec![(0, 0), (1, 0), (0, 1), (1, 2), (0, 2), (1, 1)]);
    }

    #[test]
    fn plan_errors() {
        assert!(study_plan(0, 6, 0, 0).is_err());
        assert!(study_plan(5, 1, 0, 0).is_err());
        assert!(study_plan(5, 6, 6, 0).is_err());
    }

    #[test]
    fn plan_covers_product() {
        for s in 1..8 {
            for m in 2..8 {
                for offset in 0..3 {
                    let plan = study_plan(s, m, m / 2, offset).unwrap();
                    assert_eq!(plan.stimuli.len(), s * m);
                    let set: HashSet<_> = plan
                        .stimuli
                        .iter()
                        .map(|x| (x.scenario, x.map_type))
                        .collect();
                    assert_eq!(set.len(), s * m);
                    for round in plan.stimuli[s..].chunks(s) {
                        let scen: HashSet<_> = round.iter().map(|x| x.scenario).collect();
                        assert_eq!(scen.len(), s);
                        assert!(round.iter().all(|x| x.map_type != m / 2));
                    }
                }
            }
        }
    }
}
