//! Spatial interpolation of sensor readings onto regular grids.
//!
//! Two interpolators are provided: inverse distance weighting over the k
//! nearest readings, and ordinary kriging driven by a semivariogram model
//! fitted to the empirical variogram of the readings. Kriging yields a mean
//! and a standard deviation per cell.

mod idw;
mod kriging;
mod variogram;

use serde::{Deserialize, Serialize};

use crate::geo::{self, BBox, GeoPoint, PlanarPoint};
use crate::Result;

pub use idw::{idw_interpolate, IdwParams};
pub use kriging::{
    krige, krige_pipeline, krige_with, KrigedField, KrigingOptions, KrigingResult, KrigingSystem,
};
pub use variogram::{
    empirical_variogram, fallback_model, fit_objective, fit_variogram, initial_guess,
    EmpiricalVariogram, LagBin, ModelKind, VariogramModel, SILL_LOWER_BOUND,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorClass {
    #[serde(alias = "gov")]
    Government,
    #[serde(alias = "low-cost", alias = "purpleair")]
    Lowcost,
}

impl SensorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorClass::Government => "government",
            SensorClass::Lowcost => "lowcost",
        }
    }
}

/// One timestamped measurement. `value` is in AQI units unless the pipeline
/// runs in concentration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub id: String,
    pub location: GeoPoint,
    pub value: f64,
    pub class: SensorClass,
    /// UTC seconds.
    pub timestamp: i64,
}

impl SensorReading {
    pub fn new(id: impl Into<String>, location: GeoPoint, value: f64, class: SensorClass) -> Self {
        Self {
            id: id.into(),
            location,
            value,
            class,
            timestamp: 0,
        }
    }
}

pub(crate) fn project_all(readings: &[SensorReading], bbox: &BBox) -> Result<Vec<PlanarPoint>> {
    readings
        .iter()
        .map(|r| geo::project(r.location, bbox))
        .collect()
}
