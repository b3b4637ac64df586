use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{project_all, SensorReading};
use crate::geo::{distance, GridSpec, PlanarPoint, ScalarGrid};
use crate::{Error, Result};

/// Distances below this snap a cell to the coincident sensor's value.
const SNAP_KM: f64 = 1e-9;

/// Inverse distance weighting parameters: weights are `1 / dist^p` over the
/// `k` nearest readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdwParams {
    pub p: f64,
    pub k: usize,
}

impl IdwParams {
    /// The parameters AirNow uses.
    pub const AIRNOW: IdwParams = IdwParams { p: 5.0, k: 10 };

    pub fn new(p: f64, k: usize) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Domain(format!("IDW exponent must be > 0, got {p}")));
        }
        if k == 0 {
            return Err(Error::Domain("IDW neighbor count must be >= 1".into()));
        }
        Ok(Self { p, k })
    }
}

pub fn idw_interpolate(
    readings: &[SensorReading],
    params: IdwParams,
    spec: &GridSpec,
) -> Result<ScalarGrid> {
    if readings.is_empty() {
        return Err(Error::EmptyInput("IDW needs at least one reading".into()));
    }
    let params = IdwParams::new(params.p, params.k)?;
    if params.k > readings.len() {
        return Err(Error::Domain(format!(
            "IDW neighbor count {} exceeds {} readings",
            params.k,
            readings.len()
        )));
    }
    let sites = project_all(readings, &spec.bbox)?;
    let values = spec
        .centers()
        .into_par_iter()
        .map(|c| idw_at(c, readings, &sites, params))
        .collect();
    ScalarGrid::new(*spec, values)
}

fn idw_at(
    at: PlanarPoint,
    readings: &[SensorReading],
    sites: &[PlanarPoint],
    params: IdwParams,
) -> f64 {
    let mut near: Vec<(f64, usize)> = sites
        .iter()
        .enumerate()
        .map(|(n, s)| (distance(at, *s), n))
        .collect();
    // ties broken by sensor id so the selection is independent of input order
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| readings[a.1].id.cmp(&readings[b.1].id))
    };
    if params.k < near.len() {
        near.select_nth_unstable_by(params.k - 1, by_dist);
        near.truncate(params.k);
    }
    near.sort_by(by_dist);

    if near[0].0 < SNAP_KM {
        return readings[near[0].1].value;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(d, n) in &near {
        let w = d.powf(-params.p);
        num += w * readings[n].value;
        den += w;
    }
    num / den
}
