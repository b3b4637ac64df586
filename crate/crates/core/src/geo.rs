//! Geographic primitives shared by interpolation and rendering.
//!
//! All planar work happens in kilometers on an equirectangular projection
//! anchored at the bounding-box minimum corner and scaled by the cosine of
//! the box's mid latitude. Grids are stored row-major with row 0 at the
//! bottom (south) edge and values sampled at cell centers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Fraction of the box extent a point may sit outside the box and still be
/// projected (with a warning).
const OUTSIDE_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite ({lon}, {lat})"
            )));
        }
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!(
                "({lon}, {lat}) outside lon/lat range"
            )));
        }
        Ok(Self { lon, lat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl BBox {
    pub fn new(min: GeoPoint, max: GeoPoint) -> Result<Self> {
        GeoPoint::new(min.lon, min.lat)?;
        GeoPoint::new(max.lon, max.lat)?;
        if min.lon >= max.lon || min.lat >= max.lat {
            return Err(Error::InvalidCoordinate(format!(
                "degenerate bbox ({}, {}) - ({}, {})",
                min.lon, min.lat, max.lon, max.lat
            )));
        }
        Ok(Self { min, max })
    }

    /// Smallest box around `points`, grown by `margin` of its extent on
    /// every side. A zero extent on either axis is widened to 0.01°.
    pub fn around(points: impl IntoIterator<Item = GeoPoint>, margin: f64) -> Result<Self> {
        let mut lo = GeoPoint {
            lon: f64::INFINITY,
            lat: f64::INFINITY,
        };
        let mut hi = GeoPoint {
            lon: f64::NEG_INFINITY,
            lat: f64::NEG_INFINITY,
        };
        let mut any = false;
        for p in points {
            any = true;
            lo.lon = lo.lon.min(p.lon);
            lo.lat = lo.lat.min(p.lat);
            hi.lon = hi.lon.max(p.lon);
            hi.lat = hi.lat.max(p.lat);
        }
        if !any {
            return Err(Error::EmptyInput("no points to bound".into()));
        }
        let dlon = (hi.lon - lo.lon).max(0.01);
        let dlat = (hi.lat - lo.lat).max(0.01);
        let (clon, clat) = ((hi.lon + lo.lon) / 2.0, (hi.lat + lo.lat) / 2.0);
        let half_lon = dlon * (0.5 + margin);
        let half_lat = dlat * (0.5 + margin);
        BBox::new(
            GeoPoint {
                lon: clon - half_lon,
                lat: clat - half_lat,
            },
            GeoPoint {
                lon: clon + half_lon,
                lat: clat + half_lat,
            },
        )
    }

    pub fn mid_lat(&self) -> f64 {
        (self.min.lat + self.max.lat) / 2.0
    }

    fn x_scale(&self) -> f64 {
        EARTH_RADIUS_KM * self.mid_lat().to_radians().cos()
    }

    /// Planar width and height in kilometers.
    pub fn extent_km(&self) -> (f64, f64) {
        let w = self.x_scale() * (self.max.lon - self.min.lon).to_radians();
        let h = EARTH_RADIUS_KM * (self.max.lat - self.min.lat).to_radians();
        (w, h)
    }

    pub fn diagonal_km(&self) -> f64 {
        let (w, h) = self.extent_km();
        w.hypot(h)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min.lon..=self.max.lon).contains(&p.lon)
            && (self.min.lat..=self.max.lat).contains(&p.lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Equirectangular projection of `p` into kilometers east and north of the
/// box minimum corner.
pub fn project(p: GeoPoint, bbox: &BBox) -> Result<PlanarPoint> {
    if !p.lon.is_finite() || !p.lat.is_finite() {
        return Err(Error::InvalidCoordinate(format!(
            "non-finite ({}, {})",
            p.lon, p.lat
        )));
    }
    if !bbox.contains(p) {
        let dlon = bbox.max.lon - bbox.min.lon;
        let dlat = bbox.max.lat - bbox.min.lat;
        let out_lon = (bbox.min.lon - p.lon).max(p.lon - bbox.max.lon).max(0.0) / dlon;
        let out_lat = (bbox.min.lat - p.lat).max(p.lat - bbox.max.lat).max(0.0) / dlat;
        if out_lon > OUTSIDE_TOLERANCE || out_lat > OUTSIDE_TOLERANCE {
            return Err(Error::InvalidCoordinate(format!(
                "({}, {}) lies more than 10% outside the bounding box",
                p.lon, p.lat
            )));
        }
        log::warn!("point ({}, {}) lies outside the bounding box", p.lon, p.lat);
    }
    Ok(PlanarPoint {
        x: bbox.x_scale() * (p.lon - bbox.min.lon).to_radians(),
        y: EARTH_RADIUS_KM * (p.lat - bbox.min.lat).to_radians(),
    })
}

/// Inverse of [`project`].
pub fn unproject(p: PlanarPoint, bbox: &BBox) -> Result<GeoPoint> {
    if !p.x.is_finite() || !p.y.is_finite() {
        return Err(Error::InvalidCoordinate(format!(
            "non-finite planar ({}, {})",
            p.x, p.y
        )));
    }
    Ok(GeoPoint {
        lon: bbox.min.lon + (p.x / bbox.x_scale()).to_degrees(),
        lat: bbox.min.lat + (p.y / EARTH_RADIUS_KM).to_degrees(),
    })
}

/// Euclidean distance in the projected plane, in kilometers.
pub fn distance(a: PlanarPoint, b: PlanarPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(bbox: BBox, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!(
                "grid must be at least 1x1, got {nx}x{ny}"
            )));
        }
        Ok(Self { bbox, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same box at `factor` times the resolution per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        GridSpec::new(self.bbox, self.nx * factor, self.ny * factor)
    }

    /// Planar size of one cell (width, height) in kilometers.
    pub fn cell_size_km(&self) -> (f64, f64) {
        let (w, h) = self.bbox.extent_km();
        (w / self.nx as f64, h / self.ny as f64)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Planar center of column `i`, row `j`.
    pub fn cell_center(&self, i: usize, j: usize) -> Result<PlanarPoint> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::OutOfBounds {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(self.center_unchecked(i, j))
    }

    pub(crate) fn center_unchecked(&self, i: usize, j: usize) -> PlanarPoint {
        let (w, h) = self.bbox.extent_km();
        PlanarPoint {
            x: (i as f64 + 0.5) / self.nx as f64 * w,
            y: (j as f64 + 0.5) / self.ny as f64 * h,
        }
    }

    /// All cell centers in storage order.
    pub fn centers(&self) -> Vec<PlanarPoint> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| self.center_unchecked(i, j))
            .collect()
    }
}

/// Free-function form of [`GridSpec::cell_center`].
pub fn cell_center(spec: &GridSpec, i: usize, j: usize) -> Result<PlanarPoint> {
    spec.cell_center(i, j)
}

/// Regular grid of finite values, row-major with row 0 at the south edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Domain(format!(
                "grid of {}x{} needs {} values, got {}",
                spec.nx,
                spec.ny,
                spec.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite grid value at index {pos}"
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation on the cell-center lattice; points outside the
    /// lattice are clamped onto it.
    pub fn sample(&self, p: PlanarPoint) -> f64 {
        let (cw, ch) = self.spec.cell_size_km();
        let fx = (p.x / cw - 0.5).clamp(0.0, (self.spec.nx - 1) as f64);
        let fy = (p.y / ch - 0.5).clamp(0.0, (self.spec.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.spec.nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(self.spec.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(self.spec.nx - 1);
        let j1 = (j0 + 1).min(self.spec.ny - 1);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let a = self.get(i0, j0) * (1.0 - tx) + self.get(i1, j0) * tx;
        let b = self.get(i0, j1) * (1.0 - tx) + self.get(i1, j1) * tx;
        a * (1.0 - ty) + b * ty
    }
}
