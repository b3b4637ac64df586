//! Deterministic SVG rendering of the six map designs.
//!
//! Every document has the same frame: white background, the map area on the
//! left, and a legend with the six category swatches on the right. All
//! coordinates are written with two decimals, so equal inputs (including the
//! seed) give byte-identical output on every platform.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aqi::{AqiScale, CATEGORY_COUNT};
use crate::contour::{self, ArrowParams, CategoryRegions};
use crate::ensemble::{percentile_grid, EnsembleField};
use crate::geo::{self, BBox, GeoPoint, PlanarPoint, ScalarGrid};
use crate::interp::{KrigedField, SensorClass, SensorReading};
use crate::{Error, Result};

pub const BACKGROUND: &str = "#ffffff";
pub const TEXT_COLOR: &str = "#222222";
pub const CIRCLE_COLOR: &str = "#000000";
pub const ARROW_COLOR: &str = "#000000";
pub const SENSOR_OUTLINE: &str = "#333333";
pub const ISOLINE_COLOR: &str = "#444444";
pub const FRAME_COLOR: &str = "#888888";

/// Every non-palette color a document may contain.
pub const CHROME_COLORS: [&str; 7] = [
    BACKGROUND,
    TEXT_COLOR,
    CIRCLE_COLOR,
    ARROW_COLOR,
    SENSOR_OUTLINE,
    ISOLINE_COLOR,
    FRAME_COLOR,
];

pub const GOVERNMENT_RADIUS_PX: f64 = 8.0;
pub const LOWCOST_RADIUS_PX: f64 = 4.0;

const LEGEND_WIDTH: f64 = 280.0;
const MARGIN: f64 = 12.0;
const PANEL_GUTTER: f64 = 8.0;
const SWATCH: f64 = 18.0;
const CIRCLE_STROKE: f64 = 2.5;
const ISOLINE_STROKE: f64 = 0.8;
const P75_STROKE: f64 = 2.0;
const P75_DASH: &str = "6 4";
const ARROW_STROKE: f64 = 1.5;
const ARROW_HEAD_PX: f64 = 6.0;
const MIN_CANVAS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapType {
    InterpOnly,
    InterpSensors,
    OrderedDotmap,
    SmoothedDotmap,
    SmallMultiples,
    RiskContours,
}

impl MapType {
    pub const ALL: [MapType; 6] = [
        MapType::InterpOnly,
        MapType::InterpSensors,
        MapType::OrderedDotmap,
        MapType::SmoothedDotmap,
        MapType::SmallMultiples,
        MapType::RiskContours,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MapType::InterpOnly => "interp_only",
            MapType::InterpSensors => "interp_sensors",
            MapType::OrderedDotmap => "ordered_dotmap",
            MapType::SmoothedDotmap => "smoothed_dotmap",
            MapType::SmallMultiples => "small_multiples",
            MapType::RiskContours => "risk_contours",
        }
    }
}

impl fmt::Display for MapType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapType::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown map type '{s}'")))
    }
}

/// Region the reader is asked to reason about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityCircle {
    pub center: GeoPoint,
    pub radius_km: f64,
}

/// Median and 75th-percentile grids for risk contours, in AQI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGrids {
    pub median: ScalarGrid,
    pub p75: ScalarGrid,
}

/// Everything one render needs. Which optional fields are required depends
/// on `map_type`: the two standard views need `fine_grid`, the ensemble views
/// need `ensemble`, and risk contours need `risk` or, failing that, `kriged`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub map_type: MapType,
    pub readings: Vec<SensorReading>,
    pub kriged: Option<KrigedField>,
    pub ensemble: Option<EnsembleField>,
    pub fine_grid: Option<ScalarGrid>,
    #[serde(default)]
    pub risk: Option<RiskGrids>,
    pub scale: AqiScale,
    pub circle: ActivityCircle,
    pub canvas_px: (u32, u32),
    pub seed: u64,
}

impl MapSpec {
    fn bbox(&self) -> Option<BBox> {
        self.fine_grid
            .as_ref()
            .map(|g| g.spec.bbox)
            .or_else(|| self.ensemble.as_ref().map(|e| e.spec.bbox))
            .or_else(|| self.kriged.as_ref().map(|k| k.spec().bbox))
            .or_else(|| self.risk.as_ref().map(|r| r.median.spec.bbox))
    }

    fn validate(&self) -> Result<BBox> {
        if self.canvas_px.0 < MIN_CANVAS || self.canvas_px.1 < MIN_CANVAS {
            return Err(Error::Domain(format!(
                "canvas must be at least {MIN_CANVAS}x{MIN_CANVAS} px, got {}x{}",
                self.canvas_px.0, self.canvas_px.1
            )));
        }
        let bbox = self.bbox().ok_or(Error::IncompleteSpec {
            map_type: self.map_type.as_str(),
            field: "grid",
        })?;
        let boxes = [
            self.fine_grid.as_ref().map(|g| g.spec.bbox),
            self.ensemble.as_ref().map(|e| e.spec.bbox),
            self.kriged.as_ref().map(|k| k.spec().bbox),
            self.risk.as_ref().map(|r| r.median.spec.bbox),
            self.risk.as_ref().map(|r| r.p75.spec.bbox),
        ];
        if boxes.iter().flatten().any(|b| *b != bbox) {
            return Err(Error::Domain(
                "map grids do not share one bounding box".into(),
            ));
        }
        if !(self.circle.radius_km > 0.0) {
            return Err(Error::Domain(
                "activity circle radius must be positive".into(),
            ));
        }
        Ok(bbox)
    }

    fn need<'a, T>(&self, field: &'a Option<T>, name: &'static str) -> Result<&'a T> {
        field.as_ref().ok_or(Error::IncompleteSpec {
            map_type: self.map_type.as_str(),
            field: name,
        })
    }
}

/// Renders `spec` as a standalone SVG 1.1 document.
pub fn render(spec: &MapSpec) -> Result<String> {
    match spec.map_type {
        MapType::InterpOnly => render_interp_only(spec),
        MapType::InterpSensors => render_interp_sensors(spec),
        MapType::OrderedDotmap => render_ordered_dotmap(spec),
        MapType::SmoothedDotmap => render_smoothed_dotmap(spec),
        MapType::SmallMultiples => render_small_multiples(spec),
        MapType::RiskContours => render_risk_contours(spec),
    }
}

pub fn render_interp_only(spec: &MapSpec) -> Result<String> {
    let bbox = spec.validate()?;
    let fine = spec.need(&spec.fine_grid, "fine_grid")?;
    let view = Viewport::single(spec.canvas_px, &bbox);
    let mut doc = Document::new(spec);
    doc.open_body(&view);
    doc.category_fill(fine, &spec.scale, &view);
    doc.category_isolines(fine, &spec.scale, &view);
    doc.activity_circle(spec, &view)?;
    doc.frame(&view);
    doc.close_body();
    Ok(doc.finish(spec))
}

pub fn render_interp_sensors(spec: &MapSpec) -> Result<String> {
    let bbox = spec.validate()?;
    let fine = spec.need(&spec.fine_grid, "fine_grid")?;
    let view = Viewport::single(spec.canvas_px, &bbox);
    let mut doc = Document::new(spec);
    doc.open_body(&view);
    doc.category_fill(fine, &spec.scale, &view);
    doc.category_isolines(fine, &spec.scale, &view);
    doc.sensors(spec, &bbox, &view)?;
    doc.activity_circle(spec, &view)?;
    doc.frame(&view);
    doc.close_body();
    Ok(doc.finish(spec))
}

pub fn render_small_multiples(spec: &MapSpec) -> Result<String> {
    let bbox = spec.validate()?;
    let ens = spec.need(&spec.ensemble, "ensemble")?;
    if ens.len() != 9 {
        return Err(Error::Domain(format!(
            "small multiples need 9 outcomes per cell, got {}",
            ens.len()
        )));
    }
    let panels = Viewport::panels(spec.canvas_px, &bbox);
    let mut doc = Document::new(spec);
    for (r, view) in panels.iter().enumerate() {
        let grid = ens.realization_grid(r);
        let _ = writeln!(doc.out, r#"<g class="panel" data-outcome="{r}">"#);
        doc.open_body(view);
        doc.category_fill(&grid, &spec.scale, view);
        doc.category_isolines(&grid, &spec.scale, view);
        doc.activity_circle(spec, view)?;
        doc.frame(view);
        doc.close_body();
        doc.out.push_str("</g>\n");
    }
    Ok(doc.finish(spec))
}

pub fn render_ordered_dotmap(spec: &MapSpec) -> Result<String> {
    dotmap(spec, 3, |cats, _, _| cats.to_vec())
}

pub fn render_smoothed_dotmap(spec: &MapSpec) -> Result<String> {
    let seed = spec.seed;
    dotmap(spec, 9, move |cats, i, j| smoothed_block(cats, seed, i, j))
}

/// The 81 subcell categories of one smoothed block: nine copies of each
/// outcome's category, shuffled by a generator keyed on (seed, i, j) only.
pub fn smoothed_block(cats: &[usize], seed: u64, i: usize, j: usize) -> Vec<usize> {
    let mut block: Vec<usize> = cats
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, cats.len()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(block_key(seed, i, j));
    block.shuffle(&mut rng);
    block
}

fn block_key(seed: u64, i: usize, j: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((i as u64) << 32) | j as u64))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn dotmap(
    spec: &MapSpec,
    side: usize,
    layout: impl Fn(&[usize], usize, usize) -> Vec<usize> + Sync,
) -> Result<String> {
    let bbox = spec.validate()?;
    let ens = spec.need(&spec.ensemble, "ensemble")?;
    if ens.len() != 9 {
        return Err(Error::Domain(format!(
            "dotmaps need 9 outcomes per cell, got {}",
            ens.len()
        )));
    }
    let view = Viewport::single(spec.canvas_px, &bbox);
    let gs = ens.spec;
    let (cw, ch) = gs.cell_size_km();
    let (cw_px, ch_px) = (cw * view.scale, ch * view.scale);
    let colors: Vec<&str> = spec.scale.colors().collect();

    // rows rendered independently, assembled in row order
    let rows: Vec<String> = (0..gs.ny)
        .into_par_iter()
        .map(|j| {
            let mut s = String::new();
            for i in 0..gs.nx {
                let cats: Vec<usize> = ens
                    .cell(i, j)
                    .iter()
                    .map(|&v| spec.scale.category_of(v))
                    .collect();
                let sub = layout(&cats, i, j);
                let (x0, y_top) = view.to_px(PlanarPoint::new(i as f64 * cw, (j + 1) as f64 * ch));
                let (dw, dh) = (cw_px / side as f64, ch_px / side as f64);
                let _ = write!(s, r#"<g class="block" data-i="{i}" data-j="{j}">"#);
                for (r, &c) in sub.iter().enumerate() {
                    let (row, col) = (r / side, r % side);
                    let _ = write!(
                        s,
                        r#"<rect class="dot" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                        f2(x0 + col as f64 * dw),
                        f2(y_top + row as f64 * dh),
                        f2(dw),
                        f2(dh),
                        colors[c]
                    );
                }
                s.push_str("</g>\n");
            }
            s
        })
        .collect();

    let mut doc = Document::new(spec);
    doc.open_body(&view);
    // top row first so document order reads like the map
    for row in rows.iter().rev() {
        doc.out.push_str(row);
    }
    doc.activity_circle(spec, &view)?;
    doc.frame(&view);
    doc.close_body();
    Ok(doc.finish(spec))
}

pub fn render_risk_contours(spec: &MapSpec) -> Result<String> {
    let bbox = spec.validate()?;
    let (median, p75) = match &spec.risk {
        Some(r) => (r.median.clone(), r.p75.clone()),
        None => {
            let kriged = spec.need(&spec.kriged, "kriged")?;
            (
                percentile_grid(kriged, 0.5)?,
                percentile_grid(kriged, 0.75)?,
            )
        }
    };
    let view = Viewport::single(spec.canvas_px, &bbox);
    let mut doc = Document::new(spec);
    doc.open_body(&view);
    doc.category_fill(&median, &spec.scale, &view);

    let colors: Vec<&str> = spec.scale.colors().collect();
    for (c, t) in spec.scale.thresholds().into_iter().enumerate() {
        for line in contour::marching_squares(&p75, t) {
            let _ = writeln!(
                doc.out,
                r#"<path class="p75-isoline" data-level="{}" d="{}" fill="none" stroke="{}" stroke-width="{}" stroke-dasharray="{P75_DASH}"/>"#,
                f2(t),
                view.path(&line.points),
                colors[c + 1],
                f2(P75_STROKE)
            );
        }
    }

    let arrows = contour::place_arrows(&median, &p75, &spec.scale, ArrowParams::for_bbox(&bbox))?;
    for a in &arrows {
        let tip = PlanarPoint::new(
            a.anchor.x + a.direction.x * a.length_km,
            a.anchor.y + a.direction.y * a.length_km,
        );
        let (x0, y0) = view.to_px(a.anchor);
        let (x1, y1) = view.to_px(tip);
        // head: direction in screen space (y flipped)
        let (dx, dy) = (a.direction.x, -a.direction.y);
        let (bx, by) = (x1 - dx * ARROW_HEAD_PX, y1 - dy * ARROW_HEAD_PX);
        let (px, py) = (-dy * ARROW_HEAD_PX * 0.5, dx * ARROW_HEAD_PX * 0.5);
        let _ = writeln!(
            doc.out,
            r#"<g class="arrow"><line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{ARROW_COLOR}" stroke-width="{}"/><polygon points="{},{} {},{} {},{}" fill="{ARROW_COLOR}"/></g>"#,
            f2(x0),
            f2(y0),
            f2(bx),
            f2(by),
            f2(ARROW_STROKE),
            f2(x1),
            f2(y1),
            f2(bx + px),
            f2(by + py),
            f2(bx - px),
            f2(by - py)
        );
    }
    doc.activity_circle(spec, &view)?;
    doc.frame(&view);
    doc.close_body();
    Ok(doc.finish(spec))
}

/// Fixed two-decimal formatting without negative zero.
fn f2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps planar kilometers of one bbox into a pixel rectangle, north up.
#[derive(Debug, Clone, Copy)]
struct Viewport {
    ox: f64,
    oy: f64,
    scale: f64,
    width_km: f64,
    height_km: f64,
}

impl Viewport {
    fn fit(x: f64, y: f64, w: f64, h: f64, bbox: &BBox) -> Self {
        let (wk, hk) = bbox.extent_km();
        let scale = (w / wk).min(h / hk);
        Self {
            ox: x + (w - wk * scale) / 2.0,
            oy: y + (h - hk * scale) / 2.0,
            scale,
            width_km: wk,
            height_km: hk,
        }
    }

    fn map_area(canvas: (u32, u32)) -> (f64, f64, f64, f64) {
        let (w, h) = (canvas.0 as f64, canvas.1 as f64);
        let legend = LEGEND_WIDTH.min(w * 0.4);
        (
            MARGIN,
            MARGIN,
            (w - legend - 2.0 * MARGIN).max(1.0),
            (h - 2.0 * MARGIN).max(1.0),
        )
    }

    fn single(canvas: (u32, u32), bbox: &BBox) -> Self {
        let (x, y, w, h) = Self::map_area(canvas);
        Self::fit(x, y, w, h, bbox)
    }

    /// Nine panels, row-major from the top left.
    fn panels(canvas: (u32, u32), bbox: &BBox) -> Vec<Self> {
        let (x, y, w, h) = Self::map_area(canvas);
        let pw = (w - 2.0 * PANEL_GUTTER) / 3.0;
        let ph = (h - 2.0 * PANEL_GUTTER) / 3.0;
        (0..9)
            .map(|r| {
                let (row, col) = ((r / 3) as f64, (r % 3) as f64);
                Self::fit(
                    x + col * (pw + PANEL_GUTTER),
                    y + row * (ph + PANEL_GUTTER),
                    pw,
                    ph,
                    bbox,
                )
            })
            .collect()
    }

    fn to_px(self, p: PlanarPoint) -> (f64, f64) {
        (
            self.ox + p.x * self.scale,
            self.oy + (self.height_km - p.y) * self.scale,
        )
    }

    fn path(&self, pts: &[PlanarPoint]) -> String {
        let mut d = String::new();
        for (n, p) in pts.iter().enumerate() {
            let (x, y) = self.to_px(*p);
            let _ = write!(d, "{}{},{}", if n == 0 { "M" } else { " L" }, f2(x), f2(y));
        }
        d
    }
}

struct Document {
    out: String,
}

impl Document {
    fn new(spec: &MapSpec) -> Self {
        let (w, h) = spec.canvas_px;
        let mut out = String::with_capacity(1 << 16);
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-map-type="{}">"#,
            spec.map_type
        );
        let _ = writeln!(
            out,
            r#"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="{BACKGROUND}"/>"#
        );
        Self { out }
    }

    fn open_body(&mut self, _view: &Viewport) {
        self.out
            .push_str("<g class=\"map\" shape-rendering=\"crispEdges\">\n");
    }

    fn close_body(&mut self) {
        self.out.push_str("</g>\n");
    }

    fn category_fill(&mut self, grid: &ScalarGrid, scale: &AqiScale, view: &Viewport) {
        let regions: CategoryRegions = contour::category_regions(grid, scale);
        let colors: Vec<&str> = scale.colors().collect();
        for (c, rects) in regions.regions.iter().enumerate() {
            for rect in rects {
                let ring = rect.ring(&grid.spec);
                let (x0, y1) = view.to_px(ring[0]);
                let (x1, y0) = view.to_px(ring[2]);
                let _ = writeln!(
                    self.out,
                    r#"<rect class="region" data-category="{c}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    f2(x0),
                    f2(y0),
                    f2(x1 - x0),
                    f2(y1 - y0),
                    colors[c]
                );
            }
        }
    }

    fn category_isolines(&mut self, grid: &ScalarGrid, scale: &AqiScale, view: &Viewport) {
        for t in scale.thresholds() {
            for line in contour::marching_squares(grid, t) {
                let _ = writeln!(
                    self.out,
                    r#"<path class="isoline" data-level="{}" d="{}" fill="none" stroke="{ISOLINE_COLOR}" stroke-width="{}"/>"#,
                    f2(t),
                    view.path(&line.points),
                    f2(ISOLINE_STROKE)
                );
            }
        }
    }

    fn sensors(&mut self, spec: &MapSpec, bbox: &BBox, view: &Viewport) -> Result<()> {
        let colors: Vec<&str> = spec.scale.colors().collect();
        // low-cost first so government glyphs sit on top
        for class in [SensorClass::Lowcost, SensorClass::Government] {
            for r in spec.readings.iter().filter(|r| r.class == class) {
                let (x, y) = view.to_px(geo::project(r.location, bbox)?);
                let radius = match class {
                    SensorClass::Government => GOVERNMENT_RADIUS_PX,
                    SensorClass::Lowcost => LOWCOST_RADIUS_PX,
                };
                let _ = writeln!(
                    self.out,
                    r#"<circle class="sensor {}" data-id="{}" cx="{}" cy="{}" r="{}" fill="{}" stroke="{SENSOR_OUTLINE}" stroke-width="1.00"/>"#,
                    class.as_str(),
                    escape(&r.id),
                    f2(x),
                    f2(y),
                    f2(radius),
                    colors[spec.scale.category_of(r.value)]
                );
            }
        }
        Ok(())
    }

    fn activity_circle(&mut self, spec: &MapSpec, view: &Viewport) -> Result<()> {
        let bbox = spec.validate()?;
        let (x, y) = view.to_px(geo::project(spec.circle.center, &bbox)?);
        let _ = writeln!(
            self.out,
            r#"<circle class="activity-circle" cx="{}" cy="{}" r="{}" fill="none" stroke="{CIRCLE_COLOR}" stroke-width="{}"/>"#,
            f2(x),
            f2(y),
            f2(spec.circle.radius_km * view.scale),
            f2(CIRCLE_STROKE)
        );
        Ok(())
    }

    fn frame(&mut self, view: &Viewport) {
        let _ = writeln!(
            self.out,
            r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{FRAME_COLOR}" stroke-width="1.00"/>"#,
            f2(view.ox),
            f2(view.oy),
            f2(view.width_km * view.scale),
            f2(view.height_km * view.scale)
        );
    }

    fn finish(mut self, spec: &MapSpec) -> String {
        let (w, _) = spec.canvas_px;
        let legend = LEGEND_WIDTH.min(w as f64 * 0.4);
        let x = w as f64 - legend + 4.0;
        let mut y = MARGIN + 4.0;
        self.out.push_str("<g class=\"legend\">\n");
        let _ = writeln!(
            self.out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" font-weight="bold" fill="{TEXT_COLOR}">Air Quality Index</text>"#,
            f2(x),
            f2(y + 12.0)
        );
        y += 22.0;
        // worst category on top
        for c in (0..CATEGORY_COUNT).rev() {
            let cat = &spec.scale.categories[c];
            let _ = writeln!(
                self.out,
                r#"<rect class="swatch" data-category="{c}" x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="{FRAME_COLOR}" stroke-width="0.50"/>"#,
                f2(x),
                f2(y),
                f2(SWATCH),
                f2(SWATCH),
                cat.color
            );
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{TEXT_COLOR}">{} ({}-{})</text>"#,
                f2(x + SWATCH + 6.0),
                f2(y + 13.0),
                escape(&cat.name),
                cat.aqi_min,
                cat.aqi_max
            );
            y += SWATCH + 6.0;
        }
        self.out.push_str("</g>\n</svg>\n");
        self.out
    }
}

/// Category index of every cell of `grid`, for checks that classify cells
/// independently of any drawing.
pub fn classify(grid: &ScalarGrid, scale: &AqiScale) -> Vec<usize> {
    grid.values.iter().map(|&v| scale.category_of(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_decimal_formatting() {
        assert_eq!(f2(1.005), "1.00");
        assert_eq!(f2(-0.001), "0.00");
        assert_eq!(f2(12.345678), "12.35");
    }

    #[test]
    fn map_type_names_round_trip() {
        for m in MapType::ALL {
            assert_eq!(m.as_str().parse::<MapType>().unwrap(), m);
        }
        assert_eq!(
            "risk-contours".parse::<MapType>().unwrap(),
            MapType::RiskContours
        );
        assert!("heatmap".parse::<MapType>().is_err());
    }

    #[test]
    fn smoothed_block_preserves_counts() {
        let cats = [0, 0, 1, 1, 1, 2, 3, 3, 5];
        let block = smoothed_block(&cats, 7, 3, 4);
        assert_eq!(block.len(), 81);
        for c in 0..6 {
            let want = 9 * cats.iter().filter(|&&x| x == c).count();
            assert_eq!(block.iter().filter(|&&x| x == c).count(), want);
        }
        assert_eq!(block, smoothed_block(&cats, 7, 3, 4));
        assert_ne!(block, smoothed_block(&cats, 8, 3, 4));
        assert_ne!(block, smoothed_block(&cats, 7, 4, 3));
    }

    #[test]
    fn uniform_block_ignores_seed() {
        let cats = [2; 9];
        assert_eq!(smoothed_block(&cats, 1, 0, 0), vec![2; 81]);
        assert_eq!(smoothed_block(&cats, 99, 0, 0), vec![2; 81]);
    }

    #[test]
    fn escaping() {
        assert_eq!(escape("a&b<\"c\">"), "a&amp;b&lt;&quot;c&quot;&gt;");
    }
}
