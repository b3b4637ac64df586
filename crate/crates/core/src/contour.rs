//! Category-boundary geometry extracted from scalar grids.
//!
//! Isolines come from marching squares on the cell-center lattice: the
//! square between four neighboring cell centers is classified by which
//! corners lie strictly above the level, edge crossings are placed by linear
//! interpolation, and saddles are resolved by the average of the four
//! corners. Each square also yields the polygon(s) of its superlevel part,
//! so isolines are exactly the interior edges of those polygons and are
//! oriented with the higher values on their left.
//!
//! Filled category regions are built from whole cells, which keeps the
//! per-category cell counts exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::aqi::{AqiScale, CATEGORY_COUNT};
use crate::geo::{BBox, GridSpec, PlanarPoint, ScalarGrid};
use crate::{Error, Result};

/// An isoline at `level`. Closed when the first and last points coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoPolyline {
    pub level: f64,
    pub points: Vec<PlanarPoint>,
}

impl IsoPolyline {
    pub fn is_closed(&self) -> bool {
        self.points.len() > 2 && self.points.first() == self.points.last()
    }

    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Point and unit tangent at arc length `s` from the start.
    pub fn point_at(&self, s: f64) -> Option<(PlanarPoint, PlanarPoint)> {
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            let len = dx.hypot(dy);
            if len > 0.0 && s <= acc + len {
                let t = (s - acc) / len;
                let p = PlanarPoint::new(w[0].x + t * dx, w[0].y + t * dy);
                return Some((p, PlanarPoint::new(dx / len, dy / len)));
            }
            acc += len;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EdgeKey {
    /// Between lattice nodes (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between lattice nodes (i, j) and (i, j + 1).
    V(usize, usize),
}

#[derive(Debug, Clone, Copy)]
enum Vertex {
    Corner(PlanarPoint),
    Crossing(EdgeKey, PlanarPoint),
}

impl Vertex {
    fn point(&self) -> PlanarPoint {
        match *self {
            Vertex::Corner(p) | Vertex::Crossing(_, p) => p,
        }
    }
}

struct Lattice<'a> {
    grid: &'a ScalarGrid,
    level: f64,
}

impl<'a> Lattice<'a> {
    fn node(&self, i: usize, j: usize) -> PlanarPoint {
        self.grid.spec.center_unchecked(i, j)
    }

    fn inside(&self, i: usize, j: usize) -> bool {
        self.grid.get(i, j) > self.level
    }

    /// Crossing on a lattice edge, always interpolated from the lower-index
    /// endpoint so both squares sharing the edge get identical coordinates.
    fn crossing(&self, key: EdgeKey) -> PlanarPoint {
        let ((i0, j0), (i1, j1)) = match key {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (self.grid.get(i0, j0), self.grid.get(i1, j1));
        let (pa, pb) = (self.node(i0, j0), self.node(i1, j1));
        let t = (self.level - va) / (vb - va);
        PlanarPoint::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y))
    }

    /// Superlevel polygons of square (i, j), counter-clockwise.
    fn square(&self, i: usize, j: usize) -> Vec<Vec<Vertex>> {
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        let edges = [
            EdgeKey::H(i, j),
            EdgeKey::V(i + 1, j),
            EdgeKey::H(i, j + 1),
            EdgeKey::V(i, j),
        ];
        let ins: Vec<bool> = corners.iter().map(|&(a, b)| self.inside(a, b)).collect();
        let count = ins.iter().filter(|&&b| b).count();
        if count == 0 {
            return Vec::new();
        }

        let saddle = count == 2 && ins[0] == ins[2];
        if saddle {
            let avg = corners
                .iter()
                .map(|&(a, b)| self.grid.get(a, b))
                .sum::<f64>()
                / 4.0;
            if avg <= self.level {
                // inside corners stay separate: one triangle each
                return (0..4)
                    .filter(|&k| ins[k])
                    .map(|k| {
                        let before = edges[(k + 3) % 4];
                        let after = edges[k];
                        let (a, b) = corners[k];
                        vec![
                            Vertex::Corner(self.node(a, b)),
                            Vertex::Crossing(after, self.crossing(after)),
                            Vertex::Crossing(before, self.crossing(before)),
                        ]
                    })
                    .collect();
            }
        }

        // walk the square counter-clockwise: corner k, then edge k
        let mut poly = Vec::with_capacity(6);
        for k in 0..4 {
            let (a, b) = corners[k];
            if ins[k] {
                poly.push(Vertex::Corner(self.node(a, b)));
            }
            if ins[k] != ins[(k + 1) % 4] {
                poly.push(Vertex::Crossing(edges[k], self.crossing(edges[k])));
            }
        }
        vec![poly]
    }

    fn squares(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let spec = self.grid.spec;
        (0..spec.ny.saturating_sub(1))
            .flat_map(move |j| (0..spec.nx.saturating_sub(1)).map(move |i| (i, j)))
    }
}

/// Isolines of `grid` at `level`, chained into maximal polylines.
pub fn marching_squares(grid: &ScalarGrid, level: f64) -> Vec<IsoPolyline> {
    let lattice = Lattice { grid, level };

    // directed segments, higher values on the left
    let mut segments: Vec<((EdgeKey, PlanarPoint), (EdgeKey, PlanarPoint))> = Vec::new();
    for (i, j) in lattice.squares() {
        for poly in lattice.square(i, j) {
            let n = poly.len();
            for k in 0..n {
                if let (Vertex::Crossing(ka, pa), Vertex::Crossing(kb, pb)) =
                    (poly[k], poly[(k + 1) % n])
                {
                    segments.push(((ka, pa), (kb, pb)));
                }
            }
        }
    }

    let by_start: HashMap<EdgeKey, usize> = segments
        .iter()
        .enumerate()
        .map(|(n, s)| (s.0 .0, n))
        .collect();
    let ends: std::collections::HashSet<EdgeKey> = segments.iter().map(|s| s.1 .0).collect();
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let follow = |first: usize, used: &mut Vec<bool>| {
        let mut pts = vec![segments[first].0 .1];
        let mut cur = first;
        loop {
            used[cur] = true;
            pts.push(segments[cur].1 .1);
            match by_start.get(&segments[cur].1 .0) {
                Some(&next) if !used[next] => cur = next,
                _ => break,
            }
        }
        pts
    };

    // open chains start where no segment ends
    for n in 0..segments.len() {
        if !used[n] && !ends.contains(&segments[n].0 .0) {
            lines.push(follow(n, &mut used));
        }
    }
    for n in 0..segments.len() {
        if !used[n] {
            lines.push(follow(n, &mut used));
        }
    }

    lines
        .into_iter()
        .filter_map(|mut pts| {
            pts.dedup();
            (pts.len() >= 2).then_some(IsoPolyline { level, points: pts })
        })
        .collect()
}

/// Superlevel polygons (`value > level`) of every lattice square.
pub fn superlevel_polygons(grid: &ScalarGrid, level: f64) -> Vec<Vec<PlanarPoint>> {
    let lattice = Lattice { grid, level };
    lattice
        .squares()
        .flat_map(|(i, j)| lattice.square(i, j))
        .map(|poly| poly.iter().map(Vertex::point).collect())
        .collect()
}

/// Area in km² of the region above `level` within the cell-center lattice.
pub fn superlevel_area(grid: &ScalarGrid, level: f64) -> f64 {
    superlevel_polygons(grid, level)
        .iter()
        .map(|p| polygon_area(p))
        .sum()
}

/// Whether `p` falls in the marching-squares superlevel region of `grid` at
/// `level`. Points outside the lattice are never inside.
pub fn in_superlevel(grid: &ScalarGrid, level: f64, p: PlanarPoint) -> bool {
    let spec = grid.spec;
    if spec.nx < 2 || spec.ny < 2 {
        return false;
    }
    let (cw, ch) = spec.cell_size_km();
    let fx = p.x / cw - 0.5;
    let fy = p.y / ch - 0.5;
    if fx < 0.0 || fy < 0.0 || fx > (spec.nx - 1) as f64 || fy > (spec.ny - 1) as f64 {
        return false;
    }
    let i = (fx.floor() as usize).min(spec.nx - 2);
    let j = (fy.floor() as usize).min(spec.ny - 2);
    let lattice = Lattice { grid, level };
    lattice.square(i, j).iter().any(|poly| {
        let pts: Vec<PlanarPoint> = poly.iter().map(Vertex::point).collect();
        point_in_polygon(&pts, p)
    })
}

fn polygon_area(p: &[PlanarPoint]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|k| p[k].x * p[(k + 1) % n].y - p[(k + 1) % n].x * p[k].y)
        .sum::<f64>()
        .abs()
        / 2.0
}

fn point_in_polygon(poly: &[PlanarPoint], p: PlanarPoint) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Axis-aligned block of cells `[i0, i1) × [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

impl CellRect {
    pub fn cells(&self) -> usize {
        (self.i1 - self.i0) * (self.j1 - self.j0)
    }

    /// Outer ring in planar kilometers, counter-clockwise.
    pub fn ring(&self, spec: &GridSpec) -> [PlanarPoint; 4] {
        let (cw, ch) = spec.cell_size_km();
        let (x0, x1) = (self.i0 as f64 * cw, self.i1 as f64 * cw);
        let (y0, y1) = (self.j0 as f64 * ch, self.j1 as f64 * ch);
        [
            PlanarPoint::new(x0, y0),
            PlanarPoint::new(x1, y0),
            PlanarPoint::new(x1, y1),
            PlanarPoint::new(x0, y1),
        ]
    }
}

/// Partition of a grid's cells by AQI category. Each category's region is a
/// set of disjoint cell rectangles; together they tile the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRegions {
    pub spec: GridSpec,
    pub cell_categories: Vec<usize>,
    pub regions: Vec<Vec<CellRect>>,
}

impl CategoryRegions {
    pub fn cell_counts(&self) -> [usize; CATEGORY_COUNT] {
        let mut counts = [0; CATEGORY_COUNT];
        for (c, rects) in self.regions.iter().enumerate() {
            counts[c] = rects.iter().map(CellRect::cells).sum();
        }
        counts
    }
}

pub fn category_regions(grid: &ScalarGrid, scale: &AqiScale) -> CategoryRegions {
    let spec = grid.spec;
    let cats: Vec<usize> = grid.values.iter().map(|&v| scale.category_of(v)).collect();
    let mut regions = vec![Vec::new(); CATEGORY_COUNT];

    // horizontal runs, extended upward while the row above repeats them
    let mut open: Vec<(CellRect, usize)> = Vec::new();
    for j in 0..spec.ny {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < spec.nx {
            let c = cats[spec.index(i, j)];
            let start = i;
            while i < spec.nx && cats[spec.index(i, j)] == c {
                i += 1;
            }
            runs.push((start, i, c));
        }
        let mut next_open = Vec::with_capacity(runs.len());
        for &(a, b, c) in &runs {
            if let Some(pos) = open
                .iter()
                .position(|(r, oc)| r.i0 == a && r.i1 == b && *oc == c)
            {
                let (mut r, oc) = open.swap_remove(pos);
                r.j1 = j + 1;
                next_open.push((r, oc));
            } else {
                next_open.push((
                    CellRect {
                        i0: a,
                        j0: j,
                        i1: b,
                        j1: j + 1,
                    },
                    c,
                ));
            }
        }
        for (r, c) in open.drain(..) {
            regions[c].push(r);
        }
        open = next_open;
    }
    for (r, c) in open {
        regions[c].push(r);
    }
    for rects in &mut regions {
        rects.sort_by_key(|r| (r.j0, r.i0));
    }
    CategoryRegions {
        spec,
        cell_categories: cats,
        regions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrowGlyph {
    pub level: f64,
    pub anchor: PlanarPoint,
    pub direction: PlanarPoint,
    pub length_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrowParams {
    pub spacing_km: f64,
    pub length_km: f64,
}

impl ArrowParams {
    /// Spacing 8% and length 3% of the box diagonal.
    pub fn for_bbox(bbox: &BBox) -> Self {
        let d = bbox.diagonal_km();
        Self {
            spacing_km: 0.08 * d,
            length_km: 0.03 * d,
        }
    }
}

/// Arrows showing where a category region could grow if the 75th-percentile
/// estimate held instead of the median.
///
/// For each category threshold whose 75th-percentile superlevel region is
/// strictly larger than the median one, every median isoline at that
/// threshold gets anchors at `(k + ½) · spacing` along its length. Each arrow
/// points along the isoline's outward normal (away from the higher median
/// values, toward where the region would expand). Anchors where the
/// 75th-percentile field does not exceed the threshold are skipped.
pub fn place_arrows(
    median: &ScalarGrid,
    p75: &ScalarGrid,
    scale: &AqiScale,
    params: ArrowParams,
) -> Result<Vec<ArrowGlyph>> {
    if median.spec != p75.spec {
        return Err(Error::Domain(
            "median and 75th-percentile grids differ in spec".into(),
        ));
    }
    if !(params.spacing_km > 0.0 && params.length_km > 0.0) {
        return Err(Error::Domain(
            "arrow spacing and length must be positive".into(),
        ));
    }
    let (w, h) = median.spec.bbox.extent_km();
    let area_eps = 1e-9 * w * h;
    let mut arrows = Vec::new();
    for t in scale.thresholds() {
        if superlevel_area(p75, t) <= superlevel_area(median, t) + area_eps {
            continue;
        }
        for line in marching_squares(median, t) {
            let count = (line.length() / params.spacing_km).floor() as usize;
            for k in 0..count {
                let Some((anchor, tangent)) = line.point_at((k as f64 + 0.5) * params.spacing_km)
                else {
                    continue;
                };
                if p75.sample(anchor) <= t + 1e-9 {
                    continue;
                }
                // higher values lie to the left of the tangent
                let direction = PlanarPoint::new(tangent.y, -tangent.x);
                arrows.push(ArrowGlyph {
                    level: t,
                    anchor,
                    direction,
                    length_km: params.length_km,
                });
            }
        }
    }
    Ok(arrows)
}
