//! PM2.5 to Air Quality Index conversion, health categories, and the
//! category palette.
//!
//! The default table is the EPA PM2.5 breakpoint table and ships as
//! `data/aqi_scale.json`; any scale file with the same schema can replace it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DEFAULT_SCALE: &str = include_str!("../data/aqi_scale.json");

/// Number of health categories on the AQI scale.
pub const CATEGORY_COUNT: usize = 6;
/// Largest AQI value.
pub const AQI_MAX: f64 = 500.0;

/// One linear segment of the concentration-to-index table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Breakpoint {
    pub conc_lo: f64,
    pub conc_hi: f64,
    pub aqi_lo: f64,
    pub aqi_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Category {
    pub name: String,
    pub aqi_min: f64,
    pub aqi_max: f64,
    /// `#rrggbb`
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AqiScale {
    pub breakpoints: Vec<Breakpoint>,
    pub categories: Vec<Category>,
}

impl Default for AqiScale {
    fn default() -> Self {
        Self::from_json(DEFAULT_SCALE).expect("bundled AQI scale is valid")
    }
}

impl AqiScale {
    pub fn from_json(text: &str) -> Result<Self> {
        let scale: AqiScale = serde_json::from_str(text)?;
        scale.validate()?;
        Ok(scale)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("AQI scale: {msg}")));
        let bps = &self.breakpoints;
        if bps.is_empty() {
            return bad("no breakpoints".into());
        }
        for (n, b) in bps.iter().enumerate() {
            if !(b.conc_lo < b.conc_hi && b.aqi_lo < b.aqi_hi) {
                return bad(format!("breakpoint {n} is not increasing"));
            }
        }
        for (n, w) in bps.windows(2).enumerate() {
            let (prev, next) = (w[0], w[1]);
            // one reporting decimal of slack between segments
            if next.conc_lo < prev.conc_hi || next.conc_lo - prev.conc_hi > 0.1 + 1e-9 {
                return bad(format!("breakpoints {n} and {} do not abut", n + 1));
            }
            if next.aqi_lo < prev.aqi_hi || next.aqi_lo - prev.aqi_hi > 1.0 + 1e-9 {
                return bad(format!("index ranges {n} and {} do not abut", n + 1));
            }
        }
        if bps[0].aqi_lo != 0.0 || bps[bps.len() - 1].aqi_hi != AQI_MAX {
            return bad("breakpoints must cover AQI 0-500".into());
        }

        let cats = &self.categories;
        if cats.len() != CATEGORY_COUNT {
            return bad(format!(
                "expected {CATEGORY_COUNT} categories, got {}",
                cats.len()
            ));
        }
        if cats[0].aqi_min != 0.0 || cats[CATEGORY_COUNT - 1].aqi_max != AQI_MAX {
            return bad("categories must cover AQI 0-500".into());
        }
        for w in cats.windows(2) {
            if w[1].aqi_min != w[0].aqi_max + 1.0 || w[1].aqi_max <= w[1].aqi_min {
                return bad(format!(
                    "category '{}' does not follow '{}'",
                    w[1].name, w[0].name
                ));
            }
        }
        let mut lum = Vec::with_capacity(CATEGORY_COUNT);
        for c in cats {
            lum.push(relative_luminance(&c.color)?);
        }
        if lum.windows(2).any(|w| w[0] <= w[1]) {
            return bad("palette luminance must strictly decrease with category".into());
        }
        Ok(())
    }

    /// Upper bounds of the first five categories: the isoline levels that
    /// separate neighboring categories.
    pub fn thresholds(&self) -> Vec<f64> {
        self.categories[..CATEGORY_COUNT - 1]
            .iter()
            .map(|c| c.aqi_max)
            .collect()
    }

    pub fn colors(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.color.as_str())
    }

    /// Category index for a value known to be finite; out-of-range values
    /// saturate at the ends of the scale.
    pub fn category_of(&self, aqi: f64) -> usize {
        self.categories[..CATEGORY_COUNT - 1]
            .iter()
            .position(|c| aqi <= c.aqi_max)
            .unwrap_or(CATEGORY_COUNT - 1)
    }
}

/// Piecewise-linear PM2.5 (µg/m³) to AQI conversion.
///
/// Concentrations in the 0.1 µg/m³ reporting gap between two segments are
/// bridged linearly from one segment's top to the next one's bottom, which
/// keeps the curve continuous. Values above the table clamp to 500.
pub fn concentration_to_aqi(pm25: f64, scale: &AqiScale) -> Result<f64> {
    if pm25.is_nan() || pm25 < 0.0 {
        return Err(Error::Domain(format!(
            "PM2.5 concentration must be >= 0, got {pm25}"
        )));
    }
    let bps = &scale.breakpoints;
    let top = bps[bps.len() - 1];
    if pm25 >= top.conc_hi {
        return Ok(top.aqi_hi);
    }
    let lerp = |c: f64, c0: f64, c1: f64, a0: f64, a1: f64| a0 + (c - c0) * (a1 - a0) / (c1 - c0);
    for (n, b) in bps.iter().enumerate() {
        if pm25 <= b.conc_hi {
            if pm25 >= b.conc_lo {
                return Ok(lerp(pm25, b.conc_lo, b.conc_hi, b.aqi_lo, b.aqi_hi));
            }
            let prev = bps[n - 1];
            return Ok(lerp(pm25, prev.conc_hi, b.conc_lo, prev.aqi_hi, b.aqi_lo));
        }
    }
    unreachable!("pm25 below the top breakpoint is inside some segment or gap")
}

/// Category index (0 = good … 5 = hazardous). Category bounds are inclusive
/// at the top, so 50 is good and anything above 50 is at least moderate.
pub fn aqi_to_category(aqi: f64, scale: &AqiScale) -> Result<usize> {
    if !(0.0..=AQI_MAX).contains(&aqi) {
        return Err(Error::Domain(format!(
            "AQI must lie in [0, 500], got {aqi}"
        )));
    }
    Ok(scale.category_of(aqi))
}

pub fn category_color(index: usize, scale: &AqiScale) -> Result<&str> {
    scale
        .categories
        .get(index)
        .map(|c| c.color.as_str())
        .ok_or(Error::OutOfBounds {
            i: index,
            j: 0,
            nx: CATEGORY_COUNT,
            ny: 1,
        })
}

/// Parses `#rrggbb`.
pub fn parse_hex(color: &str) -> Result<[u8; 3]> {
    let hex = color
        .strip_prefix('#')
        .filter(|h| h.len() == 6 && h.is_ascii())
        .ok_or_else(|| Error::Config(format!("color '{color}' is not #rrggbb")))?;
    let mut rgb = [0u8; 3];
    for (k, c) in rgb.iter_mut().enumerate() {
        *c = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16)
            .map_err(|_| Error::Config(format!("color '{color}' is not #rrggbb")))?;
    }
    Ok(rgb)
}

/// WCAG relative luminance of an sRGB hex color.
pub fn relative_luminance(color: &str) -> Result<f64> {
    let lin = |c: u8| {
        let s = c as f64 / 255.0;
        if s <= 0.04045 {
            s / 12.92
        } else {
            ((s + 0.055) / 1.055).powf(2.4)
        }
    };
    let [r, g, b] = parse_hex(color)?;
    Ok(0.2126 * lin(r) + 0.7152 * lin(g) + 0.0722 * lin(b))
}
