//! Air quality maps with explicit interpolation uncertainty.
//!
//! The pipeline takes point PM2.5 readings, converts them to the Air Quality
//! Index, interpolates them onto a regular grid (inverse distance weighting
//! or ordinary kriging), turns the kriging mean and standard deviation into a
//! nine-outcome quantile ensemble, and renders one of six static map designs
//! as a deterministic SVG document:
//!
//! | map type          | layers                                                  |
//! |-------------------|---------------------------------------------------------|
//! | `interp_only`     | category fill of the high-resolution kriging mean       |
//! | `interp_sensors`  | the above plus one glyph per sensor                     |
//! | `small_multiples` | 3×3 panels, one per ensemble outcome, best to worst     |
//! | `ordered_dotmap`  | each cell a 3×3 block of outcome colors in fixed order  |
//! | `smoothed_dotmap` | each cell a 9×9 block with the same color proportions   |
//! | `risk_contours`   | median fill, 75th-percentile isolines and arrows        |
//!
//! ```
//! use aqmap::{bundled, pipeline::{self, RunConfig}, render::MapType};
//!
//! let scenario = bundled::scenario_a();
//! let products = pipeline::compute(&RunConfig::default(), &scenario).unwrap();
//! let svg = pipeline::render_map(&RunConfig::default(), &scenario, &products, MapType::OrderedDotmap).unwrap();
//! assert!(svg.starts_with("<?xml"));
//! ```

// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aqi;
pub mod bundled;
pub mod contour;
pub mod ensemble;
mod error;
pub mod geo;
pub mod interp;
pub mod pipeline;
pub mod render;
pub mod scenario;

pub use error::{Error, Result};
