//! Runs the guide's code snippets as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/aqi.md")]
pub mod aqi {}

#[doc = include_str!("../../../book/src/interpolation.md")]
pub mod interpolation {}

#[doc = include_str!("../../../book/src/ensemble.md")]
pub mod ensemble {}

#[doc = include_str!("../../../book/src/maps.md")]
pub mod maps {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
