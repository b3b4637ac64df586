//! Discretized outcome ensembles built from a kriged mean and standard
//! deviation.
//!
//! Every cell gets the same set of Gaussian quantiles, so realization `r` is
//! the whole map with every cell at its `q_r`-th percentile. With the default
//! nine deciles, realization 0 is the best case and realization 8 the worst.

use serde::{Deserialize, Serialize};

use crate::aqi::AQI_MAX;
use crate::geo::{GridSpec, ScalarGrid};
use crate::interp::KrigedField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub quantiles: Vec<f64>,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for EnsembleSpec {
    /// The nine deciles 0.1 … 0.9, clamped to the AQI domain.
    fn default() -> Self {
        Self {
            quantiles: (1..=9).map(|k| k as f64 / 10.0).collect(),
            clamp_lo: 0.0,
            clamp_hi: AQI_MAX,
        }
    }
}

impl EnsembleSpec {
    pub fn new(quantiles: Vec<f64>, clamp_lo: f64, clamp_hi: f64) -> Result<Self> {
        let spec = Self {
            quantiles,
            clamp_lo,
            clamp_hi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.is_empty() {
            return Err(Error::Domain("ensemble needs at least one quantile".into()));
        }
        if self.quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::Domain(
                "quantiles must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "quantiles must be strictly increasing".into(),
            ));
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return Err(Error::Domain("clamp bounds must be increasing".into()));
        }
        Ok(())
    }
}

/// Per-cell ordered outcomes, best case first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleField {
    pub spec: GridSpec,
    pub quantiles: Vec<f64>,
    /// One vector per cell in grid storage order.
    pub realizations: Vec<Vec<f64>>,
}

impl EnsembleField {
    pub fn len(&self) -> usize {
        self.quantiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantiles.is_empty()
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        &self.realizations[self.spec.index(i, j)]
    }

    /// The whole map at outcome `r`.
    pub fn realization_grid(&self, r: usize) -> ScalarGrid {
        ScalarGrid {
            spec: self.spec,
            values: self.realizations.iter().map(|c| c[r]).collect(),
        }
    }
}

pub fn realize(field: &KrigedField, spec: &EnsembleSpec) -> Result<EnsembleField> {
    spec.validate()?;
    let z: Vec<f64> = spec.quantiles.iter().map(|&q| normal_quantile(q)).collect();
    let realizations = field
        .mean
        .values
        .iter()
        .zip(&field.stddev.values)
        .map(|(&m, &s)| {
            z.iter()
                .map(|&z| (m + z * s).clamp(spec.clamp_lo, spec.clamp_hi))
                .collect()
        })
        .collect();
    Ok(EnsembleField {
        spec: *field.spec(),
        quantiles: spec.quantiles.clone(),
        realizations,
    })
}

/// The map with every cell at its `q`-th percentile, clamped to [0, 500].
pub fn percentile_grid(field: &KrigedField, q: f64) -> Result<ScalarGrid> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "percentile must lie in (0, 1), got {q}"
        )));
    }
    let z = normal_quantile(q);
    let values = field
        .mean
        .values
        .iter()
        .zip(&field.stddev.values)
        .map(|(&m, &s)| (m + z * s).clamp(0.0, AQI_MAX))
        .collect();
    Ok(ScalarGrid {
        spec: *field.spec(),
        values,
    })
}

/// Standard normal quantile function (Wichura's AS 241, PPND16), accurate to
/// about 1e-16 relative over (0, 1). Returns ±∞ at the endpoints and NaN
/// outside.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[allow(clippy::excessive_precision)]
const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    133.141_667_891_784_38,
    1_971.590_950_306_551_3,
    13_731.693_765_509_461,
    45_921.953_931_549_87,
    67_265.770_927_008_7,
    33_430.575_583_588_13,
    2_509.080_928_730_122_7,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5_394.196_021_424_751,
    21_213.794_301_586_597,
    39_307.895_800_092_71,
    28_729.085_735_721_943,
    5_226.495_278_852_545,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_08,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
#[allow(clippy::excessive_precision)]
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    0.001_242_660_947_388_078_4,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
#[allow(clippy::excessive_precision)]
const F: [f64; 8] = [
    1.0,
    0.599_832_206_555_888,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_8e-15,
];
