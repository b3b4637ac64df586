//! End-to-end orchestration: kriging, ensemble, percentile grids, the
//! high-resolution mean, rendering, and grid export.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aqi::{concentration_to_aqi, AqiScale};
use crate::ensemble::{normal_quantile, realize, EnsembleField, EnsembleSpec};
use crate::geo::{GridSpec, ScalarGrid};
use crate::interp::{
    krige_pipeline, IdwParams, KrigingOptions, KrigingResult, KrigingSystem, ModelKind,
};
use crate::render::{self, MapSpec, MapType, RiskGrids};
use crate::scenario::{Scenario, ValueSpace};
use crate::{Error, Result};

/// Every knob of a run. Deserializes from a flat JSON object; missing keys
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Ensemble grid columns and rows.
    pub grid: (usize, usize),
    /// Resolution multiplier per axis for the standard views.
    pub fine_multiplier: usize,
    pub idw_p: f64,
    pub idw_k: usize,
    pub variogram: ModelKind,
    pub n_bins: usize,
    pub max_lag_frac: f64,
    pub lowcost_error_variance: f64,
    pub quantiles: Vec<f64>,
    /// Scale file with breakpoints and palette; the bundled EPA table when
    /// unset.
    pub scale_path: Option<PathBuf>,
    pub seed: u64,
    pub canvas: (u32, u32),
    pub space: ValueSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: (40, 30),
            fine_multiplier: 4,
            idw_p: IdwParams::AIRNOW.p,
            idw_k: IdwParams::AIRNOW.k,
            variogram: ModelKind::Exponential,
            n_bins: 15,
            max_lag_frac: 0.5,
            lowcost_error_variance: 0.0,
            quantiles: EnsembleSpec::default().quantiles,
            scale_path: None,
            seed: 0,
            canvas: (900, 600),
            space: ValueSpace::Aqi,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.0 < 4 || self.grid.1 < 4 {
            return Err(Error::Config(format!(
                "grid must be at least 4x4, got {}x{}",
                self.grid.0, self.grid.1
            )));
        }
        if self.fine_multiplier < 1 {
            return Err(Error::Config("fine multiplier must be >= 1".into()));
        }
        IdwParams::new(self.idw_p, self.idw_k)?;
        EnsembleSpec::new(self.quantiles.clone(), 0.0, 1.0)?;
        if let Some(p) = &self.scale_path {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "scale file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn scale(&self) -> Result<AqiScale> {
        match &self.scale_path {
            Some(p) => AqiScale::from_path(p),
            None => Ok(AqiScale::default()),
        }
    }

    pub fn idw(&self) -> Result<IdwParams> {
        IdwParams::new(self.idw_p, self.idw_k)
    }

    pub fn grid_spec(&self, scenario: &Scenario) -> Result<GridSpec> {
        GridSpec::new(scenario.bbox, self.grid.0, self.grid.1)
    }
}

/// Everything computed for one scenario, in AQI units.
#[derive(Debug, Clone)]
pub struct Products {
    pub scale: AqiScale,
    /// Kriging output in the run's value space.
    pub kriging: KrigingResult,
    pub ensemble: EnsembleField,
    pub median: ScalarGrid,
    pub p75: ScalarGrid,
    pub fine_mean: ScalarGrid,
}

/// Runs kriging, the ensemble, the percentile grids and the fine-grid mean.
/// Errors carry the name of the failing stage.
pub fn compute(config: &RunConfig, scenario: &Scenario) -> Result<Products> {
    config.validate().map_err(Error::in_stage("config"))?;
    let scale = config.scale().map_err(Error::in_stage("config"))?;
    let spec = config
        .grid_spec(scenario)
        .map_err(Error::in_stage("config"))?;
    let options = KrigingOptions {
        lowcost_error_variance: config.lowcost_error_variance,
    };
    let kriging = krige_pipeline(
        &scenario.readings,
        &spec,
        config.variogram,
        config.n_bins,
        config.max_lag_frac,
        options,
    )
    .map_err(Error::in_stage("krige"))?;

    let fine_spec = spec
        .refined(config.fine_multiplier)
        .map_err(Error::in_stage("config"))?;
    let fine = KrigingSystem::new(&scenario.readings, kriging.model, &scenario.bbox, options)
        .and_then(|system| system.grid(&fine_spec))
        .map_err(Error::in_stage("fine grid"))?
        .mean;

    let field = &kriging.field;
    let products = (|| -> Result<_> {
        Ok(match config.space {
            ValueSpace::Aqi => {
                let ens = realize(
                    field,
                    &EnsembleSpec::new(config.quantiles.clone(), 0.0, crate::aqi::AQI_MAX)?,
                )?;
                let median = crate::ensemble::percentile_grid(field, 0.5)?;
                let p75 = crate::ensemble::percentile_grid(field, 0.75)?;
                (
                    ens,
                    median,
                    p75,
                    fine.map(|v| v.clamp(0.0, crate::aqi::AQI_MAX)),
                )
            }
            ValueSpace::Concentration => {
                // quantiles commute with the monotone conversion
                let top = scale.breakpoints.last().map(|b| b.conc_hi).unwrap_or(500.4);
                let to_aqi = |v: f64| concentration_to_aqi(v.clamp(0.0, top), &scale);
                let mut ens = realize(
                    field,
                    &EnsembleSpec::new(config.quantiles.clone(), 0.0, top)?,
                )?;
                for cell in &mut ens.realizations {
                    for v in cell.iter_mut() {
                        *v = to_aqi(*v)?;
                    }
                }
                let pct = |q: f64| -> Result<ScalarGrid> {
                    let z = normal_quantile(q);
                    let values = field
                        .mean
                        .values
                        .iter()
                        .zip(&field.stddev.values)
                        .map(|(&m, &s)| to_aqi(m + z * s))
                        .collect::<Result<Vec<_>>>()?;
                    ScalarGrid::new(spec, values)
                };
                let fine_values = fine
                    .values
                    .iter()
                    .map(|&v| to_aqi(v))
                    .collect::<Result<Vec<_>>>()?;
                (
                    ens,
                    pct(0.5)?,
                    pct(0.75)?,
                    ScalarGrid::new(fine_spec, fine_values)?,
                )
            }
        })
    })()
    .map_err(Error::in_stage("ensemble"))?;
    let (ensemble, median, p75, fine_mean) = products;
    Ok(Products {
        scale,
        kriging,
        ensemble,
        median,
        p75,
        fine_mean,
    })
}

pub fn map_spec(
    config: &RunConfig,
    scenario: &Scenario,
    products: &Products,
    map_type: MapType,
) -> MapSpec {
    MapSpec {
        map_type,
        readings: aqi_readings(config, scenario, &products.scale),
        kriged: Some(products.kriging.field.clone()),
        ensemble: Some(products.ensemble.clone()),
        fine_grid: Some(products.fine_mean.clone()),
        risk: Some(RiskGrids {
            median: products.median.clone(),
            p75: products.p75.clone(),
        }),
        scale: products.scale.clone(),
        circle: scenario.circle,
        canvas_px: config.canvas,
        seed: config.seed,
    }
}

fn aqi_readings(
    config: &RunConfig,
    scenario: &Scenario,
    scale: &AqiScale,
) -> Vec<crate::interp::SensorReading> {
    let mut readings = scenario.readings.clone();
    if config.space == ValueSpace::Concentration {
        for r in &mut readings {
            r.value = concentration_to_aqi(r.value, scale).unwrap_or(crate::aqi::AQI_MAX);
        }
    }
    readings
}

pub fn render_map(
    config: &RunConfig,
    scenario: &Scenario,
    products: &Products,
    map_type: MapType,
) -> Result<String> {
    render::render(&map_spec(config, scenario, products, map_type))
}

/// Grid export: `{spec: {bbox, nx, ny}, values: [...]}`, row-major from the
/// south-west cell.
pub fn grid_json(grid: &ScalarGrid) -> Result<String> {
    Ok(serde_json::to_string_pretty(grid)?)
}

/// Ensemble export: the grid spec, the quantiles, and one outcome array per
/// cell.
pub fn ensemble_json(ens: &EnsembleField) -> Result<String> {
    Ok(serde_json::to_string_pretty(ens)?)
}

/// One file written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub path: PathBuf,
    pub kind: &'static str,
}

/// Computes everything for `scenario`, renders each requested map type, and
/// writes `<scenario>_<maptype>.svg` plus the mean, standard deviation and
/// ensemble grids into `out_dir`. Files are written only after every stage
/// succeeded, each through a temporary file and a rename.
pub fn run(
    config: &RunConfig,
    scenario: &Scenario,
    map_types: &[MapType],
    out_dir: &Path,
) -> Result<Vec<Output>> {
    let products = compute(config, scenario)?;
    let mut files: Vec<(PathBuf, &'static str, String)> = Vec::new();
    for &m in map_types {
        let svg = render_map(config, scenario, &products, m).map_err(Error::in_stage("render"))?;
        files.push((
            out_dir.join(format!("{}_{}.svg", scenario.id, m)),
            "svg",
            svg,
        ));
    }
    let mean = match config.space {
        ValueSpace::Aqi => products.kriging.field.mean.clone(),
        ValueSpace::Concentration => products.median.clone(),
    };
    files.push((
        out_dir.join(format!("{}_mean.json", scenario.id)),
        "grid",
        grid_json(&mean)?,
    ));
    files.push((
        out_dir.join(format!("{}_stddev.json", scenario.id)),
        "grid",
        grid_json(&products.kriging.field.stddev)?,
    ));
    files.push((
        out_dir.join(format!("{}_ensemble.json", scenario.id)),
        "ensemble",
        ensemble_json(&products.ensemble)?,
    ));

    fs::create_dir_all(out_dir).map_err(|e| Error::in_stage("write")(e.into()))?;
    let mut outputs = Vec::with_capacity(files.len());
    for (path, kind, body) in files {
        write_atomic(&path, body.as_bytes()).map_err(Error::in_stage("write"))?;
        outputs.push(Output { path, kind });
    }
    Ok(outputs)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
