use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqmap::interp::{idw_interpolate, krige_pipeline, KrigingOptions, ModelKind};
use aqmap::pipeline::{self, write_atomic, RunConfig};
use aqmap::render::MapType;
use aqmap::scenario::{ingest, study_plan, IngestOptions, InputFormat, Scenario, ValueSpace};
use aqmap::{bundled, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "aqmap",
    version,
    about = "Air quality maps with interpolation uncertainty"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// JSON run configuration; flags override its keys
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Ensemble grid size, e.g. 40x30
    #[arg(long, global = true, value_name = "NXxNY", value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Comma-separated map types (default: all six)
    #[arg(
        long = "map-type",
        global = true,
        value_name = "NAME[,NAME...]",
        value_delimiter = ','
    )]
    map_type: Vec<String>,
    #[arg(long = "idw-p", global = true)]
    idw_p: Option<f64>,
    #[arg(long = "idw-k", global = true)]
    idw_k: Option<usize>,
    #[arg(long, global = true, value_name = "exponential|spherical|gaussian")]
    variogram: Option<String>,
    /// Comma-separated ensemble quantiles
    #[arg(long, global = true, value_name = "q1,...", value_delimiter = ',')]
    quantiles: Vec<f64>,
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Input format; inferred from the file extension when absent
    #[arg(long, global = true, value_name = "csv|purpleair-json")]
    format: Option<String>,
    #[arg(long, global = true, value_name = "aqi|concentration")]
    space: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sensor file into a scenario JSON
    Ingest { input: PathBuf },
    /// Interpolate a scenario onto the ensemble grid
    Interpolate {
        #[arg(value_enum)]
        method: Method,
        input: PathBuf,
    },
    /// Write the quantile ensemble of a scenario
    Ensemble { input: PathBuf },
    /// Render map SVGs and grid exports for a scenario
    Render { input: PathBuf },
    /// Print the stimulus order for a study
    Studyplan {
        #[arg(long, default_value_t = 5)]
        scenarios: usize,
        #[arg(long = "map-types", default_value_t = 6)]
        map_types: usize,
        #[arg(long, default_value_t = 0)]
        baseline: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
    },
    /// Run a bundled scenario end to end
    Demo {
        #[arg(long, default_value = "a")]
        scenario: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Idw,
    Krige,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (nx, ny) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(nx)?, parse(ny)?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aqmap: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn config(opts: &Opts) -> aqmap::Result<RunConfig> {
    let mut c = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = opts.seed {
        c.seed = s;
    }
    if let Some(g) = opts.grid {
        c.grid = g;
    }
    if let Some(p) = opts.idw_p {
        c.idw_p = p;
    }
    if let Some(k) = opts.idw_k {
        c.idw_k = k;
    }
    if let Some(v) = &opts.variogram {
        c.variogram = v.parse::<ModelKind>()?;
    }
    if !opts.quantiles.is_empty() {
        c.quantiles = opts.quantiles.clone();
    }
    if let Some(s) = &opts.space {
        c.space = s.parse::<ValueSpace>()?;
    }
    c.validate()?;
    Ok(c)
}

fn map_types(opts: &Opts) -> aqmap::Result<Vec<MapType>> {
    if opts.map_type.is_empty() {
        return Ok(MapType::ALL.to_vec());
    }
    opts.map_type.iter().map(|s| s.parse()).collect()
}

/// Reads either a scenario JSON (as written by `ingest`) or a raw sensor
/// file.
fn load_scenario(path: &Path, opts: &Opts, config: &RunConfig) -> aqmap::Result<Scenario> {
    let format = match &opts.format {
        Some(f) => Some(f.parse::<InputFormat>()?),
        None => None,
    };
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if format.is_none() && is_json {
        let text = std::fs::read_to_string(path)?;
        if let Ok(s) = Scenario::from_json(&text) {
            return Ok(s);
        }
    }
    let format = format.unwrap_or(if is_json {
        InputFormat::PurpleairJson
    } else {
        InputFormat::Csv
    });
    let options = IngestOptions {
        scale: config.scale()?,
        space: config.space,
        ..Default::default()
    };
    let ingested = ingest(path, format, &options)?;
    for w in &ingested.warnings {
        eprintln!("{}: {w}", path.display());
    }
    Ok(ingested.scenario)
}

fn write_all(files: Vec<(PathBuf, String)>) -> aqmap::Result<()> {
    for (path, body) in files {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(&path, body.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> aqmap::Result<()> {
    let opts = &cli.opts;
    let config = config(opts)?;
    match &cli.command {
        Command::Ingest { input } => {
            let s = load_scenario(input, opts, &config)?;
            println!("{}: {} readings", s.id, s.readings.len());
            let path = opts.out.join(format!("{}.scenario.json", s.id));
            write_all(vec![(path, serde_json::to_string_pretty(&s)?)])
        }
        Command::Interpolate { method, input } => {
            let s = load_scenario(input, opts, &config)?;
            let spec = config.grid_spec(&s)?;
            let files = match method {
                Method::Idw => {
                    let g = idw_interpolate(&s.readings, config.idw()?, &spec)?;
                    vec![(
                        opts.out.join(format!("{}_idw.json", s.id)),
                        pipeline::grid_json(&g)?,
                    )]
                }
                Method::Krige => {
                    let k = krige(&s, &config)?;
                    eprintln!(
                        "variogram: {:?}{}",
                        k.model,
                        if k.used_fallback { " (fallback)" } else { "" }
                    );
                    vec![
                        (
                            opts.out.join(format!("{}_mean.json", s.id)),
                            pipeline::grid_json(&k.field.mean)?,
                        ),
                        (
                            opts.out.join(format!("{}_stddev.json", s.id)),
                            pipeline::grid_json(&k.field.stddev)?,
                        ),
                    ]
                }
            };
            write_all(files)
        }
        Command::Ensemble { input } => {
            let s = load_scenario(input, opts, &config)?;
            let p = pipeline::compute(&config, &s)?;
            write_all(vec![(
                opts.out.join(format!("{}_ensemble.json", s.id)),
                pipeline::ensemble_json(&p.ensemble)?,
            )])
        }
        Command::Render { input } => {
            let s = load_scenario(input, opts, &config)?;
            run_pipeline(&config, &s, &map_types(opts)?, &opts.out)
        }
        Command::Studyplan {
            scenarios,
            map_types,
            baseline,
            offset,
        } => {
            let plan = study_plan(*scenarios, *map_types, *baseline, *offset)?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
            Ok(())
        }
        Command::Demo { scenario } => {
            let s = match scenario.as_str() {
                "a" => bundled::scenario_a(),
                "b" => bundled::scenario_b(),
                other => {
                    return Err(Error::Config(format!(
                        "no bundled scenario '{other}' (try a or b)"
                    )))
                }
            };
            run_pipeline(&config, &s, &map_types(opts)?, &opts.out)
        }
    }
}

fn krige(s: &Scenario, config: &RunConfig) -> aqmap::Result<aqmap::interp::KrigingResult> {
    krige_pipeline(
        &s.readings,
        &config.grid_spec(s)?,
        config.variogram,
        config.n_bins,
        config.max_lag_frac,
        KrigingOptions {
            lowcost_error_variance: config.lowcost_error_variance,
        },
    )
    .map_err(|e| Error::Stage {
        stage: "krige",
        source: Box::new(e),
    })
}

fn run_pipeline(
    config: &RunConfig,
    s: &Scenario,
    types: &[MapType],
    out: &Path,
) -> aqmap::Result<()> {
    for o in pipeline::run(config, s, types, out)? {
        println!("wrote {} ({})", o.path.display(), o.kind);
    }
    Ok(())
}
