use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{project_all, SensorReading};
use crate::geo::{distance, BBox};
use crate::{Error, Result};

/// Smallest partial sill a fit may return.
pub const SILL_LOWER_BOUND: f64 = 1e-14;

/// Log-spaced candidate ranges scanned before the golden-section refinement.
const RANGE_SCAN: usize = 160;
/// Candidate ranges span `[RANGE_LO, RANGE_HI]` times the largest lag.
const RANGE_LO: f64 = 1e-3;
const RANGE_HI: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Exponential,
    Spherical,
    Gaussian,
}

impl ModelKind {
    /// Normalized structure function: 0 at the origin, rising to 1.
    fn shape(self, h: f64, range: f64) -> f64 {
        let t = h / range;
        match self {
            ModelKind::Exponential => 1.0 - (-t).exp(),
            ModelKind::Spherical => {
                if t >= 1.0 {
                    1.0
                } else {
                    1.5 * t - 0.5 * t * t * t
                }
            }
            ModelKind::Gaussian => 1.0 - (-t * t).exp(),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" => Ok(ModelKind::Exponential),
            "spherical" => Ok(ModelKind::Spherical),
            "gaussian" => Ok(ModelKind::Gaussian),
            other => Err(Error::Config(format!("unknown variogram model '{other}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Exponential => "exponential",
            ModelKind::Spherical => "spherical",
            ModelKind::Gaussian => "gaussian",
        })
    }
}

/// Semivariogram model `γ(h) = nugget + sill · shape(h / range)` for `h > 0`
/// and `γ(0) = 0`. `sill` is the partial sill, so the plateau sits at
/// `nugget + sill`. The exponential and Gaussian models use `range` as the
/// scale length, not the practical range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub kind: ModelKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(kind: ModelKind, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        let model = Self {
            kind,
            nugget,
            sill,
            range,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nugget.is_finite()
            && self.nugget >= 0.0
            && self.sill.is_finite()
            && self.sill > 0.0
            && self.range.is_finite()
            && self.range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid variogram model {self:?}")))
        }
    }

    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * self.kind.shape(h, self.range)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    /// Bin midpoint in kilometers.
    pub lag: f64,
    pub semivariance: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bins: Vec<LagBin>,
    /// Population variance of the readings; seeds the fit's initial sill.
    pub sample_variance: f64,
}

impl EmpiricalVariogram {
    /// Wraps precomputed bins. Without the readings at hand the largest bin
    /// semivariance stands in for the sample variance.
    pub fn from_bins(bins: Vec<LagBin>) -> Self {
        let sample_variance = bins.iter().map(|b| b.semivariance).fold(0.0, f64::max);
        Self {
            bins,
            sample_variance,
        }
    }

    pub fn max_lag(&self) -> f64 {
        self.bins.iter().map(|b| b.lag).fold(0.0, f64::max)
    }
}

/// Classical (Matheron) estimator over `n_bins` equal-width lag bins spanning
/// `(0, max_lag_frac · max pair distance]`. Empty bins are dropped.
pub fn empirical_variogram(
    readings: &[SensorReading],
    bbox: &BBox,
    n_bins: usize,
    max_lag_frac: f64,
) -> Result<EmpiricalVariogram> {
    if readings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "empirical variogram needs >= 2 readings, got {}",
            readings.len()
        )));
    }
    if n_bins == 0 {
        return Err(Error::Domain("variogram needs at least one bin".into()));
    }
    if !(max_lag_frac > 0.0 && max_lag_frac <= 1.0) {
        return Err(Error::Domain(format!(
            "max lag fraction must lie in (0, 1], got {max_lag_frac}"
        )));
    }

    // canonical order makes the floating-point sums independent of input order
    let mut sorted: Vec<&SensorReading> = readings.iter().collect();
    sorted.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then(a.location.lon.total_cmp(&b.location.lon))
            .then(a.location.lat.total_cmp(&b.location.lat))
            .then(a.value.total_cmp(&b.value))
    });
    let owned: Vec<SensorReading> = sorted.into_iter().cloned().collect();
    let sites = project_all(&owned, bbox)?;

    let n = owned.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(sites[i], sites[j]);
            let dv = owned[i].value - owned[j].value;
            pairs.push((d, dv * dv));
        }
    }
    let max_d = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_lag = max_lag_frac * max_d;
    let width = max_lag / n_bins as f64;

    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    if width > 0.0 {
        for &(d, sq) in &pairs {
            if d <= 0.0 || d > max_lag {
                continue;
            }
            let b = ((d / width).ceil() as usize).clamp(1, n_bins) - 1;
            sums[b] += sq;
            counts[b] += 1;
        }
    }
    let bins = (0..n_bins)
        .filter(|&b| counts[b] > 0)
        .map(|b| LagBin {
            lag: (b as f64 + 0.5) * width,
            semivariance: sums[b] / (2.0 * counts[b] as f64),
            pairs: counts[b],
        })
        .collect();

    let mean = owned.iter().map(|r| r.value).sum::<f64>() / n as f64;
    let sample_variance = owned.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(EmpiricalVariogram {
        bins,
        sample_variance,
    })
}

/// Pair-count-weighted squared error of `model` against the empirical bins.
pub fn fit_objective(emp: &EmpiricalVariogram, model: &VariogramModel) -> f64 {
    emp.bins
        .iter()
        .map(|b| b.pairs as f64 * (model.gamma(b.lag) - b.semivariance).powi(2))
        .sum()
}

/// Starting point of the fit: no nugget, sill at the sample variance, range
/// at a third of the largest lag.
pub fn initial_guess(emp: &EmpiricalVariogram, kind: ModelKind) -> VariogramModel {
    VariogramModel {
        kind,
        nugget: 0.0,
        sill: emp.sample_variance.max(SILL_LOWER_BOUND),
        range: (emp.max_lag() / 3.0).max(f64::MIN_POSITIVE),
    }
}

/// Fallback model used when fitting fails: exponential, no nugget, sill at
/// the reading variance, range a third of the largest pair distance.
pub fn fallback_model(readings: &[SensorReading], bbox: &BBox) -> Result<VariogramModel> {
    let sites = project_all(readings, bbox)?;
    let mut max_d: f64 = 0.0;
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            max_d = max_d.max(distance(*a, *b));
        }
    }
    let n = readings.len().max(1) as f64;
    let mean = readings.iter().map(|r| r.value).sum::<f64>() / n;
    let var = readings
        .iter()
        .map(|r| (r.value - mean).powi(2))
        .sum::<f64>()
        / n;
    let range = if max_d > 0.0 { max_d / 3.0 } else { 1.0 };
    VariogramModel::new(
        ModelKind::Exponential,
        0.0,
        var.max(SILL_LOWER_BOUND),
        range,
    )
}

/// Least-squares fit of nugget, sill and range.
///
/// For a fixed range the model is linear in (nugget, sill), so those two are
/// solved exactly as a bound-constrained weighted least-squares problem. The
/// range is then found by a log-spaced scan followed by golden-section
/// refinement of the profiled objective. A minimum pinned to the upper end
/// of the range scan means the data never levels off and is reported as a
/// fit failure carrying the best iterate.
pub fn fit_variogram(emp: &EmpiricalVariogram, kind: ModelKind) -> Result<VariogramModel> {
    if emp.bins.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "variogram fit needs >= 3 populated bins, got {}",
            emp.bins.len()
        )));
    }
    let max_lag = emp.max_lag();
    let initial = initial_guess(emp, kind);
    if emp.bins.iter().all(|b| b.semivariance == 0.0) {
        return Ok(VariogramModel {
            nugget: 0.0,
            sill: SILL_LOWER_BOUND,
            ..initial
        });
    }
    let initial_obj = fit_objective(emp, &initial);

    let profile = |log_r: f64| -> (f64, VariogramModel) {
        let model = best_linear_part(emp, kind, log_r.exp());
        (fit_objective(emp, &model), model)
    };

    let (lo, hi) = ((max_lag * RANGE_LO).ln(), (max_lag * RANGE_HI).ln());
    let step = (hi - lo) / (RANGE_SCAN - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for s in 0..RANGE_SCAN {
        let (obj, _) = profile(lo + step * s as f64);
        if obj < best.0 {
            best = (obj, s);
        }
    }
    let a = lo + step * best.1.saturating_sub(1) as f64;
    let b = lo + step * (best.1 + 1).min(RANGE_SCAN - 1) as f64;
    let log_r = golden_section(|x| profile(x).0, a, b, 1e-12);
    let (mut obj, mut model) = profile(log_r);
    let (scan_obj, scan_model) = profile(lo + step * best.1 as f64);
    if scan_obj < obj {
        obj = scan_obj;
        model = scan_model;
    }

    if !obj.is_finite() {
        return Err(Error::FitFailure {
            reason: "objective is not finite".into(),
            best: initial,
        });
    }
    if obj > initial_obj {
        model = initial;
        obj = initial_obj;
    }
    let scale = emp
        .bins
        .iter()
        .map(|b| b.pairs as f64 * b.semivariance.powi(2))
        .sum::<f64>();
    let pinned = best.1 == RANGE_SCAN - 1 && model.range >= max_lag * RANGE_HI * 0.99;
    if pinned && obj > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::FitFailure {
            reason: format!(
                "range ran to the search bound ({:.3} km); variogram does not level off",
                model.range
            ),
            best: model,
        });
    }
    Ok(model)
}

/// Weighted least squares for (nugget, sill) at a fixed range subject to
/// `nugget >= 0` and `sill >= SILL_LOWER_BOUND`. The problem is a convex
/// quadratic in two variables, so the optimum is either the unconstrained
/// solution or lies on one of the bounds.
fn best_linear_part(emp: &EmpiricalVariogram, kind: ModelKind, range: f64) -> VariogramModel {
    let (mut sw, mut swf, mut swff, mut swy, mut swfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in &emp.bins {
        let w = b.pairs as f64;
        let f = kind.shape(b.lag, range);
        sw += w;
        swf += w * f;
        swff += w * f * f;
        swy += w * b.semivariance;
        swfy += w * f * b.semivariance;
    }
    let objective = |n: f64, s: f64| {
        emp.bins
            .iter()
            .map(|b| b.pairs as f64 * (n + s * kind.shape(b.lag, range) - b.semivariance).powi(2))
            .sum::<f64>()
    };

    let mut candidates = Vec::with_capacity(4);
    let det = sw * swff - swf * swf;
    if det.abs() > 1e-12 * sw * swff.max(f64::MIN_POSITIVE) {
        let n = (swy * swff - swf * swfy) / det;
        let s = (sw * swfy - swf * swy) / det;
        if n >= 0.0 && s >= SILL_LOWER_BOUND {
            candidates.push((n, s));
        }
    }
    if swff > 0.0 {
        candidates.push((0.0, (swfy / swff).max(SILL_LOWER_BOUND)));
    }
    candidates.push((
        ((swy - SILL_LOWER_BOUND * swf) / sw).max(0.0),
        SILL_LOWER_BOUND,
    ));
    candidates.push((0.0, SILL_LOWER_BOUND));

    let (nugget, sill) = candidates
        .into_iter()
        .map(|(n, s)| (objective(n, s), n, s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, n, s)| (n, s))
        .expect("at least one candidate");
    VariogramModel {
        kind,
        nugget,
        sill,
        range,
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
