use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::variogram::{
    empirical_variogram, fallback_model, fit_variogram, EmpiricalVariogram, ModelKind,
    VariogramModel,
};
use super::{project_all, SensorClass, SensorReading};
use crate::geo::{distance, BBox, GridSpec, PlanarPoint, ScalarGrid};
use crate::{Error, Result};

/// Below this distance a prediction point is treated as the sensor site.
const SITE_KM: f64 = 1e-9;
/// Smallest acceptable ratio of the smallest to the largest LU pivot.
const PIVOT_RATIO_MIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KrigingOptions {
    /// Measurement-error variance added to the diagonal for low-cost sensors.
    /// Zero keeps kriging an exact interpolator at every site.
    pub lowcost_error_variance: f64,
}

/// Kriging mean and standard deviation on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigedField {
    pub mean: ScalarGrid,
    pub stddev: ScalarGrid,
}

impl KrigedField {
    pub fn new(mean: ScalarGrid, stddev: ScalarGrid) -> Result<Self> {
        if mean.spec != stddev.spec {
            return Err(Error::Domain("mean and stddev grids differ in spec".into()));
        }
        if stddev.values.iter().any(|&s| s < 0.0) {
            return Err(Error::Domain("negative standard deviation".into()));
        }
        Ok(Self { mean, stddev })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.mean.spec
    }
}

/// Factored ordinary-kriging system for one set of sites and one model.
///
/// The left-hand side `[Γ 1; 1ᵀ 0]` does not depend on the prediction point,
/// so it is factored once and reused for every cell.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    model: VariogramModel,
    sites: Vec<PlanarPoint>,
    values: Vec<f64>,
    diagonal: Vec<f64>,
    scale: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KrigingSystem {
    pub fn new(
        readings: &[SensorReading],
        model: VariogramModel,
        bbox: &BBox,
        options: KrigingOptions,
    ) -> Result<Self> {
        model.validate()?;
        let merged = merge_duplicates(readings);
        if merged.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "kriging needs >= 2 distinct sensor locations, got {}",
                merged.len()
            )));
        }
        if !(options.lowcost_error_variance >= 0.0 && options.lowcost_error_variance.is_finite()) {
            return Err(Error::Domain(
                "measurement-error variance must be finite and >= 0".into(),
            ));
        }
        let sites = project_all(&merged, bbox)?;
        let values: Vec<f64> = merged.iter().map(|r| r.value).collect();
        let diagonal: Vec<f64> = merged
            .iter()
            .map(|r| match r.class {
                SensorClass::Lowcost => options.lowcost_error_variance,
                SensorClass::Government => 0.0,
            })
            .collect();

        // the system is solved in units of the total sill, which leaves the
        // weights unchanged and keeps tiny-sill models well scaled
        let scale = model.nugget + model.sill;
        let n = sites.len();
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                // measurement error enters the covariance diagonal, hence
                // the semivariance diagonal with a negative sign
                a[(i, j)] = if i == j {
                    -diagonal[i]
                } else {
                    model.gamma(distance(sites[i], sites[j]))
                } / scale;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }
        let lu = a.lu();
        let u = lu.u();
        let pivots: Vec<f64> = (0..=n).map(|k| u[(k, k)].abs()).collect();
        let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
        if !(lo.is_finite() && hi > 0.0 && lo / hi > PIVOT_RATIO_MIN) {
            return Err(Error::IllConditioned(format!(
                "pivot ratio {:.3e} for {n} sites",
                lo / hi
            )));
        }
        Ok(Self {
            model,
            sites,
            values,
            diagonal,
            scale,
            lu,
        })
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    /// Sensor sites after duplicate locations were merged.
    pub fn sites(&self) -> &[PlanarPoint] {
        &self.sites
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Kriging weights and Lagrange multiplier at `at`.
    ///
    /// At a site with no measurement-error variance the system's unique
    /// solution is the unit vector for that site with a zero multiplier;
    /// it is returned directly instead of through the factorization.
    pub fn weights_at(&self, at: PlanarPoint) -> (Vec<f64>, f64) {
        let n = self.sites.len();
        if let Some(k) = self
            .sites
            .iter()
            .zip(&self.diagonal)
            .position(|(s, &d)| d == 0.0 && distance(*s, at) < SITE_KM)
        {
            let mut w = vec![0.0; n];
            w[k] = 1.0;
            return (w, 0.0);
        }
        let mut rhs = self.rhs(at);
        for g in rhs.iter_mut().take(n) {
            *g /= self.scale;
        }
        let sol = self
            .lu
            .solve(&rhs)
            .expect("factorization checked at construction");
        (sol.as_slice()[..n].to_vec(), sol[n] * self.scale)
    }

    fn rhs(&self, at: PlanarPoint) -> DVector<f64> {
        let n = self.sites.len();
        DVector::from_fn(n + 1, |i, _| {
            if i == n {
                return 1.0;
            }
            // closer than the snap distance counts as the site itself
            let d = distance(self.sites[i], at);
            if d < SITE_KM {
                0.0
            } else {
                self.model.gamma(d)
            }
        })
    }

    /// Mean and variance (clamped at zero) at `at`.
    pub fn estimate(&self, at: PlanarPoint) -> (f64, f64) {
        let (w, lambda) = self.weights_at(at);
        let mean = w.iter().zip(&self.values).map(|(w, v)| w * v).sum();
        let rhs = self.rhs(at);
        let variance = w.iter().zip(rhs.iter()).map(|(w, g)| w * g).sum::<f64>() + lambda;
        (mean, variance.max(0.0))
    }

    pub fn grid(&self, spec: &GridSpec) -> Result<KrigedField> {
        let (mean, sd): (Vec<f64>, Vec<f64>) = spec
            .centers()
            .into_par_iter()
            .map(|c| {
                let (m, v) = self.estimate(c);
                (m, v.sqrt())
            })
            .unzip();
        KrigedField::new(ScalarGrid::new(*spec, mean)?, ScalarGrid::new(*spec, sd)?)
    }
}

/// Averages the values of readings that share an exact location. A merged
/// site counts as government-owned if any of its readings is.
fn merge_duplicates(readings: &[SensorReading]) -> Vec<SensorReading> {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut merged: Vec<(SensorReading, usize)> = Vec::new();
    for r in readings {
        let key = (r.location.lon.to_bits(), r.location.lat.to_bits());
        match index.get(&key) {
            Some(&k) => {
                let (m, count) = &mut merged[k];
                m.value += r.value;
                *count += 1;
                if r.class == SensorClass::Government {
                    m.class = SensorClass::Government;
                }
            }
            None => {
                index.insert(key, merged.len());
                merged.push((r.clone(), 1));
            }
        }
    }
    merged
        .into_iter()
        .map(|(mut r, count)| {
            r.value /= count as f64;
            r
        })
        .collect()
}

/// Ordinary kriging of `readings` onto `spec` with default options.
pub fn krige(
    readings: &[SensorReading],
    model: VariogramModel,
    spec: &GridSpec,
) -> Result<KrigedField> {
    krige_with(readings, model, spec, KrigingOptions::default())
}

pub fn krige_with(
    readings: &[SensorReading],
    model: VariogramModel,
    spec: &GridSpec,
    options: KrigingOptions,
) -> Result<KrigedField> {
    if readings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "kriging needs >= 2 readings, got {}",
            readings.len()
        )));
    }
    KrigingSystem::new(readings, model, &spec.bbox, options)?.grid(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingResult {
    pub field: KrigedField,
    pub model: VariogramModel,
    pub empirical: EmpiricalVariogram,
    /// True when the fit failed and the fallback model was used.
    pub used_fallback: bool,
}

/// Empirical variogram, model fit and kriging in one call.
///
/// If the fit fails (or there are too few populated lag bins to fit at all)
/// the fallback model from [`fallback_model`] is used and the result is
/// flagged.
pub fn krige_pipeline(
    readings: &[SensorReading],
    spec: &GridSpec,
    kind: ModelKind,
    n_bins: usize,
    max_lag_frac: f64,
    options: KrigingOptions,
) -> Result<KrigingResult> {
    let empirical = empirical_variogram(readings, &spec.bbox, n_bins, max_lag_frac)?;
    let (model, used_fallback) = match fit_variogram(&empirical, kind) {
        Ok(model) => (model, false),
        Err(e @ (Error::FitFailure { .. } | Error::InsufficientData(_))) => {
            log::warn!("{e}; using the fallback variogram");
            (fallback_model(readings, &spec.bbox)?, true)
        }
        Err(e) => return Err(e),
    };
    let field = krige_with(readings, model, spec, options)?;
    Ok(KrigingResult {
        field,
        model,
        empirical,
        used_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{project, unproject, GeoPoint};
    use proptest::prelude::*;

    fn bbox() -> BBox {
        BBox::new(
            GeoPoint {
                lon: -122.5,
                lat: 37.5,
            },
            GeoPoint {
                lon: -122.0,
                lat: 37.9,
            },
        )
        .unwrap()
    }

    fn readings(pts: &[(f64, f64, f64)]) -> Vec<SensorReading> {
        let b = bbox();
        pts.iter()
            .enumerate()
            .map(|(n, &(x, y, v))| {
                SensorReading::new(
                    format!("s{n}"),
                    unproject(PlanarPoint::new(x, y), &b).unwrap(),
                    v,
                    SensorClass::Government,
                )
            })
            .collect()
    }

    fn exp_model() -> VariogramModel {
        VariogramModel::new(ModelKind::Exponential, 0.0, 400.0, 8.0).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting, written out by hand
    /// so it shares nothing with the factorization under test.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let (top, rest) = a.split_at_mut(row);
                let (pivot, target) = (&top[col], &mut rest[0]);
                let f = target[col] / pivot[col];
                for (t, p) in target[col..].iter_mut().zip(&pivot[col..]) {
                    *t -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    fn oracle_weights(sites: &[PlanarPoint], model: &VariogramModel, at: PlanarPoint) -> Vec<f64> {
        let n = sites.len();
        let mut a = vec![vec![0.0; n + 1]; n + 1];
        let mut b = vec![1.0; n + 1];
        for i in 0..n {
            for j in 0..n {
                let h =
                    ((sites[i].x - sites[j].x).powi(2) + (sites[i].y - sites[j].y).powi(2)).sqrt();
                a[i][j] = model.gamma(h);
            }
            a[i][n] = 1.0;
            a[n][i] = 1.0;
            b[i] = model.gamma(((sites[i].x - at.x).powi(2) + (sites[i].y - at.y).powi(2)).sqrt());
        }
        dense_solve(a, b)
    }

    #[test]
    fn exact_at_sensor_sites() {
        let r = readings(&[
            (3.0, 4.0, 80.0),
            (20.0, 10.0, 150.0),
            (10.0, 30.0, 40.0),
            (35.0, 25.0, 95.0),
        ]);
        let sys = KrigingSystem::new(&r, exp_model(), &bbox(), KrigingOptions::default()).unwrap();
        for r in &r {
            let (m, v) = sys.estimate(project(r.location, &bbox()).unwrap());
            assert!((m - r.value).abs() < 1e-6);
            assert!(v.sqrt() < 1e-6);
        }
    }

    #[test]
    fn solve_is_exact_next_to_sites() {
        // just off the site the factorized solve is used, and must agree
        let r = readings(&[(3.0, 4.0, 80.0), (20.0, 10.0, 150.0), (10.0, 30.0, 40.0)]);
        let sys = KrigingSystem::new(&r, exp_model(), &bbox(), KrigingOptions::default()).unwrap();
        let p = project(r[1].location, &bbox()).unwrap();
        let (m, v) = sys.estimate(PlanarPoint::new(p.x + 1e-7, p.y));
        assert!((m - 150.0).abs() < 1e-3, "{m}");
        assert!(v.sqrt() < 0.05, "{}", v.sqrt());
    }

    #[test]
    fn constant_readings_give_constant_mean() {
        let r = readings(&[(3.0, 4.0, 61.0), (20.0, 10.0, 61.0), (10.0, 30.0, 61.0)]);
        let spec = GridSpec::new(bbox(), 7, 5).unwrap();
        let f = krige(&r, exp_model(), &spec).unwrap();
        assert!(f.mean.values.iter().all(|&m| (m - 61.0).abs() < 1e-9));
    }

    #[test]
    fn weights_match_dense_oracle() {
        let r = readings(&[(3.0, 4.0, 80.0), (20.0, 10.0, 150.0), (10.0, 30.0, 40.0)]);
        let sys = KrigingSystem::new(&r, exp_model(), &bbox(), KrigingOptions::default()).unwrap();
        let spec = GridSpec::new(bbox(), 6, 6).unwrap();
        for c in spec.centers() {
            let (w, lambda) = sys.weights_at(c);
            let want = oracle_weights(sys.sites(), &exp_model(), c);
            for (a, b) in w.iter().chain(std::iter::once(&lambda)).zip(&want) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicates_are_averaged() {
        let mut r = readings(&[(3.0, 4.0, 80.0), (20.0, 10.0, 150.0), (10.0, 30.0, 40.0)]);
        let mut dup = r[0].clone();
        dup.value = 100.0;
        dup.id = "dup".into();
        r.push(dup);
        let sys = KrigingSystem::new(&r, exp_model(), &bbox(), KrigingOptions::default()).unwrap();
        assert_eq!(sys.sites().len(), 3);
        assert_eq!(sys.values()[0], 90.0);
    }

    #[test]
    fn single_location_is_insufficient() {
        let r = readings(&[(3.0, 4.0, 80.0), (3.0, 4.0, 90.0)]);
        assert!(matches!(
            KrigingSystem::new(&r, exp_model(), &bbox(), KrigingOptions::default()),
            Err(Error::InsufficientData(_))
        ));
        let spec = GridSpec::new(bbox(), 2, 2).unwrap();
        assert!(krige(&r[..1], exp_model(), &spec).is_err());
    }

    #[test]
    fn measurement_error_relaxes_exactness() {
        let mut r = readings(&[(3.0, 4.0, 80.0), (20.0, 10.0, 150.0), (10.0, 30.0, 40.0)]);
        r[0].class = SensorClass::Lowcost;
        let opts = KrigingOptions {
            lowcost_error_variance: 100.0,
        };
        let sys = KrigingSystem::new(&r, exp_model(), &bbox(), opts).unwrap();
        let (m, v) = sys.estimate(project(r[0].location, &bbox()).unwrap());
        assert!((m - 80.0).abs() > 1e-3);
        assert!(v > 0.0);
    }

    #[test]
    fn pipeline_equals_manual_composition() {
        let r = readings(&[
            (3.0, 4.0, 80.0),
            (20.0, 10.0, 150.0),
            (10.0, 30.0, 40.0),
            (35.0, 25.0, 95.0),
            (15.0, 15.0, 120.0),
            (28.0, 3.0, 60.0),
            (5.0, 20.0, 70.0),
            (38.0, 38.0, 30.0),
        ]);
        let spec = GridSpec::new(bbox(), 8, 6).unwrap();
        let out = krige_pipeline(
            &r,
            &spec,
            ModelKind::Exponential,
            6,
            1.0,
            KrigingOptions::default(),
        )
        .unwrap();
        let emp = empirical_variogram(&r, &spec.bbox, 6, 1.0).unwrap();
        let model = match fit_variogram(&emp, ModelKind::Exponential) {
            Ok(m) => m,
            Err(_) => fallback_model(&r, &spec.bbox).unwrap(),
        };
        let manual = krige(&r, model, &spec).unwrap();
        assert_eq!(out.empirical, emp);
        assert_eq!(out.model, model);
        assert_eq!(out.field, manual);
    }

    #[test]
    fn pipeline_constant_readings() {
        let r = readings(&[
            (3.0, 4.0, 55.0),
            (20.0, 10.0, 55.0),
            (10.0, 30.0, 55.0),
            (35.0, 25.0, 55.0),
            (15.0, 15.0, 55.0),
        ]);
        let spec = GridSpec::new(bbox(), 6, 6).unwrap();
        let out = krige_pipeline(
            &r,
            &spec,
            ModelKind::Exponential,
            4,
            1.0,
            KrigingOptions::default(),
        )
        .unwrap();
        assert!(out
            .field
            .mean
            .values
            .iter()
            .all(|&m| (m - 55.0).abs() < 1e-9));
        assert!(out.field.stddev.values.iter().all(|&s| s <= 1e-6));
    }

    #[test]
    fn pipeline_falls_back_on_too_few_bins() {
        let r = readings(&[(3.0, 4.0, 55.0), (20.0, 10.0, 80.0)]);
        let spec = GridSpec::new(bbox(), 4, 4).unwrap();
        let out = krige_pipeline(
            &r,
            &spec,
            ModelKind::Exponential,
            15,
            1.0,
            KrigingOptions::default(),
        )
        .unwrap();
        assert!(out.used_fallback);
        assert_eq!(out.model, fallback_model(&r, &spec.bbox).unwrap());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_variance_nonnegative(
            pts in prop::collection::vec((0.0f64..40.0, 0.0f64..40.0, 0.0f64..500.0), 2..8),
            nugget in 0.0f64..50.0,
        ) {
            let r = readings(&pts);
            let model = VariogramModel::new(ModelKind::Spherical, nugget, 300.0, 15.0).unwrap();
            let sys = match KrigingSystem::new(&r, model, &bbox(), KrigingOptions::default()) {
                Ok(s) => s,
                Err(Error::IllConditioned(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let spec = GridSpec::new(bbox(), 5, 5).unwrap();
            for c in spec.centers() {
                let (w, _) = sys.weights_at(c);
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(sys.estimate(c).1 >= 0.0);
            }
        }
    }
}
