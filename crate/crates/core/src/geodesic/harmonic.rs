//! Radiality tests for the density and the radial harmonic function.

use rayon::prelude::*;
use serde::Serialize;

use super::{sample_directions, shoot_path, DensityProfile, ShootConfig};
use crate::error::{GeometryError, Result};
use crate::metric::{curvature, einstein_defect, ChartMetric};
use crate::quadrature::cumulative_integral;

#[derive(Clone, Debug)]
pub struct HarmonicConfig {
    pub radii: Vec<f64>,
    pub directions: usize,
    /// Relative spread separating radial from non-radial.
    pub tolerance: f64,
    pub shoot: ShootConfig,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        HarmonicConfig {
            radii: vec![0.25, 0.5, 0.75, 1.0],
            directions: 20,
            tolerance: 1e-6,
            shoot: ShootConfig::default(),
        }
    }
}

impl HarmonicConfig {
    /// Default radii scaled to stay within half the known injectivity bound.
    pub fn for_metric(metric: &dyn ChartMetric, p: &[f64]) -> Self {
        let mut cfg = HarmonicConfig::default();
        if let Some(iota) = metric.injectivity_radius(p) {
            let cap = (0.5 * iota).min(1.0);
            cfg.radii = cfg.radii.iter().map(|r| r * cap).collect();
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Harmonic,
    NotHarmonic,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicityReport {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub directions: usize,
    pub theta_spread: Vec<f64>,
    pub xi_spread: Vec<f64>,
    pub max_theta_spread: f64,
    pub max_xi_spread: f64,
    pub einstein_defect: Option<f64>,
    pub tolerance: f64,
    pub max_energy_drift: f64,
    /// Largest radius reached by every direction.
    pub max_radius_reached: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

/// Shoots `config.directions` geodesics from `p` and compares `Θ` and `Ξ` across them.
///
/// Radii beyond the reachable range make the verdict inconclusive unless the
/// reachable radii already show a spread above tolerance.
pub fn centrally_harmonic_test(
    metric: &dyn ChartMetric,
    p: &[f64],
    config: &HarmonicConfig,
) -> (HarmonicityReport, Option<DensityProfile>) {
    let mut note = None;
    let dirs = match sample_directions(metric, p, config.directions) {
        Ok(d) => d,
        Err(e) => {
            return (
                HarmonicityReport {
                    center: p.to_vec(),
                    radii: config.radii.clone(),
                    directions: config.directions,
                    theta_spread: vec![],
                    xi_spread: vec![],
                    max_theta_spread: f64::NAN,
                    max_xi_spread: f64::NAN,
                    einstein_defect: None,
                    tolerance: config.tolerance,
                    max_energy_drift: f64::NAN,
                    max_radius_reached: 0.0,
                    verdict: Verdict::Inconclusive,
                    note: Some(e.to_string()),
                },
                None,
            )
        }
    };
    let einstein = curvature(metric, p, 0).ok().map(|b| einstein_defect(&b));
    let results: Vec<Result<Vec<_>>> = dirs
        .par_iter()
        .map(|d| shoot_path(metric, p, d, &config.radii, &config.shoot))
        .collect();
    let mut reach = config.radii.len();
    let mut partial: Vec<Vec<_>> = Vec::with_capacity(results.len());
    let mut failure = None;
    for (d, res) in results.into_iter().enumerate() {
        match res {
            Ok(samples) => {
                if let Some(i) = samples.iter().position(|s| s.conjugate) {
                    reach = reach.min(i);
                    failure.get_or_insert(format!("conjugate point along direction {d}"));
                }
                partial.push(samples);
            }
            Err(e) => {
                let last = match e {
                    GeometryError::DomainExit { last_radius } => last_radius,
                    _ => 0.0,
                };
                reach = reach.min(config.radii.partition_point(|&r| r <= last));
                failure.get_or_insert(format!("direction {d}: {e}"));
                // Rerun to the reachable radii so the spreads remain meaningful.
                let ok: Vec<f64> = config.radii.iter().cloned().filter(|&r| r <= last).collect();
                partial.push(if ok.is_empty() {
                    vec![]
                } else {
                    shoot_path(metric, p, &dirs[d], &ok, &config.shoot).unwrap_or_default()
                });
            }
        }
    }
    for s in &partial {
        reach = reach.min(s.len());
    }
    let profile = DensityProfile {
        center: p.to_vec(),
        radii: config.radii[..reach].to_vec(),
        directions: dirs.clone(),
        samples: partial
            .into_iter()
            .map(|mut s| {
                s.truncate(reach);
                s
            })
            .collect(),
    };
    let theta_spread = profile.theta_spread();
    let xi_spread = profile.xi_spread();
    let max_t = theta_spread.iter().cloned().fold(0.0, f64::max);
    let max_x = xi_spread.iter().cloned().fold(0.0, f64::max);
    let above = max_t > config.tolerance || max_x > config.tolerance;
    let drift = profile.max_energy_drift();
    if drift > config.shoot.energy_tol {
        failure.get_or_insert(format!("energy drift {drift:.3e} exceeds {:.3e}", config.shoot.energy_tol));
    }
    let verdict = if above {
        Verdict::NotHarmonic
    } else if failure.is_some() || reach == 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Harmonic
    };
    if let Some(f) = failure {
        note = Some(f);
    }
    let max_radius_reached = if reach == 0 { 0.0 } else { config.radii[reach - 1] };
    let report = HarmonicityReport {
        center: p.to_vec(),
        radii: config.radii.clone(),
        directions: dirs.len(),
        theta_spread,
        xi_spread,
        max_theta_spread: max_t,
        max_xi_spread: max_x,
        einstein_defect: einstein,
        tolerance: config.tolerance,
        max_energy_drift: drift,
        max_radius_reached,
        verdict,
        note,
    };
    (report, Some(profile))
}

/// Radial harmonic function `f(r) = ∫_{r_0}^r Θ(s)⁻¹ ds` from radial density samples
/// `(r, Θ)` (sorted, `r > 0`), normalized so `f(r_0) = 0` and `Θ f' = 1`.
pub fn radial_harmonic(samples: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 2 {
        return Err(GeometryError::InvalidParameters("need at least two samples".into()));
    }
    if samples[0].0 <= 0.0 || samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(GeometryError::InvalidParameters(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    if samples.iter().any(|s| !(s.1 > 0.0)) {
        return Err(GeometryError::InvalidParameters("density must be positive".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| 1.0 / s.1).collect();
    let f = cumulative_integral(&xs, &ys, 8);
    Ok(xs.into_iter().zip(f).collect())
}

/// [`radial_harmonic`] on a direction-averaged profile; refuses non-radial profiles.
pub fn radial_harmonic_profile(profile: &DensityProfile, tolerance: f64) -> Result<Vec<(f64, f64)>> {
    let spread = profile.theta_spread().into_iter().fold(0.0, f64::max);
    if spread > tolerance {
        return Err(GeometryError::NotRadial { spread, tolerance });
    }
    let mean = profile.mean_theta();
    let pts: Vec<(f64, f64)> = profile.radii.iter().cloned().zip(mean).collect();
    radial_harmonic(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, MetricSpec};

    #[test]
    fn euclidean_is_harmonic() {
        let e = build(&MetricSpec::Euclidean { dim: 3 }).unwrap();
        let (rep, _) = centrally_harmonic_test(e.metric.as_ref(), &[0.5, -1.0, 0.2], &HarmonicConfig::default());
        assert_eq!(rep.verdict, Verdict::Harmonic);
        assert!(rep.max_theta_spread <= 1e-12);
    }

    #[test]
    fn radial_harmonic_flat_profiles() {
        let rs: Vec<f64> = (0..200).map(|i| 0.5 + 0.01 * i as f64).collect();
        let f3 = radial_harmonic(&rs.iter().map(|&r| (r, r * r)).collect::<Vec<_>>()).unwrap();
        for (r, f) in &f3 {
            assert!((f - (2.0 - 1.0 / r)).abs() < 1e-10);
        }
        let f2 = radial_harmonic(&rs.iter().map(|&r| (r, r)).collect::<Vec<_>>()).unwrap();
        for (r, f) in &f2 {
            assert!((f - (r / 0.5).ln()).abs() < 1e-10);
        }
    }
}
