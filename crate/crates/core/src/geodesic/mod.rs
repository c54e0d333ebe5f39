//! Geodesic shooting with parallel frames and normal Jacobi fields.
//!
//! Along a unit-speed geodesic `γ` from `P` with parallel orthonormal frame
//! `E_1..E_{m-1}` of `γ'^⊥`, the normal Jacobi fields with `A(0) = 0`,
//! `A'(0) = I` satisfy `A'' = -R̃ A` where `R̃_ab = R(E_a, γ', γ', E_b)`.
//! Then `Θ = det A` and `Ξ = Tr(A' A⁻¹)`. The system is regular at `r = 0`,
//! so integration starts at the center.

pub mod directions;
pub mod harmonic;
pub mod ode;
pub mod shape;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{GeometryError, Result};
use crate::metric::{metric_at, norm_at, point_geometry, ChartMetric, Tensor};

pub use harmonic::{
    centrally_harmonic_test, radial_harmonic, radial_harmonic_profile, HarmonicConfig, HarmonicityReport,
    Verdict,
};
pub use ode::{Scheme, Tolerances};
pub use shape::{
    eigen_spread, normal_chart_shape, reduced_jacobi, second_fundamental_form, sigma_expansion_fit,
    EigenSpread, SigmaFit, SphereShapeSample,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootConfig {
    pub scheme: Scheme,
    /// Fixed RK4 steps across the longest requested radius.
    pub steps: usize,
    pub tolerances: Tolerances,
    /// Allowed deviation of `|γ'|_g` from 1.
    pub energy_tol: f64,
    /// Retry adaptively when the fixed-step run violates `energy_tol`.
    pub adaptive_fallback: bool,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            scheme: Scheme::Rk4,
            steps: 2000,
            tolerances: Tolerances::default(),
            energy_tol: 1e-9,
            adaptive_fallback: true,
        }
    }
}

/// Geodesic endpoint data at one radius.
#[derive(Clone, Debug)]
pub struct PolarDensitySample {
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
    pub endpoint: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Parallel frame of `γ'^⊥`, columns `E_a`.
    pub frame: DMatrix<f64>,
    /// Jacobi matrix `A(r)`.
    pub jacobi: DMatrix<f64>,
    /// `A'(r)`.
    pub jacobi_derivative: DMatrix<f64>,
    pub theta: f64,
    pub xi: f64,
    /// `max |‖γ'‖_g - 1|` up to this radius.
    pub energy_drift: f64,
    /// `det A ≤ 0` was reached.
    pub conjugate: bool,
}

struct Layout {
    m: usize,
}

impl Layout {
    fn n(&self) -> usize {
        self.m - 1
    }
    fn x(&self) -> std::ops::Range<usize> {
        0..self.m
    }
    fn v(&self) -> std::ops::Range<usize> {
        self.m..2 * self.m
    }
    fn e(&self) -> std::ops::Range<usize> {
        2 * self.m..2 * self.m + self.m * self.n()
    }
    fn a(&self) -> std::ops::Range<usize> {
        let s = 2 * self.m + self.m * self.n();
        s..s + self.n() * self.n()
    }
    fn b(&self) -> std::ops::Range<usize> {
        let s = 2 * self.m + self.m * self.n() + self.n() * self.n();
        s..s + self.n() * self.n()
    }
    fn len(&self) -> usize {
        2 * self.m + self.m * self.n() + 2 * self.n() * self.n()
    }
}

/// `W_il = R_ijkl v^j v^k`.
fn jacobi_form(r: &Tensor, v: &[f64]) -> DMatrix<f64> {
    let m = v.len();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if v[j] == 0.0 {
                continue;
            }
            for k in 0..m {
                let c = v[j] * v[k];
                if c == 0.0 {
                    continue;
                }
                for l in 0..m {
                    w[(i, l)] += c * r.get(&[i, j, k, l]);
                }
            }
        }
    }
    w
}

/// `R̃_ab = R(E_a, v, v, E_b)` for frame columns `E_a`.
pub(crate) fn reduced_from(r: &Tensor, v: &[f64], frame: &DMatrix<f64>) -> DMatrix<f64> {
    let w = jacobi_form(r, v);
    let red = frame.transpose() * w * frame;
    (&red + red.transpose()) * 0.5
}

fn rhs(metric: &dyn ChartMetric, lay: &Layout, y: &[f64]) -> Result<Vec<f64>> {
    let m = lay.m;
    let n = lay.n();
    let x = &y[lay.x()];
    let v = &y[lay.v()];
    let geo = point_geometry(metric, x, true)?;
    let gam = &geo.gamma;
    let mut out = vec![0.0; lay.len()];
    out[lay.x()].copy_from_slice(v);
    // Γ contracted with v in the first slot: C[j][k] = Γ_ij^k v^i
    let mut cv = vec![0.0; m * m];
    for i in 0..m {
        if v[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            for k in 0..m {
                cv[j * m + k] += v[i] * gam.data[(i * m + j) * m + k];
            }
        }
    }
    for k in 0..m {
        out[m + k] = -(0..m).map(|j| cv[j * m + k] * v[j]).sum::<f64>();
    }
    let e = &y[lay.e()];
    let eo = lay.e().start;
    for a in 0..n {
        for k in 0..m {
            out[eo + a * m + k] = -(0..m).map(|j| cv[j * m + k] * e[a * m + j]).sum::<f64>();
        }
    }
    let frame = DMatrix::from_column_slice(m, n, e);
    let red = reduced_from(geo.riemann.as_ref().unwrap(), v, &frame);
    let amat = DMatrix::from_column_slice(n, n, &y[lay.a()]);
    out[lay.a()].copy_from_slice(&y[lay.b()]);
    let db = -(red * amat);
    out[lay.b()].copy_from_slice(db.as_slice());
    Ok(out)
}

fn domain_like(e: &GeometryError) -> bool {
    matches!(
        e,
        GeometryError::OutsideDomain { .. }
            | GeometryError::DegenerateMetric { .. }
            | GeometryError::NonAnalytic { .. }
            | GeometryError::DomainExit { .. }
    )
}

fn check_direction(g: &DMatrix<f64>, theta: &[f64]) -> Result<()> {
    let n = norm_at(g, theta);
    if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
        return Err(GeometryError::InvalidDirection(format!(
            "direction must have unit length in g(P), has length {n}"
        )));
    }
    Ok(())
}

fn initial_state(metric: &dyn ChartMetric, p: &[f64], theta: &[f64]) -> Result<(Layout, Vec<f64>)> {
    let g = metric_at(metric, p)?;
    if theta.len() != p.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: p.len(),
            got: theta.len(),
        });
    }
    check_direction(&g, theta)?;
    let lay = Layout { m: p.len() };
    let frame = directions::complement_frame(&g, theta)?;
    let mut y = vec![0.0; lay.len()];
    y[lay.x()].copy_from_slice(p);
    y[lay.v()].copy_from_slice(theta);
    y[lay.e()].copy_from_slice(frame.as_slice());
    let n = lay.n();
    let bo = lay.b().start;
    for i in 0..n {
        y[bo + i * n + i] = 1.0;
    }
    Ok((lay, y))
}

fn sample_from(
    metric: &dyn ChartMetric,
    lay: &Layout,
    p: &[f64],
    theta: &[f64],
    r: f64,
    y: &[f64],
    drift: f64,
) -> Result<PolarDensitySample> {
    let n = lay.n();
    let a = DMatrix::from_column_slice(n, n, &y[lay.a()]);
    let b = DMatrix::from_column_slice(n, n, &y[lay.b()]);
    let theta_val = a.determinant();
    let xi = match a.clone().lu().solve(&DMatrix::identity(n, n)) {
        Some(ainv) => (&b * ainv).trace(),
        None => f64::NAN,
    };
    let x = y[lay.x()].to_vec();
    let g = metric_at(metric, &x).map_err(|_| GeometryError::DomainExit { last_radius: r })?;
    let speed = norm_at(&g, &y[lay.v()]);
    Ok(PolarDensitySample {
        center: p.to_vec(),
        direction: theta.to_vec(),
        radius: r,
        endpoint: x,
        velocity: y[lay.v()].to_vec(),
        frame: DMatrix::from_column_slice(lay.m, n, &y[lay.e()]),
        jacobi: a,
        jacobi_derivative: b,
        theta: theta_val,
        xi,
        energy_drift: drift.max((speed - 1.0).abs()),
        conjugate: !(theta_val > 0.0),
    })
}

fn shoot_path_with(
    metric: &dyn ChartMetric,
    p: &[f64],
    theta: &[f64],
    radii: &[f64],
    cfg: &ShootConfig,
    scheme: Scheme,
) -> Result<Vec<PolarDensitySample>> {
    let (lay, mut y) = initial_state(metric, p, theta)?;
    let f = |_r: f64, y: &[f64]| rhs(metric, &lay, y);
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let h_target = r_max / cfg.steps.max(1) as f64;
    let mut out = Vec::with_capacity(radii.len());
    let mut r = 0.0;
    let mut drift = 0.0f64;
    for &target in radii {
        match scheme {
            Scheme::Rk4 => {
                let steps = ((target - r) / h_target).ceil().max(1.0) as usize;
                let h = (target - r) / steps as f64;
                for _ in 0..steps {
                    y = ode::rk4_step(&f, r, &y, h).map_err(|e| {
                        if domain_like(&e) {
                            GeometryError::DomainExit { last_radius: r }
                        } else {
                            e
                        }
                    })?;
                    r += h;
                    let g = metric_at(metric, &y[lay.x()])
                        .map_err(|_| GeometryError::DomainExit { last_radius: r - h })?;
                    drift = drift.max((norm_at(&g, &y[lay.v()]) - 1.0).abs());
                }
                r = target;
            }
            Scheme::Dopri5 => {
                y = ode::dopri5(&f, r, target, &y, cfg.tolerances, h_target * 10.0).map_err(|e| {
                    if domain_like(&e) {
                        GeometryError::DomainExit { last_radius: r }
                    } else {
                        e
                    }
                })?;
                r = target;
            }
        }
        let s = sample_from(metric, &lay, p, theta, target, &y, drift)?;
        drift = s.energy_drift;
        out.push(s);
    }
    Ok(out)
}

/// Integrates one geodesic from `p` in the `g`-unit direction `theta`, returning
/// samples at each of the (positive, increasing) `radii`.
pub fn shoot_path(
    metric: &dyn ChartMetric,
    p: &[f64],
    theta: &[f64],
    radii: &[f64],
    cfg: &ShootConfig,
) -> Result<Vec<PolarDensitySample>> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeometryError::InvalidParameters(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    if let Some(iota) = metric.injectivity_radius(p) {
        if radii[radii.len() - 1] >= iota {
            return Err(GeometryError::InvalidParameters(format!(
                "radius {} reaches the injectivity bound {iota}",
                radii[radii.len() - 1]
            )));
        }
    }
    let first = shoot_path_with(metric, p, theta, radii, cfg, cfg.scheme)?;
    let drift = first.last().map(|s| s.energy_drift).unwrap_or(0.0);
    if cfg.scheme == Scheme::Rk4 && cfg.adaptive_fallback && drift > cfg.energy_tol {
        let second = shoot_path_with(metric, p, theta, radii, cfg, Scheme::Dopri5)?;
        if second.last().map(|s| s.energy_drift).unwrap_or(f64::INFINITY) < drift {
            return Ok(second);
        }
    }
    Ok(first)
}

/// Single-radius shot.
pub fn shoot(metric: &dyn ChartMetric, p: &[f64], theta: &[f64], r: f64, cfg: &ShootConfig) -> Result<PolarDensitySample> {
    Ok(shoot_path(metric, p, theta, &[r], cfg)?.remove(0))
}

/// Densities over a set of directions and radii.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    /// `samples[d][i]` is direction `d` at `radii[i]`.
    pub samples: Vec<Vec<PolarDensitySample>>,
}

/// `(max - min) / |mean|`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if hi == lo {
        0.0
    } else {
        (hi - lo) / mean.abs()
    }
}

impl DensityProfile {
    fn column(&self, i: usize, f: impl Fn(&PolarDensitySample) -> f64) -> Vec<f64> {
        self.samples.iter().map(|s| f(&s[i])).collect()
    }

    /// Relative spread of `Θ` across directions at each radius.
    pub fn theta_spread(&self) -> Vec<f64> {
        (0..self.radii.len()).map(|i| relative_spread(&self.column(i, |s| s.theta))).collect()
    }

    pub fn xi_spread(&self) -> Vec<f64> {
        (0..self.radii.len()).map(|i| relative_spread(&self.column(i, |s| s.xi))).collect()
    }

    /// Direction-averaged `Θ` at each radius.
    pub fn mean_theta(&self) -> Vec<f64> {
        (0..self.radii.len())
            .map(|i| {
                let c = self.column(i, |s| s.theta);
                c.iter().sum::<f64>() / c.len() as f64
            })
            .collect()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.samples
            .iter()
            .flatten()
            .fold(0.0, |a, s| a.max(s.energy_drift))
    }
}

/// Shoots every direction (in parallel) and collects the samples in direction order.
pub fn density_profile(
    metric: &dyn ChartMetric,
    p: &[f64],
    directions: &[Vec<f64>],
    radii: &[f64],
    cfg: &ShootConfig,
) -> Result<DensityProfile> {
    let results: Vec<Result<Vec<PolarDensitySample>>> = directions
        .par_iter()
        .map(|d| shoot_path(metric, p, d, radii, cfg))
        .collect();
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DensityProfile {
        center: p.to_vec(),
        radii: radii.to_vec(),
        directions: directions.to_vec(),
        samples,
    })
}

/// `count` deterministic `g(P)`-unit directions.
pub fn sample_directions(metric: &dyn ChartMetric, p: &[f64], count: usize) -> Result<Vec<Vec<f64>>> {
    let g = metric_at(metric, p)?;
    directions::g_orthonormalize(&g, &directions::unit_directions(p.len(), count))
}

/// Geodesic endpoint `exp_P(v)` for a tangent vector of any length (no Jacobi fields).
pub fn exp_map(metric: &dyn ChartMetric, p: &[f64], v: &[f64], steps: usize) -> Result<Vec<f64>> {
    let m = p.len();
    let f = |_r: f64, y: &[f64]| -> Result<Vec<f64>> {
        let geo = point_geometry(metric, &y[..m], false)?;
        let mut out = vec![0.0; 2 * m];
        out[..m].copy_from_slice(&y[m..]);
        for k in 0..m {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += geo.gamma.get(&[i, j, k]) * y[m + i] * y[m + j];
                }
            }
            out[m + k] = -s;
        }
        Ok(out)
    };
    let mut y0 = p.to_vec();
    y0.extend_from_slice(v);
    let y = ode::rk4(&f, 0.0, 1.0, &y0, steps)?;
    Ok(y[..m].to_vec())
}

/// Independent density oracle: `Θ = r^{m-1} sqrt(det(Dᵀ g D))` where `D` is the
/// finite-difference Jacobian of `y ↦ exp_P(Σ y^i e_i)` for a `g(P)`-orthonormal
/// basis `e_i`, evaluated at `y = r θ̂` with `θ̂` the coordinates of `theta` in that basis.
pub fn density_from_exp_map(metric: &dyn ChartMetric, p: &[f64], theta: &[f64], r: f64, h: f64) -> Result<f64> {
    let m = p.len();
    let g0 = metric_at(metric, p)?;
    check_direction(&g0, theta)?;
    let l = g0.clone().cholesky().unwrap().l();
    // basis e = L^{-T}; coordinates of theta: Lᵀ θ
    let basis = l.transpose().try_inverse().unwrap();
    let yhat = l.transpose() * DVector::from_column_slice(theta);
    let steps = 400;
    let point = |y: &DVector<f64>| exp_map(metric, p, (&basis * y).as_slice(), steps);
    let y0 = &yhat * r;
    let mut d = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut e = DVector::zeros(m);
        e[j] = h;
        let p1 = point(&(&y0 + &e))?;
        let m1 = point(&(&y0 - &e))?;
        let p2 = point(&(&y0 + &e * 2.0))?;
        let m2 = point(&(&y0 - &e * 2.0))?;
        for i in 0..m {
            d[(i, j)] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
        }
    }
    let x = point(&y0)?;
    let g = metric_at(metric, &x)?;
    let gram = d.transpose() * g * d;
    Ok(r.powi(m as i32 - 1) * gram.determinant().sqrt())
}
