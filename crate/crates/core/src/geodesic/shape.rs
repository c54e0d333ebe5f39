//! Second fundamental forms of geodesic spheres and reduced Jacobi operators.
//!
//! The shape operator is `L = A' A⁻¹` in the parallel frame, with the outward
//! normal, so `Tr L = Ξ` and the unit sphere has `L = cot r · I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::{directions, reduced_from, sample_directions, shoot_path, ShootConfig};
use crate::error::{GeometryError, Result};
use crate::metric::{christoffels, curvature, metric_at, point_geometry, ChartMetric};

#[derive(Clone, Debug)]
pub struct SphereShapeSample {
    pub radius: f64,
    pub direction: Vec<f64>,
    /// Symmetrized `A' A⁻¹`.
    pub shape: DMatrix<f64>,
    /// `‖L - Lᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
    pub trace: f64,
    pub xi: f64,
    /// `‖L - (Tr L/(m-1)) I‖_F`.
    pub umbilicity_defect: f64,
    /// Reduced Jacobi operator at the endpoint, in the parallel frame.
    pub reduced_jacobi: DMatrix<f64>,
    pub jacobi_min: f64,
    pub jacobi_max: f64,
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(a.clone()).eigenvalues;
    (e.min(), e.max())
}

pub fn umbilicity_defect(l: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    let mean = l.trace() / n as f64;
    (l - DMatrix::identity(n, n) * mean).norm()
}

/// Second fundamental form of the geodesic sphere of radius `r` about `p` at `exp_p(r θ)`.
pub fn second_fundamental_form(
    metric: &dyn ChartMetric,
    p: &[f64],
    theta: &[f64],
    r: f64,
    cfg: &ShootConfig,
) -> Result<SphereShapeSample> {
    let s = shoot_path(metric, p, theta, &[r], cfg)?.remove(0);
    if s.conjugate {
        return Err(GeometryError::ConjugatePoint { radius: r });
    }
    let n = s.jacobi.nrows();
    let ainv = s
        .jacobi
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(GeometryError::ConjugatePoint { radius: r })?;
    let raw = &s.jacobi_derivative * ainv;
    let asymmetry = (&raw - raw.transpose()).norm();
    let shape = sym(&raw);
    let geo = point_geometry(metric, &s.endpoint, true)?;
    let red = reduced_from(geo.riemann.as_ref().unwrap(), &s.velocity, &s.frame);
    let (jmin, jmax) = eig_range(&red);
    Ok(SphereShapeSample {
        radius: r,
        direction: theta.to_vec(),
        trace: shape.trace(),
        xi: s.xi,
        umbilicity_defect: umbilicity_defect(&shape),
        shape,
        asymmetry,
        reduced_jacobi: red,
        jacobi_min: jmin,
        jacobi_max: jmax,
    })
}

/// Reduced Jacobi operator `J̃₀(θ)` at `x` on `θ^⊥`, in a `g`-orthonormal frame.
pub fn reduced_jacobi(metric: &dyn ChartMetric, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
    let geo = point_geometry(metric, x, true)?;
    let frame = directions::complement_frame(&geo.g, theta)?;
    Ok(reduced_from(geo.riemann.as_ref().unwrap(), theta, &frame))
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenSpread {
    /// `min over sampled θ of (M(θ) - m(θ))`.
    pub s_p: f64,
    /// Gap for each sampled direction.
    pub gaps: Vec<f64>,
    pub eigen_min: f64,
    pub eigen_max: f64,
}

/// Estimates `s_P` over `count` deterministic unit directions.
pub fn eigen_spread(metric: &dyn ChartMetric, p: &[f64], count: usize) -> Result<EigenSpread> {
    let bundle = curvature(metric, p, 0)?;
    let dirs = sample_directions(metric, p, count)?;
    let mut gaps = Vec::with_capacity(dirs.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in &dirs {
        let frame = directions::complement_frame(&bundle.metric, d)?;
        let red = reduced_from(&bundle.riemann, d, &frame);
        let (a, b) = eig_range(&red);
        lo = lo.min(a);
        hi = hi.max(b);
        gaps.push(b - a);
    }
    Ok(EigenSpread {
        s_p: gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        gaps,
        eigen_min: lo,
        eigen_max: hi,
    })
}

/// Shape operator at `ξ = (r, 0, …, 0)` of a normal chart from Christoffel symbols:
/// the form `δ_ij/r - Γ_ij^1` on `i, j > 1`, turned into an operator with the
/// induced metric (`G^{-1/2} form G^{-1/2}`).
pub fn normal_chart_shape(metric: &dyn ChartMetric, r: f64) -> Result<DMatrix<f64>> {
    if !metric.is_normal_chart() {
        return Err(GeometryError::NotNormalChart);
    }
    let m = metric.dim();
    let mut x = vec![0.0; m];
    x[0] = r;
    let gam = christoffels(metric, &x)?;
    let g = metric_at(metric, &x)?;
    let n = m - 1;
    let form = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 / r } else { 0.0 };
        d - gam.get(&[i + 1, j + 1, 0])
    });
    let gt = g.view((1, 1), (n, n)).into_owned();
    let e = SymmetricEigen::new(gt);
    let inv_sqrt = &e.eigenvectors
        * DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * e.eigenvectors.transpose();
    Ok(sym(&(&inv_sqrt * form * &inv_sqrt)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaFit {
    /// Fitted coefficient of `r` in `L - I/r`, row-major.
    pub slope: Vec<f64>,
    /// `-R̃(0)/3`, row-major.
    pub expected: Vec<f64>,
    /// `‖slope - expected‖_F / ‖expected‖_F`.
    pub relative_error: f64,
}

/// Fits `L_ab(r) - δ_ab/r = c_1 r + c_2 r² + c_3 r³` over small radii and compares
/// `c_1` with `-R(E_a, θ, θ, E_b)/3` at the center.
pub fn sigma_expansion_fit(
    metric: &dyn ChartMetric,
    p: &[f64],
    theta: &[f64],
    radii: &[f64],
    cfg: &ShootConfig,
) -> Result<SigmaFit> {
    if radii.len() < 4 {
        return Err(GeometryError::FitFailed("need at least four radii".into()));
    }
    let samples = shoot_path(metric, p, theta, radii, cfg)?;
    let n = p.len() - 1;
    let frame0 = directions::complement_frame(&metric_at(metric, p)?, theta)?;
    let bundle = curvature(metric, p, 0)?;
    let red0 = reduced_from(&bundle.riemann, theta, &frame0);
    let rows = radii.len();
    let design = DMatrix::from_fn(rows, 3, |i, k| radii[i].powi(k as i32 + 1));
    let svd = design.clone().svd(true, true);
    let mut slope = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let y = DVector::from_fn(rows, |i, _| {
                let s = &samples[i];
                let ainv = s.jacobi.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
                let l = sym(&(&s.jacobi_derivative * ainv));
                l[(a, b)] - if a == b { 1.0 / radii[i] } else { 0.0 }
            });
            let c = svd
                .solve(&y, 0.0)
                .map_err(|e| GeometryError::FitFailed(e.to_string()))?;
            slope[(a, b)] = c[0];
        }
    }
    let expected = -red0 / 3.0;
    let relative_error = (&slope - &expected).norm() / expected.norm().max(f64::MIN_POSITIVE);
    Ok(SigmaFit {
        slope: slope.transpose().as_slice().to_vec(),
        expected: expected.transpose().as_slice().to_vec(),
        relative_error,
    })
}
