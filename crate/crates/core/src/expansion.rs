//! Density expansion coefficients `H_2 .. H_6` from curvature and the
//! leading-coefficient law `c_n = -(n-1)/(n+1)!`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::geodesic::{shoot_path, ShootConfig};
use crate::metric::{curvature, ChartMetric, CurvatureBundle};
use crate::series::{fit_radial_expansion, Coefficient, RadialFit, RationalSeries, TruncatedSeries};

/// `J_k(ξ)` with `g(J_k η₁, η₂) = (∇ᵏR)(η₁, ξ, ξ, η₂; ξ, …, ξ)`.
#[derive(Clone, Debug)]
pub struct JacobiOperator {
    pub direction: Vec<f64>,
    pub order: usize,
    /// Bilinear form `(∇ᵏR)(·, ξ, ξ, ·; ξ…)`.
    pub form: DMatrix<f64>,
    /// Endomorphism `g⁻¹ form`.
    pub operator: DMatrix<f64>,
}

pub fn jacobi_from(bundle: &CurvatureBundle, xi: &[f64], k: usize) -> Result<JacobiOperator> {
    let m = bundle.dim();
    if xi.len() != m {
        return Err(GeometryError::DimensionMismatch { expected: m, got: xi.len() });
    }
    let t = bundle.nabla(k)?;
    let tail: Vec<&[f64]> = vec![xi; k];
    let r4 = t.contract_tail(&tail);
    let mut form = DMatrix::zeros(m, m);
    for i in 0..m {
        for l in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                for kk in 0..m {
                    s += r4.get(&[i, j, kk, l]) * xi[j] * xi[kk];
                }
            }
            form[(i, l)] = s;
        }
    }
    let operator = &bundle.metric_inv * &form;
    Ok(JacobiOperator {
        direction: xi.to_vec(),
        order: k,
        form,
        operator,
    })
}

pub fn jacobi(metric: &dyn ChartMetric, p: &[f64], xi: &[f64], k: usize) -> Result<JacobiOperator> {
    jacobi_from(&curvature(metric, p, k)?, xi, k)
}

/// Traces entering the `H_2 .. H_6` formulas.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceData<C> {
    /// `Tr J_k` for `k = 0..=4`.
    pub t: [C; 5],
    pub jj: C,
    pub jj1: C,
    pub jjj: C,
    pub jj2: C,
    pub j1j1: C,
}

impl TraceData<f64> {
    pub fn from_operators(j: &[DMatrix<f64>]) -> Self {
        let tr = |a: &DMatrix<f64>| a.trace();
        TraceData {
            t: [tr(&j[0]), tr(&j[1]), tr(&j[2]), tr(&j[3]), tr(&j[4])],
            jj: tr(&(&j[0] * &j[0])),
            jj1: tr(&(&j[0] * &j[1])),
            jjj: tr(&(&j[0] * &j[0] * &j[0])),
            jj2: tr(&(&j[0] * &j[2])),
            j1j1: tr(&(&j[1] * &j[1])),
        }
    }
}

impl<C: Coefficient> TraceData<C> {
    /// Traces of `1 × 1` operators `J_k = [j_k]`.
    pub fn scalar(j: [C; 5]) -> Self {
        TraceData {
            jj: j[0].clone() * j[0].clone(),
            jj1: j[0].clone() * j[1].clone(),
            jjj: j[0].clone() * j[0].clone() * j[0].clone(),
            jj2: j[0].clone() * j[2].clone(),
            j1j1: j[1].clone() * j[1].clone(),
            t: j,
        }
    }
}

fn q<C: Coefficient>(n: i64, d: i64) -> C {
    C::from_int(n) / C::from_int(d)
}

/// `[H_2, H_3, H_4, H_5, H_6]` from the trace polynomials.
pub fn h_from_traces<C: Coefficient>(tr: &TraceData<C>) -> [C; 5] {
    let t0 = tr.t[0].clone();
    let t1 = tr.t[1].clone();
    let t2 = tr.t[2].clone();
    let t3 = tr.t[3].clone();
    let t4 = tr.t[4].clone();
    let h2 = -(t0.clone() * q(1, 6));
    let h3 = -(t1.clone() * q(1, 12));
    let h4 = t0.clone() * t0.clone() * q(1, 72) - tr.jj.clone() * q(1, 180) - t2.clone() * q(1, 40);
    let h5 = t0.clone() * t1.clone() * q(1, 72) - tr.jj1.clone() * q(1, 180) - t3 * q(1, 180);
    let h6 = -(t0.clone() * t0.clone() * t0.clone() * q(1, 1296))
        + t0.clone() * tr.jj.clone() * q(1, 1080)
        + t0 * t2 * q(1, 240)
        - tr.jjj.clone() * q(1, 2835)
        - tr.jj2.clone() * q(1, 630)
        + t1.clone() * t1 * q(1, 288)
        - tr.j1j1.clone() * q(1, 672)
        - t4 * q(1, 1008);
    [h2, h3, h4, h5, h6]
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityExpansion {
    pub direction: Vec<f64>,
    /// `h[k]` is `H_k`; entries 0 and 1 are zero.
    pub h: Vec<f64>,
}

pub fn density_coefficients_from(bundle: &CurvatureBundle, xi: &[f64]) -> Result<DensityExpansion> {
    let ops: Vec<DMatrix<f64>> = (0..=4)
        .map(|k| jacobi_from(bundle, xi, k).map(|j| j.operator))
        .collect::<Result<_>>()?;
    let h5 = h_from_traces(&TraceData::from_operators(&ops));
    let mut h = vec![0.0; 7];
    h[2..].copy_from_slice(&h5);
    Ok(DensityExpansion { direction: xi.to_vec(), h })
}

/// `H_2(ξ) .. H_6(ξ)` at `p`.
pub fn density_coefficients(metric: &dyn ChartMetric, p: &[f64], xi: &[f64]) -> Result<DensityExpansion> {
    density_coefficients_from(&curvature(metric, p, 4)?, xi)
}

/// Sampling plan for fitting `H_k` from shot densities.
#[derive(Clone, Debug)]
pub struct FitConfig {
    pub order: usize,
    /// Radii are Chebyshev nodes on `(0, r_max)`.
    pub samples: usize,
    /// Defaults to `min(ι_P / 2, 0.8)`.
    pub r_max: Option<f64>,
    pub shoot: ShootConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            order: 14,
            samples: 48,
            r_max: None,
            shoot: ShootConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FittedExpansion {
    pub r_max: f64,
    pub fit: RadialFit,
    /// Same fit on `(0, r_max/2)`.
    pub half_range: Option<RadialFit>,
    /// `max_k |H_k(full) - H_k(half)|` over `k ≤ 6`: an estimate of truncation contamination.
    pub contamination: Option<f64>,
}

fn shot_fit(
    metric: &dyn ChartMetric,
    p: &[f64],
    theta: &[f64],
    r_max: f64,
    cfg: &FitConfig,
) -> Result<RadialFit> {
    let radii = chebyshev_radii(r_max, cfg.samples);
    let shots = shoot_path(metric, p, theta, &radii, &cfg.shoot)?;
    let samples: Vec<(f64, f64)> = shots.iter().map(|s| (s.radius, s.theta)).collect();
    fit_radial_expansion(&samples, p.len(), cfg.order)
}

/// Chebyshev nodes of `[0, r_max]` in increasing order. They cluster near `r = 0`,
/// where the Taylor coefficients live, and keep the monomial fit well conditioned.
pub fn chebyshev_radii(r_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * r_max * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()))
        .collect()
}

/// Fits `H_k(θ)` for a `g`-unit direction from densities along the geodesic.
pub fn fitted_coefficients(metric: &dyn ChartMetric, p: &[f64], theta: &[f64], cfg: &FitConfig) -> Result<FittedExpansion> {
    let r_max = cfg
        .r_max
        .unwrap_or_else(|| metric.injectivity_radius(p).map_or(0.8, |i| (0.5 * i).min(0.8)));
    let fit = shot_fit(metric, p, theta, r_max, cfg)?;
    let half_range = shot_fit(metric, p, theta, 0.5 * r_max, cfg).ok();
    let contamination = half_range.as_ref().map(|h| {
        (2..=6.min(cfg.order))
            .map(|k| (fit.coefficients[k] - h.coefficients[k]).abs())
            .fold(0.0, f64::max)
    });
    Ok(FittedExpansion {
        r_max,
        fit,
        half_range,
        contamination,
    })
}

/// `c_n = -(n-1)/(n+1)!`.
pub fn leading_coefficient(n: usize) -> BigRational {
    assert!(n >= 2, "c_n is defined for n >= 2");
    let fact: BigInt = (1..=n as u64 + 1).map(BigInt::from).product();
    BigRational::new(-BigInt::from(n as i64 - 1), fact)
}

/// Outcome of the two-dimensional leading-term construction.
#[derive(Clone, Debug)]
pub struct LeadingCoefficientCheck {
    pub n: usize,
    pub b: BigRational,
    /// `f = r²(1 + b rⁿ)²`.
    pub f: RationalSeries,
    /// `r² f⁻¹`.
    pub f_inv_scaled: RationalSeries,
    /// `-½ f_rr`.
    pub minus_half_f_rr: RationalSeries,
    /// `¼ f_r² f⁻¹`.
    pub quarter_fr2_finv: RationalSeries,
    /// `Tr J₀(∂_r)` as a series in `r`.
    pub trace_j: RationalSeries,
    pub trace_coefficient: BigRational,
    pub expected_trace_coefficient: BigRational,
    /// `Tr J_{n-2}(∂_r) = (n-2)! × trace_coefficient`.
    pub trace_j_n_minus_2: BigRational,
    /// `b / Tr J_{n-2}`.
    pub c_n: BigRational,
    pub expected_c_n: BigRational,
    /// `H_2 .. H_6` from the trace polynomials (for `n ≤ 6` these must equal `b δ_kn`).
    pub h_formula: Vec<BigRational>,
    /// `Θ/r - 1` from `sqrt f / r`.
    pub density: RationalSeries,
    pub passed: bool,
}

pub fn verify_leading_coefficient(n: usize, b: &BigRational) -> Result<LeadingCoefficientCheck> {
    verify_leading_coefficient_with(n, b, n.max(6) + 4)
}

/// Builds the surface `dr² + f dθ²` with `f = {r(1 + b rⁿ)}²` as exact series and
/// checks `Tr J₀ = f⁻¹(-½ f_rr + ¼ f_r² f⁻¹) = -n(n+1) b r^{n-2} + …` and `c_n`.
pub fn verify_leading_coefficient_with(n: usize, b: &BigRational, order: usize) -> Result<LeadingCoefficientCheck> {
    if n < 2 {
        return Err(GeometryError::InvalidParameters("n must be at least 2".into()));
    }
    if order < n + 2 {
        return Err(GeometryError::Series(format!(
            "truncation order {order} is below n + 2 = {}",
            n + 2
        )));
    }
    let one = || BigRational::one();
    let int = |k: i64| BigRational::from_integer(BigInt::from(k));
    // u = (1 + b rⁿ)², f = r² u
    let base = TruncatedSeries::constant(one(), order).add(&TruncatedSeries::monomial(b.clone(), n, order))?;
    let u = base.mul(&base)?;
    let du = u.derive().shift_up(0);
    let du = TruncatedSeries::new(du.coeffs().to_vec(), order);
    let ddu = TruncatedSeries::new(du.derive().coeffs().to_vec(), order);
    let r = TruncatedSeries::monomial(one(), 1, order);
    let r2 = TruncatedSeries::monomial(one(), 2, order);
    let f = r2.mul(&u)?;
    // f_r = 2 r u + r² u', f_rr = 2 u + 4 r u' + r² u''
    let f_rr = u
        .scale(&int(2))
        .add(&r.mul(&du)?.scale(&int(4)))?
        .add(&r2.mul(&ddu)?)?;
    let minus_half_f_rr = f_rr.scale(&BigRational::new(BigInt::from(-1), BigInt::from(2)));
    // f_r² f⁻¹ = (2u + r u')² / u
    let w = u.scale(&int(2)).add(&r.mul(&du)?)?;
    let u_inv = u.reciprocal()?;
    let quarter_fr2_finv = w
        .mul(&w)?
        .mul(&u_inv)?
        .scale(&BigRational::new(BigInt::from(1), BigInt::from(4)));
    let bracket = minus_half_f_rr.add(&quarter_fr2_finv)?;
    // Tr J = bracket / (r² u)
    let trace_j = bracket.shift_down(2)?.mul(&u_inv.truncate(order - 2))?;
    let trace_coefficient = trace_j.coeff(n - 2);
    let expected_trace_coefficient = -(int(n as i64) * int(n as i64 + 1) * b.clone());
    let fact = |k: usize| -> BigRational { (1..=k as i64).fold(one(), |a, i| a * int(i)) };
    let trace_j_n_minus_2 = trace_coefficient.clone() * fact(n - 2);
    let c_n = if trace_j_n_minus_2.is_zero() {
        BigRational::zero()
    } else {
        b.clone() / trace_j_n_minus_2.clone()
    };
    let expected_c_n = leading_coefficient(n);
    let j: [BigRational; 5] = std::array::from_fn(|k| trace_j.coeff(k) * fact(k));
    let h_formula = h_from_traces(&TraceData::scalar(j)).to_vec();
    let density = u.sqrt()?.sub(&TruncatedSeries::constant(one(), order))?;
    let mut passed = trace_coefficient == expected_trace_coefficient && c_n == expected_c_n;
    if n <= 6 {
        for (k, h) in h_formula.iter().enumerate() {
            let want = if k + 2 == n { b.clone() } else { BigRational::zero() };
            passed &= *h == want;
        }
    }
    for k in 0..=order {
        let want = if k == n { b.clone() } else { BigRational::zero() };
        passed &= density.coeff(k) == want;
    }
    // lower Jacobi derivatives vanish, so H_n = c_n Tr J_{n-2} has no lower-order terms
    for k in 0..n - 2 {
        passed &= trace_j.coeff(k).is_zero();
    }
    Ok(LeadingCoefficientCheck {
        n,
        b: b.clone(),
        f_inv_scaled: u_inv,
        f,
        minus_half_f_rr,
        quarter_fr2_finv,
        trace_j,
        trace_coefficient,
        expected_trace_coefficient,
        trace_j_n_minus_2,
        c_n,
        expected_c_n,
        h_formula,
        density,
        passed,
    })
}
