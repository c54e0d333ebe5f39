//! Radial conformal deformations `g_ψ = ψ(|x|²)⁻² g` of normal charts.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::geodesic::{relative_spread, sample_directions, shoot_path, ShootConfig};
use crate::jet::{norm_squared, Jet};
use crate::metric::{
    christoffels, hessian_from, metric_at, point_geometry, ricci_from, scalar_jet, ChartMetric,
};
use crate::quadrature::{gauss_legendre, integrate};
use crate::series::{cos_sqrt_coeffs, sinc_sqrt_coeffs};

const SERIES_TERMS: usize = 48;

/// One-variable conformal factor `ψ(t)`, evaluated on jets so every derivative is available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadialFunction {
    /// `Σ c_k t^k`.
    Poly { coeffs: Vec<f64> },
    /// `φ(cos²√t)` for a polynomial `φ`: on the sphere chart this is `φ((ξ¹)²)`,
    /// symmetric about both poles.
    PoleSymmetric { coeffs: Vec<f64> },
    /// `(sin√t/√t)^a · cos(√t)^b`.
    SinCos { sinc_power: f64, cos_power: f64 },
    /// Chebyshev series in `s = 2t/t_max - 1` on `[0, t_max]`.
    Chebyshev { t_max: f64, coeffs: Vec<f64> },
}

fn horner(coeffs: &[f64], t: &Jet) -> Jet {
    let mut acc = t.lift(*coeffs.last().unwrap_or(&0.0));
    for c in coeffs.iter().rev().skip(1) {
        acc = &acc * t;
        acc.coeffs_mut()[0] += c;
    }
    acc
}

impl RadialFunction {
    pub fn constant(c: f64) -> Self {
        RadialFunction::Poly { coeffs: vec![c] }
    }

    /// `ψ(t)` on a jet of `t`.
    pub fn apply(&self, t: &Jet) -> Jet {
        match self {
            RadialFunction::Poly { coeffs } => horner(coeffs, t),
            RadialFunction::PoleSymmetric { coeffs } => {
                let c = t.power_series(&cos_sqrt_coeffs(SERIES_TERMS));
                horner(coeffs, &(&c * &c))
            }
            RadialFunction::SinCos { sinc_power, cos_power } => {
                let mut out = t.lift(1.0);
                if *sinc_power != 0.0 {
                    out = &out * &t.power_series(&sinc_sqrt_coeffs(SERIES_TERMS)).powf(*sinc_power);
                }
                if *cos_power != 0.0 {
                    out = &out * &t.power_series(&cos_sqrt_coeffs(SERIES_TERMS)).powf(*cos_power);
                }
                out
            }
            RadialFunction::Chebyshev { t_max, coeffs } => {
                // Clenshaw
                let s = &(t * (2.0 / t_max)) - 1.0;
                let two_s = &s * 2.0;
                let mut b1 = t.lift(0.0);
                let mut b2 = t.lift(0.0);
                for c in coeffs.iter().skip(1).rev() {
                    let b0 = &(&(&two_s * &b1) - &b2) + *c;
                    b2 = b1;
                    b1 = b0;
                }
                &(&(&s * &b1) - &b2) + coeffs.first().copied().unwrap_or(0.0)
            }
        }
    }

    /// `[ψ(t), ψ'(t), …, ψ⁽ᵏ⁾(t)]`.
    pub fn derivatives(&self, t: f64, order: usize) -> Vec<f64> {
        let j = self.apply(&Jet::seed(&[t], order)[0]);
        let mut f = 1.0;
        (0..=order)
            .map(|k| {
                if k > 0 {
                    f *= k as f64;
                }
                j.coeffs()[k] * f
            })
            .collect()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.apply(&Jet::seed(&[t], 0)[0]).value()
    }

    /// `Some(c)` when `ψ ≡ c` syntactically.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RadialFunction::Poly { coeffs } | RadialFunction::PoleSymmetric { coeffs } => match coeffs.split_first() {
                Some((c, rest)) if rest.iter().all(|&a| a == 0.0) => Some(*c),
                None => Some(0.0),
                _ => None,
            },
            RadialFunction::SinCos { sinc_power, cos_power } if *sinc_power == 0.0 && *cos_power == 0.0 => Some(1.0),
            _ => None,
        }
    }

    /// Largest `t` the representation is valid for.
    pub fn t_limit(&self) -> f64 {
        match self {
            RadialFunction::Chebyshev { t_max, .. } => *t_max,
            _ => f64::INFINITY,
        }
    }

    /// First `r ∈ [0, r_max]` where `ψ(r²) ≤ 0`, located by bisection.
    pub fn first_zero(&self, r_max: f64) -> Option<f64> {
        let n = 4000;
        let f = |r: f64| self.eval(r * r);
        if !(f(0.0) > 0.0) {
            return Some(0.0);
        }
        let mut prev = 0.0;
        for i in 1..=n {
            let r = r_max * i as f64 / n as f64;
            if !(f(r) > 0.0) {
                let (mut a, mut b) = (prev, r);
                for _ in 0..80 {
                    let c = 0.5 * (a + b);
                    if f(c) > 0.0 {
                        a = c;
                    } else {
                        b = c;
                    }
                }
                return Some(b);
            }
            prev = r;
        }
        None
    }

    /// Chebyshev interpolant of `f` at `n` Chebyshev points of `[0, t_max]`.
    pub fn chebyshev_fit<F: Fn(f64) -> f64>(f: F, t_max: f64, n: usize) -> Self {
        let nodes: Vec<f64> = (0..n)
            .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos())
            .collect();
        let vals: Vec<f64> = nodes.iter().map(|s| f(0.5 * t_max * (s + 1.0))).collect();
        Self::chebyshev_from_values(&vals, t_max)
    }

    /// Chebyshev interpolant from values at the `n` Chebyshev points of `[0, t_max]`
    /// (ordered as `cos(π(k + ½)/n)`, `k = 0..n`).
    pub fn chebyshev_from_values(vals: &[f64], t_max: f64) -> Self {
        let n = vals.len();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                s * if j == 0 { 1.0 } else { 2.0 } / n as f64
            })
            .collect();
        RadialFunction::Chebyshev { t_max, coeffs }
    }
}

/// `ř(r) = ∫₀ʳ ψ(s²)⁻¹ ds` and its inverse on `[0, r_max]`.
#[derive(Clone, Debug)]
pub struct Reparametrization {
    pub psi: RadialFunction,
    pub r_max: f64,
    pub r_check_max: f64,
}

fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, depth: usize, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let rule = |lo: f64, hi: f64| {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        half * nodes.0.iter().zip(&nodes.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
    };
    let c = 0.5 * (a + b);
    let (l, r) = (rule(a, c), rule(c, b));
    if depth == 0 || (l + r - whole).abs() <= 1e-15 * (l + r).abs().max(1e-300) + 1e-16 {
        return l + r;
    }
    adaptive_gl(f, a, c, l, depth - 1, nodes) + adaptive_gl(f, c, b, r, depth - 1, nodes)
}

impl Reparametrization {
    /// `ř(r)`.
    pub fn forward(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        // exact for homotheties, so ψ ≡ 1 reproduces the base radii bit for bit
        if let Some(c) = self.psi.as_constant() {
            return r / c;
        }
        let nodes = gauss_legendre(12);
        let f = |s: f64| 1.0 / self.psi.eval(s * s);
        let whole = {
            let (mid, half) = (0.5 * r, 0.5 * r);
            half * nodes.0.iter().zip(&nodes.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
        };
        adaptive_gl(&f, 0.0, r, whole, 30, &nodes)
    }

    /// `dř/dr = ψ(r²)⁻¹`.
    pub fn forward_derivative(&self, r: f64) -> f64 {
        1.0 / self.psi.eval(r * r)
    }

    /// `r(ř)` by safeguarded Newton iteration.
    pub fn inverse(&self, rc: f64) -> Result<f64> {
        if rc < 0.0 || rc > self.r_check_max * (1.0 + 1e-14) {
            return Err(GeometryError::InvalidParameters(format!(
                "ř = {rc} outside [0, {}]",
                self.r_check_max
            )));
        }
        let (mut lo, mut hi) = (0.0, self.r_max);
        let mut r = rc.clamp(lo, hi);
        for _ in 0..200 {
            let f = self.forward(r) - rc;
            if f.abs() <= 1e-15 * rc.max(1.0) {
                return Ok(r);
            }
            if f > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let step = f / self.forward_derivative(r);
            let mut next = r - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 1e-16 * r.max(1.0) {
                return Ok(next);
            }
            r = next;
        }
        Ok(r)
    }

    /// `dr/dř = ψ(r²)`.
    pub fn inverse_derivative(&self, rc: f64) -> Result<f64> {
        let r = self.inverse(rc)?;
        Ok(self.psi.eval(r * r))
    }

    /// `(r, ř, dř/dr)` on `n + 1` equispaced radii.
    pub fn tabulate(&self, n: usize) -> Vec<(f64, f64, f64)> {
        (0..=n)
            .map(|i| {
                let r = self.r_max * i as f64 / n as f64;
                (r, self.forward(r), self.forward_derivative(r))
            })
            .collect()
    }
}

pub fn reparametrize(psi: &RadialFunction, r_max: f64) -> Result<Reparametrization> {
    if !(r_max > 0.0) || r_max * r_max > psi.t_limit() * (1.0 + 1e-12) {
        return Err(GeometryError::InvalidParameters(format!("r_max = {r_max} outside the range of ψ")));
    }
    if let Some(z) = psi.first_zero(r_max) {
        return Err(GeometryError::VanishingFactor { location: z });
    }
    let mut rep = Reparametrization {
        psi: psi.clone(),
        r_max,
        r_check_max: 0.0,
    };
    rep.r_check_max = rep.forward(r_max);
    Ok(rep)
}

/// `ψ(|x|²)⁻² g` on a normal chart.
#[derive(Clone)]
pub struct ConformalMetric {
    pub base: Arc<dyn ChartMetric>,
    pub psi: RadialFunction,
}

impl std::fmt::Debug for ConformalMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConformalMetric")
            .field("base", &self.base.label())
            .field("psi", &self.psi)
            .finish()
    }
}

impl ConformalMetric {
    /// `Ψ(x) = ψ(|x|²)` on a jet point.
    pub fn factor(&self, x: &[Jet]) -> Jet {
        self.psi.apply(&norm_squared(x))
    }
}

impl ChartMetric for ConformalMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        let t: f64 = x.iter().map(|v| v * v).sum();
        self.base.in_domain(x) && t <= self.psi.t_limit() && self.psi.eval(t) > 0.0
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        let w = self.factor(x).powi(2).recip();
        self.base.components(x).iter().map(|g| g * &w).collect()
    }
    fn label(&self) -> String {
        format!("{}_psi", self.base.label())
    }
}

/// `M_ψ`: refuses charts that are not normal about the origin.
pub fn deform_metric(base: Arc<dyn ChartMetric>, psi: RadialFunction) -> Result<ConformalMetric> {
    if !base.is_normal_chart() {
        return Err(GeometryError::NotNormalChart);
    }
    if psi.eval(0.0) <= 0.0 {
        return Err(GeometryError::VanishingFactor { location: 0.0 });
    }
    Ok(ConformalMetric { base, psi })
}

/// `Θ_{g_ψ}(ř) = ψ(r(ř)²)^{1-m} Θ_g(r(ř))` at each requested `ř`.
pub fn deformed_density<F: Fn(f64) -> Result<f64>>(
    base: F,
    rep: &Reparametrization,
    m: usize,
    r_check: &[f64],
) -> Result<Vec<(f64, f64)>> {
    r_check
        .iter()
        .map(|&rc| {
            let r = rep.inverse(rc)?;
            let psi = rep.psi.eval(r * r);
            Ok((rc, psi.powi(1 - m as i32) * base(r)?))
        })
        .collect()
}

/// Predicted Ricci tensor of `g_ψ` from the conformal change law, in chart components.
pub fn ricci_conformal(metric: &dyn ChartMetric, psi: &RadialFunction, x: &[f64]) -> Result<DMatrix<f64>> {
    if !metric.is_normal_chart() {
        return Err(GeometryError::NotNormalChart);
    }
    let m = metric.dim() as f64;
    let geo = point_geometry(metric, x, true)?;
    let rho = ricci_from(geo.riemann.as_ref().unwrap(), &geo.ginv);
    let field = |y: &[Jet]| psi.apply(&norm_squared(y));
    let j = scalar_jet(&field, x, 2)?;
    let v = j.value();
    if v == 0.0 {
        return Err(GeometryError::VanishingFactor { location: x.iter().map(|a| a * a).sum::<f64>().sqrt() });
    }
    let hess = hessian_from(&geo.gamma, &j);
    let lap0 = -(&geo.ginv * &hess).trace();
    let grad = nalgebra::DVector::from_vec(j.gradient());
    let dpsi2 = (grad.transpose() * &geo.ginv * &grad)[(0, 0)];
    Ok(rho + hess * ((m - 2.0) / v) + &geo.g * (-lap0 / v - (m - 1.0) * dpsi2 / (v * v)))
}

/// Ricci tensor of the deformed metric computed directly from its components.
pub fn ricci_direct(deformed: &dyn ChartMetric, x: &[f64]) -> Result<DMatrix<f64>> {
    let geo = point_geometry(deformed, x, true)?;
    Ok(ricci_from(geo.riemann.as_ref().unwrap(), &geo.ginv))
}

/// Covariant Hessian of `Ψ = ψ(|x|²)` at `x = (r, 0, …, 0)` against the closed form
/// `Hess_11 = 2ψ' + 4r²ψ''`, `Hess_1j = 0`, `Hess_ij = 2ψ'δ_ij - 2rψ' Γ_ij^1` (`i, j > 1`).
#[derive(Clone, Debug, Serialize)]
pub struct HessianStructure {
    pub r: f64,
    pub computed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub max_deviation: f64,
}

pub fn hessian_structure(metric: &dyn ChartMetric, psi: &RadialFunction, r: f64) -> Result<HessianStructure> {
    if !metric.is_normal_chart() {
        return Err(GeometryError::NotNormalChart);
    }
    let m = metric.dim();
    let mut x = vec![0.0; m];
    x[0] = r;
    let gamma = christoffels(metric, &x)?;
    let field = |y: &[Jet]| psi.apply(&norm_squared(y));
    let computed = hessian_from(&gamma, &scalar_jet(&field, &x, 2)?);
    let d = psi.derivatives(r * r, 2);
    let predicted = DMatrix::from_fn(m, m, |i, j| match (i, j) {
        (0, 0) => 2.0 * d[1] + 4.0 * r * r * d[2],
        (0, _) | (_, 0) => 0.0,
        _ => 2.0 * d[1] * if i == j { 1.0 } else { 0.0 } - 2.0 * r * d[1] * gamma.get(&[i, j, 0]),
    });
    Ok(HessianStructure {
        r,
        max_deviation: (&computed - &predicted).amax(),
        computed: computed.as_slice().to_vec(),
        predicted: predicted.as_slice().to_vec(),
    })
}

/// Deviation of the two space-form isometries at sample points.
#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    pub a: f64,
    pub b: f64,
    pub scale: f64,
    pub points: usize,
    /// `max |φ*g_{b,a} - g_{a,b}|` for the inversion `φ(ξ) = ξ/|ξ|²`.
    pub inversion_deviation: f64,
    /// `max |ψ*g_{a,b} - g_{a/c, bc}|` for the scaling `ψ(η) = cη`.
    pub scaling_deviation: f64,
}

fn space_form_at(a: f64, b: f64, x: &[Jet]) -> Jet {
    (&(&norm_squared(x) * b) + a).powi(2).recip()
}

/// Pullback of the conformally flat metric `w(y) δ` by the map `y = f(x)`.
fn pullback(x: &[f64], f: &dyn Fn(&[Jet]) -> Vec<Jet>, w: &dyn Fn(&[Jet]) -> Jet) -> DMatrix<f64> {
    let m = x.len();
    let y = f(&Jet::seed(x, 1));
    let jac = DMatrix::from_fn(m, m, |i, j| y[i].partial(&[j]));
    let yv: Vec<f64> = y.iter().map(|v| v.value()).collect();
    let wv = w(&Jet::seed(&yv, 0)).value();
    jac.transpose() * jac * wv
}

pub fn space_form_isometry_check(a: f64, b: f64, points: &[Vec<f64>], scale: f64) -> Result<IsometryReport> {
    let in_dom = |a: f64, b: f64, x: &[f64]| a + b * x.iter().map(|v| v * v).sum::<f64>() > 0.0;
    let mut inv_dev: f64 = 0.0;
    let mut sc_dev: f64 = 0.0;
    for x in points {
        let t: f64 = x.iter().map(|v| v * v).sum();
        if t == 0.0 || !in_dom(a, b, x) {
            return Err(GeometryError::OutsideDomain { point: x.clone() });
        }
        let eta: Vec<f64> = x.iter().map(|v| v / t).collect();
        if !in_dom(b, a, &eta) {
            return Err(GeometryError::OutsideDomain { point: eta });
        }
        let m = x.len();
        let here = DMatrix::identity(m, m) * space_form_at(a, b, &Jet::seed(x, 0)).value();
        let inversion = |y: &[Jet]| {
            let r2 = norm_squared(y).recip();
            y.iter().map(|v| v * &r2).collect::<Vec<_>>()
        };
        let pulled = pullback(x, &inversion, &|y| space_form_at(b, a, y));
        inv_dev = inv_dev.max((pulled - &here).amax());
        // ψ*g_{a,b} against g_{a/c, bc}, evaluated at η = x/c where c η stays in the domain
        let eta_s: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let scaling = |y: &[Jet]| y.iter().map(|v| v * scale).collect::<Vec<_>>();
        let pulled = pullback(&eta_s, &scaling, &|y| space_form_at(a, b, y));
        let target = DMatrix::identity(m, m) * space_form_at(a / scale, b * scale, &Jet::seed(&eta_s, 0)).value();
        sc_dev = sc_dev.max((pulled - target).amax());
    }
    Ok(IsometryReport {
        a,
        b,
        scale,
        points: points.len(),
        inversion_deviation: inv_dev,
        scaling_deviation: sc_dev,
    })
}

/// How the trivial-density factor is normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `ψ(r²) = Θ̃(r)^{1/(m-1)}`, so `Θ_{g_ψ} = r^{m-1}` in the original radius.
    #[default]
    RadialFactor,
    /// `ψ(r²) = (r/ř) Θ̃(r)^{1/(m-1)}`, so `Θ̃_{g_ψ}(ř) ≡ 1` in the new geodesic radius.
    GeodesicRadius,
}

#[derive(Clone, Debug)]
pub struct TrivialDensityConfig {
    pub r_max: Option<f64>,
    pub nodes: usize,
    pub directions: usize,
    /// Maximal relative spread of `Θ̃` across directions.
    pub tolerance: f64,
    pub normalization: Normalization,
    pub shoot: ShootConfig,
}

impl Default for TrivialDensityConfig {
    fn default() -> Self {
        TrivialDensityConfig {
            r_max: None,
            nodes: 32,
            directions: 6,
            tolerance: 1e-7,
            normalization: Normalization::RadialFactor,
            shoot: ShootConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrivialDensity {
    pub psi: RadialFunction,
    pub r_max: f64,
    pub normalization: Normalization,
    /// Largest relative spread of the sampled base density across directions.
    pub radial_spread: f64,
}

/// `ψ` making the deformed density trivial, built from shot densities of the base
/// metric about the chart origin (a Chebyshev interpolant in `t = r²`).
pub fn trivial_density_factor(metric: &dyn ChartMetric, cfg: &TrivialDensityConfig) -> Result<TrivialDensity> {
    if !metric.is_normal_chart() {
        return Err(GeometryError::NotNormalChart);
    }
    let m = metric.dim();
    let p = vec![0.0; m];
    let r_max = cfg
        .r_max
        .unwrap_or_else(|| metric.injectivity_radius(&p).map_or(1.0, |i| (0.75 * i).min(1.5)));
    let t_max = r_max * r_max;
    let n = cfg.nodes;
    let ts: Vec<f64> = (0..n)
        .map(|k| 0.5 * t_max * (1.0 + (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()))
        .collect();
    // shoot_path wants increasing radii
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ts[i].total_cmp(&ts[j]));
    let radii: Vec<f64> = order.iter().map(|&i| ts[i].sqrt()).collect();
    let dirs = sample_directions(metric, &p, cfg.directions)?;
    let shots: Vec<Vec<f64>> = dirs
        .par_iter()
        .map(|d| {
            shoot_path(metric, &p, d, &radii, &cfg.shoot)
                .map(|s| s.iter().map(|x| x.theta / x.radius.powi(m as i32 - 1)).collect())
        })
        .collect::<Result<_>>()?;
    let mut spread: f64 = 0.0;
    let mut tilde = vec![0.0; n];
    for (slot, &node) in order.iter().enumerate() {
        let vals: Vec<f64> = shots.iter().map(|s| s[slot]).collect();
        spread = spread.max(relative_spread(&vals));
        tilde[node] = vals.iter().sum::<f64>() / vals.len() as f64;
    }
    if spread > cfg.tolerance {
        return Err(GeometryError::NotRadial {
            spread,
            tolerance: cfg.tolerance,
        });
    }
    let e = 1.0 / (m as f64 - 1.0);
    let radial: Vec<f64> = tilde.iter().map(|v| v.powf(e)).collect();
    let base = RadialFunction::chebyshev_from_values(&radial, t_max);
    let psi = match cfg.normalization {
        Normalization::RadialFactor => base,
        Normalization::GeodesicRadius => {
            // ř = r exp(∫₀ʳ (q(s²)⁻¹ - 1)/s ds) solves dř/dr = 1/ψ with ψ = (r/ř) q
            let q = base.clone();
            let log_ratio = |r: f64| {
                if r == 0.0 {
                    return 0.0;
                }
                integrate(
                    |s| {
                        if s == 0.0 {
                            0.0
                        } else {
                            (1.0 / q.eval(s * s) - 1.0) / s
                        }
                    },
                    0.0,
                    r,
                    8,
                    12,
                )
            };
            let vals: Vec<f64> = ts
                .iter()
                .zip(&radial)
                .map(|(&t, &qv)| qv * (-log_ratio(t.sqrt())).exp())
                .collect();
            RadialFunction::chebyshev_from_values(&vals, t_max)
        }
    };
    Ok(TrivialDensity {
        psi,
        r_max,
        normalization: cfg.normalization,
        radial_spread: spread,
    })
}

/// Closed-form trivial-density factor for Fubini–Study in real dimension `m`:
/// `Ψ = (sin r/r) cos(r)^{1/(m-1)}`.
pub fn fubini_study_factor(m: usize) -> RadialFunction {
    RadialFunction::SinCos {
        sinc_power: 1.0,
        cos_power: 1.0 / (m as f64 - 1.0),
    }
}

/// Least-squares fit `y ≈ c u^{-p}` on log-log axes.
#[derive(Clone, Debug, Serialize)]
pub struct PowerFit {
    pub coefficient: f64,
    pub exponent: f64,
    pub residual_max: f64,
}

pub fn power_fit(samples: &[(f64, f64)]) -> Result<PowerFit> {
    if samples.len() < 3 {
        return Err(GeometryError::FitFailed("need three samples".into()));
    }
    let sign = samples[0].1.signum();
    if samples.iter().any(|s| s.1.signum() != sign || s.1 == 0.0 || s.0 <= 0.0) {
        return Err(GeometryError::FitFailed("samples change sign".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(u, y)| (u.ln(), (y * sign).ln())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual_max = pts.iter().map(|p| (p.1 - icpt - slope * p.0).abs()).fold(0.0, f64::max);
    Ok(PowerFit {
        coefficient: sign * icpt.exp(),
        exponent: -slope,
        residual_max,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub m: usize,
    /// `∫₀^{π/2} ψ⁻¹ du`.
    pub length: f64,
    pub length_finite: bool,
    /// Fitted `α` in `ψ ~ (2/π) u^α` near the cut locus.
    pub psi_exponent: f64,
    pub psi_prefactor: f64,
    /// `(u, ψ² ρ_{g_ψ}(∂_u, ∂_u))` from the Ricci tensor of the deformed metric.
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<PowerFit>,
    /// Same quantity from the conformal change law.
    pub formula_samples: Vec<(f64, f64)>,
    /// `(m-2)ψψ'' + ψΘ⁻¹∂_u(Θψ) - (m-1)ψ'²` evaluated as displayed, with `'` = `d/du`.
    pub displayed_samples: Vec<(f64, f64)>,
    pub displayed_fit: Option<PowerFit>,
    /// `-4(m-2)/((m-1)π²)`, the leading coefficient of `ψ²ρ(∂_u,∂_u)` for this `ψ`.
    pub leading_coefficient: f64,
    pub leading_exponent: f64,
}

/// Completeness and curvature blow-up of the trivial-density deformation of `CP^{m/2}`.
pub fn completeness_and_blowup(m: usize, us: &[f64]) -> Result<BlowupReport> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(GeometryError::InvalidParameters(format!("m = {m} must be even and at least 4")));
    }
    let base: Arc<dyn ChartMetric> = Arc::new(crate::catalog::FubiniStudy::new(
        m / 2,
        crate::catalog::FubiniStudyChart::Normal,
    ));
    let psi = fubini_study_factor(m);
    let deformed = deform_metric(base.clone(), psi.clone())?;
    let psi_u = |u: f64| psi.eval((FRAC_PI_2 - u).powi(2));
    // u = v^k removes the u^{-1/(m-1)} endpoint singularity
    let k = (m as f64 - 1.0) / (m as f64 - 2.0);
    let v_max = FRAC_PI_2.powf(1.0 / k);
    let length = integrate(
        |v| {
            let u = v.powf(k);
            k * v.powf(k - 1.0) / psi_u(u)
        },
        0.0,
        v_max,
        64,
        16,
    );
    let edge: Vec<(f64, f64)> = [1e-8, 1e-7, 1e-6].iter().map(|&u| (u, psi_u(u))).collect();
    let lin = power_fit(&edge.iter().map(|&(u, y)| (u, 1.0 / y)).collect::<Vec<_>>())?;
    let psi_exponent = lin.exponent;
    let psi_prefactor = 1.0 / lin.coefficient;
    let mut samples = Vec::new();
    let mut formula_samples = Vec::new();
    let mut displayed_samples = Vec::new();
    let mm = m as f64;
    for &u in us {
        let mut x = vec![0.0; m];
        x[0] = FRAC_PI_2 - u;
        let w = psi_u(u).powi(2);
        let direct = ricci_direct(&deformed, &x)?;
        samples.push((u, w * direct[(0, 0)]));
        let formula = ricci_conformal(base.as_ref(), &psi, &x)?;
        formula_samples.push((u, w * formula[(0, 0)]));
        // displayed combination in the variable u
        let uj = &Jet::seed(&[u], 2)[0];
        let r = &(-uj) + FRAC_PI_2;
        let pj = psi.apply(&(&r * &r));
        let theta = &r.sin().powi(m as u32 - 1) * &r.cos();
        let d1 = |j: &Jet| j.coeffs()[1];
        let d2 = |j: &Jet| 2.0 * j.coeffs()[2];
        let tp = &theta * &pj;
        let val = (mm - 2.0) * pj.value() * d2(&pj) + pj.value() * d1(&tp) / theta.value()
            - (mm - 1.0) * d1(&pj).powi(2);
        displayed_samples.push((u, val));
    }
    let fit = power_fit(&samples).ok();
    let displayed_fit = power_fit(&displayed_samples).ok();
    Ok(BlowupReport {
        m,
        length,
        length_finite: length.is_finite() && psi_exponent < 1.0,
        psi_exponent,
        psi_prefactor,
        samples,
        fit,
        formula_samples,
        displayed_samples,
        displayed_fit,
        leading_coefficient: -4.0 * (mm - 2.0) / ((mm - 1.0) * std::f64::consts::PI.powi(2)),
        leading_exponent: 2.0 - 2.0 / (mm - 1.0),
    })
}

/// Geometric sample points in `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// Manifest form of a conformal factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiSpec {
    Poly {
        coeffs: Vec<f64>,
    },
    PoleSymmetric {
        coeffs: Vec<f64>,
    },
    SinCos {
        sinc_power: f64,
        cos_power: f64,
    },
    TrivialDensity {
        #[serde(default)]
        normalization: Normalization,
        #[serde(default)]
        r_max: Option<f64>,
    },
}

impl PsiSpec {
    pub fn resolve(&self, base: &dyn ChartMetric) -> Result<RadialFunction> {
        Ok(match self {
            PsiSpec::Poly { coeffs } => RadialFunction::Poly { coeffs: coeffs.clone() },
            PsiSpec::PoleSymmetric { coeffs } => RadialFunction::PoleSymmetric { coeffs: coeffs.clone() },
            &PsiSpec::SinCos { sinc_power, cos_power } => RadialFunction::SinCos { sinc_power, cos_power },
            &PsiSpec::TrivialDensity { normalization, r_max } => {
                let cfg = TrivialDensityConfig {
                    normalization,
                    r_max,
                    ..Default::default()
                };
                trivial_density_factor(base, &cfg)?.psi
            }
        })
    }
}

/// Largest componentwise deviation between the conformal-law and direct Ricci tensors.
pub fn ricci_deviation(base: Arc<dyn ChartMetric>, psi: &RadialFunction, x: &[f64]) -> Result<f64> {
    let predicted = ricci_conformal(base.as_ref(), psi, x)?;
    let deformed = deform_metric(base, psi.clone())?;
    let direct = ricci_direct(&deformed, x)?;
    Ok((predicted - direct).amax())
}

/// `g_ψ(x)` as a matrix, for reports.
pub fn deformed_metric_at(deformed: &ConformalMetric, x: &[f64]) -> Result<DMatrix<f64>> {
    metric_at(deformed, x)
}
