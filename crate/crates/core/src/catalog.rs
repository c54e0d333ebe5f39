//! Built-in example metrics with known ground truth.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conformal::{deform_metric, RadialFunction};
use crate::error::{GeometryError, Result};
use crate::jet::{norm_squared, Jet};
use crate::metric::ChartMetric;
use crate::series::sinc_sqrt_coeffs;

/// Number of terms kept in the `t = |x|²` power series of chart components.
pub const CHART_SERIES_TERMS: usize = 48;

fn diag_plus(x: &[Jet], diag: &Jet) -> Vec<Jet> {
    let m = x.len();
    let zero = diag.lift(0.0);
    (0..m * m)
        .map(|k| if k / m == k % m { diag.clone() } else { zero.clone() })
        .collect()
}

fn add_outer(g: &mut [Jet], coef: &Jet, v: &[Jet]) {
    let m = v.len();
    for i in 0..m {
        let cv = coef * &v[i];
        for j in i..m {
            let term = &cv * &v[j];
            g[i * m + j] += &term;
            if i != j {
                g[j * m + i] += &term;
            }
        }
    }
}

fn mul_series(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum())
        .collect()
}

/// Complex structure `(Jx)_{2j+1} = x_{2j}`, `(Jx)_{2j} = -x_{2j+1}`.
pub fn complex_structure(x: &[Jet]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(x.len());
    for pair in x.chunks(2) {
        out.push(-&pair[1]);
        out.push(pair[0].clone());
    }
    out
}

/// Flat metric `δ_ij`.
#[derive(Clone, Debug)]
pub struct Euclidean {
    pub dim: usize,
}

impl ChartMetric for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        diag_plus(x, &x[0].lift(1.0))
    }
    fn is_normal_chart(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        format!("euclidean({})", self.dim)
    }
}

/// `g_{a,b} = (a + b|x|²)^{-2} δ`, constant curvature `4ab` on `a + b|x|² > 0`.
#[derive(Clone, Debug)]
pub struct SpaceForm {
    pub a: f64,
    pub b: f64,
    pub dim: usize,
}

impl SpaceForm {
    pub fn curvature(&self) -> f64 {
        4.0 * self.a * self.b
    }
}

impl ChartMetric for SpaceForm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.a + self.b * x.iter().map(|v| v * v).sum::<f64>() > 0.0
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        let f = (norm_squared(x) * self.b + self.a).powi(2).recip();
        diag_plus(x, &f)
    }
    fn injectivity_radius(&self, _x: &[f64]) -> Option<f64> {
        let k = self.curvature();
        (k > 0.0).then(|| PI / k.sqrt())
    }
    fn is_normal_chart(&self) -> bool {
        self.a == 1.0 && self.b == 0.0
    }
    fn label(&self) -> String {
        format!("space_form({}, {}, {})", self.a, self.b, self.dim)
    }
}

/// Which pole of the unit sphere sits at the chart origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    #[default]
    North,
    South,
}

/// Round unit sphere `S^m` in geodesic normal coordinates about a pole:
/// `g = S² δ + ((1 - S²)/t) x xᵀ` with `S = sin r / r`, `t = r² = |x|²`, `|x| < π`.
///
/// The ambient coordinate of a chart point is `ξ¹ = ±cos|x|` (sign by pole).
#[derive(Clone, Debug)]
pub struct SphereChart {
    pub dim: usize,
    pub pole: Pole,
    s2: Vec<f64>,
    q: Vec<f64>,
}

impl SphereChart {
    pub fn new(dim: usize, pole: Pole) -> Self {
        let s = sinc_sqrt_coeffs(CHART_SERIES_TERMS);
        let s2 = mul_series(&s, &s);
        let q = s2[1..].iter().map(|c| -c).collect();
        SphereChart { dim, pole, s2, q }
    }

    /// First ambient coordinate `ξ¹` of a chart point.
    pub fn ambient_first(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.pole {
            Pole::North => r.cos(),
            Pole::South => -r.cos(),
        }
    }
}

impl ChartMetric for SphereChart {
    fn dim(&self) -> usize {
        self.dim
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().map(|v| v * v).sum::<f64>() < PI * PI
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        let t = norm_squared(x);
        let mut g = diag_plus(x, &t.power_series(&self.s2));
        add_outer(&mut g, &t.power_series(&self.q), x);
        g
    }
    fn injectivity_radius(&self, _x: &[f64]) -> Option<f64> {
        Some(PI)
    }
    fn is_normal_chart(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        format!("sphere({})", self.dim)
    }
}

/// Chart used for complex projective space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FubiniStudyChart {
    /// Geodesic normal coordinates about a point, `|x| < π/2`.
    #[default]
    Normal,
    /// Complex affine chart `ℂ^𝔪`.
    Affine,
}

/// Fubini–Study metric on `ℂP^𝔪` (real dimension `2𝔪`), holomorphic sectional curvature 4.
///
/// Normal chart: `g = S² δ + ((1 - S²)/t) x xᵀ - S⁴ (Jx)(Jx)ᵀ`.
/// Affine chart: `g = ((1 + t) δ - x xᵀ - (Jx)(Jx)ᵀ) / (1 + t)²`.
#[derive(Clone, Debug)]
pub struct FubiniStudy {
    pub complex_dim: usize,
    pub chart: FubiniStudyChart,
    s2: Vec<f64>,
    q: Vec<f64>,
    s4: Vec<f64>,
}

impl FubiniStudy {
    pub fn new(complex_dim: usize, chart: FubiniStudyChart) -> Self {
        let s = sinc_sqrt_coeffs(CHART_SERIES_TERMS);
        let s2 = mul_series(&s, &s);
        let q = s2[1..].iter().map(|c| -c).collect();
        let s4 = mul_series(&s2, &s2);
        FubiniStudy {
            complex_dim,
            chart,
            s2,
            q,
            s4,
        }
    }
}

impl ChartMetric for FubiniStudy {
    fn dim(&self) -> usize {
        2 * self.complex_dim
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        match self.chart {
            FubiniStudyChart::Normal => x.iter().map(|v| v * v).sum::<f64>() < FRAC_PI_2 * FRAC_PI_2,
            FubiniStudyChart::Affine => true,
        }
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        let t = norm_squared(x);
        let jx = complex_structure(x);
        match self.chart {
            FubiniStudyChart::Normal => {
                let mut g = diag_plus(x, &t.power_series(&self.s2));
                add_outer(&mut g, &t.power_series(&self.q), x);
                add_outer(&mut g, &-t.power_series(&self.s4), &jx);
                g
            }
            FubiniStudyChart::Affine => {
                let w = (&t + 1.0).powi(2).recip();
                let mut g = diag_plus(x, &((&t + 1.0) * &w));
                let nw = -w;
                add_outer(&mut g, &nw, x);
                add_outer(&mut g, &nw, &jx);
                g
            }
        }
    }
    fn injectivity_radius(&self, _x: &[f64]) -> Option<f64> {
        Some(FRAC_PI_2)
    }
    fn is_normal_chart(&self) -> bool {
        self.chart == FubiniStudyChart::Normal
    }
    fn label(&self) -> String {
        format!("fubini_study({})", self.complex_dim)
    }
}

/// Coordinates for the two-dimensional family `dr² + f dθ²`, `f = r²(1 + b rⁿ)²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoDCoords {
    /// Normal coordinates `x = r(cos θ, sin θ)`.
    #[default]
    Cartesian,
    /// `(r, θ)` with `r > 0`.
    Polar,
}

/// Surface with polar density `Θ(r) = r(1 + b rⁿ)`.
///
/// In normal coordinates `g = δ + ((u² - 1)/t)(t δ - x xᵀ)` with `u = 1 + b rⁿ`;
/// the chart is analytic at the origin only for even `n`, otherwise the metric
/// has finitely many derivatives there.
#[derive(Clone, Debug)]
pub struct TwoDFamily {
    pub n: usize,
    pub b: f64,
    pub coords: TwoDCoords,
}

impl ChartMetric for TwoDFamily {
    fn dim(&self) -> usize {
        2
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        match self.coords {
            TwoDCoords::Cartesian => {
                let r = x[0].hypot(x[1]);
                1.0 + self.b * r.powi(self.n as i32) > 0.0
            }
            TwoDCoords::Polar => x[0] > 0.0 && 1.0 + self.b * x[0].powi(self.n as i32) > 0.0,
        }
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        match self.coords {
            TwoDCoords::Cartesian => {
                let t = norm_squared(x);
                let n = self.n as f64;
                let w = t.powf((n - 2.0) / 2.0) * (2.0 * self.b)
                    + t.powf(n - 1.0) * (self.b * self.b);
                let mut g = diag_plus(x, &(&t * &w + 1.0));
                add_outer(&mut g, &-w, x);
                g
            }
            TwoDCoords::Polar => {
                let r = &x[0];
                let u = r.powi(self.n as u32) * self.b + 1.0;
                let f = (r * &u).powi(2);
                vec![r.lift(1.0), r.lift(0.0), r.lift(0.0), f]
            }
        }
    }
    fn is_normal_chart(&self) -> bool {
        self.coords == TwoDCoords::Cartesian
    }
    fn label(&self) -> String {
        format!("two_d_family({}, {})", self.n, self.b)
    }
}

/// Declarative metric description (manifest form).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        dim: usize,
    },
    #[serde(alias = "g_ab")]
    SpaceForm {
        a: f64,
        b: f64,
        dim: usize,
    },
    Sphere {
        dim: usize,
        #[serde(default)]
        pole: Pole,
    },
    FubiniStudy {
        complex_dim: usize,
        #[serde(default)]
        chart: FubiniStudyChart,
    },
    TwoDFamily {
        n: usize,
        b: f64,
        #[serde(default)]
        coords: TwoDCoords,
    },
    /// `S_ψ = ψ((ξ¹)²)⁻² g_round` with `ψ` a polynomial in `(ξ¹)²`.
    DeformedSphere {
        dim: usize,
        #[serde(default)]
        pole: Pole,
        psi: Vec<f64>,
    },
}

/// Closed-form polar density about the chart origin, as a function of geodesic distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityLaw {
    /// `sn_κ(r)^{m-1}`.
    ConstantCurvature { kappa: f64 },
    /// `sin^{m-1} r · cos r`.
    FubiniStudy,
    /// `r (1 + b rⁿ)`.
    TwoD { n: usize, b: f64 },
}

impl DensityLaw {
    pub fn eval(&self, m: usize, r: f64) -> f64 {
        match *self {
            DensityLaw::ConstantCurvature { kappa } => {
                let sn = if kappa > 0.0 {
                    (kappa.sqrt() * r).sin() / kappa.sqrt()
                } else if kappa < 0.0 {
                    ((-kappa).sqrt() * r).sinh() / (-kappa).sqrt()
                } else {
                    r
                };
                sn.powi(m as i32 - 1)
            }
            DensityLaw::FubiniStudy => r.sin().powi(m as i32 - 1) * r.cos(),
            DensityLaw::TwoD { n, b } => r * (1.0 + b * r.powi(n as i32)),
        }
    }
}

/// Facts every entry declares and the test suite verifies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnownFacts {
    /// Constant sectional curvature, if a space form.
    pub constant_curvature: Option<f64>,
    /// Sectional curvature range `[min, max]`.
    pub sectional_range: (f64, f64),
    pub einstein: bool,
    /// Centrally harmonic about the chart origin.
    pub harmonic_at_origin: bool,
    /// Centrally harmonic about every point.
    pub harmonic_everywhere: bool,
    /// Density about the chart origin, in geodesic distance.
    pub density: Option<DensityLaw>,
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub spec: MetricSpec,
    pub metric: Arc<dyn ChartMetric>,
    pub facts: KnownFacts,
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("facts", &self.facts)
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(GeometryError::InvalidParameters(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

/// Builds a catalog entry from its declarative description.
pub fn build(spec: &MetricSpec) -> Result<CatalogEntry> {
    let (metric, facts): (Arc<dyn ChartMetric>, KnownFacts) = match *spec {
        MetricSpec::Euclidean { dim } => {
            check_dim(dim)?;
            (
                Arc::new(Euclidean { dim }),
                KnownFacts {
                    constant_curvature: Some(0.0),
                    sectional_range: (0.0, 0.0),
                    einstein: true,
                    harmonic_at_origin: true,
                    harmonic_everywhere: true,
                    density: Some(DensityLaw::ConstantCurvature { kappa: 0.0 }),
                },
            )
        }
        MetricSpec::SpaceForm { a, b, dim } => {
            check_dim(dim)?;
            if a == 0.0 && b == 0.0 {
                return Err(GeometryError::InvalidParameters("(a, b) = (0, 0) is not a metric".into()));
            }
            if !a.is_finite() || !b.is_finite() {
                return Err(GeometryError::InvalidParameters("non-finite (a, b)".into()));
            }
            let kappa = 4.0 * a * b;
            // Distance from the origin is r = atan-type reparametrization, so the
            // chart density is only a closed form in normal charts.
            let density = (a == 1.0 && b == 0.0).then_some(DensityLaw::ConstantCurvature { kappa: 0.0 });
            (
                Arc::new(SpaceForm { a, b, dim }),
                KnownFacts {
                    constant_curvature: Some(kappa),
                    sectional_range: (kappa, kappa),
                    einstein: true,
                    harmonic_at_origin: true,
                    harmonic_everywhere: true,
                    density,
                },
            )
        }
        MetricSpec::Sphere { dim, pole } => {
            check_dim(dim)?;
            (
                Arc::new(SphereChart::new(dim, pole)),
                KnownFacts {
                    constant_curvature: Some(1.0),
                    sectional_range: (1.0, 1.0),
                    einstein: true,
                    harmonic_at_origin: true,
                    harmonic_everywhere: true,
                    density: Some(DensityLaw::ConstantCurvature { kappa: 1.0 }),
                },
            )
        }
        MetricSpec::FubiniStudy { complex_dim, chart } => {
            if complex_dim < 1 {
                return Err(GeometryError::InvalidParameters("complex dimension must be at least 1".into()));
            }
            let (range, cc) = if complex_dim == 1 { ((4.0, 4.0), Some(4.0)) } else { ((1.0, 4.0), None) };
            let density = (chart == FubiniStudyChart::Normal).then_some(DensityLaw::FubiniStudy);
            (
                Arc::new(FubiniStudy::new(complex_dim, chart)),
                KnownFacts {
                    constant_curvature: cc,
                    sectional_range: range,
                    einstein: true,
                    harmonic_at_origin: true,
                    harmonic_everywhere: true,
                    density,
                },
            )
        }
        MetricSpec::TwoDFamily { n, b, coords } => {
            if n < 2 {
                return Err(GeometryError::InvalidParameters(format!("n must be at least 2, got {n}")));
            }
            if !b.is_finite() {
                return Err(GeometryError::InvalidParameters("non-finite b".into()));
            }
            let flat = b == 0.0;
            let density = (coords == TwoDCoords::Cartesian).then_some(DensityLaw::TwoD { n, b });
            (
                Arc::new(TwoDFamily { n, b, coords }),
                KnownFacts {
                    constant_curvature: flat.then_some(0.0),
                    sectional_range: if flat { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) },
                    // every surface is Einstein
                    einstein: true,
                    harmonic_at_origin: true,
                    harmonic_everywhere: flat,
                    density,
                },
            )
        }
        MetricSpec::DeformedSphere { dim, pole, ref psi } => {
            check_dim(dim)?;
            if psi.is_empty() || psi.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::InvalidParameters("ψ needs finite coefficients".into()));
            }
            // (ξ¹)² ranges over [0, 1]
            let eval = |s: f64| psi.iter().rev().fold(0.0, |a, c| a * s + c);
            if (0..=1000).any(|i| eval(i as f64 / 1000.0) <= 0.0) {
                return Err(GeometryError::InvalidParameters("ψ must be positive on [0, 1]".into()));
            }
            let constant = psi.iter().skip(1).all(|&c| c == 0.0);
            let kappa = psi[0] * psi[0];
            let metric = deform_metric(
                Arc::new(SphereChart::new(dim, pole)),
                RadialFunction::PoleSymmetric { coeffs: psi.clone() },
            )?;
            (
                Arc::new(metric),
                KnownFacts {
                    constant_curvature: constant.then_some(kappa),
                    sectional_range: if constant { (kappa, kappa) } else { (f64::NEG_INFINITY, f64::INFINITY) },
                    einstein: constant,
                    harmonic_at_origin: true,
                    harmonic_everywhere: constant,
                    density: None,
                },
            )
        }
    };
    Ok(CatalogEntry {
        name: metric.label(),
        spec: spec.clone(),
        metric,
        facts,
    })
}

/// Builds an entry from a family name and a JSON parameter object.
pub fn build_named(family: &str, params: &serde_json::Value) -> Result<CatalogEntry> {
    let mut obj = match params {
        serde_json::Value::Object(o) => o.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(GeometryError::InvalidParameters("parameters must be an object".into())),
    };
    obj.insert("family".into(), serde_json::Value::String(family.into()));
    let spec: MetricSpec = serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| {
        if e.to_string().contains("unknown variant") {
            GeometryError::UnknownFamily(family.into())
        } else {
            GeometryError::InvalidParameters(e.to_string())
        }
    })?;
    build(&spec)
}
