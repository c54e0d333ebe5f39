use std::sync::Arc;

use hml_core::catalog::{build, FubiniStudyChart, MetricSpec};
use hml_core::conformal::{
    completeness_and_blowup, deform_metric, fubini_study_factor, log_samples, reparametrize, BlowupReport, Normalization,
    PsiSpec, RadialFunction,
};
use hml_core::expansion::{density_coefficients_from, fitted_coefficients, FitConfig};
use hml_core::geodesic::{
    centrally_harmonic_test, density_profile, eigen_spread, sample_directions, HarmonicConfig, HarmonicityReport,
    ShootConfig, Verdict,
};
use hml_core::metric::{curvature, einstein_defect, ChartMetric};
use hml_core::GeometryError;
use serde::Serialize;

use crate::manifest::{CommandName, Manifest};
use crate::output::{to_json, Cell, Table};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_HARMONIC: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_COMPUTATION: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_INPUT, error: error.into() }
    }
    pub fn computation(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_COMPUTATION, error: error.into() }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        use GeometryError::*;
        let code = match e {
            OutsideDomain { .. }
            | DimensionMismatch { .. }
            | InvalidDirection(_)
            | NotRadial { .. }
            | VanishingFactor { .. }
            | NotNormalChart
            | UnknownFamily(_)
            | InvalidParameters(_) => EXIT_INPUT,
            _ => EXIT_COMPUTATION,
        };
        Failure { code, error: e.into() }
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Result of one subcommand, ready to be written.
#[derive(Debug)]
pub struct Outcome {
    pub json: String,
    pub tables: Vec<Table>,
    pub exit: u8,
}

struct Loaded {
    name: String,
    base: Arc<dyn ChartMetric>,
    metric: Arc<dyn ChartMetric>,
    psi: Option<RadialFunction>,
}

fn load(manifest: &Manifest) -> CmdResult<Loaded> {
    let entry = build(&manifest.metric)?;
    let base = entry.metric.clone();
    match &manifest.deform {
        None => Ok(Loaded { name: entry.name, metric: base.clone(), base, psi: None }),
        Some(d) => {
            let psi = d.psi.resolve(base.as_ref())?;
            let metric: Arc<dyn ChartMetric> = Arc::new(deform_metric(base.clone(), psi.clone())?);
            Ok(Loaded { name: format!("{}_psi", entry.name), base, metric, psi: Some(psi) })
        }
    }
}

fn check_point(metric: &dyn ChartMetric, x: &[f64], what: &str) -> CmdResult<()> {
    if x.len() != metric.dim() {
        return Err(Failure::input(anyhow::anyhow!(
            "{what} has {} coordinates, the metric has dimension {}",
            x.len(),
            metric.dim()
        )));
    }
    if !metric.in_domain(x) {
        return Err(GeometryError::OutsideDomain { point: x.to_vec() }.into());
    }
    Ok(())
}

fn center(manifest: &Manifest, metric: &dyn ChartMetric) -> CmdResult<Vec<f64>> {
    let c = manifest.analysis.center.clone().unwrap_or_else(|| vec![0.0; metric.dim()]);
    check_point(metric, &c, "analysis.center")?;
    Ok(c)
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn run(command: CommandName, manifest: &Manifest) -> CmdResult<Outcome> {
    if let Some(c) = manifest.analysis.command {
        if c != command {
            return Err(Failure::input(anyhow::anyhow!(
                "manifest is for '{}' but '{}' was requested",
                c.as_str(),
                command.as_str()
            )));
        }
    }
    match command {
        CommandName::Curvature => cmd_curvature(manifest),
        CommandName::CheckHarmonic => cmd_check_harmonic(manifest),
        CommandName::Expand => cmd_expand(manifest),
        CommandName::Deform => cmd_deform(manifest),
    }
}

#[derive(Serialize)]
struct PointCurvature {
    point: Vec<f64>,
    metric: Vec<Vec<f64>>,
    ricci: Vec<Vec<f64>>,
    scalar: f64,
    einstein_defect: f64,
    riemann_max_abs: f64,
    nabla_riemann_max_abs: f64,
    kappa_min: f64,
    kappa_max: f64,
}

#[derive(Serialize)]
struct CurvatureSummary {
    directions: usize,
    points: Vec<PointCurvature>,
    kappa_min: f64,
    kappa_max: f64,
    /// Common sectional curvature when the sampled range collapses within tolerance.
    constant_curvature: Option<f64>,
    einstein: bool,
}

/// Sectional curvature range from the reduced Jacobi operator: for each sampled unit
/// `X` the extreme curvatures of planes through `X` are its extreme eigenvalues.
fn curvature_summary(metric: &dyn ChartMetric, points: &[Vec<f64>], directions: usize, tol: f64) -> CmdResult<CurvatureSummary> {
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        check_point(metric, x, "curvature point")?;
        let b = curvature(metric, x, 1)?;
        let spread = eigen_spread(metric, x, directions)?;
        out.push(PointCurvature {
            point: x.clone(),
            metric: matrix_rows(&b.metric),
            ricci: matrix_rows(&b.ricci),
            scalar: b.scalar,
            einstein_defect: einstein_defect(&b),
            riemann_max_abs: b.riemann.max_abs(),
            nabla_riemann_max_abs: b.nabla(1)?.max_abs(),
            kappa_min: spread.eigen_min,
            kappa_max: spread.eigen_max,
        });
    }
    let kappa_min = out.iter().map(|p| p.kappa_min).fold(f64::INFINITY, f64::min);
    let kappa_max = out.iter().map(|p| p.kappa_max).fold(f64::NEG_INFINITY, f64::max);
    let scale = kappa_min.abs().max(kappa_max.abs()).max(1.0);
    let constant_curvature = (kappa_max - kappa_min <= tol * scale).then_some(0.5 * (kappa_min + kappa_max));
    let einstein = out.iter().all(|p| p.einstein_defect <= tol * scale);
    Ok(CurvatureSummary { directions, points: out, kappa_min, kappa_max, constant_curvature, einstein })
}

#[derive(Serialize)]
struct CurvatureReport {
    command: &'static str,
    metric: String,
    dim: usize,
    tolerance: f64,
    #[serde(flatten)]
    summary: CurvatureSummary,
}

pub fn cmd_curvature(manifest: &Manifest) -> CmdResult<Outcome> {
    let l = load(manifest)?;
    let a = &manifest.analysis;
    let points = match &a.points {
        Some(p) => p.clone(),
        None => vec![center(manifest, l.metric.as_ref())?],
    };
    let tol = a.tolerance.unwrap_or(1e-8);
    let summary = curvature_summary(l.metric.as_ref(), &points, a.directions.unwrap_or(32), tol)?;
    let report = CurvatureReport {
        command: "curvature",
        metric: l.name,
        dim: l.metric.dim(),
        tolerance: tol,
        summary,
    };
    Ok(Outcome { json: to_json(&report).map_err(Failure::computation)?, tables: vec![], exit: EXIT_OK })
}

#[derive(Serialize)]
struct HarmonicReport {
    command: &'static str,
    metric: String,
    #[serde(flatten)]
    report: HarmonicityReport,
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Harmonic => EXIT_OK,
        Verdict::NotHarmonic => EXIT_NOT_HARMONIC,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

pub fn cmd_check_harmonic(manifest: &Manifest) -> CmdResult<Outcome> {
    let l = load(manifest)?;
    let a = &manifest.analysis;
    let p = center(manifest, l.metric.as_ref())?;
    let mut cfg = HarmonicConfig::for_metric(l.metric.as_ref(), &p);
    if let Some(r) = &a.radii {
        cfg.radii = r.clone();
    }
    if let Some(d) = a.directions {
        cfg.directions = d;
    }
    if let Some(t) = a.tolerance {
        cfg.tolerance = t;
    }
    let (report, profile) = centrally_harmonic_test(l.metric.as_ref(), &p, &cfg);
    let mut table = Table::new("theta", &["radius", "direction", "theta", "xi"]);
    if let Some(profile) = profile {
        for (i, &r) in profile.radii.iter().enumerate() {
            for (d, s) in profile.samples.iter().enumerate() {
                table.rows.push(vec![Cell::Float(r), Cell::Index(d), Cell::Float(s[i].theta), Cell::Float(s[i].xi)]);
            }
        }
    }
    let exit = verdict_code(report.verdict);
    let out = HarmonicReport { command: "check-harmonic", metric: l.name, report };
    Ok(Outcome { json: to_json(&out).map_err(Failure::computation)?, tables: vec![table], exit })
}

#[derive(Serialize)]
struct DirectionExpansion {
    direction: Vec<f64>,
    /// `H_2 .. H_6` from curvature; absent when the metric is not smooth at the center.
    h: Option<Vec<f64>>,
    /// `H_2 .. H_order` fitted from shot densities.
    fitted_h: Vec<f64>,
    /// `|fitted - h|` for `k = 2..6`.
    residuals: Option<Vec<f64>>,
    fit_residual_rms: f64,
    fit_residual_max: f64,
    fit_condition: f64,
    contamination: Option<f64>,
}

#[derive(Serialize)]
struct ExpandReport {
    command: &'static str,
    metric: String,
    center: Vec<f64>,
    fit_order: usize,
    fit_samples: usize,
    fit_r_max: f64,
    directions: Vec<DirectionExpansion>,
    max_residual: Option<f64>,
    note: Option<String>,
}

pub fn cmd_expand(manifest: &Manifest) -> CmdResult<Outcome> {
    let l = load(manifest)?;
    let a = &manifest.analysis;
    let p = center(manifest, l.metric.as_ref())?;
    let mut cfg = FitConfig::default();
    if let Some(f) = &a.fit {
        cfg.order = f.order.unwrap_or(cfg.order);
        cfg.samples = f.samples.unwrap_or(cfg.samples);
        cfg.r_max = f.r_max;
    }
    if cfg.order < 6 {
        return Err(Failure::input(anyhow::anyhow!("analysis.fit.order must be at least 6")));
    }
    let dirs = sample_directions(l.metric.as_ref(), &p, a.directions.unwrap_or(6))?;
    // finitely smooth charts still get fitted coefficients
    let (bundle, note) = match curvature(l.metric.as_ref(), &p, 4) {
        Ok(b) => (Some(b), None),
        Err(e @ GeometryError::NonAnalytic { .. }) => (None, Some(format!("no curvature expansion: {e}"))),
        Err(e) => return Err(e.into()),
    };
    let mut rows = Vec::with_capacity(dirs.len());
    let mut r_max = 0.0;
    for d in &dirs {
        let h = match &bundle {
            Some(b) => Some(density_coefficients_from(b, d)?.h[2..=6].to_vec()),
            None => None,
        };
        let f = fitted_coefficients(l.metric.as_ref(), &p, d, &cfg)?;
        r_max = f.r_max;
        let fitted_h = f.fit.coefficients[2..].to_vec();
        let residuals = h
            .as_ref()
            .map(|h| h.iter().zip(&fitted_h).map(|(x, y)| (x - y).abs()).collect());
        rows.push(DirectionExpansion {
            direction: d.clone(),
            h,
            fitted_h,
            residuals,
            fit_residual_rms: f.fit.residual_rms,
            fit_residual_max: f.fit.residual_max,
            fit_condition: f.fit.condition,
            contamination: f.contamination,
        });
    }
    let mut table = Table::new("coefficients", &["k", "direction", "h", "fitted_h"]);
    for k in 2..=cfg.order {
        for (i, row) in rows.iter().enumerate() {
            let h = row.h.as_ref().and_then(|h| h.get(k - 2).copied()).unwrap_or(f64::NAN);
            table.rows.push(vec![Cell::Index(k), Cell::Index(i), Cell::Float(h), Cell::Float(row.fitted_h[k - 2])]);
        }
    }
    let max_residual = bundle.as_ref().map(|_| {
        rows.iter()
            .flat_map(|r| r.residuals.iter().flatten().copied())
            .fold(0.0, f64::max)
    });
    let report = ExpandReport {
        command: "expand",
        metric: l.name,
        center: p,
        fit_order: cfg.order,
        fit_samples: cfg.samples,
        fit_r_max: r_max,
        directions: rows,
        max_residual,
        note,
    };
    Ok(Outcome { json: to_json(&report).map_err(Failure::computation)?, tables: vec![table], exit: EXIT_OK })
}

#[derive(Serialize)]
struct DensityCheck {
    /// Radii in the deformed metric.
    radii: Vec<f64>,
    /// The matching base radii `r(ř)`.
    base_radii: Vec<f64>,
    directions: usize,
    /// Largest `|Θ_{g_ψ}(shot) - ψ^{1-m} Θ_g(r(ř))|`.
    law_gap: f64,
    /// Same, relative to the shot value.
    law_gap_relative: f64,
}

#[derive(Serialize)]
struct Triviality {
    normalization: Normalization,
    /// Radius the normalized density is divided by: the base radius `r` or the new radius `ř`.
    radius: &'static str,
    /// Largest `|Θ_{g_ψ}/ρ^{m-1} - 1|` over the shot samples.
    max_defect: f64,
    /// Largest `|ψ - ψ_closed|` on `[0, r_max]` when a closed form is known.
    closed_form_gap: Option<f64>,
}

#[derive(Serialize)]
struct DeformReport {
    command: &'static str,
    base: String,
    metric: String,
    psi: RadialFunction,
    r_max: f64,
    r_check_max: f64,
    density: DensityCheck,
    triviality: Option<Triviality>,
    curvature: CurvatureSummary,
    harmonic_at_origin: HarmonicityReport,
    blowup: Option<BlowupReport>,
}

fn default_r_max(base: &dyn ChartMetric, psi: &RadialFunction) -> f64 {
    let mut r = base.injectivity_radius(&vec![0.0; base.dim()]).map_or(3.0, |i| 0.95 * i);
    let t = psi.t_limit();
    if t.is_finite() {
        r = r.min(t.sqrt());
    }
    r
}

pub fn cmd_deform(manifest: &Manifest) -> CmdResult<Outcome> {
    let spec = manifest
        .deform
        .as_ref()
        .ok_or_else(|| Failure::input(anyhow::anyhow!("deform needs a 'deform' block")))?;
    let l = load(manifest)?;
    let psi = l.psi.clone().expect("deformation present");
    let a = &manifest.analysis;
    let m = l.base.dim();
    let origin = vec![0.0; m];
    let r_max = a.r_max.unwrap_or_else(|| default_r_max(l.base.as_ref(), &psi));
    let rep = reparametrize(&psi, r_max)?;
    let radii = match &a.radii {
        Some(r) => {
            if r[r.len() - 1] > rep.r_check_max {
                return Err(Failure::input(anyhow::anyhow!(
                    "radius {} exceeds the deformed range {}",
                    r[r.len() - 1],
                    rep.r_check_max
                )));
            }
            r.clone()
        }
        None => (1..=6).map(|i| 0.15 * i as f64 * rep.r_check_max).collect(),
    };
    let base_radii = radii.iter().map(|&rc| rep.inverse(rc)).collect::<Result<Vec<_>, _>>()?;
    let ndir = a.directions.unwrap_or(4);
    let shoot = ShootConfig::default();
    let base_dirs = sample_directions(l.base.as_ref(), &origin, ndir)?;
    let def_dirs = sample_directions(l.metric.as_ref(), &origin, ndir)?;
    let base_prof = density_profile(l.base.as_ref(), &origin, &base_dirs, &base_radii, &shoot)?;
    let def_prof = density_profile(l.metric.as_ref(), &origin, &def_dirs, &radii, &shoot)?;

    let mut base_table = Table::new("density_base", &["radius", "direction", "theta"]);
    let mut def_table = Table::new("density_deformed", &["radius", "direction", "theta"]);
    let (mut gap, mut gap_rel, mut defect) = (0.0f64, 0.0f64, 0.0f64);
    let normalization = match &spec.psi {
        PsiSpec::TrivialDensity { normalization, .. } => Some(*normalization),
        _ => None,
    };
    for i in 0..radii.len() {
        let r = base_radii[i];
        let factor = psi.eval(r * r).powi(1 - m as i32);
        for d in 0..ndir {
            let tb = base_prof.samples[d][i].theta;
            let td = def_prof.samples[d][i].theta;
            base_table.rows.push(vec![Cell::Float(r), Cell::Index(d), Cell::Float(tb)]);
            def_table.rows.push(vec![Cell::Float(radii[i]), Cell::Index(d), Cell::Float(td)]);
            let g = (td - factor * tb).abs();
            gap = gap.max(g);
            gap_rel = gap_rel.max(g / td.abs());
            if let Some(n) = normalization {
                let rho = match n {
                    Normalization::RadialFactor => r,
                    Normalization::GeodesicRadius => radii[i],
                };
                defect = defect.max((td / rho.powi(m as i32 - 1) - 1.0).abs());
            }
        }
    }

    let fs_dim = match manifest.metric {
        MetricSpec::FubiniStudy { complex_dim, chart: FubiniStudyChart::Normal } => Some(2 * complex_dim),
        _ => None,
    };
    let triviality = normalization.map(|n| Triviality {
        normalization: n,
        radius: match n {
            Normalization::RadialFactor => "r",
            Normalization::GeodesicRadius => "r_check",
        },
        max_defect: defect,
        closed_form_gap: match (n, fs_dim) {
            (Normalization::RadialFactor, Some(mm)) => {
                let closed = fubini_study_factor(mm);
                Some(
                    (0..=200)
                        .map(|k| {
                            let t = (r_max * k as f64 / 200.0).powi(2);
                            (psi.eval(t) - closed.eval(t)).abs()
                        })
                        .fold(0.0, f64::max),
                )
            }
            _ => None,
        },
    });

    let points = match &a.points {
        Some(p) => p.clone(),
        None => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut p1 = origin.clone();
            p1[0] = 0.3 * r_max;
            let mut p2 = origin.clone();
            p2[0] = 0.6 * r_max * s;
            p2[1] = 0.6 * r_max * s;
            vec![origin.clone(), p1, p2]
        }
    };
    let tol = a.tolerance.unwrap_or(1e-6);
    let curv = curvature_summary(l.metric.as_ref(), &points, 32, tol)?;
    let hcfg = HarmonicConfig { radii: radii.clone(), directions: ndir.max(8), tolerance: tol, shoot };
    let (harmonic, _) = centrally_harmonic_test(l.metric.as_ref(), &origin, &hcfg);

    let blowup = match &a.blowup {
        None => None,
        Some(b) => {
            let mm = fs_dim.filter(|&mm| mm >= 4).ok_or_else(|| {
                Failure::input(anyhow::anyhow!(
                    "the blow-up analysis needs a fubini_study normal chart with complex_dim >= 2"
                ))
            })?;
            Some(completeness_and_blowup(mm, &log_samples(b.u_min, b.u_max, b.samples))?)
        }
    };

    let report = DeformReport {
        command: "deform",
        base: l.base.label(),
        metric: l.name,
        psi,
        r_max,
        r_check_max: rep.r_check_max,
        density: DensityCheck { radii, base_radii, directions: ndir, law_gap: gap, law_gap_relative: gap_rel },
        triviality,
        curvature: curv,
        harmonic_at_origin: harmonic,
        blowup,
    };
    Ok(Outcome {
        json: to_json(&report).map_err(Failure::computation)?,
        tables: vec![base_table, def_table],
        exit: EXIT_OK,
    })
}
