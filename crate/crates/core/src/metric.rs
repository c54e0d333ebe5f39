//! Analytic chart metrics and pointwise curvature.
//!
//! Conventions: `R(X,Y,Z,W) = g((∇_X∇_Y - ∇_Y∇_X - ∇_[X,Y])Z, W)`, so the unit
//! sphere has sectional curvature `+1`; `ρ_jk = g^{il} R_ijkl`; the Laplacian
//! is the positive one, `Δ⁰φ = -g^{ij} Hess_ij φ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};
use crate::jet::{Jet, MAX_DERIVATIVE_ORDER};

/// An analytic Riemannian metric on an open coordinate chart.
///
/// `components` receives one jet per coordinate and returns the `m * m`
/// components `g_ij` in row-major order. The input jets need not be the
/// coordinate variables themselves, which makes pullbacks a matter of passing
/// composed jets.
pub trait ChartMetric: Send + Sync {
    fn dim(&self) -> usize;

    fn in_domain(&self, x: &[f64]) -> bool;

    fn components(&self, x: &[Jet]) -> Vec<Jet>;

    /// Known lower bound for the injectivity radius at `x`.
    fn injectivity_radius(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// True when the chart is geodesic normal at the origin, i.e. `r_P(x) = |x|`.
    fn is_normal_chart(&self) -> bool {
        false
    }

    fn label(&self) -> String;
}

impl<T: ChartMetric + ?Sized> ChartMetric for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        (**self).in_domain(x)
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        (**self).components(x)
    }
    fn injectivity_radius(&self, x: &[f64]) -> Option<f64> {
        (**self).injectivity_radius(x)
    }
    fn is_normal_chart(&self) -> bool {
        (**self).is_normal_chart()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: ChartMetric + ?Sized> ChartMetric for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        (**self).in_domain(x)
    }
    fn components(&self, x: &[Jet]) -> Vec<Jet> {
        (**self).components(x)
    }
    fn injectivity_radius(&self, x: &[f64]) -> Option<f64> {
        (**self).injectivity_radius(x)
    }
    fn is_normal_chart(&self) -> bool {
        (**self).is_normal_chart()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// A scalar function on a chart, evaluated on jets.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: &[Jet]) -> Jet;
}

impl<F> ScalarField for F
where
    F: Fn(&[Jet]) -> Jet + Send + Sync,
{
    fn eval(&self, x: &[Jet]) -> Jet {
        self(x)
    }
}

/// Dense real tensor of shape `m^rank`, last index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dim: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Tensor {
            dim,
            rank,
            data: vec![0.0; dim.pow(rank as u32)],
        }
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Full contraction of the trailing `vectors.len()` indices with the given vectors.
    pub fn contract_tail(&self, vectors: &[&[f64]]) -> Tensor {
        let mut cur = self.data.clone();
        let mut rank = self.rank;
        for v in vectors.iter().rev() {
            let n = cur.len() / self.dim;
            let mut next = vec![0.0; n];
            for (i, out) in next.iter_mut().enumerate() {
                *out = (0..self.dim).map(|a| cur[i * self.dim + a] * v[a]).sum();
            }
            cur = next;
            rank -= 1;
        }
        Tensor {
            dim: self.dim,
            rank,
            data: cur,
        }
    }
}

fn check_point(metric: &dyn ChartMetric, x: &[f64]) -> Result<()> {
    if x.len() != metric.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: metric.dim(),
            got: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) || !metric.in_domain(x) {
        return Err(GeometryError::OutsideDomain { point: x.to_vec() });
    }
    Ok(())
}

/// Components of the metric at `x` as jets of the given order.
pub fn metric_jets(metric: &dyn ChartMetric, x: &[f64], order: usize) -> Result<Vec<Jet>> {
    check_point(metric, x)?;
    if order > MAX_DERIVATIVE_ORDER {
        return Err(GeometryError::OrderExceeded {
            requested: order,
            available: MAX_DERIVATIVE_ORDER,
        });
    }
    let g = metric.components(&Jet::seed(x, order));
    if g.len() != x.len() * x.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: x.len() * x.len(),
            got: g.len(),
        });
    }
    if !g.iter().all(Jet::is_finite) {
        return Err(GeometryError::NonAnalytic { point: x.to_vec() });
    }
    Ok(g)
}

fn values_matrix(m: usize, g: &[Jet]) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| 0.5 * (g[i * m + j].value() + g[j * m + i].value()))
}

fn invert_spd(x: &[f64], g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| GeometryError::DegenerateMetric {
            point: x.to_vec(),
            reason: "Cholesky factorization failed (metric not positive definite)".into(),
        })?;
    Ok(chol.inverse())
}

/// Metric matrix at `x`, checked positive definite.
pub fn metric_at(metric: &dyn ChartMetric, x: &[f64]) -> Result<DMatrix<f64>> {
    let g = metric_jets(metric, x, 0)?;
    let gm = values_matrix(x.len(), &g);
    invert_spd(x, &gm)?;
    Ok(gm)
}

/// `sqrt(g(v, v))`.
pub fn norm_at(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    v.dot(&(g * &v)).sqrt()
}

/// Metric, Christoffel symbols and (optionally) the lowered Riemann tensor at a
/// point, computed from second-order jets with plain floating point algebra.
/// This is the fast route used inside ODE right-hand sides.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    /// `gamma.get(&[i, j, k]) = Γ_ij^k`.
    pub gamma: Tensor,
    /// `R_ijkl`, present when requested.
    pub riemann: Option<Tensor>,
}

pub fn point_geometry(metric: &dyn ChartMetric, x: &[f64], with_curvature: bool) -> Result<PointGeometry> {
    let m = x.len();
    let order = if with_curvature { 2 } else { 1 };
    let gj = metric_jets(metric, x, order)?;
    let g = values_matrix(m, &gj);
    let ginv = invert_spd(x, &g)?;
    // dg[a][i][j] = ∂_a g_ij
    let mut dg = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            let grad = gj[i * m + j].gradient();
            for a in 0..m {
                dg[(a * m + i) * m + j] = grad[a];
            }
        }
    }
    let dgi = |a: usize, i: usize, j: usize| dg[(a * m + i) * m + j];
    // lowered Γ_ijl = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
    let mut low = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                low[(i * m + j) * m + l] = 0.5 * (dgi(i, j, l) + dgi(j, i, l) - dgi(l, i, j));
            }
        }
    }
    let mut gamma = Tensor::zeros(m, 3);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let s: f64 = (0..m).map(|l| ginv[(k, l)] * low[(i * m + j) * m + l]).sum();
                gamma.data[(i * m + j) * m + k] = s;
            }
        }
    }
    let riemann = if with_curvature {
        // ddg[((a*m+b)*m+i)*m+j] = ∂_a∂_b g_ij
        let mut ddg = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                let jet = &gj[i * m + j];
                for a in 0..m {
                    for b in a..m {
                        let v = jet.partial(&[a, b]);
                        ddg[((a * m + b) * m + i) * m + j] = v;
                        ddg[((b * m + a) * m + i) * m + j] = v;
                    }
                }
            }
        }
        let dd = |a: usize, b: usize, i: usize, j: usize| ddg[((a * m + b) * m + i) * m + j];
        let lw = |i: usize, j: usize, l: usize| low[(i * m + j) * m + l];
        let mut r = Tensor::zeros(m, 4);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = 0.5
                            * (dd(i, k, j, l) - dd(i, l, j, k) - dd(j, k, i, l) + dd(j, l, i, k));
                        for q in 0..m {
                            for s in 0..m {
                                v += ginv[(q, s)] * (lw(j, l, q) * lw(i, k, s) - lw(i, l, q) * lw(j, k, s));
                            }
                        }
                        r.data[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
        Some(r)
    } else {
        None
    };
    Ok(PointGeometry {
        g,
        ginv,
        gamma,
        riemann,
    })
}

/// Christoffel symbols `Γ_ij^k` at `x`, indexed `[i, j, k]`.
pub fn christoffels(metric: &dyn ChartMetric, x: &[f64]) -> Result<Tensor> {
    Ok(point_geometry(metric, x, false)?.gamma)
}

/// Curvature data at a point, including iterated covariant derivatives of `R`.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// `Γ_ij^k` indexed `[i, j, k]`.
    pub christoffels: Tensor,
    /// `R_ijkl`.
    pub riemann: Tensor,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// `nabla_r[k-1]` holds `∇ᵏR` with the differentiation indices appended last:
    /// `(∇ᵏR)_{ijkl;a_1...a_k}`.
    pub nabla_r: Vec<Tensor>,
}

impl CurvatureBundle {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// `∇ᵏR` for `k >= 0` (`k = 0` is `R` itself).
    pub fn nabla(&self, k: usize) -> Result<&Tensor> {
        if k == 0 {
            return Ok(&self.riemann);
        }
        self.nabla_r.get(k - 1).ok_or(GeometryError::OrderExceeded {
            requested: k,
            available: self.nabla_r.len(),
        })
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.dim();
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += self.metric[(i, j)] * u[i] * v[j];
            }
        }
        s
    }
}

fn jet_matmul(m: usize, a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = &a[i * m] * &b[j];
            for k in 1..m {
                acc += &(&a[i * m + k] * &b[k * m + j]);
            }
            out.push(acc);
        }
    }
    out
}

/// Inverse of a matrix of jets via the Neumann series about its constant part.
fn jet_inverse(m: usize, g: &[Jet], g0inv: &DMatrix<f64>) -> Vec<Jet> {
    let order = g[0].order();
    let space = g[0].space().clone();
    let c = |v: f64| Jet::constant(&space, order, v);
    let g0inv_j: Vec<Jet> = (0..m * m).map(|i| c(g0inv[(i / m, i % m)])).collect();
    // N = -G0⁻¹ E, E = g - G0
    let e: Vec<Jet> = g
        .iter()
        .map(|j| {
            let mut j = j.clone();
            j.coeffs_mut()[0] = 0.0;
            j
        })
        .collect();
    let mut n = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = c(0.0);
            for k in 0..m {
                acc += &(&e[k * m + j] * (-g0inv[(i, k)]));
            }
            n.push(acc);
        }
    }
    let mut acc = g0inv_j.clone();
    for _ in 0..order {
        let prod = jet_matmul(m, &n, &acc);
        acc = prod.iter().zip(&g0inv_j).map(|(p, q)| p + q).collect();
    }
    acc
}

fn tensor_values(m: usize, rank: usize, jets: &[Jet]) -> Tensor {
    Tensor {
        dim: m,
        rank,
        data: jets.iter().map(Jet::value).collect(),
    }
}

/// Full curvature bundle at `x`, with `∇ᵏR` for `k = 1..=k_max`.
pub fn curvature(metric: &dyn ChartMetric, x: &[f64], k_max: usize) -> Result<CurvatureBundle> {
    let m = x.len();
    let big_k = k_max + 2;
    if big_k > MAX_DERIVATIVE_ORDER {
        return Err(GeometryError::OrderExceeded {
            requested: big_k,
            available: MAX_DERIVATIVE_ORDER,
        });
    }
    let g = metric_jets(metric, x, big_k)?;
    let g0 = values_matrix(m, &g);
    let g0inv = invert_spd(x, &g0)?;
    let ginv = jet_inverse(m, &g, &g0inv);

    // lowered Christoffels and Γ_ij^k, order K-1
    let dg: Vec<Vec<Jet>> = (0..m)
        .map(|a| g.iter().map(|j| j.derivative(a)).collect())
        .collect();
    let mut low = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                low.push((&dg[i][j * m + l] + &dg[j][i * m + l] - &dg[l][i * m + j]) * 0.5);
            }
        }
    }
    let mut gam = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mut acc = &ginv[k * m] * &low[(i * m + j) * m];
                for l in 1..m {
                    acc += &(&ginv[k * m + l] * &low[(i * m + j) * m + l]);
                }
                gam.push(acc);
            }
        }
    }
    let gidx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;

    // R_ijk^l, order K-2
    let dgam: Vec<Vec<Jet>> = (0..m)
        .map(|a| gam.iter().map(|j| j.derivative(a)).collect())
        .collect();
    let mut rup = Vec::with_capacity(m.pow(4));
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let mut v = &dgam[i][gidx(j, k, l)] - &dgam[j][gidx(i, k, l)];
                    for p in 0..m {
                        v += &(&gam[gidx(j, k, p)] * &gam[gidx(i, p, l)]);
                        v -= &(&gam[gidx(i, k, p)] * &gam[gidx(j, p, l)]);
                    }
                    rup.push(v);
                }
            }
        }
    }
    // R_ijkl = R_ijk^p g_pl
    let mut rlow = Vec::with_capacity(m.pow(4));
    for ijk in 0..m * m * m {
        for l in 0..m {
            let mut acc = &rup[ijk * m] * &g[l];
            for p in 1..m {
                acc += &(&rup[ijk * m + p] * &g[p * m + l]);
            }
            rlow.push(acc);
        }
    }

    let riemann = tensor_values(m, 4, &rlow);
    let mut nabla_r = Vec::with_capacity(k_max);
    let mut cur = rlow;
    let mut rank = 4;
    for level in 1..=k_max {
        let out_order = big_k - 2 - level;
        let gam_t: Vec<Jet> = gam.iter().map(|j| j.truncate(out_order)).collect();
        let cur_t: Vec<Jet> = cur.iter().map(|j| j.truncate(out_order)).collect();
        let n_in = cur.len();
        let mut next = Vec::with_capacity(n_in * m);
        let mut digits = vec![0usize; rank];
        let mut pow = vec![1usize; rank];
        for s in (0..rank.saturating_sub(1)).rev() {
            pow[s] = pow[s + 1] * m;
        }
        for idx in 0..n_in {
            let mut rem = idx;
            for s in (0..rank).rev() {
                digits[s] = rem % m;
                rem /= m;
            }
            for a in 0..m {
                let mut v = cur[idx].derivative(a);
                for s in 0..rank {
                    let base = idx - digits[s] * pow[s];
                    for p in 0..m {
                        let c = &gam_t[gidx(a, digits[s], p)];
                        if c.coeffs().iter().all(|&z| z == 0.0) {
                            continue;
                        }
                        v -= &(c * &cur_t[base + p * pow[s]]);
                    }
                }
                next.push(v);
            }
        }
        rank += 1;
        nabla_r.push(tensor_values(m, rank, &next));
        cur = next;
    }

    let mut ricci = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut s = 0.0;
            for i in 0..m {
                for l in 0..m {
                    s += g0inv[(i, l)] * riemann.get(&[i, j, k, l]);
                }
            }
            ricci[(j, k)] = s;
        }
    }
    let ricci = (&ricci + ricci.transpose()) * 0.5;
    let scalar = (&g0inv * &ricci).trace();
    Ok(CurvatureBundle {
        point: x.to_vec(),
        metric: g0,
        metric_inv: g0inv,
        christoffels: tensor_values(m, 3, &gam),
        riemann,
        ricci,
        scalar,
        nabla_r,
    })
}

/// Ricci tensor `ρ_jk = g^{il} R_ijkl` from a lowered Riemann tensor.
pub fn ricci_from(riemann: &Tensor, ginv: &DMatrix<f64>) -> DMatrix<f64> {
    let m = riemann.dim;
    DMatrix::from_fn(m, m, |j, k| {
        let mut s = 0.0;
        for i in 0..m {
            for l in 0..m {
                s += ginv[(i, l)] * riemann.get(&[i, j, k, l]);
            }
        }
        s
    })
}

/// `R(u, v, v, u) / (|u|²|v|² - g(u,v)²)`.
pub fn sectional_curvature(bundle: &CurvatureBundle, u: &[f64], v: &[f64]) -> Result<f64> {
    let m = bundle.dim();
    if u.len() != m || v.len() != m {
        return Err(GeometryError::DimensionMismatch {
            expected: m,
            got: u.len().min(v.len()),
        });
    }
    let uu = bundle.inner(u, u);
    let vv = bundle.inner(v, v);
    let uv = bundle.inner(u, v);
    let den = uu * vv - uv * uv;
    if !(den > 1e-14 * uu * vv) {
        return Err(GeometryError::DegeneratePlane);
    }
    let num = bundle.riemann.contract_tail(&[u, v, v, u]).data[0];
    Ok(num / den)
}

/// Frobenius norm of `ρ - (scal/m) g` in a g-orthonormal frame.
pub fn einstein_defect(bundle: &CurvatureBundle) -> f64 {
    let m = bundle.dim();
    let traceless = &bundle.ricci - &bundle.metric * (bundle.scalar / m as f64);
    let l = bundle
        .metric
        .clone()
        .cholesky()
        .expect("bundle metric is positive definite")
        .l();
    let linv = l.try_inverse().expect("Cholesky factor is invertible");
    (&linv * traceless * linv.transpose()).norm()
}

/// Value, gradient and coordinate second derivatives of a scalar field.
pub fn scalar_jet(phi: &dyn ScalarField, x: &[f64], order: usize) -> Result<Jet> {
    let j = phi.eval(&Jet::seed(x, order));
    if !j.is_finite() {
        return Err(GeometryError::NonAnalytic { point: x.to_vec() });
    }
    Ok(j)
}

/// Covariant Hessian `∂_i∂_jφ - Γ_ij^k ∂_kφ`.
pub fn hessian(metric: &dyn ChartMetric, phi: &dyn ScalarField, x: &[f64]) -> Result<DMatrix<f64>> {
    let gamma = christoffels(metric, x)?;
    let j = scalar_jet(phi, x, 2)?;
    Ok(hessian_from(&gamma, &j))
}

pub(crate) fn hessian_from(gamma: &Tensor, phi: &Jet) -> DMatrix<f64> {
    let m = gamma.dim;
    let grad = phi.gradient();
    DMatrix::from_fn(m, m, |i, j| {
        let mut h = phi.partial(&[i, j]);
        for (k, gk) in grad.iter().enumerate() {
            h -= gamma.get(&[i, j, k]) * gk;
        }
        h
    })
}

/// Positive Laplacian `Δ⁰φ = -g^{ij} Hess_ij φ`.
pub fn laplacian(metric: &dyn ChartMetric, phi: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let geo = point_geometry(metric, x, false)?;
    let j = scalar_jet(phi, x, 2)?;
    let h = hessian_from(&geo.gamma, &j);
    Ok(-(&geo.ginv * h).trace())
}

/// Finite-difference oracles used by tests and the acceptance suite.
pub mod fd {
    use super::*;

    /// O(h⁴) central difference of `f` along coordinate `a`.
    pub fn central<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: &F, x: &[f64], a: usize, h: f64) -> Result<Vec<f64>> {
        let eval = |s: f64| {
            let mut y = x.to_vec();
            y[a] += s * h;
            f(&y)
        };
        let (p1, m1, p2, m2) = (eval(1.0)?, eval(-1.0)?, eval(2.0)?, eval(-2.0)?);
        Ok((0..p1.len())
            .map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h))
            .collect())
    }

    fn metric_values(metric: &dyn ChartMetric, y: &[f64]) -> Result<Vec<f64>> {
        Ok(metric_at(metric, y)?.transpose().as_slice().to_vec())
    }

    /// Christoffels from finite differences of metric values (Koszul formula).
    pub fn christoffels(metric: &dyn ChartMetric, x: &[f64], h: f64) -> Result<Tensor> {
        let m = x.len();
        let g = metric_at(metric, x)?;
        let ginv = g.clone().try_inverse().ok_or(GeometryError::DegenerateMetric {
            point: x.to_vec(),
            reason: "singular".into(),
        })?;
        let f = |y: &[f64]| metric_values(metric, y);
        let dg: Vec<Vec<f64>> = (0..m).map(|a| central(&f, x, a, h)).collect::<Result<_>>()?;
        let mut out = Tensor::zeros(m, 3);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += 0.5
                            * ginv[(k, l)]
                            * (dg[i][j * m + l] + dg[j][i * m + l] - dg[l][i * m + j]);
                    }
                    out.set(&[i, j, k], s);
                }
            }
        }
        Ok(out)
    }

    /// Lowered Riemann tensor from finite differences of [`christoffels`](super::christoffels).
    pub fn riemann(metric: &dyn ChartMetric, x: &[f64], h: f64) -> Result<Tensor> {
        let m = x.len();
        let gam = super::christoffels(metric, x)?;
        let g = metric_at(metric, x)?;
        let f = |y: &[f64]| Ok(super::christoffels(metric, y)?.data);
        let dgam: Vec<Vec<f64>> = (0..m).map(|a| central(&f, x, a, h)).collect::<Result<_>>()?;
        let gi = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        let mut rup = Tensor::zeros(m, 4);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = dgam[i][gi(j, k, l)] - dgam[j][gi(i, k, l)];
                        for p in 0..m {
                            v += gam.data[gi(j, k, p)] * gam.data[gi(i, p, l)]
                                - gam.data[gi(i, k, p)] * gam.data[gi(j, p, l)];
                        }
                        rup.set(&[i, j, k, l], v);
                    }
                }
            }
        }
        let mut r = Tensor::zeros(m, 4);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let v: f64 = (0..m).map(|p| rup.get(&[i, j, k, p]) * g[(p, l)]).sum();
                        r.set(&[i, j, k, l], v);
                    }
                }
            }
        }
        Ok(r)
    }

    /// Covariant derivative `∇R` from finite differences of the point Riemann tensor.
    pub fn nabla_riemann(metric: &dyn ChartMetric, x: &[f64], h: f64) -> Result<Tensor> {
        let m = x.len();
        let geo = point_geometry(metric, x, true)?;
        let r = geo.riemann.unwrap();
        let f = |y: &[f64]| Ok(point_geometry(metric, y, true)?.riemann.unwrap().data);
        let dr: Vec<Vec<f64>> = (0..m).map(|a| central(&f, x, a, h)).collect::<Result<_>>()?;
        let mut out = Tensor::zeros(m, 5);
        let mut idx = [0usize; 4];
        for flat in 0..m.pow(4) {
            let mut rem = flat;
            for s in (0..4).rev() {
                idx[s] = rem % m;
                rem /= m;
            }
            for a in 0..m {
                let mut v = dr[a][flat];
                for s in 0..4 {
                    for p in 0..m {
                        let mut j = idx;
                        j[s] = p;
                        v -= geo.gamma.get(&[a, idx[s], p]) * r.get(&j);
                    }
                }
                out.data[flat * m + a] = v;
            }
        }
        Ok(out)
    }

    /// Covariant Hessian from finite differences of scalar values.
    pub fn hessian(metric: &dyn ChartMetric, phi: &dyn ScalarField, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let m = x.len();
        let val = |y: &[f64]| Ok(vec![scalar_jet(phi, y, 0)?.value()]);
        let grad = |y: &[f64]| -> Result<Vec<f64>> {
            (0..m).map(|a| Ok(central(&val, y, a, h)?[0])).collect()
        };
        let g0 = grad(x)?;
        let dgrad: Vec<Vec<f64>> = (0..m).map(|a| central(&grad, x, a, h)).collect::<Result<_>>()?;
        let gam = christoffels(metric, x, h)?;
        Ok(DMatrix::from_fn(m, m, |i, j| {
            let sym = 0.5 * (dgrad[i][j] + dgrad[j][i]);
            sym - (0..m).map(|k| gam.get(&[i, j, k]) * g0[k]).sum::<f64>()
        }))
    }
}
