//! Truncated univariate power series.
//!
//! [`TruncatedSeries`] stores `c_0 .. c_N` and every operation is exact up to
//! `r^N`. The coefficient field is generic: [`BigRational`] for exact work and
//! `f64` for numerically sampled data.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{GeometryError, Result};

/// Field of series coefficients.
pub trait Coefficient:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(n: i64) -> Self;
    /// Square root when it exists in the field.
    fn sqrt_exact(&self) -> Option<Self>;
    fn is_positive_value(&self) -> bool;
}

impl Coefficient for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn sqrt_exact(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }
    fn is_positive_value(&self) -> bool {
        *self > 0.0
    }
}

impl Coefficient for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn sqrt_exact(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        (&n * &n == *self.numer() && &d * &d == *self.denom()).then(|| BigRational::new(n, d))
    }
    fn is_positive_value(&self) -> bool {
        self.is_positive()
    }
}

/// Power series `sum_{n <= N} c_n r^n` with truncation order `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries<C> {
    coeffs: Vec<C>,
}

pub type RationalSeries = TruncatedSeries<BigRational>;

impl<C: Coefficient> TruncatedSeries<C> {
    /// Builds a series of truncation order `order`; missing coefficients are zero,
    /// extra ones are dropped.
    pub fn new(mut coeffs: Vec<C>, order: usize) -> Self {
        coeffs.resize(order + 1, C::zero());
        TruncatedSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(Vec::new(), order)
    }

    pub fn constant(c: C, order: usize) -> Self {
        Self::new(vec![c], order)
    }

    /// The monomial `c r^k`.
    pub fn monomial(c: C, k: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(self.coeffs[..=order.min(self.order())].to_vec(), order)
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return Err(GeometryError::TruncationMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        Ok(TruncatedSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        Ok(TruncatedSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let n = self.order();
        let mut out = vec![C::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=n - i].iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Ok(TruncatedSeries { coeffs: out })
    }

    pub fn scale(&self, c: &C) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// Formal inverse; requires a nonzero constant term.
    pub fn reciprocal(&self) -> Result<Self> {
        let c0 = self.coeffs[0].clone();
        if c0.is_zero() {
            return Err(GeometryError::Series(
                "reciprocal of a series with zero constant term".into(),
            ));
        }
        let n = self.order();
        let mut inv = vec![C::zero(); n + 1];
        inv[0] = C::one() / c0.clone();
        for k in 1..=n {
            let mut acc = C::zero();
            for j in 1..=k {
                acc = acc + self.coeffs[j].clone() * inv[k - j].clone();
            }
            inv[k] = -acc / c0.clone();
        }
        Ok(TruncatedSeries { coeffs: inv })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.reciprocal()?)
    }

    /// Square root with positive constant term.
    pub fn sqrt(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if !c0.is_positive_value() {
            return Err(GeometryError::Series(
                "square root needs a positive constant term".into(),
            ));
        }
        let s0 = c0.sqrt_exact().ok_or_else(|| {
            GeometryError::Series("constant term has no square root in the coefficient field".into())
        })?;
        let n = self.order();
        let two = C::from_int(2);
        let mut s = vec![C::zero(); n + 1];
        s[0] = s0.clone();
        for k in 1..=n {
            let mut acc = self.coeffs[k].clone();
            for j in 1..k {
                acc = acc - s[j].clone() * s[k - j].clone();
            }
            s[k] = acc / (two.clone() * s0.clone());
        }
        Ok(TruncatedSeries { coeffs: s })
    }

    /// Formal derivative; the truncation order drops by one.
    pub fn derive(&self) -> Self {
        let n = self.order();
        if n == 0 {
            return Self::zero(0);
        }
        TruncatedSeries {
            coeffs: (1..=n)
                .map(|k| self.coeffs[k].clone() * C::from_int(k as i64))
                .collect(),
        }
    }

    /// Antiderivative with zero constant; the truncation order rises by one.
    pub fn integrate(&self) -> Self {
        let mut coeffs = vec![C::zero()];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c.clone() / C::from_int(k as i64 + 1)),
        );
        TruncatedSeries { coeffs }
    }

    /// `self(inner(r))`; `inner` must have zero constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.check_order(inner)?;
        if !inner.coeffs[0].is_zero() {
            return Err(GeometryError::Series(
                "composition needs an inner series with zero constant term".into(),
            ));
        }
        let n = self.order();
        let mut acc = Self::constant(self.coeffs[n].clone(), n);
        for k in (0..n).rev() {
            acc = acc.mul(inner)?;
            acc.coeffs[0] = acc.coeffs[0].clone() + self.coeffs[k].clone();
        }
        Ok(acc)
    }

    /// Divides by `r^k`; the first `k` coefficients must vanish. The order drops by `k`.
    pub fn shift_down(&self, k: usize) -> Result<Self> {
        if k > self.order() {
            return Err(GeometryError::Series(format!(
                "cannot divide an order-{} series by r^{k}",
                self.order()
            )));
        }
        if self.coeffs[..k].iter().any(|c| !c.is_zero()) {
            return Err(GeometryError::Series(format!(
                "series is not divisible by r^{k}"
            )));
        }
        Ok(TruncatedSeries {
            coeffs: self.coeffs[k..].to_vec(),
        })
    }

    /// Multiplies by `r^k`; the order rises by `k`.
    pub fn shift_up(&self, k: usize) -> Self {
        let mut coeffs = vec![C::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        TruncatedSeries { coeffs }
    }

    pub fn eval(&self, r: &C) -> C {
        self.coeffs
            .iter()
            .rev()
            .fold(C::zero(), |acc, c| acc * r.clone() + c.clone())
    }
}

/// Power-series coefficients (in `t`) of `sin(sqrt t)/sqrt t`, to `n` terms.
pub fn sinc_sqrt_coeffs(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut term = 1.0;
    for k in 0..n {
        if k > 0 {
            term /= -((2 * k) as f64) * ((2 * k + 1) as f64);
        }
        out.push(term);
    }
    out
}

/// Power-series coefficients (in `t`) of `cos(sqrt t)`, to `n` terms.
pub fn cos_sqrt_coeffs(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut term = 1.0;
    for k in 0..n {
        if k > 0 {
            term /= -((2 * k - 1) as f64) * ((2 * k) as f64);
        }
        out.push(term);
    }
    out
}

/// Result of fitting `Theta / r^(m-1) - 1 = sum_{k>=2} H_k r^k`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RadialFit {
    /// `coefficients[k] = H_k`; entries 0 and 1 are zero.
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub condition: f64,
}

/// Largest condition number accepted by [`fit_radial_expansion`].
pub const MAX_FIT_CONDITION: f64 = 1e13;

/// Least-squares fit of the normalized density `Theta/r^(m-1) - 1` by `H_2 r^2 + ... + H_order r^order`.
///
/// `samples` are `(r, Theta)` pairs at distinct positive radii; at least
/// `2 * order` of them are required.
pub fn fit_radial_expansion(samples: &[(f64, f64)], m: usize, order: usize) -> Result<RadialFit> {
    if order < 2 {
        return Err(GeometryError::FitFailed("order must be at least 2".into()));
    }
    let mut radii: Vec<f64> = samples.iter().map(|s| s.0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.len() < 2 * order || radii[0] <= 0.0 {
        return Err(GeometryError::FitFailed(format!(
            "need at least {} distinct positive radii, got {}",
            2 * order,
            radii.len()
        )));
    }
    let r_max = *radii.last().unwrap();
    let ncols = order - 1;
    let mut a = DMatrix::<f64>::zeros(samples.len(), ncols);
    let mut y = DVector::<f64>::zeros(samples.len());
    for (i, &(r, theta)) in samples.iter().enumerate() {
        let s = r / r_max;
        for k in 2..=order {
            a[(i, k - 2)] = s.powi(k as i32);
        }
        y[i] = theta / r.powi(m as i32 - 1) - 1.0;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_FIT_CONDITION {
        return Err(GeometryError::IllConditioned { condition });
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|e| GeometryError::FitFailed(e.to_string()))?;
    let resid = &a * &beta - &y;
    let mut coefficients = vec![0.0; order + 1];
    for k in 2..=order {
        coefficients[k] = beta[k - 2] / r_max.powi(k as i32);
    }
    Ok(RadialFit {
        coefficients,
        residual_rms: (resid.norm_squared() / samples.len() as f64).sqrt(),
        residual_max: resid.amax(),
        condition,
    })
}

/// `n` radii spaced geometrically in `[r_min, r_max]`.
pub fn geometric_radii(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && r_min > 0.0 && r_max > r_min);
    let q = (r_max / r_min).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| r_min * q.powi(i as i32)).collect()
}

/// Exact rational from a numerator/denominator pair.
pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rs(c: &[(i64, i64)], order: usize) -> RationalSeries {
        TruncatedSeries::new(c.iter().map(|&(n, d)| rational(n, d)).collect(), order)
    }

    #[test]
    fn geometric_series_reciprocal() {
        let s = rs(&[(1, 1), (1, 1)], 3);
        let inv = s.reciprocal().unwrap();
        assert_eq!(inv, rs(&[(1, 1), (-1, 1), (1, 1), (-1, 1)], 3));
    }

    #[test]
    fn factored_reciprocal_of_r2_plus_perturbation() {
        // (r^2 + 2b r^8)^{-1} = r^{-2} (1 + 2b r^6)^{-1}
        let b = rational(3, 7);
        let n = 8;
        let f = TruncatedSeries::new(vec![], n)
            .add(&TruncatedSeries::monomial(rational(1, 1), 2, n))
            .unwrap()
            .add(&TruncatedSeries::monomial(b.clone() * rational(2, 1), 8, n))
            .unwrap();
        let unit = f.shift_down(2).unwrap();
        let inv = unit.reciprocal().unwrap();
        assert_eq!(inv.coeff(0), rational(1, 1));
        assert_eq!(inv.coeff(6), -(b * rational(2, 1)));
        assert!(inv.coeff(3).is_zero());
    }

    #[test]
    fn errors_on_bad_inputs() {
        let s = rs(&[(0, 1), (1, 1)], 3);
        assert!(s.reciprocal().is_err());
        assert!(s.sqrt().is_err());
        let t = rs(&[(1, 1)], 4);
        assert!(matches!(
            s.mul(&t),
            Err(GeometryError::TruncationMismatch { .. })
        ));
        assert!(t.truncate(3).compose(&rs(&[(1, 1), (1, 1)], 3)).is_err());
    }

    #[test]
    fn sqrt_of_perfect_square() {
        let s = rs(&[(1, 1), (1, 1)], 5);
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.sqrt().unwrap(), s);
        let f = TruncatedSeries::new(vec![4.0, 1.0], 6);
        let r = f.sqrt().unwrap();
        let back = r.mul(&r).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn compose_exp_like() {
        // 1/(1-u) with u = r + r^2 -> coefficients are Fibonacci numbers
        let outer = rs(&[(1, 1); 7], 6);
        let inner = rs(&[(0, 1), (1, 1), (1, 1)], 6);
        let c = outer.compose(&inner).unwrap();
        let fib = [1, 1, 2, 3, 5, 8, 13];
        for (k, f) in fib.iter().enumerate() {
            assert_eq!(c.coeff(k), rational(*f, 1));
        }
    }

    #[test]
    fn sinc_and_cos_series() {
        let s = sinc_sqrt_coeffs(30);
        let c = cos_sqrt_coeffs(30);
        let t: f64 = 2.3;
        let sv: f64 = s.iter().rev().fold(0.0, |a, k| a * t + k);
        let cv: f64 = c.iter().rev().fold(0.0, |a, k| a * t + k);
        assert!((sv - t.sqrt().sin() / t.sqrt()).abs() < 1e-15);
        assert!((cv - t.sqrt().cos()).abs() < 1e-15);
    }

    #[test]
    fn fit_flat_density_is_zero() {
        let radii = geometric_radii(0.05, 1.0, 30);
        let samples: Vec<_> = radii.iter().map(|&r| (r, r.powi(3))).collect();
        let fit = fit_radial_expansion(&samples, 4, 8).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn fit_recovers_polynomial_density() {
        let h = [0.0, 0.0, -0.25, 0.125, 0.03, -0.01, 0.002];
        let radii = geometric_radii(0.05, 0.8, 40);
        let samples: Vec<_> = radii
            .iter()
            .map(|&r| {
                let p: f64 = h.iter().enumerate().map(|(k, c)| c * r.powi(k as i32)).sum();
                (r, r.powi(2) * (1.0 + p))
            })
            .collect();
        let fit = fit_radial_expansion(&samples, 3, 6).unwrap();
        for k in 2..=6 {
            assert!((fit.coefficients[k] - h[k]).abs() < 1e-9, "k={k}");
        }
        assert!(fit.residual_max < 1e-13);
    }

    #[test]
    fn fit_sphere_density() {
        // Theta = sin^2 r in dimension 3: sin^2 r / r^2 = 1 - r^2/3 + 2 r^4/45 - ...
        let radii = geometric_radii(0.02, 0.5, 40);
        let samples: Vec<_> = radii.iter().map(|&r| (r, r.sin().powi(2))).collect();
        let fit = fit_radial_expansion(&samples, 3, 12).unwrap();
        assert!((fit.coefficients[2] + 1.0 / 3.0).abs() < 1e-6);
        assert!((fit.coefficients[4] - 2.0 / 45.0).abs() < 1e-5);
    }

    #[test]
    fn fit_rejects_too_few_radii() {
        let samples = vec![(0.1, 0.01), (0.2, 0.04)];
        assert!(fit_radial_expansion(&samples, 3, 4).is_err());
    }

    fn arb_series(order: usize) -> impl Strategy<Value = RationalSeries> {
        prop::collection::vec((-20i64..20, 1i64..9), order + 1).prop_map(move |v| {
            TruncatedSeries::new(v.into_iter().map(|(n, d)| rational(n, d)).collect(), order)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ring_axioms_exact(a in arb_series(6), b in arb_series(6), c in arb_series(6)) {
            let ab_c = a.mul(&b).unwrap().mul(&c).unwrap();
            let a_bc = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
            let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn mul_then_reciprocal_round_trip(a in arb_series(7), b in arb_series(7)) {
            prop_assume!(!b.coeff(0).is_zero());
            let back = a.mul(&b).unwrap().mul(&b.reciprocal().unwrap()).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn derive_inverts_integrate(a in arb_series(6)) {
            prop_assert_eq!(a.integrate().derive(), a.clone());
            let mut z = a.clone();
            z.coeffs[0] = rational(0, 1);
            prop_assert_eq!(z.derive().integrate(), z);
        }
    }
}
