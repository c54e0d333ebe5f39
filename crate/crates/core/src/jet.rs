//! Multivariate truncated Taylor jets.
//!
//! A [`Jet`] holds the Taylor coefficients of a function of `n` variables
//! about a base point, truncated at total degree `order`. Monomials are laid
//! out in graded order, so the coefficients of an order-`k` truncation are a
//! prefix of the order-`k+1` layout; differentiation and truncation are then
//! slice operations on the same [`JetSpace`].
//!
//! Chart metrics evaluate their components on jets seeded with the coordinate
//! variables, which yields every partial derivative up to the requested order
//! in one forward pass.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

/// Highest total derivative order supported by the jet engine.
pub const MAX_DERIVATIVE_ORDER: usize = 12;

/// Monomial layout and product/derivative tables for `nvars` variables up to `order`.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    degree_start: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    products: Vec<[u32; 3]>,
    product_end: Vec<usize>,
    derivatives: Vec<Vec<(u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("monomials", &self.exponents.len())
            .finish()
    }
}

fn monomials_of_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let n = cur.len();
        if pos == n - 1 {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut cur = vec![0u8; nvars];
    rec(0, degree, &mut cur, out);
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        assert!(nvars >= 1, "jet space needs at least one variable");
        let mut exponents = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(exponents.len());
            monomials_of_degree(nvars, d, &mut exponents);
        }
        degree_start.push(exponents.len());
        let lookup: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |idx: usize| -> usize { exponents[idx].iter().map(|&e| e as usize).sum() };

        let mut products = Vec::new();
        let mut sum = vec![0u8; nvars];
        for i in 0..exponents.len() {
            let di = degree(i);
            for j in 0..degree_start[order + 1 - di] {
                for v in 0..nvars {
                    sum[v] = exponents[i][v] + exponents[j][v];
                }
                let k = lookup[&sum];
                products.push([i as u32, j as u32, k as u32]);
            }
        }
        products.sort_by_key(|p| (degree(p[2] as usize), p[2]));
        let mut product_end = vec![0usize; order + 1];
        for (d, end) in product_end.iter_mut().enumerate() {
            *end = products.partition_point(|p| degree(p[2] as usize) <= d);
        }

        let mut derivatives = Vec::with_capacity(nvars);
        let lower = if order == 0 { 0 } else { degree_start[order] };
        for v in 0..nvars {
            let mut table = Vec::with_capacity(lower);
            for exps in exponents.iter().take(lower) {
                let mut src = exps.clone();
                src[v] += 1;
                table.push((lookup[&src] as u32, f64::from(src[v])));
            }
            derivatives.push(table);
        }

        JetSpace {
            nvars,
            order,
            exponents,
            degree_start,
            lookup,
            products,
            product_end,
            derivatives,
        }
    }

    /// Shared space for `nvars` variables and maximal order `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of monomials of total degree at most `order`.
    pub fn size(&self, order: usize) -> usize {
        self.degree_start[order + 1]
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exponents[idx]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.lookup.get(exps).copied()
    }

    /// `out += a * b`, truncated at `order`.
    pub fn mul_acc(&self, order: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        for p in &self.products[..self.product_end[order]] {
            out[p[2] as usize] += a[p[0] as usize] * b[p[1] as usize];
        }
    }

    /// `out += scale * a * b`, truncated at `order`.
    pub fn mul_acc_scaled(&self, order: usize, scale: f64, a: &[f64], b: &[f64], out: &mut [f64]) {
        for p in &self.products[..self.product_end[order]] {
            out[p[2] as usize] += scale * a[p[0] as usize] * b[p[1] as usize];
        }
    }

    /// Writes the partial derivative along `var` of an order-`order` jet into `out`
    /// (an order-`order - 1` slice).
    pub fn derive_into(&self, var: usize, order: usize, a: &[f64], out: &mut [f64]) {
        let n = self.size(order - 1);
        for (idx, &(src, factor)) in self.derivatives[var][..n].iter().enumerate() {
            out[idx] = factor * a[src as usize];
        }
    }
}

/// Truncated multivariate Taylor polynomial.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn binomial_real(p: f64, n: usize) -> f64 {
    let mut b = 1.0;
    for k in 0..n {
        b *= (p - k as f64) / (k as f64 + 1.0);
    }
    b
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: usize, value: f64) -> Jet {
        assert!(order <= space.order, "jet order above its space");
        let mut coeffs = vec![0.0; space.size(order)];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded about `value`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, value: f64, var: usize) -> Jet {
        let mut j = Jet::constant(space, order, value);
        if order >= 1 {
            j.coeffs[1 + var] = 1.0;
        }
        j
    }

    /// Seeds one jet per coordinate of `point`.
    pub fn seed(point: &[f64], order: usize) -> Vec<Jet> {
        let space = JetSpace::get(point.len(), order);
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(&space, order, x, i))
            .collect()
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, order: usize, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.size(order));
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    /// A constant in the same space and order as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        Jet::constant(&self.space, self.order, value)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Taylor coefficient of the monomial with the given exponents (zero if beyond the order).
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        match self.space.index_of(exps) {
            Some(i) if i < self.coeffs.len() => self.coeffs[i],
            _ => 0.0,
        }
    }

    /// Mixed partial derivative; `vars` lists the differentiation variables with repetition.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        let mut exps = vec![0u8; self.space.nvars];
        for &v in vars {
            exps[v] += 1;
        }
        let factorial: f64 = exps
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product();
        self.coeff(&exps) * factorial
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.space.nvars)
            .map(|v| if self.order >= 1 { self.coeffs[1 + v] } else { 0.0 })
            .collect()
    }

    /// Partial derivative along `var`; the result has one order less.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let mut out = vec![0.0; self.space.size(self.order - 1)];
        self.space.derive_into(var, self.order, &self.coeffs, &mut out);
        Jet {
            space: self.space.clone(),
            order: self.order - 1,
            coeffs: out,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.size(order)].to_vec(),
        }
    }

    /// Lowest total degree carrying a nonzero coefficient (`None` for the zero jet).
    pub fn valuation(&self) -> Option<usize> {
        let first = self.coeffs.iter().position(|&c| c != 0.0)?;
        Some(self.space.exponents[first].iter().map(|&e| e as usize).sum())
    }

    /// Applies a univariate function given by its Taylor coefficients at `self.value()`:
    /// `f(c0 + d) = sum_n taylor[n] d^n`.
    pub fn compose_taylor(&self, taylor: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = self.order.min(taylor.len().saturating_sub(1));
        let mut acc = self.lift(taylor[top]);
        for n in (0..top).rev() {
            acc = &acc * &delta;
            acc.coeffs[0] += taylor[n];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut t = Vec::with_capacity(self.order + 1);
        let mut f = 1.0;
        for n in 0..=self.order {
            if n > 0 {
                f *= n as f64;
            }
            t.push(e / f);
        }
        self.compose_taylor(&t)
    }

    pub fn ln(&self) -> Jet {
        let c = self.value();
        let mut t = vec![c.ln()];
        for n in 1..=self.order {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (n as f64 * c.powi(n as i32)));
        }
        self.compose_taylor(&t)
    }

    fn sin_cos_taylor(&self, phase: usize) -> Jet {
        let c = self.value();
        let cycle = [c.sin(), c.cos(), -c.sin(), -c.cos()];
        let mut t = Vec::with_capacity(self.order + 1);
        let mut f = 1.0;
        for n in 0..=self.order {
            if n > 0 {
                f *= n as f64;
            }
            t.push(cycle[(n + phase) % 4] / f);
        }
        self.compose_taylor(&t)
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos_taylor(0)
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos_taylor(1)
    }

    /// Real power. At a zero base value the result is exact when `p` is a
    /// non-negative integer, or when `p * valuation` exceeds the order (then
    /// the truncated power vanishes); otherwise the coefficients are NaN.
    pub fn powf(&self, p: f64) -> Jet {
        let c = self.value();
        if c == 0.0 {
            if p == 0.0 {
                return self.lift(1.0);
            }
            if p.fract() == 0.0 && p > 0.0 {
                return self.powi(p as u32);
            }
            return match self.valuation() {
                None => self.lift(0.0),
                Some(v) if p > 0.0 && p * v as f64 > self.order as f64 => self.lift(0.0),
                _ => self.lift(f64::NAN).map(|_| f64::NAN),
            };
        }
        let t: Vec<f64> = (0..=self.order)
            .map(|n| binomial_real(p, n) * c.powf(p - n as f64))
            .collect();
        self.compose_taylor(&t)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = self.lift(1.0);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    /// Evaluates the power series `sum_n coeffs[n] x^n` (expanded about zero) on this jet.
    pub fn power_series(&self, coeffs: &[f64]) -> Jet {
        let c0 = self.value();
        let top = self.order.min(coeffs.len().saturating_sub(1));
        // Taylor shift to the base value: repeated synthetic division.
        let mut work = coeffs.to_vec();
        let n = work.len();
        let mut shifted = Vec::with_capacity(top + 1);
        for k in 0..=top {
            let mut acc = 0.0;
            for i in (k..n).rev() {
                acc = acc * c0 + work[i];
                work[i] = acc;
            }
            shifted.push(work[k]);
        }
        self.compose_taylor(&shifted)
    }

    pub fn map(mut self, f: impl Fn(f64) -> f64) -> Jet {
        for c in &mut self.coeffs {
            *c = f(*c);
        }
        self
    }

    fn combine(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.space.nvars, other.space.nvars, "jets over different variable sets");
        let order = self.order.min(other.order);
        let (space, n) = if self.space.order >= other.space.order {
            (self.space.clone(), self.space.size(order))
        } else {
            (other.space.clone(), other.space.size(order))
        };
        let coeffs = (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect();
        Jet { space, order, coeffs }
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        assert_eq!(self.space.nvars, rhs.space.nvars, "jets over different variable sets");
        let order = self.order.min(rhs.order);
        let space = if self.space.order >= rhs.space.order {
            self.space.clone()
        } else {
            rhs.space.clone()
        };
        let mut coeffs = vec![0.0; space.size(order)];
        space.mul_acc(order, &self.coeffs, &rhs.coeffs, &mut coeffs);
        Jet { space, order, coeffs }
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.clone() - rhs
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map(|c| c * rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.clone() * rhs
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.map(|c| c / rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|c| -c)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.clone().map(|c| -c)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = &*self - rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for c in &mut self.coeffs {
            *c *= rhs;
        }
    }
}

/// Sum of squares of the coordinates, `|x|^2`.
pub fn norm_squared(x: &[Jet]) -> Jet {
    let mut acc = x[0].lift(0.0);
    for xi in x {
        acc += &(xi * xi);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn layout_is_graded_prefix() {
        let s = JetSpace::get(3, 4);
        assert_eq!(s.size(0), 1);
        assert_eq!(s.size(1), 4);
        assert_eq!(s.size(2), 10);
        assert_eq!(s.size(4), 35);
        assert_eq!(s.exponents(1), &[1, 0, 0]);
    }

    #[test]
    fn product_matches_polynomial_expansion() {
        // (1 + x + 2y)(3 - y) = 3 + 3x + 5y - xy - 2y^2
        let s = JetSpace::get(2, 3);
        let x = Jet::variable(&s, 3, 0.0, 0);
        let y = Jet::variable(&s, 3, 0.0, 1);
        let a = &(&x + &(&y * 2.0)) + 1.0;
        let b = 3.0 - y.clone();
        let p = &a * &b;
        assert_eq!(p.coeff(&[0, 0]), 3.0);
        assert_eq!(p.coeff(&[1, 0]), 3.0);
        assert_eq!(p.coeff(&[0, 1]), 5.0);
        assert_eq!(p.coeff(&[1, 1]), -1.0);
        assert_eq!(p.coeff(&[0, 2]), -2.0);
    }

    #[test]
    fn elementary_functions_match_closed_form_derivatives() {
        let x = &Jet::seed(&[0.7], 6)[0];
        let s = x.sin();
        let e = x.exp();
        let l = x.ln();
        let p = x.powf(1.5);
        for k in 0..=6usize {
            let vars = vec![0usize; k];
            let ds = [0.7f64.sin(), 0.7f64.cos(), -0.7f64.sin(), -0.7f64.cos()][k % 4];
            assert!(close(s.partial(&vars), ds, 1e-12));
            assert!(close(e.partial(&vars), 0.7f64.exp(), 1e-12));
            let dp = (0..k).fold(1.0, |acc, i| acc * (1.5 - i as f64)) * 0.7f64.powf(1.5 - k as f64);
            assert!(close(p.partial(&vars), dp, 1e-11));
            if k >= 1 {
                let dl = (1..k).fold(1.0, |acc, i| acc * -(i as f64)) / 0.7f64.powi(k as i32);
                assert!(close(l.partial(&vars), dl, 1e-11));
            }
        }
    }

    #[test]
    fn power_series_agrees_with_direct_evaluation() {
        // exp via its series about 0, evaluated at 1.3
        let coeffs: Vec<f64> = (0..40)
            .scan(1.0, |f, n| {
                if n > 0 {
                    *f *= n as f64;
                }
                Some(1.0 / *f)
            })
            .collect();
        let x = &Jet::seed(&[1.3, 0.2], 5)[0];
        let a = x.power_series(&coeffs);
        let b = x.exp();
        for (ca, cb) in a.coeffs().iter().zip(b.coeffs()) {
            assert!(close(*ca, *cb, 1e-13));
        }
    }

    #[test]
    fn mixed_partials_and_derivative() {
        // f = x^2 y^3 at (1.5, -0.5)
        let v = Jet::seed(&[1.5, -0.5], 5);
        let f = v[0].powi(2) * v[1].powi(3);
        assert!(close(f.partial(&[0, 1]), 2.0 * 1.5 * 3.0 * 0.25, 1e-14));
        assert!(close(f.partial(&[0, 0, 1, 1, 1]), 12.0, 1e-14));
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 4);
        assert!(close(fx.partial(&[1, 1]), 2.0 * 1.5 * 6.0 * -0.5, 1e-14));
    }

    #[test]
    fn fractional_power_at_zero_uses_valuation() {
        let v = Jet::seed(&[0.0, 0.0], 2);
        let t = norm_squared(&v);
        let p = t.powf(2.5);
        assert!(p.coeffs().iter().all(|&c| c == 0.0));
        let q = t.powf(0.5);
        assert!(q.coeffs().iter().any(|c| c.is_nan()));
    }
}
